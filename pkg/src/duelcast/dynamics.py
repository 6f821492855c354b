"""Two-player games with hidden behavioral reactions, and their simulator.

A game couples a known state equation phi' = Phi(phi, u) with per-player
reaction laws u_i = B_i(uo_i, phi, D) that bend the intended controls uo into
the realized controls u. The simulator owns the reaction laws; the prediction
side of the package only ever sees the recorded History.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import BadParams, NonFiniteState, UnknownScenario
from .numerics import TimeGrid, rk4_step

Array = np.ndarray


@dataclass(frozen=True)
class GameDefinition:
    """State equation phi' = Phi(phi, u) with fixed dimensions.

    ``control_dims`` holds (d1, d2), the per-player control widths; the full
    control vector stacks player 1 before player 2.
    """

    name: str
    state_dim: int
    control_dims: tuple[int, int]
    rhs: Callable[[Array, Array], Array]

    def __post_init__(self):
        if self.state_dim < 1:
            raise BadParams("state_dim must be positive")
        if len(self.control_dims) != 2 or min(self.control_dims) < 1:
            raise BadParams("control_dims must be two positive integers")

    @property
    def d(self) -> int:
        return self.control_dims[0] + self.control_dims[1]


@dataclass(frozen=True)
class ReactionSpec:
    """Hidden per-player feedback laws u_i = B_i(uo_i, phi, derivatives).

    Each reaction receives its player's intended control slice, the state, and
    a (max_derivative_order x m) buffer of backward-difference derivative
    estimates built from already recorded samples.
    """

    reactions: tuple[Callable[[Array, Array, Array], Array], ...]
    control_dims: tuple[int, int]
    max_derivative_order: int = 0

    def __post_init__(self):
        if len(self.reactions) != 2:
            raise BadParams("exactly two players are supported")
        if not 0 <= self.max_derivative_order <= 2:
            raise BadParams("max_derivative_order must be 0, 1 or 2")


@dataclass(frozen=True)
class History:
    """Uniformly sampled record of a played game.

    All rows are step-start samples: ``u_realized[k]`` is the control the
    players actually exerted from t_k on, ``u_intended[k]`` what they meant.
    """

    grid: TimeGrid
    phi: Array
    u_intended: Array
    u_realized: Array

    def __post_init__(self):
        n = self.grid.count
        for label, arr in (
            ("phi", self.phi),
            ("u_intended", self.u_intended),
            ("u_realized", self.u_realized),
        ):
            if arr.shape[0] != n:
                raise BadParams(f"{label} has {arr.shape[0]} rows, grid has {n}")
            if not np.all(np.isfinite(arr)):
                raise BadParams(f"{label} contains non-finite entries")
        if self.u_intended.shape != self.u_realized.shape:
            raise BadParams("intended/realized control shapes differ")

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def d(self) -> int:
        return self.u_realized.shape[1]

    def prefix(self, count: int) -> "History":
        """History restricted to its first ``count`` samples."""
        grid = TimeGrid(self.grid.t_start, self.grid.h, count)
        return History(
            grid,
            self.phi[:count],
            self.u_intended[:count],
            self.u_realized[:count],
        )

    def suffix(self, count: int) -> "History":
        """History restricted to its last ``count`` samples."""
        count = min(count, self.grid.count)
        start = self.grid.count - count
        grid = TimeGrid(self.grid.time_at(start), self.grid.h, count)
        return History(
            grid,
            self.phi[start:],
            self.u_intended[start:],
            self.u_realized[start:],
        )


def eval_rhs(game: GameDefinition, phi: Array, u: Array) -> Array:
    """Phi(phi, u) with a finiteness guard."""
    out = np.asarray(game.rhs(np.asarray(phi, float), np.asarray(u, float)), dtype=float)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("state equation produced a non-finite value")
    return out


def apply_reactions(
    spec: ReactionSpec, u_intended: Array, phi: Array, derivative_buffer: Array
) -> Array:
    """Realized control u = (B_1(...), B_2(...)) for one instant."""
    u_intended = np.asarray(u_intended, float)
    phi = np.asarray(phi, float)
    d1 = spec.control_dims[0]
    parts = [
        np.atleast_1d(np.asarray(spec.reactions[0](u_intended[:d1], phi, derivative_buffer), float)),
        np.atleast_1d(np.asarray(spec.reactions[1](u_intended[d1:], phi, derivative_buffer), float)),
    ]
    out = np.concatenate(parts)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("reaction law produced a non-finite value")
    return out


def _derivative_estimates(phi_rows: list[Array], h: float, order: int, m: int) -> Array:
    """Backward finite differences of the recorded states, zero-padded early on."""
    buf = np.zeros((order, m))
    n = len(phi_rows)
    if order >= 1 and n >= 2:
        buf[0] = (phi_rows[-1] - phi_rows[-2]) / h
    if order >= 2 and n >= 3:
        buf[1] = (phi_rows[-1] - 2.0 * phi_rows[-2] + phi_rows[-3]) / (h * h)
    return buf


def _advance(
    game: GameDefinition,
    spec: ReactionSpec,
    schedule: Callable[[float], Array],
    grid: TimeGrid,
    phi_rows: list[Array],
    uo_rows: list[Array],
    u_rows: list[Array],
    start_index: int,
) -> None:
    """March the simulation forward in place from ``start_index``.

    At each step start the intended control and the derivative estimates are
    frozen, the reaction stays live in the state across the integrator stages,
    and the recorded realized control is the step-start reaction value.
    """
    h = grid.h
    order = spec.max_derivative_order
    m = game.state_dim
    for k in range(start_index, grid.count):
        t_k = grid.time_at(k)
        uo_k = np.atleast_1d(np.asarray(schedule(t_k), dtype=float))
        if uo_k.shape[0] != game.d or not np.all(np.isfinite(uo_k)):
            raise BadParams(f"intended-control schedule returned a bad vector at t={t_k}")
        deriv = _derivative_estimates(phi_rows, h, order, m)
        try:
            u_k = apply_reactions(spec, uo_k, phi_rows[-1], deriv)
        except NonFiniteState as exc:
            raise NonFiniteState(str(exc), step=k) from None
        uo_rows.append(uo_k)
        u_rows.append(u_k)
        if k == grid.count - 1:
            break

        def stage_rhs(_t: float, phi_stage: Array) -> Array:
            u_stage = apply_reactions(spec, uo_k, phi_stage, deriv)
            return eval_rhs(game, phi_stage, u_stage)

        try:
            phi_next = rk4_step(stage_rhs, t_k, phi_rows[-1], h)
        except NonFiniteState as exc:
            raise NonFiniteState(str(exc), step=k) from None
        phi_rows.append(phi_next)


def simulate(
    game: GameDefinition,
    spec: ReactionSpec,
    u_intended_schedule: Callable[[float], Array],
    grid: TimeGrid,
    phi0: Array,
) -> History:
    """Ground-truth trajectory of the coupled game on the given grid."""
    if grid.count < 2:
        raise BadParams("simulation needs at least 2 grid points")
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    if phi0.shape[0] != game.state_dim:
        raise BadParams(f"phi0 has {phi0.shape[0]} components, game expects {game.state_dim}")
    phi_rows: list[Array] = [phi0.copy()]
    uo_rows: list[Array] = []
    u_rows: list[Array] = []
    _advance(game, spec, u_intended_schedule, grid, phi_rows, uo_rows, u_rows, 0)
    return History(grid, np.vstack(phi_rows), np.vstack(uo_rows), np.vstack(u_rows))


def extend_history(
    game: GameDefinition,
    spec: ReactionSpec,
    history: History,
    u_intended_schedule: Callable[[float], Array],
    steps: int,
) -> History:
    """Continue a recorded history by ``steps`` further grid steps.

    Bitwise-consistent with having simulated the longer grid in one go.
    """
    if steps < 0:
        raise BadParams("steps must be non-negative")
    if steps == 0:
        return history
    old = history.grid
    grid = TimeGrid(old.t_start, old.h, old.count + steps)
    phi_rows = [row for row in history.phi]
    uo_rows = [row for row in history.u_intended]
    u_rows = [row for row in history.u_realized]

    # Recompute the final recorded controls' step: the stored last sample was a
    # step-start record with no integration after it, so marching restarts there.
    del uo_rows[-1], u_rows[-1]
    _advance(game, spec, u_intended_schedule, grid, phi_rows, uo_rows, u_rows, old.count - 1)
    return History(grid, np.vstack(phi_rows), np.vstack(uo_rows), np.vstack(u_rows))


def constant_schedule(values) -> Callable[[float], Array]:
    vec = np.atleast_1d(np.asarray(values, dtype=float))

    def schedule(_t: float) -> Array:
        return vec

    return schedule


def _pair(params: Mapping, key: str, default: tuple[float, float]) -> tuple[float, float]:
    raw = params.get(key, default)
    try:
        a, b = (float(raw[0]), float(raw[1]))
    except (TypeError, ValueError, IndexError):
        raise BadParams(f"parameter {key!r} must be a pair of numbers") from None
    if not (np.isfinite(a) and np.isfinite(b)):
        raise BadParams(f"parameter {key!r} must be finite")
    return a, b


def scenario(
    name: str, params: Optional[Mapping] = None
) -> tuple[GameDefinition, ReactionSpec]:
    """Built-in test-bed games.

    linear-duel     m=1, Phi = u1 - u2, reactions u_i = uo_i + k_i * phi.
    cross-coupled   linear-duel plus a c_i * phi' term in each reaction.
    planar-pursuit  m=4 (two planar points), each player steers its point;
                    reactions push toward/away from the opponent through tanh.
    """
    params = dict(params or {})

    if name == "linear-duel":
        k1, k2 = _pair(params, "k", (0.5, -0.25))

        game = GameDefinition(
            name=name,
            state_dim=1,
            control_dims=(1, 1),
            rhs=lambda phi, u: np.array([u[0] - u[1]]),
        )
        spec = ReactionSpec(
            reactions=(
                lambda uo, phi, deriv: uo + k1 * phi[0],
                lambda uo, phi, deriv: uo + k2 * phi[0],
            ),
            control_dims=(1, 1),
            max_derivative_order=0,
        )
        return game, spec

    if name == "cross-coupled":
        k1, k2 = _pair(params, "k", (0.5, -0.25))
        c1, c2 = _pair(params, "c", (0.1, 0.0))

        game = GameDefinition(
            name=name,
            state_dim=1,
            control_dims=(1, 1),
            rhs=lambda phi, u: np.array([u[0] - u[1]]),
        )
        spec = ReactionSpec(
            reactions=(
                lambda uo, phi, deriv: uo + k1 * phi[0] + c1 * deriv[0, 0],
                lambda uo, phi, deriv: uo + k2 * phi[0] + c2 * deriv[0, 0],
            ),
            control_dims=(1, 1),
            max_derivative_order=1,
        )
        return game, spec

    if name == "planar-pursuit":
        s1, s2 = _pair(params, "s", (1.0, 1.0))
        g1, g2 = _pair(params, "g", (1.0, 1.0))

        def rhs(phi, u):
            # phi = (x1, y1, x2, y2); each player's control is its velocity.
            return np.asarray(u, dtype=float).copy()

        game = GameDefinition(
            name=name, state_dim=4, control_dims=(2, 2), rhs=rhs
        )
        spec = ReactionSpec(
            reactions=(
                lambda uo, phi, deriv: uo + s1 * np.tanh(g1 * (phi[2:4] - phi[0:2])),
                lambda uo, phi, deriv: uo + s2 * np.tanh(g2 * (phi[0:2] - phi[2:4])),
            ),
            control_dims=(2, 2),
            max_derivative_order=0,
        )
        return game, spec

    raise UnknownScenario(f"unknown scenario {name!r}")


DEFAULT_INTENDED: dict[str, tuple[float, ...]] = {
    "linear-duel": (0.2, -0.1),
    "cross-coupled": (0.2, -0.1),
    "planar-pursuit": (0.1, 0.0, -0.1, 0.05),
}

DEFAULT_PHI0: dict[str, tuple[float, ...]] = {
    "linear-duel": (1.0,),
    "cross-coupled": (1.0,),
    "planar-pursuit": (0.0, 0.0, 1.0, 0.5),
}
