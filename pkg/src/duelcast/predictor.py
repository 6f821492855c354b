"""Short-term prediction by integrating the delayed surrogate game.

From an anchor t0 the recorded history seeds a buffer of (phi, u*, uo). Each
step forward reads the conserved values at t - dt from the buffer, inverts the
conservation constraint for the surrogate control u*, and advances the known
state equation one Runge-Kutta step; the buffer grows as integration proceeds
(method of steps). Frames are taken from the history where it exists and
frozen at the anchor beyond it.

The horizon estimator runs the same prediction twice with different delays
and reports how far the two stay within a divergence budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional

import numpy as np

from .conservation import FrameSeries, estimate_frames
from .dynamics import GameDefinition, History, eval_rhs
from .errors import (
    AnchorTooEarly,
    BadParams,
    LeftLocalBranch,
    NoConvergence,
    NonFiniteState,
    NonFiniteValue,
    PlanExhausted,
    SingularJacobian,
)
from .inversion import InversionResult, InversionSettings, invert_controls
from .numerics import TimeGrid, rk4_step
from .probes import ProbeSet

Array = np.ndarray

_TRUNCATING = (
    SingularJacobian,
    NoConvergence,
    LeftLocalBranch,
    NonFiniteValue,
    NonFiniteState,
)


@dataclass(frozen=True)
class ControlPlan:
    """Where the intended controls for t > t0 come from.

    hold-last keeps the anchor's observed intended control; schedule evaluates
    a caller-supplied function of time; live consumes one sample per
    prediction step from a caller-supplied iterator (single consumer).
    """

    kind: str
    fn: Optional[Callable[[float], Array]] = None
    stream: Optional[Iterator] = None

    @classmethod
    def hold_last(cls) -> "ControlPlan":
        return cls(kind="hold-last")

    @classmethod
    def schedule(cls, fn: Callable[[float], Array]) -> "ControlPlan":
        return cls(kind="schedule", fn=fn)

    @classmethod
    def live(cls, stream: Iterator) -> "ControlPlan":
        return cls(kind="live", stream=stream)

    def __post_init__(self):
        if self.kind not in ("hold-last", "schedule", "live"):
            raise BadParams(f"unknown plan kind {self.kind!r}")
        if self.kind == "schedule" and self.fn is None:
            raise BadParams("schedule plan needs a function")
        if self.kind == "live" and self.stream is None:
            raise BadParams("live plan needs a sample stream")

    def resolve(self, history: History, anchor_index: int) -> Callable[[float], Array]:
        d = history.d
        if self.kind == "hold-last":
            held = history.u_intended[anchor_index].copy()
            return lambda _t: held
        if self.kind == "schedule":
            fn = self.fn
            return lambda t: np.atleast_1d(np.asarray(fn(t), dtype=float))

        stream = self.stream

        def pull(_t: float) -> Array:
            try:
                return np.atleast_1d(np.asarray(next(stream), dtype=float))
            except StopIteration:
                raise PlanExhausted("live control plan ran out of samples") from None

        return pull


@dataclass(frozen=True)
class SurrogateSpec:
    """Configuration of one surrogate game: probes, delay, state-time blend, plan."""

    probe_set: ProbeSet
    dt: float
    blend: float = 1.0
    plan: ControlPlan = field(default_factory=ControlPlan.hold_last)
    inversion: InversionSettings = field(default_factory=InversionSettings)

    def __post_init__(self):
        if self.dt <= 0:
            raise BadParams("delay dt must be positive")
        if not 0.0 <= self.blend <= 1.0:
            raise BadParams("blend must lie in [0, 1]")

    def delay_steps(self, h: float) -> int:
        x = self.dt / h
        steps = int(round(x))
        if steps < 1 or abs(x - steps) > 1e-6:
            raise BadParams(f"dt={self.dt} is not a positive multiple of the grid step {h}")
        return steps


@dataclass(frozen=True)
class PredictionStatus:
    kind: str  # "complete" | "truncated"
    step: Optional[int] = None  # 1-based failed step when truncated
    reason: Optional[str] = None

    @classmethod
    def complete(cls) -> "PredictionStatus":
        return cls(kind="complete")

    @classmethod
    def truncated(cls, step: int, reason: str) -> "PredictionStatus":
        return cls(kind="truncated", step=step, reason=reason)


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int
    min_singular_value: float


@dataclass(frozen=True)
class Prediction:
    """Predicted trajectory over (t0, t0+T], possibly truncated early."""

    anchor: float
    grid: Optional[TimeGrid]  # None for an empty (T=0) prediction
    phi_hat: Array
    u_star: Array
    diagnostics: tuple[StepDiagnostics, ...]
    status: PredictionStatus

    @property
    def steps_completed(self) -> int:
        return self.phi_hat.shape[0]

    def times(self) -> Array:
        if self.grid is None:
            return np.empty(0)
        return self.grid.times()[: self.steps_completed]

    def to_json_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "grid": None
            if self.grid is None
            else {"t_start": self.grid.t_start, "h": self.grid.h, "count": self.grid.count},
            "m": self.phi_hat.shape[1],
            "d": self.u_star.shape[1],
            "phi_hat": self.phi_hat.tolist(),
            "u_star": self.u_star.tolist(),
            "diagnostics": [
                {"iterations": d.iterations, "min_singular_value": d.min_singular_value}
                for d in self.diagnostics
            ],
            "status": {
                "kind": self.status.kind,
                "step": self.status.step,
                "reason": self.status.reason,
            },
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Prediction":
        grid = payload["grid"]
        return cls(
            anchor=float(payload["anchor"]),
            grid=None
            if grid is None
            else TimeGrid(float(grid["t_start"]), float(grid["h"]), int(grid["count"])),
            phi_hat=np.asarray(payload["phi_hat"], dtype=float).reshape(
                len(payload["phi_hat"]), int(payload["m"])
            ),
            u_star=np.asarray(payload["u_star"], dtype=float).reshape(
                len(payload["u_star"]), int(payload["d"])
            ),
            diagnostics=tuple(
                StepDiagnostics(int(d["iterations"]), float(d["min_singular_value"]))
                for d in payload["diagnostics"]
            ),
            status=PredictionStatus(
                kind=payload["status"]["kind"],
                step=payload["status"]["step"],
                reason=payload["status"]["reason"],
            ),
        )


@dataclass(frozen=True)
class HorizonSpec:
    """Two delays, a relative divergence budget, and a cap for the horizon scan."""

    dt1: float
    dt2: float
    theta: float
    t_max: float

    def __post_init__(self):
        if self.dt1 <= 0 or self.dt2 <= 0:
            raise BadParams("delays must be positive")
        if self.theta <= 0:
            raise BadParams("theta must be positive")
        if self.t_max <= 0:
            raise BadParams("t_max must be positive")


def _steps_of(T: float, h: float) -> int:
    if T < 0:
        raise BadParams("prediction length must be non-negative")
    x = T / h
    n = int(round(x))
    if abs(x - n) > 1e-6:
        raise BadParams(f"T={T} is not a multiple of the grid step {h}")
    return n


def predict(
    game: GameDefinition,
    history: History,
    t0: float,
    spec: SurrogateSpec,
    T: float,
) -> Prediction:
    """Integrate the delayed surrogate from anchor t0 over (t0, t0+T].

    Inversion failures truncate the result rather than raising; see the
    returned status. The anchor must be a history grid point with at least
    delay_steps + 2 samples before it.
    """
    grid = history.grid
    h = grid.h
    k0 = grid.index_of(t0)
    delay = spec.delay_steps(h)
    if k0 < delay + 2:
        raise AnchorTooEarly(
            f"anchor index {k0} needs at least {delay + 2} samples before it"
        )
    n = _steps_of(T, h)
    pset = spec.probe_set
    if pset.d != history.d or pset.m != history.m:
        raise BadParams("probe set dimensions do not match the history")

    out_grid = TimeGrid(t0 + h, h, n) if n > 0 else None
    if n == 0:
        return Prediction(
            anchor=t0,
            grid=None,
            phi_hat=np.empty((0, history.m)),
            u_star=np.empty((0, history.d)),
            diagnostics=(),
            status=PredictionStatus.complete(),
        )

    frames = estimate_frames(history.prefix(k0 + 1), pset)
    amplitude = float(np.max(np.abs(history.u_realized[: k0 + 1])))
    settings = spec.inversion.resolved(amplitude)
    plan_value = spec.plan.resolve(history, k0)

    total = k0 + 1 + n
    phi_buf = np.empty((total, history.m))
    ustar_buf = np.empty((total, history.d))
    uo_buf = np.empty((total, history.d))
    phi_buf[: k0 + 1] = history.phi[: k0 + 1]
    ustar_buf[: k0 + 1] = history.u_realized[: k0 + 1]
    uo_buf[: k0 + 1] = history.u_intended[: k0 + 1]

    t_start = grid.t_start
    a_dt = spec.blend * spec.dt

    def interp_state(t_eval: float, filled: int) -> Array:
        x = (t_eval - t_start) / h
        i = int(math.floor(x))
        if i < 0:
            i, frac = 0, 0.0
        elif i >= filled - 1:
            i, frac = filled - 1, 0.0
        else:
            frac = x - i
        if frac == 0.0:
            return phi_buf[i]
        return (1.0 - frac) * phi_buf[i] + frac * phi_buf[i + 1]

    phi_rows: list[Array] = []
    u_rows: list[Array] = []
    diags: list[StepDiagnostics] = []
    status = PredictionStatus.complete()
    seed = history.u_realized[k0].copy()

    for s in range(1, n + 1):
        idx_t = k0 + s - 1
        t_step = t_start + h * idx_t
        idx_delay = idx_t - delay
        alpha_used = frames.alpha[idx_delay] if idx_delay <= k0 else frames.alpha[k0]
        first: list[InversionResult] = []
        try:
            f_target = alpha_used @ pset.eval_vector(
                ustar_buf[idx_delay], uo_buf[idx_delay], phi_buf[idx_delay]
            )
            uo_t = np.atleast_1d(np.asarray(plan_value(t_step), dtype=float))
            if uo_t.shape[0] != history.d or not np.all(np.isfinite(uo_t)):
                raise BadParams(f"control plan returned a bad vector at t={t_step}")

            def stage_rhs(theta: float, phi_stage: Array) -> Array:
                t_eval = theta - a_dt
                if t_eval >= t_step - 1e-12 * max(1.0, abs(t_step)):
                    phi_eval = phi_stage
                else:
                    phi_eval = interp_state(t_eval, idx_t + 1)
                result = invert_controls(
                    alpha_used, f_target, pset, uo_t, phi_eval, seed_cell[0], settings
                )
                seed_cell[0] = result.u
                if not first:
                    first.append(result)
                return eval_rhs(game, phi_stage, result.u)

            seed_cell = [seed]
            phi_next = rk4_step(stage_rhs, t_step, phi_buf[idx_t], h)
        except _TRUNCATING as exc:
            status = PredictionStatus.truncated(step=s, reason=type(exc).__name__)
            break

        u_step = first[0].u
        seed = u_step
        if s >= 2:
            ustar_buf[idx_t] = u_step
            uo_buf[idx_t] = uo_t
        phi_buf[idx_t + 1] = phi_next
        phi_rows.append(phi_next)
        u_rows.append(u_step)
        diags.append(
            StepDiagnostics(first[0].iterations, first[0].min_singular_value)
        )

    return Prediction(
        anchor=t0,
        grid=out_grid,
        phi_hat=np.vstack(phi_rows) if phi_rows else np.empty((0, history.m)),
        u_star=np.vstack(u_rows) if u_rows else np.empty((0, history.d)),
        diagnostics=tuple(diags),
        status=status,
    )


def estimate_horizon(
    game: GameDefinition,
    history: History,
    t0: float,
    spec_template: SurrogateSpec,
    hspec: HorizonSpec,
) -> float:
    """Largest time up to which two delay variants of the prediction agree.

    Runs predict twice (delays dt1 and dt2, everything else shared) and scans
    for the last grid time with relative sup-norm divergence within theta.
    Truncation of either run caps the horizon at the truncation time; the
    anchor itself is returned when the very first step already diverges.
    """
    p1 = predict(game, history, t0, replace(spec_template, dt=hspec.dt1), hspec.t_max)
    p2 = predict(game, history, t0, replace(spec_template, dt=hspec.dt2), hspec.t_max)
    scale = max(1.0, float(np.max(np.abs(history.phi))))
    h = history.grid.h
    n_cmp = min(p1.steps_completed, p2.steps_completed)
    t1 = t0
    for j in range(n_cmp):
        div = float(np.max(np.abs(p1.phi_hat[j] - p2.phi_hat[j]))) / scale
        if div > hspec.theta:
            return t1
        t1 = t0 + (j + 1) * h
    return t1
