"""Small dense numerical kernels shared across the package.

Everything here works on vectors with a handful of components (controls and
probes in the single digits), so the implementations favor determinism and
clarity over large-scale tricks. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import LeftLocalBranch, NoConvergence, NonFiniteState, SingularJacobian

Array = np.ndarray

# Relative slack when snapping a time to a grid index.
_GRID_SNAP = 1e-6
# Row norm below which a projected previous-frame row is considered degenerate.
_DEGENERATE_ROW = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: t_start + k*h for k = 0..count-1."""

    t_start: float
    h: float
    count: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"grid needs a positive integer count, got {self.count}")

    def times(self) -> Array:
        return self.t_start + self.h * np.arange(self.count)

    def time_at(self, k: int) -> float:
        return self.t_start + self.h * k

    def index_of(self, t: float) -> int:
        """Exact grid index of ``t``; raises ValueError for off-grid times."""
        x = (t - self.t_start) / self.h
        k = int(round(x))
        if k < 0 or k >= self.count or abs(x - k) > _GRID_SNAP:
            raise ValueError(f"t={t!r} is not a point of the grid")
        return k

    @property
    def t_end(self) -> float:
        return self.time_at(self.count - 1)


def _householder_complement(v: Array) -> Array:
    """Orthonormal basis of the complement of ``v`` from a Householder reflector.

    Deterministic: the reflector maps v/|v| onto -sign(v[0])*e0, and rows
    1..K-1 of the reflector are returned. Requires ``v`` nonzero.
    """
    w = v / np.linalg.norm(v)
    k = w.shape[0]
    n = w.copy()
    n[0] += 1.0 if w[0] >= 0 else -1.0
    n /= np.linalg.norm(n)
    house = np.eye(k) - 2.0 * np.outer(n, n)
    return house[1:, :]


def orthonormal_complement(v: Array, prev: Optional[Array] = None) -> Array:
    """(K-1) orthonormal rows spanning the orthogonal complement of ``v``.

    With ``prev`` (the previous frame's rows), each previous row is projected
    onto the complement of ``v`` and re-orthonormalized, which keeps the basis
    continuous along a slowly rotating ``v``. Degenerate projections fall back
    to the deterministic Householder basis. A zero ``v`` constrains nothing:
    ``prev`` is returned unchanged when given, else the Householder basis of
    the complement of the last unit vector.
    """
    v = np.asarray(v, dtype=float)
    k = v.shape[0]
    if k < 2:
        raise ValueError("need at least 2 components to form a complement")
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        if prev is not None:
            return np.array(prev, dtype=float)
        unit = np.zeros(k)
        unit[-1] = 1.0
        return _householder_complement(unit)
    if prev is None:
        return _householder_complement(v)

    w = v / norm_v
    prev = np.asarray(prev, dtype=float)
    rows = prev - np.outer(prev @ w, w)
    out = np.empty_like(rows)
    for i in range(rows.shape[0]):
        q = rows[i].copy()
        # Two modified Gram-Schmidt passes keep orthogonality near roundoff.
        for _ in range(2):
            q -= (q @ w) * w
            for j in range(i):
                q -= (q @ out[j]) * out[j]
        norm_q = float(np.linalg.norm(q))
        if norm_q < _DEGENERATE_ROW:
            return _householder_complement(v)
        out[i] = q / norm_q
    return out


class NewtonResult(NamedTuple):
    u: Array
    iterations: int
    min_singular_value: float


def newton_solve(
    residual: Callable[[Array], Array],
    jacobian: Callable[[Array], Array],
    seed: Array,
    tol: float,
    max_iter: int,
    trust_radius: float,
    singularity_threshold: float = 1e-10,
) -> NewtonResult:
    """Damped Newton iteration for square systems of a few unknowns.

    Full steps are halved until the 2-norm of the residual decreases.
    Raises SingularJacobian when the Jacobian's smallest singular value
    drops below ``singularity_threshold`` times its largest, LeftLocalBranch
    when an accepted iterate leaves the trust ball around the seed, and
    NoConvergence when ``max_iter`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if trust_radius <= 0:
        raise ValueError("trust_radius must be positive")

    u = np.atleast_1d(np.asarray(seed, dtype=float)).copy()
    seed_arr = u.copy()
    r = np.atleast_1d(np.asarray(residual(u), dtype=float))
    r_norm2 = float(np.linalg.norm(r))
    min_sv = np.inf

    for iterations in range(max_iter + 1):
        jac = np.atleast_2d(np.asarray(jacobian(u), dtype=float))
        s = np.linalg.svd(jac, compute_uv=False)
        s_max, s_min = float(s[0]), float(s[-1])
        min_sv = min(min_sv, s_min)
        if s_max == 0.0 or s_min <= singularity_threshold * s_max:
            raise SingularJacobian(
                f"min/max singular value {s_min:.3e}/{s_max:.3e} below threshold"
            )
        if float(np.linalg.norm(r, ord=np.inf)) <= tol:
            return NewtonResult(u, iterations, min_sv)
        if iterations == max_iter:
            break

        delta = np.linalg.solve(jac, -r)
        lam = 1.0
        for _ in range(60):
            cand = u + lam * delta
            r_cand = np.atleast_1d(np.asarray(residual(cand), dtype=float))
            cand_norm2 = float(np.linalg.norm(r_cand))
            if cand_norm2 < r_norm2:
                break
            lam *= 0.5
        else:
            raise NoConvergence("step damping failed to reduce the residual")
        u, r, r_norm2 = cand, r_cand, cand_norm2
        if float(np.linalg.norm(u - seed_arr)) > trust_radius:
            raise LeftLocalBranch(
                f"iterate moved {np.linalg.norm(u - seed_arr):.3e} from the seed "
                f"(trust radius {trust_radius:.3e})"
            )

    raise NoConvergence(f"no convergence after {max_iter} iterations")


def rk4_step(
    rhs: Callable[[float, Array], Array], t: float, phi: Array, h: float
) -> Array:
    """One classical 4th-order Runge-Kutta step from (t, phi) with step h."""
    if h <= 0:
        raise ValueError("step must be positive")
    phi = np.asarray(phi, dtype=float)
    k1 = np.asarray(rhs(t, phi), dtype=float)
    k2 = np.asarray(rhs(t + 0.5 * h, phi + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(rhs(t + 0.5 * h, phi + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(rhs(t + h, phi + h * k3), dtype=float)
    out = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state after step at t={t}")
    return out


def central_difference(samples, h: float, k: int) -> float:
    """Derivative estimate at sample ``k`` of a uniformly sampled sequence.

    Central second-order in the interior, one-sided first-order at both ends.
    """
    s = np.asarray(samples, dtype=float)
    n = s.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    if k == 0:
        return float((s[1] - s[0]) / h)
    if k == n - 1:
        return float((s[n - 1] - s[n - 2]) / h)
    return float((s[k + 1] - s[k - 1]) / (2.0 * h))


def derivative_series(samples: Array, h: float) -> Array:
    """central_difference applied at every index, vectorized along axis 0."""
    s = np.asarray(samples, dtype=float)
    if s.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    out = np.empty_like(s)
    out[0] = (s[1] - s[0]) / h
    out[-1] = (s[-1] - s[-2]) / h
    if s.shape[0] > 2:
        out[1:-1] = (s[2:] - s[:-2]) / (2.0 * h)
    return out
