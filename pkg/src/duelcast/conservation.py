"""Frames of locally conserved probe combinations along an observed history.

At each sample time tau the rows of alpha(tau) span the orthogonal complement
of the sampled probe-derivative vector, so f = alpha . p is instantaneously
stationary there. Consecutive frames are continuity-aligned to keep alpha(tau)
a Lipschitz-looking path rather than an arbitrary basis per point; the
realized steepness is reported, not enforced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import History
from .errors import BadParams, NonFiniteValue
from .numerics import TimeGrid, derivative_series, orthonormal_complement
from .probes import ProbeSet

Array = np.ndarray


@dataclass(frozen=True)
class ConservedFrame:
    """alpha(tau), the conserved values f(tau) = alpha . p(tau), and diagnostics."""

    tau: float
    alpha: Array
    f: Array
    pdot_norm: float


@dataclass(frozen=True)
class FrameSeries:
    """One ConservedFrame per history grid point, stored columnwise."""

    grid: TimeGrid
    alpha: Array  # (count, d, K)
    f: Array  # (count, d)
    pdot_norm: Array  # (count,)
    lipschitz_diagnostic: float

    def frame(self, k: int) -> ConservedFrame:
        return ConservedFrame(
            tau=self.grid.time_at(k),
            alpha=self.alpha[k],
            f=self.f[k],
            pdot_norm=float(self.pdot_norm[k]),
        )

    def frame_at_time(self, tau: float) -> ConservedFrame:
        return self.frame(self.grid.index_of(tau))

    @property
    def count(self) -> int:
        return self.grid.count


def sample_probes(history: History, pset: ProbeSet) -> Array:
    """p_j evaluated along the history; rows follow the grid."""
    n = history.grid.count
    out = np.empty((n, pset.size))
    for k in range(n):
        out[k] = pset.eval_vector(
            history.u_realized[k], history.u_intended[k], history.phi[k]
        )
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("probe sampling produced non-finite values")
    return out


def probe_derivatives(history: History, pset: ProbeSet) -> Array:
    """Sampled derivative estimates of each probe along the history.

    Central differences in the interior, one-sided at both endpoints.
    """
    if history.grid.count < 2:
        raise BadParams("need at least 2 samples to differentiate")
    return derivative_series(sample_probes(history, pset), history.grid.h)


def estimate_frames(history: History, pset: ProbeSet) -> FrameSeries:
    """The continuity-aligned frame series along the whole history."""
    if history.grid.count < 3:
        raise BadParams("need at least 3 samples to estimate frames")
    p = sample_probes(history, pset)
    pdot = derivative_series(p, history.grid.h)
    n, k_dim = p.shape
    d = k_dim - 1
    alpha = np.empty((n, d, k_dim))
    f = np.empty((n, d))
    norms = np.empty(n)
    prev = None
    for k in range(n):
        prev = orthonormal_complement(pdot[k], prev)
        alpha[k] = prev
        f[k] = prev @ p[k]
        norms[k] = np.linalg.norm(pdot[k])
    h = history.grid.h
    steps = np.linalg.norm(alpha[1:] - alpha[:-1], axis=(1, 2)) / h
    return FrameSeries(
        grid=history.grid,
        alpha=alpha,
        f=f,
        pdot_norm=norms,
        lipschitz_diagnostic=float(steps.max()) if steps.size else 0.0,
    )


def conserved_values(frame: ConservedFrame, p: Array) -> Array:
    """f = alpha . p for an externally supplied probe vector."""
    return frame.alpha @ np.asarray(p, dtype=float)


def export_frames_csv(series: FrameSeries, path) -> None:
    """Debug/plot export: tau, flattened alpha, f, |pdot| per row."""
    n, d, k_dim = series.alpha.shape
    header = (
        ["tau"]
        + [f"alpha_{i}{j}" for i in range(d) for j in range(k_dim)]
        + [f"f_{i}" for i in range(d)]
        + ["pdot_norm"]
    )
    times = series.grid.times()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            row = (
                [times[k]]
                + list(series.alpha[k].ravel())
                + list(series.f[k])
                + [series.pdot_norm[k]]
            )
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
