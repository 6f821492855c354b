"""Local inversion of the conserved-combination constraint for the controls.

Given a frame alpha and target values f, solve alpha . p(u, uo, phi) = f for
u by damped Newton from a seed on the known branch. The solve is only local:
a rank-deficient Jacobian or an iterate escaping the trust ball are surfaced
as errors for the caller to handle (skip, truncate, or re-anchor).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import SingularJacobian
from .numerics import NewtonResult, newton_solve
from .probes import ProbeSet

Array = np.ndarray


@dataclass(frozen=True)
class InversionSettings:
    """Newton controls; ``trust_radius=None`` means 10x the control amplitude."""

    tol: float = 1e-10
    max_iter: int = 25
    trust_radius: Optional[float] = None
    singularity_threshold: float = 1e-10

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.singularity_threshold <= 0:
            raise ValueError("inversion settings must be positive")
        if self.trust_radius is not None and self.trust_radius <= 0:
            raise ValueError("trust_radius must be positive when given")

    def resolved(self, control_amplitude: float) -> "InversionSettings":
        if self.trust_radius is not None:
            return self
        return replace(self, trust_radius=10.0 * max(1.0, float(control_amplitude)))


@dataclass(frozen=True)
class InversionResult:
    u: Array
    iterations: int
    min_singular_value: float


def control_jacobian(
    alpha: Array, pset: ProbeSet, u: Array, uo: Array, phi: Array
) -> Array:
    """d x d Jacobian of u -> alpha . p(u, uo, phi)."""
    return np.asarray(alpha, dtype=float) @ pset.jacobian_u(u, uo, phi)


def invert_controls(
    alpha: Array,
    f_target: Array,
    pset: ProbeSet,
    uo: Array,
    phi_eval: Array,
    seed: Array,
    settings: InversionSettings,
) -> InversionResult:
    """Solve alpha . p(u, uo, phi_eval) = f_target for u near ``seed``."""
    alpha = np.asarray(alpha, dtype=float)
    f_target = np.asarray(f_target, dtype=float)
    uo = np.asarray(uo, dtype=float)
    phi_eval = np.asarray(phi_eval, dtype=float)
    trust = settings.trust_radius
    if trust is None:
        trust = settings.resolved(float(np.linalg.norm(np.asarray(seed, float), np.inf))).trust_radius

    def residual(u: Array) -> Array:
        return alpha @ pset.eval_vector(u, uo, phi_eval) - f_target

    def jacobian(u: Array) -> Array:
        return alpha @ pset.jacobian_u(u, uo, phi_eval)

    if not pset.depends_on_u():
        # The Jacobian is identically zero; fail fast with the cleaner message.
        raise SingularJacobian("probe set does not depend on u")

    result: NewtonResult = newton_solve(
        residual,
        jacobian,
        seed,
        tol=settings.tol,
        max_iter=settings.max_iter,
        trust_radius=trust,
        singularity_threshold=settings.singularity_threshold,
    )
    return InversionResult(
        u=result.u,
        iterations=result.iterations,
        min_singular_value=result.min_singular_value,
    )
