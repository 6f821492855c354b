"""Candidate probe-set scoring, projective hyperplane search, pool evolution.

A candidate is scored by re-running the predictor over the already-observed
window (t0 - dt, t0] with the recorded intended controls and comparing against
the recorded states; the best candidate is the argmin. Candidates live either
in a finite pool (worst member replaced each round) or on the projective
space of hyperplanes of a small function space, searched by seeded sampling.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import GameDefinition, History
from .errors import AllCandidatesFailed, AnchorTooEarly, BadParams, ExhaustedDraws
from .predictor import ControlPlan, SurrogateSpec, predict
from .probes import ProbeExpression, ProbeLibrary, ProbeSet, random_probe_set

Array = np.ndarray


@dataclass(frozen=True)
class CandidateLabel:
    """Either a finite pool id or a sign-canonical unit covector on hyperplanes."""

    kind: str  # "finite" | "projective"
    fid: Optional[int] = None
    c: Optional[tuple[float, ...]] = None

    @classmethod
    def finite(cls, fid: int) -> "CandidateLabel":
        return cls(kind="finite", fid=int(fid))

    @classmethod
    def projective(cls, c) -> "CandidateLabel":
        return cls(kind="projective", c=tuple(float(x) for x in canonical_covector(c)))

    def __str__(self):
        if self.kind == "finite":
            return f"finite:{self.fid}"
        return "proj:" + ";".join(f"{x:.17g}" for x in self.c)


@dataclass(frozen=True)
class CandidateSet:
    label: CandidateLabel
    pset: ProbeSet


@dataclass
class Pool:
    """Ordered ensemble of candidates with per-member score history."""

    candidates: list[CandidateSet]
    score_history: list[list[float]]
    next_finite_id: int

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise BadParams("a pool needs at least 2 candidates")
        labels = [str(c.label) for c in self.candidates]
        if len(set(labels)) != len(labels):
            raise BadParams("pool labels must be unique")
        if len(self.score_history) != len(self.candidates):
            raise BadParams("score history must cover the pool")

    @classmethod
    def seeded(cls, lib: ProbeLibrary, size: int, seed: int) -> "Pool":
        """Pool of ``size`` distinct seeded library draws, labeled 0..size-1."""
        if size < 2:
            raise BadParams("pool size must be at least 2")
        rng = random.Random(seed)
        candidates: list[CandidateSet] = []
        seen: set[ProbeSet] = set()
        attempts = 0
        while len(candidates) < size:
            attempts += 1
            if attempts > 1000:
                raise ExhaustedDraws("could not fill the pool with distinct sets")
            pset = random_probe_set(lib, seed=rng.randrange(2**31))
            if pset in seen:
                continue
            seen.add(pset)
            candidates.append(CandidateSet(CandidateLabel.finite(len(candidates)), pset))
        return cls(candidates, [[] for _ in range(size)], next_finite_id=size)

    @classmethod
    def of(cls, psets: Sequence[ProbeSet]) -> "Pool":
        candidates = [
            CandidateSet(CandidateLabel.finite(i), p) for i, p in enumerate(psets)
        ]
        return cls(candidates, [[] for _ in psets], next_finite_id=len(candidates))


@dataclass(frozen=True)
class BacktestReport:
    labels: tuple[CandidateLabel, ...]
    scores: tuple[float, ...]
    statuses: tuple[str, ...]
    best_index: int

    @property
    def best_label(self) -> CandidateLabel:
        return self.labels[self.best_index]

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]


def normalized_rms(predicted: Array, observed: Array) -> float:
    """RMS of per-sample euclidean state errors over a shared amplitude scale."""
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if predicted.shape != observed.shape:
        raise BadParams("prediction/observation shapes differ")
    if predicted.shape[0] == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(observed))))
    return float(np.sqrt(np.mean(np.sum((predicted - observed) ** 2, axis=1)))) / scale


def backtest_score(
    game: GameDefinition,
    history: History,
    cand: CandidateSet,
    t0: float,
    spec_template: SurrogateSpec,
) -> float:
    """Score one candidate on the window (t0 - dt, t0]; +inf when truncated.

    The prediction is anchored at t0 - dt and driven by the recorded intended
    controls, so observed state rows are the ground truth for the whole window.
    """
    grid = history.grid
    k0 = grid.index_of(t0)
    delay = spec_template.delay_steps(grid.h)
    anchor_index = k0 - delay
    if anchor_index < delay + 2:
        raise AnchorTooEarly(
            f"backtest anchor index {anchor_index} needs {delay + 2} samples before it"
        )
    anchor_t = grid.time_at(anchor_index)

    def observed_uo(t: float) -> Array:
        return history.u_intended[grid.index_of(t)]

    spec = replace(
        spec_template, probe_set=cand.pset, plan=ControlPlan.schedule(observed_uo)
    )
    prediction = predict(game, history, anchor_t, spec, delay * grid.h)
    if prediction.status.kind != "complete":
        return math.inf
    observed = history.phi[anchor_index + 1 : k0 + 1]
    return normalized_rms(prediction.phi_hat, observed)


def select_best(
    game: GameDefinition,
    history: History,
    candidates: Sequence[CandidateSet],
    t0: float,
    spec_template: SurrogateSpec,
) -> BacktestReport:
    """Backtest every candidate; argmin wins, earliest position breaking ties."""
    if not candidates:
        raise BadParams("need at least one candidate")
    scores: list[float] = []
    statuses: list[str] = []
    for cand in candidates:
        score = backtest_score(game, history, cand, t0, spec_template)
        scores.append(score)
        statuses.append("complete" if math.isfinite(score) else "truncated")
    best = min(range(len(scores)), key=lambda i: (scores[i], i))
    if not math.isfinite(scores[best]):
        raise AllCandidatesFailed("every candidate backtest truncated")
    return BacktestReport(
        labels=tuple(c.label for c in candidates),
        scores=tuple(scores),
        statuses=tuple(statuses),
        best_index=best,
    )


def canonical_covector(c) -> Array:
    """Unit 2-norm representative with the first nonzero component positive."""
    c = np.asarray(c, dtype=float)
    norm = float(np.linalg.norm(c))
    if norm == 0.0:
        raise BadParams("covector must be nonzero")
    c = c / norm
    for x in c:
        if x != 0.0:
            if x < 0.0:
                c = -c
            break
    return c


def hyperplane_probe_set(
    base: Sequence[ProbeExpression], c, d: int, m: int
) -> ProbeSet:
    """Probes spanning the hyperplane {a : c . a = 0} of span(base).

    The coefficient vectors are the deterministic Householder basis of the
    complement of ``c`` (sign-canonical, so c and -c give the same set); probe
    j is the corresponding linear combination of the base functions.
    """
    base = tuple(base)
    c = canonical_covector(c)
    if len(base) != c.shape[0]:
        raise BadParams("covector length must match the base function count")
    n = c.shape[0]
    refl = c.copy()
    refl[0] += 1.0  # canonical sign keeps c[0] >= 0, so no cancellation
    refl /= np.linalg.norm(refl)
    house = np.eye(n) - 2.0 * np.outer(refl, refl)
    coefficients = house[1:, :]

    probes = []
    for row in coefficients:
        expr = None
        for coeff, base_expr in zip(row, base):
            if coeff == 0.0:
                continue
            term = (
                base_expr.tree
                if coeff == 1.0
                else ("mul", ("const", float(coeff)), base_expr.tree)
            )
            expr = term if expr is None else ("add", expr, term)
        if expr is None:
            expr = ("const", 0.0)
        probes.append(ProbeExpression(expr))
    return ProbeSet(probes, d, m)


def default_projective_base(d: int) -> tuple[ProbeExpression, ...]:
    """Degree-one control and first-state monomials plus the constant: d+2 functions."""
    return tuple(
        [ProbeExpression.var("u", i) for i in range(d)]
        + [ProbeExpression.var("phi", 0), ProbeExpression.const(1.0)]
    )


def projective_search(
    game: GameDefinition,
    history: History,
    base: Sequence[ProbeExpression],
    t0: float,
    spec_template: SurrogateSpec,
    prev: Optional[CandidateLabel] = None,
    budget: int = 32,
    seed: int = 0,
) -> tuple[CandidateLabel, BacktestReport]:
    """Sampled argmin over hyperplane covectors: prev, local jitter, fresh draws.

    Exactly ``budget`` backtests run: the previous label first (when given),
    then local Gaussian-tangent perturbations of it (scale 0.1), then uniform
    unit covectors; without a previous label the whole budget goes uniform.
    """
    if budget < 1:
        raise BadParams("budget must be at least 1")
    rng = np.random.default_rng(seed)
    dim = len(base)
    covectors: list[Array] = []
    if prev is not None:
        if prev.kind != "projective":
            raise BadParams("prev label must be projective")
        c_prev = np.asarray(prev.c, dtype=float)
        covectors.append(c_prev)
        n_local = (budget - 1 + 1) // 2
        for _ in range(n_local):
            g = rng.standard_normal(dim)
            g -= (g @ c_prev) * c_prev
            covectors.append(canonical_covector(c_prev + 0.1 * g))
    while len(covectors) < budget:
        covectors.append(canonical_covector(rng.standard_normal(dim)))

    candidates = [
        CandidateSet(
            CandidateLabel.projective(c),
            hyperplane_probe_set(base, c, history.d, history.m),
        )
        for c in covectors
    ]
    report = select_best(game, history, candidates, t0, spec_template)
    return report.best_label, report


def evolve_pool(pool: Pool, report: BacktestReport, lib: ProbeLibrary, seed: int) -> Pool:
    """Replace the worst-scoring member with a fresh seeded candidate.

    The replacement is a new library draw with probability one half, otherwise
    a single-probe mutation of the best member. Survivors keep their history;
    the best member is never the one removed (ties resolve to the earliest
    index on both sides, so an all-tied pool replaces its first member).
    """
    size = len(pool.candidates)
    if len(report.scores) != size:
        raise BadParams("report does not cover the pool")
    scores = np.asarray(report.scores, dtype=float)
    worst = int(np.argmax(scores))
    rng = random.Random(seed)

    best = report.best_index
    if rng.random() < 0.5:
        new_set = random_probe_set(lib, seed=rng.randrange(2**31))
    else:
        new_set = _mutate_one_probe(pool.candidates[best].pset, lib, rng)

    new_candidates = list(pool.candidates)
    new_history = [list(h) for h in pool.score_history]
    for i in range(size):
        if i != worst:
            new_history[i].append(float(report.scores[i]))
    new_candidates[worst] = CandidateSet(
        CandidateLabel.finite(pool.next_finite_id), new_set
    )
    new_history[worst] = []
    return Pool(new_candidates, new_history, pool.next_finite_id + 1)


def _mutate_one_probe(pset: ProbeSet, lib: ProbeLibrary, rng: random.Random) -> ProbeSet:
    for _ in range(1000):
        position = rng.randrange(pset.size)
        entry = lib.entries[rng.randrange(len(lib))]
        probes = list(pset.probes)
        probes[position] = entry
        if len(set(probes)) != len(probes):
            continue
        mutated = ProbeSet(probes, pset.d, pset.m)
        if mutated.depends_on_u():
            return mutated
    raise ExhaustedDraws("mutation could not produce a valid distinct set")
