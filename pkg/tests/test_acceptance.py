"""Acceptance suite: one test per gate criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is stated inline next to its assertion.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from duelcast.conservation import estimate_frames, probe_derivatives
from duelcast.dynamics import (
    DEFAULT_INTENDED,
    DEFAULT_PHI0,
    constant_schedule,
    scenario,
    simulate,
)
from duelcast.harness import ExperimentConfig, run_experiment
from duelcast.inversion import InversionSettings, control_jacobian, invert_controls
from duelcast.numerics import TimeGrid
from duelcast.predictor import HorizonSpec, SurrogateSpec, estimate_horizon, predict
from duelcast.probes import ProbeExpression, ProbeSet, canonical_probe_set, generate_library
from duelcast.selection import (
    CandidateLabel,
    CandidateSet,
    Pool,
    evolve_pool,
    select_best,
)

P0 = canonical_probe_set(2, 1)
DECOY = ProbeSet([ProbeExpression.parse(s) for s in ("uo0", "uo1", "phi0")], 2, 1)

ALL_SCENARIOS = ("linear-duel", "cross-coupled", "planar-pursuit")


def run_scenario(name, h=0.01, count=201):
    game, spec = scenario(name)
    hist = simulate(
        game,
        spec,
        constant_schedule(DEFAULT_INTENDED[name]),
        TimeGrid(0.0, h, count),
        np.asarray(DEFAULT_PHI0[name], float),
    )
    return game, hist


@pytest.fixture(scope="module")
def duel_long():
    # linear-duel over [0, 2] so a t0=1 prediction of length 1 has ground truth
    return run_scenario("linear-duel", h=0.01, count=201)


def report(name):
    print(f"ACCEPTANCE {name}: PASS")


def test_exact_recovery(duel_long):
    """predict(a=0, dt=0.1, T=1) reproduces the simulator to 1e-9 in under 1 s."""
    game, hist = duel_long
    spec = SurrogateSpec(probe_set=P0, dt=0.1, blend=0.0)
    start = time.perf_counter()
    prediction = predict(game, hist, 1.0, spec, 1.0)
    elapsed = time.perf_counter() - start
    assert prediction.status.kind == "complete"
    k0 = hist.grid.index_of(1.0)
    observed = hist.phi[k0 + 1 : k0 + 101]
    max_err = float(np.max(np.abs(prediction.phi_hat - observed)))
    assert max_err <= 1e-9, f"max abs error {max_err}"
    assert elapsed < 1.0, f"runtime {elapsed:.3f}s"
    report(f"exact-recovery (err={max_err:.2e}, {elapsed * 1e3:.0f} ms)")


def test_closed_form():
    """Simulator vs phi(t) = 1.4 e^{0.75 t} - 0.4: 5e-3 at h=0.01, 5e-5 at h=0.001."""
    for h, count, tol in ((0.01, 101, 5e-3), (0.001, 1001, 5e-5)):
        _, hist = run_scenario("linear-duel", h=h, count=count)
        t = hist.grid.times()
        closed = 1.4 * np.exp(0.75 * t) - 0.4
        err = float(np.max(np.abs(hist.phi[:, 0] - closed)))
        assert err <= tol, f"h={h}: {err} > {tol}"
    report("closed-form")


def test_dt_refinement(duel_long):
    """RMS error over (t0, t0+1] strictly decreases across dt = 0.4, 0.2, 0.1, 0.05."""
    game, hist = duel_long
    k0 = hist.grid.index_of(1.0)
    observed = hist.phi[k0 + 1 : k0 + 101]
    errors = []
    for dt in (0.4, 0.2, 0.1, 0.05):
        spec = SurrogateSpec(probe_set=P0, dt=dt, blend=1.0)
        prediction = predict(game, hist, 1.0, spec, 1.0)
        assert prediction.status.kind == "complete"
        errors.append(float(np.sqrt(np.mean((prediction.phi_hat - observed) ** 2))))
    assert errors[0] > errors[1] > errors[2] > errors[3], errors
    report(f"dt-refinement ({', '.join(f'{e:.4f}' for e in errors)})")


def test_frame_suite():
    """Frame orthogonality/orthonormality on all scenarios; row space on linear-duel."""
    for name in ALL_SCENARIOS:
        game, hist = run_scenario(name)
        pset = canonical_probe_set(game.d, game.state_dim)
        frames = estimate_frames(hist, pset)
        pdot = probe_derivatives(hist, pset)
        for k in range(hist.grid.count):
            alpha = frames.alpha[k]
            assert (
                np.max(np.abs(alpha @ pdot[k]))
                <= 1e-10 * max(1.0, np.linalg.norm(pdot[k]))
            ), f"{name} frame {k}"
            assert np.max(np.abs(alpha @ alpha.T - np.eye(game.d))) <= 1e-12

    _, hist = run_scenario("linear-duel")
    frames = estimate_frames(hist, P0)
    for v in (np.array([1.0, 0.0, -0.5]), np.array([0.0, 1.0, 0.25])):
        for k in range(hist.grid.count):
            alpha = frames.alpha[k]
            residual = np.linalg.norm(v - alpha.T @ (alpha @ v)) / np.linalg.norm(v)
            assert residual <= 1e-8
    report("frame-suite")


def test_inversion_round_trip():
    """Observed controls recovered to 1e-9 at every nondegenerate interior point."""
    worst_overall = 0.0
    for name in ALL_SCENARIOS:
        game, hist = run_scenario(name)
        pset = canonical_probe_set(game.d, game.state_dim)
        frames = estimate_frames(hist, pset)
        settings = InversionSettings().resolved(float(np.max(np.abs(hist.u_realized))))
        for k in range(1, hist.grid.count - 1):
            jac = control_jacobian(
                frames.alpha[k], pset, hist.u_realized[k], hist.u_intended[k], hist.phi[k]
            )
            sv = np.linalg.svd(jac, compute_uv=False)
            if sv[-1] <= 1e-10 * sv[0]:
                continue
            result = invert_controls(
                frames.alpha[k],
                frames.f[k],
                pset,
                hist.u_intended[k],
                hist.phi[k],
                seed=hist.u_realized[k],
                settings=settings,
            )
            err = float(np.max(np.abs(result.u - hist.u_realized[k])))
            worst_overall = max(worst_overall, err)
            assert err <= 1e-9, f"{name} point {k}: {err}"
    report(f"inversion-round-trip (worst={worst_overall:.2e})")


def test_selection():
    """P0 beats the intended-control decoy in >= 99/100 seeded trials; pool
    evolution never removes the best member across 20 rounds."""
    from duelcast.harness import build_schedule

    game, reactions = scenario("linear-duel")
    template = SurrogateSpec(probe_set=P0, dt=0.1, blend=1.0)
    wins = 0
    for seed in range(100):
        sched = build_schedule(
            {"kind": "random-steps", "seed": seed, "hold": 0.2, "low": -0.4, "high": 0.4},
            2,
            "intended",
        )
        hist = simulate(game, reactions, sched, TimeGrid(0.0, 0.01, 161), np.array([1.0]))
        cands = [
            CandidateSet(CandidateLabel.finite(0), P0),
            CandidateSet(CandidateLabel.finite(1), DECOY),
        ]
        wins += select_best(game, hist, cands, 1.5, template).best_index == 0
    assert wins >= 99, f"P0 won only {wins}/100"

    _, hist = run_scenario("linear-duel", count=301)
    lib = generate_library(2, 1)
    pool = Pool.seeded(lib, 4, seed=11)
    pool.candidates[0] = CandidateSet(pool.candidates[0].label, P0)
    for rnd in range(20):
        rep = select_best(game, hist, pool.candidates, 1.0, template)
        best_label = str(rep.best_label)
        pool = evolve_pool(pool, rep, lib, seed=100 + rnd)
        survivors = {str(c.label) for c in pool.candidates}
        assert best_label in survivors, f"round {rnd} removed the best member"
    report(f"selection (wins={wins}/100, 20 evolution rounds)")


def test_horizon():
    """Degenerate settings reach t0+T_max; t1 monotone over a 5-point theta grid."""
    game, hist = run_scenario("linear-duel", count=301)
    spec = SurrogateSpec(probe_set=P0, dt=0.1, blend=1.0)
    equal_delays = estimate_horizon(
        game, hist, 1.0, spec, HorizonSpec(dt1=0.1, dt2=0.1, theta=1e-3, t_max=2.0)
    )
    assert equal_delays == pytest.approx(3.0)
    huge_theta = estimate_horizon(
        game, hist, 1.0, spec, HorizonSpec(dt1=0.1, dt2=0.2, theta=1e6, t_max=2.0)
    )
    assert huge_theta == pytest.approx(3.0)
    values = [
        estimate_horizon(game, hist, 1.0, spec, HorizonSpec(0.1, 0.2, theta, 2.0))
        for theta in (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    ]
    assert all(b >= a for a, b in zip(values, values[1:])), values
    report(f"horizon (t1 grid: {values})")


def test_sweep_determinism(tmp_path):
    """Rerunning the same sweep config produces byte-identical outputs."""
    raw = {
        "scenario": {"name": "linear-duel", "params": {"k": [0.5, -0.25]}},
        "grid": {"t_start": 0.0, "h": 0.01, "count": 301},
        "intended": {"kind": "constant", "value": [0.2, -0.1]},
        "probes": {"kind": "canonical"},
        "surrogate": {"dt": [0.4, 0.2, 0.1, 0.05], "blend": 1.0, "plan": "hold-last"},
        "anchors": [1.0],
        "predict_T": 1.0,
        "horizon": {"dt1": 0.1, "dt2": 0.2, "theta": 1e-3, "t_max": 1.0},
    }
    outputs = []
    for run in ("first", "second"):
        config = ExperimentConfig.from_dict({**raw, "output_dir": str(tmp_path / run)})
        run_experiment(config)
        outputs.append(
            {
                name: (tmp_path / run / name).read_bytes()
                for name in sorted(os.listdir(tmp_path / run))
            }
        )
    assert outputs[0].keys() == outputs[1].keys()
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], f"{name} differs between runs"
    report(f"sweep-determinism ({len(outputs[0])} files byte-identical)")
