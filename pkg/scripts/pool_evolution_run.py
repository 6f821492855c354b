"""Candidate-pool evolution: backtest a seeded ensemble, replace the worst.

Runs the pool across a run of anchors on a randomly steered linear duel and
prints each round's scores, showing the best score never degrading while the
worst member is churned out.

Usage: python scripts/pool_evolution_run.py [rounds] [pool_size]
"""

import sys

import numpy as np

from duelcast.dynamics import scenario, simulate
from duelcast.harness import build_schedule
from duelcast.numerics import TimeGrid
from duelcast.predictor import SurrogateSpec
from duelcast.probes import canonical_probe_set, generate_library
from duelcast.selection import CandidateSet, Pool, evolve_pool, select_best


def main() -> None:
    rounds = int(sys.argv[1]) if len(sys.argv) > 1 else 12
    size = int(sys.argv[2]) if len(sys.argv) > 2 else 4

    game, reactions = scenario("linear-duel")
    schedule = build_schedule(
        {"kind": "random-steps", "seed": 21, "hold": 0.3, "low": -0.4, "high": 0.4},
        game.d,
        "intended",
    )
    history = simulate(
        game, reactions, schedule, TimeGrid(0.0, 0.01, 301), np.array([1.0])
    )
    lib = generate_library(game.d, game.state_dim)
    pool = Pool.seeded(lib, size, seed=7)
    pool.candidates[0] = CandidateSet(
        pool.candidates[0].label, canonical_probe_set(game.d, game.state_dim)
    )
    template = SurrogateSpec(
        probe_set=pool.candidates[0].pset, dt=0.1, blend=1.0
    )

    for rnd in range(rounds):
        report = select_best(game, history, pool.candidates, 1.5, template)
        scores = "  ".join(
            f"{str(c.label):>10}={s:.3e}" for c, s in zip(pool.candidates, report.scores)
        )
        print(f"round {rnd:2d}  best={report.best_label}  {scores}")
        pool = evolve_pool(pool, report, lib, seed=1000 + rnd)


if __name__ == "__main__":
    main()
