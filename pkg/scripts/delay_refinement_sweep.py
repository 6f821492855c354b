"""Delay-refinement experiment: prediction error vs the surrogate delay.

Simulates the linear duel, then predicts from t0 = 1.0 with the base blend
(state read at t - dt) across a grid of delays. The summary CSV shows RMS
error strictly shrinking as the delay refines.

Usage: python scripts/delay_refinement_sweep.py [output_dir]
"""

import sys

from duelcast.harness import ExperimentConfig, run_experiment


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "out/delay_refinement"
    config = ExperimentConfig.from_dict(
        {
            "scenario": {"name": "linear-duel", "params": {"k": [0.5, -0.25]}},
            "grid": {"t_start": 0.0, "h": 0.01, "count": 301},
            "intended": {"kind": "constant", "value": [0.2, -0.1]},
            "probes": {"kind": "canonical"},
            "surrogate": {"dt": [0.4, 0.2, 0.1, 0.05], "blend": 1.0, "plan": "hold-last"},
            "anchors": [1.0],
            "predict_T": 1.0,
            "horizon": {"dt1": 0.1, "dt2": 0.2, "theta": 1e-3, "t_max": 1.0},
            "output_dir": out,
        }
    )
    rows = run_experiment(config)
    print(f"{'dt':>6}  {'rms_error':>12}  {'horizon_t1':>10}  status")
    for row in rows:
        print(
            f"{row['dt']:>6.2f}  {row['rms_error']:>12.6f}  "
            f"{row['horizon_t1']:>10.3f}  {row['status']}"
        )
    print(f"\nwrote {out}/summary.csv")


if __name__ == "__main__":
    main()
