"""Batch experiment runner and file persistence.

One JSON config drives simulate -> (select) -> predict -> horizon sweeps and
writes a history CSV, per-combination prediction JSON files and a summary CSV.
Outputs are reproducible byte-for-byte from the config: no clocks, fixed float
formatting, temp-then-rename writes.
"""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import dynamics
from .conservation import estimate_frames, export_frames_csv
from .dynamics import GameDefinition, History, ReactionSpec, scenario
from .errors import (
    AnchorTooEarly,
    BadParams,
    ConfigError,
    DuelcastError,
    FormatError,
)
from .inversion import InversionSettings
from .numerics import TimeGrid
from .predictor import ControlPlan, HorizonSpec, Prediction, SurrogateSpec, estimate_horizon, predict
from .probes import (
    ProbeSet,
    canonical_probe_set,
    generate_library,
    load_probe_set,
    random_probe_set,
)
from .selection import (
    BacktestReport,
    CandidateSet,
    Pool,
    default_projective_base,
    evolve_pool,
    projective_search,
    select_best,
)

Array = np.ndarray


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_history(history: History, path) -> None:
    """CSV with header t, phi_*, u_*, uo_* at full double precision."""
    m, d = history.m, history.d
    header = (
        ["t"]
        + [f"phi_{i}" for i in range(m)]
        + [f"u_{i}" for i in range(d)]
        + [f"uo_{i}" for i in range(d)]
    )
    times = history.grid.times()
    lines = [",".join(header)]
    for k in range(history.grid.count):
        row = (
            [times[k]]
            + list(history.phi[k])
            + list(history.u_realized[k])
            + list(history.u_intended[k])
        )
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(str(path), "\n".join(lines) + "\n")


def load_history(path) -> History:
    """Inverse of save_history; bit-exact round trip, line-numbered errors."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise FormatError("empty history file", line=1)
    header = [c.strip() for c in lines[0].split(",")]
    if not header or header[0] != "t":
        raise FormatError("header must start with column 't'", line=1)
    m = sum(1 for c in header if c.startswith("phi_"))
    d = sum(1 for c in header if c.startswith("u_"))
    d_o = sum(1 for c in header if c.startswith("uo_"))
    if m < 1 or d < 1 or d != d_o or len(header) != 1 + m + d + d_o:
        raise FormatError(
            f"header must be t, phi_0..phi_{{m-1}}, u_0..u_{{d-1}}, uo_0..uo_{{d-1}}; got {len(header)} columns",
            line=1,
        )
    expected = 1 + m + 2 * d
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != expected:
            raise FormatError(f"expected {expected} columns, got {len(cells)}", line=lineno)
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise FormatError(f"bad number: {exc}", line=lineno) from None
    if len(rows) < 2:
        raise FormatError("history needs at least 2 samples", line=len(lines))
    data = np.asarray(rows)
    t = data[:, 0]
    h = t[1] - t[0]
    if h <= 0 or np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, abs(h)):
        raise FormatError("time column is not a uniform grid", line=2)
    grid = TimeGrid(float(t[0]), float(h), len(rows))
    return History(
        grid,
        phi=data[:, 1 : 1 + m],
        u_intended=data[:, 1 + m + d : 1 + m + 2 * d],
        u_realized=data[:, 1 + m : 1 + m + d],
    )


# --- intended-control schedules -------------------------------------------------


def build_schedule(cfg: dict, d: int, path: str) -> Callable[[float], Array]:
    kind = cfg.get("kind")
    if kind == "constant":
        value = cfg.get("value")
        if not isinstance(value, list) or len(value) != d:
            raise ConfigError(f"{path}.value", f"need a list of {d} numbers")
        return dynamics.constant_schedule([float(v) for v in value])
    if kind == "sinusoid":
        base = cfg.get("base", [0.0] * d)
        amp = cfg.get("amplitude", [0.1] * d)
        freq = cfg.get("frequency", [1.0] * d)
        phase = cfg.get("phase", [0.0] * d)
        for name, vec in (("base", base), ("amplitude", amp), ("frequency", freq), ("phase", phase)):
            if not isinstance(vec, list) or len(vec) != d:
                raise ConfigError(f"{path}.{name}", f"need a list of {d} numbers")
        base_a, amp_a = np.asarray(base, float), np.asarray(amp, float)
        freq_a, phase_a = np.asarray(freq, float), np.asarray(phase, float)

        def sin_schedule(t: float) -> Array:
            return base_a + amp_a * np.sin(freq_a * t + phase_a)

        return sin_schedule
    if kind == "random-steps":
        seed = cfg.get("seed", 0)
        hold = float(cfg.get("hold", 0.25))
        low = float(cfg.get("low", -0.5))
        high = float(cfg.get("high", 0.5))
        if hold <= 0:
            raise ConfigError(f"{path}.hold", "must be positive")
        rng = np.random.default_rng(int(seed))
        # Precompute plenty of segments; deterministic in the seed.
        levels = rng.uniform(low, high, size=(4096, d))

        def step_schedule(t: float) -> Array:
            return levels[min(int(t / hold), len(levels) - 1)]

        return step_schedule
    raise ConfigError(f"{path}.kind", f"unknown schedule kind {kind!r}")


# --- experiment configuration ----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_name: str
    scenario_params: dict
    grid: TimeGrid
    intended: dict
    probes: dict
    dt_grid: tuple[float, ...]
    blend_grid: tuple[float, ...]
    plan_kind: str  # "hold-last" | "observed"
    inversion: InversionSettings
    anchors: tuple[float, ...]
    predict_T: float
    selection: dict
    horizon: Optional[dict]
    export_frames: bool
    output_dir: str

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        def need(container: dict, key: str, path: str):
            if key not in container:
                raise ConfigError(f"{path}.{key}" if path else key, "missing")
            return container[key]

        scen = need(raw, "scenario", "")
        name = need(scen, "name", "scenario")
        params = scen.get("params", {})

        grid_cfg = need(raw, "grid", "")
        try:
            grid = TimeGrid(
                float(grid_cfg.get("t_start", 0.0)),
                float(need(grid_cfg, "h", "grid")),
                int(need(grid_cfg, "count", "grid")),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError("grid", str(exc)) from None

        intended = need(raw, "intended", "")
        probes_cfg = raw.get("probes", {"kind": "canonical"})
        if probes_cfg.get("kind") not in ("canonical", "file", "library", "projective"):
            raise ConfigError("probes.kind", f"unknown kind {probes_cfg.get('kind')!r}")
        if probes_cfg.get("kind") == "file" and "path" not in probes_cfg:
            raise ConfigError("probes.path", "missing")

        surrogate = need(raw, "surrogate", "")
        dt_raw = need(surrogate, "dt", "surrogate")
        dt_grid = tuple(float(x) for x in (dt_raw if isinstance(dt_raw, list) else [dt_raw]))
        if not dt_grid:
            raise ConfigError("surrogate.dt", "must not be empty")
        if any(x <= 0 for x in dt_grid):
            raise ConfigError("surrogate.dt", "delays must be positive")
        blend_raw = surrogate.get("blend", 1.0)
        blend_grid = tuple(
            float(x) for x in (blend_raw if isinstance(blend_raw, list) else [blend_raw])
        )
        if not blend_grid:
            raise ConfigError("surrogate.blend", "must not be empty")
        if any(not 0.0 <= x <= 1.0 for x in blend_grid):
            raise ConfigError("surrogate.blend", "blend values must lie in [0, 1]")
        plan_kind = surrogate.get("plan", "hold-last")
        if plan_kind not in ("hold-last", "observed"):
            raise ConfigError("surrogate.plan", f"unknown plan {plan_kind!r}")
        inv_cfg = surrogate.get("inversion", {})
        try:
            inv = InversionSettings(
                tol=float(inv_cfg.get("tol", 1e-10)),
                max_iter=int(inv_cfg.get("max_iter", 25)),
                trust_radius=(
                    None
                    if inv_cfg.get("trust_radius") is None
                    else float(inv_cfg["trust_radius"])
                ),
                singularity_threshold=float(inv_cfg.get("singularity_threshold", 1e-10)),
            )
        except ValueError as exc:
            raise ConfigError("surrogate.inversion", str(exc)) from None

        anchors_raw = need(raw, "anchors", "")
        if isinstance(anchors_raw, dict):
            start = float(need(anchors_raw, "start", "anchors"))
            stop = float(need(anchors_raw, "stop", "anchors"))
            stride = float(need(anchors_raw, "stride", "anchors"))
            if stride <= 0 or stop < start:
                raise ConfigError("anchors", "need stride > 0 and stop >= start")
            count = int(round((stop - start) / stride)) + 1
            anchors = tuple(start + i * stride for i in range(count))
        else:
            anchors = tuple(float(x) for x in anchors_raw)
        if not anchors:
            raise ConfigError("anchors", "must not be empty")

        predict_T = float(raw.get("predict_T", 1.0))
        if predict_T < 0:
            raise ConfigError("predict_T", "must be non-negative")

        selection_cfg = raw.get("selection", {"mode": "none"})
        if selection_cfg.get("mode") not in ("none", "pool", "projective"):
            raise ConfigError("selection.mode", f"unknown mode {selection_cfg.get('mode')!r}")

        horizon_cfg = raw.get("horizon")
        if horizon_cfg is not None:
            for key in ("dt1", "dt2", "theta", "t_max"):
                if key not in horizon_cfg:
                    raise ConfigError(f"horizon.{key}", "missing")

        output_dir = need(raw, "output_dir", "")
        return cls(
            scenario_name=name,
            scenario_params=params,
            grid=grid,
            intended=intended,
            probes=probes_cfg,
            dt_grid=dt_grid,
            blend_grid=blend_grid,
            plan_kind=plan_kind,
            inversion=inv,
            anchors=anchors,
            predict_T=predict_T,
            selection=selection_cfg,
            horizon=horizon_cfg,
            export_frames=bool(raw.get("export_frames", False)),
            output_dir=str(output_dir),
        )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def _observed_plan(history: History) -> ControlPlan:
    grid = history.grid

    def observed(t: float) -> Array:
        return history.u_intended[grid.index_of(t)]

    return ControlPlan.schedule(observed)


def _resolve_probe_source(config: ExperimentConfig, game: GameDefinition):
    """Returns (mode, payload): fixed probe set, pool, or projective base."""
    kind = config.probes.get("kind", "canonical")
    d, m = game.d, game.state_dim
    mode = config.selection.get("mode", "none")
    if mode == "pool":
        lib = generate_library(d, m)
        size = int(config.selection.get("size", 4))
        seed = int(config.selection.get("seed", 0))
        pool = Pool.seeded(lib, size, seed)
        if kind == "canonical":
            # Keep the canonical set in the pool as a sensible starting member.
            pool.candidates[0] = CandidateSet(
                pool.candidates[0].label, canonical_probe_set(d, m)
            )
        return "pool", (pool, lib)
    if mode == "projective":
        return "projective", default_projective_base(d)
    if kind == "canonical":
        return "fixed", canonical_probe_set(d, m)
    if kind == "file":
        return "fixed", load_probe_set(config.probes["path"])
    if kind == "library":
        lib = generate_library(d, m)
        return "fixed", random_probe_set(lib, int(config.probes.get("seed", 0)))
    if kind == "projective":
        return "projective", default_projective_base(d)
    raise ConfigError("probes.kind", f"unhandled kind {kind!r}")


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Simulate, sweep anchors x delays x blends, write reports; returns summary rows.

    Row-level failures (truncation, singular anchors) are recorded in the
    summary's status column and never abort the sweep.
    """
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    game, reactions = scenario(config.scenario_name, config.scenario_params)
    schedule = build_schedule(config.intended, game.d, "intended")
    history = dynamics.simulate(
        game,
        reactions,
        schedule,
        config.grid,
        np.asarray(dynamics.DEFAULT_PHI0[config.scenario_name], dtype=float),
    )
    save_history(history, os.path.join(out, "history.csv"))

    mode, payload = _resolve_probe_source(config, game)
    if config.export_frames and mode == "fixed":
        export_frames_csv(
            estimate_frames(history, payload), os.path.join(out, "frames.csv")
        )

    plan = (
        _observed_plan(history)
        if config.plan_kind == "observed"
        else ControlPlan.hold_last()
    )

    summary: list[dict] = []
    pool_trace: list[tuple] = []
    projective_trace: list[tuple] = []
    prev_label = None
    pool = payload[0] if mode == "pool" else None
    lib = payload[1] if mode == "pool" else None
    evolve_seed = int(config.selection.get("seed", 0))
    selection_round = 0

    for ai, anchor in enumerate(config.anchors):
        for di, dt in enumerate(config.dt_grid):
            for bi, blend in enumerate(config.blend_grid):
                row = {
                    "anchor": anchor,
                    "dt": dt,
                    "blend": blend,
                    "mu": "-",
                    "rms_error": math.nan,
                    "horizon_t1": math.nan,
                    "status": "complete",
                }
                try:
                    template = SurrogateSpec(
                        probe_set=canonical_probe_set(game.d, game.state_dim),
                        dt=dt,
                        blend=blend,
                        plan=plan,
                        inversion=config.inversion,
                    )
                    if mode == "fixed":
                        pset = payload
                        row["mu"] = "-"
                    elif mode == "pool":
                        report = select_best(
                            game, history, pool.candidates, anchor, template
                        )
                        pset = pool.candidates[report.best_index].pset
                        row["mu"] = str(report.best_label)
                        worst = int(np.argmax(np.asarray(report.scores)))
                        for ci, (cand, score) in enumerate(
                            zip(pool.candidates, report.scores)
                        ):
                            pool_trace.append(
                                (
                                    selection_round,
                                    str(cand.label),
                                    score,
                                    "replaced" if ci == worst else "",
                                )
                            )
                        pool = evolve_pool(
                            pool, report, lib, seed=evolve_seed + selection_round
                        )
                        selection_round += 1
                    else:
                        label, report = projective_search(
                            game,
                            history,
                            payload,
                            anchor,
                            template,
                            prev=prev_label,
                            budget=int(config.selection.get("budget", 32)),
                            seed=int(config.selection.get("seed", 0)) + selection_round,
                        )
                        prev_label = label
                        pset = hyperplane_from_label(payload, label, game)
                        row["mu"] = str(label)
                        projective_trace.append((anchor, *label.c, report.best_score))
                        selection_round += 1
                    spec = replace(template, probe_set=pset)
                    prediction = predict(game, history, anchor, spec, config.predict_T)
                    _write_prediction(
                        prediction, os.path.join(out, f"pred_a{ai}_d{di}_b{bi}.json")
                    )
                    if prediction.status.kind == "truncated":
                        row["status"] = f"truncated:{prediction.status.reason}"
                    row["rms_error"] = _overlap_rms(prediction, history)
                    if config.horizon is not None:
                        hspec = HorizonSpec(
                            dt1=float(config.horizon["dt1"]),
                            dt2=float(config.horizon["dt2"]),
                            theta=float(config.horizon["theta"]),
                            t_max=float(config.horizon["t_max"]),
                        )
                        row["horizon_t1"] = estimate_horizon(
                            game, history, anchor, spec, hspec
                        )
                except DuelcastError as exc:
                    row["status"] = f"error:{type(exc).__name__}"
                summary.append(row)

    _write_summary(summary, os.path.join(out, "summary.csv"))
    if pool_trace:
        _write_pool_trace(pool_trace, os.path.join(out, "pool_trace.csv"))
    if projective_trace:
        _write_projective_trace(
            projective_trace, os.path.join(out, "projective_trace.csv")
        )
    return summary


def hyperplane_from_label(base, label, game: GameDefinition) -> ProbeSet:
    from .selection import hyperplane_probe_set

    return hyperplane_probe_set(base, np.asarray(label.c), game.d, game.state_dim)


def _overlap_rms(prediction: Prediction, history: History) -> float:
    """Normalized RMS against observed rows where the prediction overlaps history."""
    from .selection import normalized_rms

    if prediction.steps_completed == 0 or prediction.grid is None:
        return math.nan
    grid = history.grid
    k_anchor = grid.index_of(prediction.anchor)
    overlap = min(prediction.steps_completed, grid.count - 1 - k_anchor)
    if overlap <= 0:
        return math.nan
    return normalized_rms(
        prediction.phi_hat[:overlap],
        history.phi[k_anchor + 1 : k_anchor + 1 + overlap],
    )


def _write_prediction(prediction: Prediction, path: str) -> None:
    _atomic_write(path, json.dumps(prediction.to_json_dict(), sort_keys=True) + "\n")


def _write_summary(rows: list[dict], path: str) -> None:
    lines = ["anchor,dt,blend,mu,rms_error,horizon_t1,status"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _fmt(row["anchor"]),
                    _fmt(row["dt"]),
                    _fmt(row["blend"]),
                    str(row["mu"]),
                    _fmt(row["rms_error"]),
                    _fmt(row["horizon_t1"]),
                    row["status"],
                ]
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_pool_trace(rows: list[tuple], path: str) -> None:
    lines = ["round,label,score,replaced"]
    for rnd, label, score, replaced in rows:
        lines.append(f"{rnd},{label},{_fmt(score)},{replaced}")
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_projective_trace(rows: list[tuple], path: str) -> None:
    if not rows:
        return
    dim = len(rows[0]) - 2
    header = "t0," + ",".join(f"c_{i}" for i in range(dim)) + ",score"
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")
