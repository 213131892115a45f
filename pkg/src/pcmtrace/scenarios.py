"""Scenario scripts: each one writes CSVs, optional SVG plots and a manifest.

A run with several seeds puts every seed in its own ``seed_<n>`` directory
and adds a top-level ``summary.csv``. Seeds are independent, so they can be
fanned out over worker processes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import calib
from . import device as dev
from . import trace as tr
from .config import SCENARIOS, ExperimentConfig
from .errors import ConfigError, PcmTraceError
from .network import (IdealTrace, TraceHistory, compare_traces, step_ideal_trace, write_csv)
from .task import run_learning_task

MANIFEST = "manifest.json"


class OutputCollision(PcmTraceError):
    """The output directory already holds results and ``force`` was not given."""


@dataclass
class UnitResult:
    seed: int
    files: list[Path] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)


@dataclass
class RunResult:
    scenario: str
    out_dir: Path
    manifest: dict[str, Any]
    units: list[UnitResult]

    @property
    def summary(self) -> dict[str, Any]:
        return self.manifest["summary"]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _device_rng(cfg: ExperimentConfig, seed: int):
    return np.random.default_rng(seed) if cfg["device"]["stochastic"] else None


def probe_grid(t_end: float, dt: float) -> list[float]:
    n = int(round(t_end / dt))
    return [k * dt for k in range(n + 1)]


def tag_schedule(cfg: ExperimentConfig, rng: np.random.Generator) -> list[float]:
    sc = cfg["scenario"]
    if sc["tag_times"]:
        return sorted(float(t) for t in sc["tag_times"])
    lo, hi = sc["tag_window"]
    n = sc["n_tags"]
    if sc["random_tags"]:
        return sorted(float(t) for t in rng.uniform(lo, hi, size=n))
    if n == 1:
        return [lo]
    return [float(t) for t in np.linspace(lo, hi, n)]


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 and res.stdout.strip() else "unknown"


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _drift_curves(cfg: ExperimentConfig, seed: int, out: Path, plots: bool) -> UnitResult:
    sc = cfg["scenario"]
    rng = _device_rng(cfg, seed)
    base = cfg.device_params()
    times = [k * sc["sample_dt"] for k in range(1, sc["n_points"] + 1)]
    devices = []
    if sc["cards"]:
        for path in sc["cards"]:
            params, prov = calib.read_model_card(path)
            if base.noise is not None:
                params = params.with_(noise=base.noise)
            devices.append((prov.get("device_id", Path(path).stem), dev.PcmDevice.from_params(params, 0.0, rng)))
    else:
        for i, r in enumerate(sc["r_1s"]):
            devices.append((f"d{i}", dev.PcmDevice.with_reading(r, 1.0, base, 0.0, rng)))
    rows, curves = [], {}
    for name, d in devices:
        rs = [dev.read_resistance(d, t) for t in times]
        rows.extend((name, t, r) for t, r in zip(times, rs))
        curves[name] = (times, rs)
    files = [write_csv(out / "drift_curves.csv", calib.CSV_HEADER, rows)]
    fits = calib.fit_all(calib.DriftSample(n, t, r) for n, t, r in rows) if len(times) >= 2 else []
    summary = {
        "n_devices": len(devices),
        "n_points": len(times),
        "r_at_first": [curves[n][1][0] for n, _ in devices] if times else [],
        "fitted_nu": [f.nu for f in fits],
        "rank_preserved": all(
            all(a < b for a, b in zip(col, col[1:])) or all(a > b for a, b in zip(col, col[1:]))
            for col in zip(*(curves[n][1] for n, _ in devices))
        ) if len(devices) > 1 else True,
    }
    if plots:
        from . import plotting
        files.append(plotting.drift_curves(curves, out / "drift_curves.svg"))
    return UnitResult(seed, files, summary)


@dataclass
class TraceRun:
    tag_times: list[float]
    outcomes: list[tuple[float, int, str]]
    probes: list[float]
    per_device: list[list[float]]
    g_tagged: list[float]
    g_control: list[float]
    block: tr.TraceBlock


def drive_trace(cfg: ExperimentConfig, seed: int, tag_times, probe_times,
                initial_r=None) -> TraceRun:
    """Tag a fresh block and an untouched control block; sample both at ``probe_times``."""
    tp = cfg.trace_params()
    rng = _device_rng(cfg, seed)
    block = tr.init_block(tp.n_devices, tp, 0.0, rng, r_hrs=initial_r)
    control = tr.init_block(tp.n_devices, tp, 0.0, rng, r_hrs=initial_r)
    events = sorted([(t, 0) for t in tag_times] + [(t, 1) for t in probe_times])
    outcomes, per_dev, gt, gc, probes = [], [[] for _ in block.devices], [], [], []
    for t, is_probe in events:
        if is_probe:
            ro = tr.read_trace(block, t)
            probes.append(t)
            for i, (r, _) in enumerate(ro.per_device):
                per_dev[i].append(r)
            gt.append(ro.g_effective)
            gc.append(tr.read_trace(control, t).g_effective)
        else:
            res = tr.apply_tag(block, t)
            idx = (block.cursor - 1) % block.n_devices if res is tr.TagOutcome.ACCEPTED else -1
            outcomes.append((t, idx, res.value))
    return TraceRun(list(tag_times), outcomes, probes, per_dev, gt, gc, block)


def _tags_csv(out: Path, run: TraceRun) -> Path:
    return write_csv(out / "tags.csv", ("t_seconds", "device", "outcome"), run.outcomes)


def _single_trace(cfg: ExperimentConfig, seed: int, out: Path, plots: bool) -> UnitResult:
    sc = cfg["scenario"]
    rng = np.random.default_rng(seed)
    tags = tag_schedule(cfg, rng)
    probes = probe_grid(sc["t_end"], sc["probe_dt"])
    run = drive_trace(cfg, seed, tags, probes, sc["initial_r"] or None)
    nu = cfg["device"]["nu"]
    tau_m = sc["tau_m"]
    if tau_m is None:
        # match the PCM decay rate halfway through the post-tag window
        t_last = tags[-1] if tags else 0.0
        half = max((sc["t_end"] - t_last) / 2, cfg["device"]["t_ref"])
        tau_m = dev.tau_pcm(nu, half, sc["probe_dt"]) if nu > 0 else dev.NO_DECAY
    ideal, e = [], IdealTrace(tau_m=tau_m, eta=cfg["trace"]["eta"])
    accepted = [t for t, _, o in run.outcomes if o == tr.TagOutcome.ACCEPTED.value]
    for t, is_probe in sorted([(t, 0) for t in accepted] + [(t, 1) for t in probes]):
        step_ideal_trace(e, t, 0.0 if is_probe else 1.0)
        if is_probe:
            ideal.append(e.e)
    rows = [(t, g, c, r, i) for t, g, c, r, i in
            zip(run.probes, run.g_tagged, run.g_control, run.per_device[0], ideal)]
    files = [
        write_csv(out / "trace.csv", ("t_seconds", "g_tagged", "g_control", "r_device0", "ideal"), rows),
        _tags_csv(out, run),
    ]
    report = compare_traces(
        TraceHistory(tuple(run.probes), tuple(run.g_tagged), tuple(accepted), tuple(run.g_control)),
        TraceHistory(tuple(run.probes), tuple(ideal), tuple(accepted), (0.0,) * len(ideal)),
    )
    summary = {
        "tag_times": tags,
        "n_accepted": len(accepted),
        "n_rejected_lrs": run.block.n_rejected_lrs,
        "n_rejected_init": run.block.n_rejected_init,
        "t_end": run.probes[-1],
        "ratio_at_end": run.g_tagged[-1] / run.g_control[-1],
        "tau_m": tau_m,
        "shape_rmse": report.rmse,
    }
    if plots:
        from . import plotting
        files.append(plotting.single_trace(run.probes, run.g_tagged, run.g_control, tags,
                                           out / "single_trace.svg", ideal=ideal))
    return UnitResult(seed, files, summary)


def _multi_trace(cfg: ExperimentConfig, seed: int, out: Path, plots: bool) -> UnitResult:
    sc = cfg["scenario"]
    n = cfg["trace"]["n_devices"]
    initial_r = sc["initial_r"] or None
    if initial_r is not None and len(initial_r) != n:
        raise ConfigError(f"[scenario] initial_r has {len(initial_r)} values for {n} devices")
    rng = np.random.default_rng(seed)
    tags = tag_schedule(cfg, rng)
    t_reward = sc["t_reward"]
    probes = sorted(set(probe_grid(sc["t_end"], sc["probe_dt"])) | {t_reward})
    run = drive_trace(cfg, seed, tags, probes, initial_r)
    k = run.probes.index(t_reward)
    r_lrs = cfg["device"]["r_lrs"]
    dev_rows = [(t, i, r, r < r_lrs) for i, series in enumerate(run.per_device)
                for t, r in zip(run.probes, series)]
    eff_rows = list(zip(run.probes, run.g_tagged, run.g_control))
    reward_row = [(t_reward, run.g_tagged[k], run.g_control[k], run.g_tagged[k] - run.g_control[k])
                  + tuple(series[k] for series in run.per_device)]
    files = [
        write_csv(out / "devices.csv", ("t_seconds", "device", "resistance_ohms", "in_lrs"), dev_rows),
        write_csv(out / "effective.csv", ("t_seconds", "g_effective", "g_control"), eff_rows),
        write_csv(out / "reward.csv",
                  ("t_seconds", "g_effective", "g_control", "excess")
                  + tuple(f"r_device{i}" for i in range(n)), reward_row),
        _tags_csv(out, run),
    ]
    summary = {
        "tag_times": tags,
        "tag_counts": list(run.block.tag_counts),
        "n_rejected_lrs": run.block.n_rejected_lrs,
        "n_rejected_init": run.block.n_rejected_init,
        "lrs_at_reward": [s[k] < r_lrs for s in run.per_device],
        "min_resistance_after_tags": min(
            r for s in run.per_device for t, r in zip(run.probes, s) if t >= (tags[-1] if tags else 0)
        ),
        "t_reward": t_reward,
        "g_effective_at_reward": run.g_tagged[k],
        "g_control_at_reward": run.g_control[k],
        "excess_at_reward": run.g_tagged[k] - run.g_control[k],
    }
    if plots:
        from . import plotting
        files.append(plotting.multi_trace(run.probes, run.per_device, run.g_tagged, tags, t_reward,
                                          out / "multi_trace.svg"))
    return UnitResult(seed, files, summary)


def _capacity_sweep(cfg: ExperimentConfig, seed: int, out: Path, plots: bool) -> UnitResult:
    sc = cfg["scenario"]
    tp = cfg.trace_params()
    ns = list(sc["n_values"])
    caps = []
    for n in ns:
        rng = _device_rng(cfg, seed)
        caps.append(tr.capacity(tp, sc["interval"], n, sc["max_tags"], rng))
    c1 = caps[ns.index(1)] if 1 in ns else None
    rows = []
    for n, c in zip(ns, caps):
        ratio = c / (n * c1) if c1 and math.isfinite(c) and math.isfinite(c1) else math.nan
        rows.append((n, c, ratio))
    files = [write_csv(out / "capacity.csv", ("n_devices", "capacity", "ratio_to_n_times_single"), rows)]
    order = sorted(zip(ns, caps))
    summary = {
        "n_values": ns,
        "capacity": caps,
        "interval": sc["interval"],
        "monotone": all(a[1] <= b[1] for a, b in zip(order, order[1:])),
    }
    if plots:
        from . import plotting
        files.append(plotting.capacity(ns, caps, out / "capacity.svg"))
    return UnitResult(seed, files, summary)


def _learning_demo(cfg: ExperimentConfig, seed: int, out: Path, plots: bool) -> UnitResult:
    res = run_learning_task(cfg.task_config(), seed=seed)
    trial_rows = [(r.index, r.phase, r.cue, r.counts[0], r.counts[1], r.correct, r.t_start,
                   "" if r.t_reward is None else r.t_reward) for r in res.trials]
    tags = res.log.tag_summary()
    files = [
        write_csv(out / "trials.csv",
                  ("index", "phase", "cue", "count0", "count1", "correct", "t_start", "t_reward"),
                  trial_rows),
        write_csv(out / "weights_final.csv",
                  ("synapse", "pre", "post", "g_plus", "g_minus", "weight"), res.final_weights),
    ]
    summary = {
        "pre_rate": res.pre_rate,
        "train_rate": res.train_rate,
        "post_rate": res.post_rate,
        "improved": res.improved,
        "n_rewards": sum(1 for r in res.trials if r.t_reward is not None),
        "n_saturated": res.n_saturated,
        "tags_issued": tags["issued"],
        "tags_accepted": tags["accepted"],
        "tags_rejected_lrs": tags["rejected_lrs"],
    }
    return UnitResult(seed, files, summary)


RUNNERS: dict[str, Callable[[ExperimentConfig, int, Path, bool], UnitResult]] = {
    "drift_curves": _drift_curves,
    "single_trace": _single_trace,
    "multi_trace": _multi_trace,
    "learning_demo": _learning_demo,
    "capacity_sweep": _capacity_sweep,
}
assert set(RUNNERS) == set(SCENARIOS)


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

def _prepare_out(out_dir: Path, force: bool) -> None:
    if out_dir.exists():
        if not out_dir.is_dir():
            raise OutputCollision(f"{out_dir} exists and is not a directory")
        if any(out_dir.iterdir()):
            if not force:
                raise OutputCollision(f"{out_dir} is not empty; pass --force to overwrite")
            # only remove what a previous run recorded
            old = out_dir / MANIFEST
            if old.exists():
                try:
                    listed = json.loads(old.read_text(encoding="utf-8")).get("files", [])
                except (OSError, ValueError):
                    listed = []
                for entry in listed:
                    p = (out_dir / entry.get("path", "")).resolve()
                    if out_dir.resolve() in p.parents and p.is_file():
                        p.unlink()
                old.unlink()
    out_dir.mkdir(parents=True, exist_ok=True)


def _run_unit(args) -> UnitResult:
    values, seed, unit_dir, plots = args
    cfg = ExperimentConfig(values)
    unit_dir = Path(unit_dir)
    unit_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.scenario](cfg, seed, unit_dir, plots)


def _aggregate(scenario: str, units: list[UnitResult]) -> dict[str, Any]:
    if len(units) == 1:
        return dict(units[0].summary)
    out: dict[str, Any] = {"seeds": [u.seed for u in units]}
    if scenario == "learning_demo":
        pre = [u.summary["pre_rate"] for u in units]
        post = [u.summary["post_rate"] for u in units]
        out.update({
            "n_seeds": len(units),
            "n_improved": sum(u.summary["improved"] for u in units),
            "mean_pre_rate": float(np.mean(pre)),
            "mean_post_rate": float(np.mean(post)),
        })
    return out


def _summary_csv(out_dir: Path, units: list[UnitResult]) -> Path:
    keys = [k for k, v in units[0].summary.items() if isinstance(v, (bool, int, float, str))]
    rows = [[u.seed] + [u.summary[k] for k in keys] for u in units]
    return write_csv(out_dir / "summary.csv", ["seed"] + keys, rows)


def run_scenario(cfg: ExperimentConfig, out_dir, *, plots: bool = False, force: bool = False,
                 jobs: int = 1) -> RunResult:
    """Run ``cfg.scenario`` for every configured seed and write the artifact set."""
    cfg.validate()
    out_dir = Path(out_dir)
    _prepare_out(out_dir, force)
    n_seeds = cfg["experiment"]["seeds"]
    seeds = [cfg.seed + k for k in range(n_seeds)]
    dirs = [out_dir if n_seeds == 1 else out_dir / f"seed_{s}" for s in seeds]
    tasks = [(cfg.values, s, str(d), plots) for s, d in zip(seeds, dirs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            units = list(ex.map(_run_unit, tasks))
    else:
        units = [_run_unit(t) for t in tasks]

    files: list[Path] = [cfg.write(out_dir / "config.ini")]
    for u in units:
        files.extend(u.files)
    if n_seeds > 1:
        files.append(_summary_csv(out_dir, units))
        if plots and cfg.scenario == "learning_demo":
            from . import plotting
            files.append(plotting.learning(
                [u.seed for u in units], [u.summary["pre_rate"] for u in units],
                [u.summary["post_rate"] for u in units], out_dir / "learning.svg"))

    manifest = {
        "scenario": cfg.scenario,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "seeds": seeds,
        "git_describe": git_describe(),
        "version": __version__,
        "summary": _aggregate(cfg.scenario, units),
        "files": [
            {"path": Path(os.path.relpath(f, out_dir)).as_posix(), "sha256": sha256_file(f)}
            for f in files
        ],
    }
    manifest = _jsonable(manifest)
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8", newline="\n")
    return RunResult(cfg.scenario, out_dir, manifest, units)
