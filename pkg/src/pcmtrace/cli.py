"""Command line front end.

    pcmtrace simulate <scenario> [--config FILE] [--seed S] [--seeds N] [--jobs N]
                      [--set section.key=value ...] [--plots] [--force] --out DIR
    pcmtrace calibrate --input CSV [--t0 S] [--trim] --out CARD
    pcmtrace report cost [--input CSV] [--out CSV]

Exit codes: 0 success, 2 usage or validation error, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import SCENARIOS, ExperimentConfig
from .errors import PcmTraceError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcmtrace", description="PCM-drift eligibility trace simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write CSVs + manifest")
    s.add_argument("scenario", choices=SCENARIOS, metavar="scenario",
                   help="one of: " + ", ".join(SCENARIOS))
    s.add_argument("--config", type=Path, help="INI config file")
    s.add_argument("--seed", type=int, help="base seed (overrides [experiment] seed)")
    s.add_argument("--seeds", type=int, help="number of consecutive seeds to run")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for multi-seed runs")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable)")
    s.add_argument("--plots", action="store_true", help="also render SVG figures")
    s.add_argument("--force", action="store_true", help="overwrite a previous run in --out")
    s.add_argument("--out", type=Path, help="output directory (or [experiment] out)")

    c = sub.add_parser("calibrate", help="fit drift measurements and write model cards")
    c.add_argument("--input", type=Path, required=True, help="CSV: device_id,t_seconds,resistance_ohms")
    c.add_argument("--t0", type=float, default=1.0, help="reference time of the fit in seconds")
    c.add_argument("--trim", action="store_true", help="drop the 5%% extreme residuals and refit")
    c.add_argument("--out", type=Path, required=True,
                   help="card path; with several devices one card per device is written "
                        "as <stem>_<device_id><suffix>")

    r = sub.add_parser("report", help="static reports")
    rsub = r.add_subparsers(dest="report", required=True)
    rc = rsub.add_parser("cost", help="area per time constant table")
    rc.add_argument("--input", type=Path, help="CSV: name,area_um2,tau_s (default: published rows)")
    rc.add_argument("--out", type=Path, help="also write the table to this CSV")
    return p


def _cmd_simulate(args) -> int:
    from .scenarios import run_scenario

    overrides = _overrides(args.set)
    if args.seed is not None:
        overrides["experiment.seed"] = str(args.seed)
    if args.seeds is not None:
        overrides["experiment.seeds"] = str(args.seeds)
    cfg = ExperimentConfig.load(args.config, args.scenario, overrides)
    out = args.out or (Path(cfg["experiment"]["out"]) if cfg["experiment"]["out"] else None)
    if out is None:
        raise ValidationError("no output directory: pass --out or set [experiment] out")
    if args.jobs < 1:
        raise ValidationError("--jobs must be >= 1")
    try:
        res = run_scenario(cfg, out, plots=args.plots, force=args.force, jobs=args.jobs)
    except PcmTraceError:
        raise
    except Exception as exc:  # anything else is a simulation failure
        print(f"simulation failed: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in res.summary.items():
        w.writerow([k, v])
    print(f"wrote {len(res.manifest['files'])} files to {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    from . import calib

    samples = calib.load_samples(args.input)
    fits = calib.fit_all(samples, t0=args.t0, trim=args.trim)
    out = args.out
    if len(fits) == 1:
        targets = [out]
    else:
        targets = [out.with_name(f"{out.stem}_{f.device_id}{out.suffix}") for f in fits]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["device_id", "r_t0", "nu", "t0", "rmse_log", "n_samples", "anomalous", "card"])
    for fit, path in zip(fits, targets):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(calib.export_model_card(fit), encoding="utf-8", newline="\n")
        w.writerow([fit.device_id, repr(fit.r_t0), repr(fit.nu), repr(fit.t0), repr(fit.rmse_log),
                    fit.n_samples, int(fit.anomalous), str(path)])
        if fit.anomalous:
            print(f"warning: {fit.device_id}: negative drift exponent {fit.nu:.4g}", file=sys.stderr)
    return EXIT_OK


def _cmd_report_cost(args) -> int:
    from . import report

    if args.input is None:
        entries = [(p.name, p.area_um2, p.tau_s) for p in report.PUBLISHED_ROWS]
    else:
        entries = report.load_cost_entries(args.input)
    rep = report.cost_report(entries)
    header = ("name", "area_um2", "tau_s", "area_per_tau_um2_per_s")
    rows = rep.table()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for name, a, t, q in rows:
        w.writerow([name, f"{a:g}", f"{t:g}", f"{q:.4g}"])
    if args.out is not None:
        from .network import write_csv
        write_csv(args.out, header, rows)
    names = {r.name for r in rep.rows}
    published = [p for p in report.PUBLISHED_ROWS if p.name in names]
    for chk in report.check_published(rep, published):
        status = "ok" if chk.ok else "MISMATCH"
        print(f"check {chk.name}: {chk.computed:.4g} vs published {chk.relation} {chk.published} -> {status}",
              file=sys.stderr)
    if {"CMOS", "PCM"} <= names:
        print(f"ratio CMOS/PCM: {rep.ratio('CMOS', 'PCM'):.3g}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "report":
            return _cmd_report_cost(args)
    except PcmTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    parser.error(f"unknown command {args.command!r}")
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
