"""Command-line entry point: ``spinlink {simulate,analyze,tomo,report,doppler}``.

Exit status: 0 success, 1 report with failing or absent metrics,
2 configuration or startup error, 3 data-integrity error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .campaigns import simulate, window_settings
from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, DataIntegrityError, InvalidArgument, ReportError
from .memory import doppler_dephasing_time
from .pipeline import (
    analysis_options, analyze_events, build_summary, compare_to_reference, dump_summary, emit_fringe_plot_data,
    load_reference, load_summary, read_events, write_events,
)

log = logging.getLogger("spinlink")

EXIT_OK = 0
EXIT_REPORT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def _prepare_out(path: str | None) -> Path:
    out = Path(path or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _write_outputs(out: Path, summary: dict, res) -> None:
    (out / "summary.yaml").write_text(dump_summary(summary))
    for scan in res.scans:
        emit_fringe_plot_data(scan, out / f"fringe_{scan.name}.csv")


def run_campaign(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Simulate, write ``events.csv``, re-read it and write ``summary.yaml``."""
    if cfg.windows < len(window_settings(cfg)):
        log.warning("fewer windows than settings; some settings are never measured")
    windows = simulate(cfg, workers)
    (out / "config.resolved").write_text(dump_config(cfg))
    write_events(windows, cfg.campaign, out / "events.csv")
    ev = read_events(out / "events.csv")
    res = analyze_events(ev, analysis_options(cfg))
    summary = build_summary(ev, res, cfg.seed)
    _write_outputs(out, summary, res)
    return summary


def _cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config PATH")
    cfg = load_config(args.config, args.seed)
    out = _prepare_out(args.out)
    summary = run_campaign(cfg, out, args.workers)
    print(f"campaign {summary['campaign']}: {summary['events']} events, {summary['cycles']} cycles -> {out}")
    _print_metrics(summary)
    return EXIT_OK


def _print_metrics(summary: dict) -> None:
    for name, m in summary["metrics"].items():
        if m["defined"]:
            err = f" +/- {m['stderr']:.4g}" if m.get("stderr") else ""
            print(f"  {name} = {m['value']:.6g}{err}")
        else:
            print(f"  {name} = undefined ({m['note']})")


def _load_events(path: str):
    try:
        return read_events(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such event file: {path}") from exc


def _cmd_analyze(args) -> int:
    cfg = load_config(args.config, args.seed) if args.config else None
    ev = _load_events(args.events)
    out = _prepare_out(args.out)
    res = analyze_events(ev, analysis_options(cfg, args.seed))
    summary = build_summary(ev, res, cfg.seed if cfg else args.seed)
    _write_outputs(out, summary, res)
    _print_metrics(summary)
    return EXIT_OK


def _cmd_tomo(args) -> int:
    ev = _load_events(args.events)
    if ev.campaign.value != "TOMO":
        raise DataIntegrityError(f"event file holds a {ev.campaign.value} campaign, not TOMO")
    out = _prepare_out(args.out)
    res = analyze_events(ev, {"seed": args.seed or 0, "bootstrap": args.bootstrap})
    summary = build_summary(ev, res, args.seed)
    (out / "tomo.yaml").write_text(dump_summary(summary))
    tomo = res.extra.get("tomography")
    if tomo is None:
        print("tomography undefined: " + res.metrics["fidelity_mle"].note)
        return EXIT_OK
    with open(out / "rho.csv", "w") as fh:
        fh.write("row,col,real,imag\n")
        for i in range(4):
            for j in range(4):
                fh.write(f"{i},{j},{tomo['rho_real'][i][j]:.6f},{tomo['rho_imag'][i][j]:.6f}\n")
    f = res.metrics["fidelity_mle"]
    print(f"fidelity_to_bell (MLE) = {f.value:.4f} (bootstrap spread {f.stderr:.4f})")
    print(f"fidelity_to_bell (linear inversion, PSD-projected) = {res.metrics['fidelity_linear'].value:.4f}")
    print("rho real part:")
    print(np.array2string(np.array(tomo["rho_real"]), precision=3, suppress_small=True))
    print("rho imaginary part:")
    print(np.array2string(np.array(tomo["rho_imag"]), precision=3, suppress_small=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    if not args.summary:
        raise ConfigError("report needs at least one --summary PATH")
    for p in args.summary + ([args.reference] if args.reference else []):
        if not Path(p).is_file():
            raise ConfigError(f"no such file: {p}")
    summaries = [load_summary(p) for p in args.summary]
    ref = load_reference(args.reference)
    report = compare_to_reference(summaries, ref, args.z_threshold)
    text = report.to_csv()
    if args.out:
        out = _prepare_out(args.out)
        (out / "report.csv").write_text(text)
    sys.stdout.write(text)
    print("overall: " + ("pass" if report.passed else "fail"))
    return EXIT_OK if report.passed else EXIT_REPORT_FAIL


def _cmd_doppler(args) -> int:
    try:
        t = doppler_dephasing_time(args.lambda1, args.lambda2, args.speed)
    except ZeroDivisionError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"dephasing_time_s = {t:.6e}")
    print(f"dephasing_time_us = {t * 1e6:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlink", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="config -> events.csv + summary.yaml")
    s.add_argument("--config", required=False)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="run")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_simulate)

    a = sub.add_parser("analyze", help="events.csv -> summary.yaml")
    a.add_argument("events")
    a.add_argument("--config", help="run config (CHSH angles, dark-count correction, memory model)")
    a.add_argument("--seed", type=int)
    a.add_argument("--out", default=".")
    a.set_defaults(func=_cmd_analyze)

    t = sub.add_parser("tomo", help="TOMO events.csv -> rho.csv + fidelity")
    t.add_argument("events")
    t.add_argument("--seed", type=int, default=0, help="seed of the bootstrap resampling")
    t.add_argument("--bootstrap", type=int, default=50)
    t.add_argument("--out", default=".")
    t.set_defaults(func=_cmd_tomo)

    r = sub.add_parser("report", help="summary + reference -> comparison table")
    r.add_argument("--summary", action="append", help="summary.yaml (repeatable)")
    r.add_argument("--reference", help="reference CSV (default: bundled reference values)")
    r.add_argument("--z-threshold", type=float, default=3.0)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_report)

    d = sub.add_parser("doppler", help="Doppler dephasing time from two wavelengths and atom speed")
    d.add_argument("lambda1", type=float, help="coupling wavelength [m]")
    d.add_argument("lambda2", type=float, help="signal wavelength [m]")
    d.add_argument("speed", type=float, help="mean atom speed [m/s]")
    d.set_defaults(func=_cmd_doppler)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataIntegrityError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
