"""Command-line front end: ``coexqkd {calibrate,sweep,simulate,analyze,soax}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ExperimentConfig
from .errors import (CoexError, ConfigError, InfeasibleCalibration, SyncFailure, TagFileError,
                     UncoveredRangeError)
from .experiments import CalibrationSet

log = logging.getLogger("coexqkd")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_PARSE = 4
EXIT_SYNC = 5
EXIT_CLOSURE = 6
EXIT_RANGE = 7

MODES = {"b2b": ex.BACK_TO_BACK, "fiber": ex.FIBER}


def _calibration(cfg: ExperimentConfig, path=None) -> CalibrationSet:
    if path:
        data = json.loads(Path(path).read_text())
        cal = CalibrationSet(**data["calibration"])
    else:
        cal = ex.calibrate_all(cfg.system())
    return cfg.apply_overrides(cal)


def cmd_calibrate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    system = cfg.system()
    cal = cfg.apply_overrides(ex.calibrate_all(system))
    checks = ex.closure_checks(system, cal)
    report = {
        "calibration": {k: float(v) for k, v in cal.as_dict().items()},
        "closure": [
            {"anchor": c.name, "target": c.target, "achieved": float(c.achieved),
             "residual": float(c.residual), "tolerance": c.tolerance,
             "relative": bool(c.relative), "ok": bool(c.ok)}
            for c in checks
        ],
        "notes": ex.run_back_to_back(system, cal).notes,
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for key, value in report["calibration"].items():
        print(f"{key:24s} {value:.9g}")
    print()
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name:22s} target {c.target:<10.6g} "
              f"achieved {c.achieved:<14.9g} residual {c.residual:+.3g}")
    failing = [c.name for c in checks if not c.ok]
    if failing:
        print(f"closure failed for: {', '.join(failing)}", file=sys.stderr)
        return EXIT_CLOSURE
    return EXIT_OK


def plot_sweep(table: ex.SweepTable, path, threshold: float = 0.11) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_q, ax_b) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.4))
    ax_q.plot(table.rop_dbm, 100 * table.qber, "o-", ms=2, color="C0", label="QBER")
    ax_q.axhline(100 * threshold, color="k", ls="--", lw=0.8, label=f"{100 * threshold:g} % threshold")
    ax_q.set_ylabel("QBER [%]")
    ax_r = ax_q.twinx()
    ax_r.plot(table.rop_dbm, table.raw_rate_cps / 1e3, "s-", ms=2, color="C1", label="raw rate")
    ax_r.set_ylabel("raw key rate [kb/s]")
    ax_q.legend(loc="upper left")
    ax_q.set_title(f"co-existence sweep ({table.config})")
    ax_b.semilogy(table.rop_dbm, table.classical_ber, "^-", ms=2, color="C2")
    ax_b.axhline(1e-10, color="k", ls=":", lw=0.8)
    ax_b.set_ylim(1e-14, 1)
    ax_b.set_xlabel("classical ROP [dBm]")
    ax_b.set_ylabel("classical BER")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    cal = _calibration(cfg, args.calibration)
    table = ex.run_coexistence_sweep(cfg.system(), cal, cfg.sweep_grid(), MODES[args.mode])
    Path(args.out).write_text(table.to_csv())
    if args.plot:
        plot_sweep(table, args.plot, cfg["protocol"]["qber_threshold"])
    print(f"wrote {len(table)} rows to {args.out}")
    return EXIT_OK


def _run_config(cfg: ExperimentConfig, cal: CalibrationSet, seed, symbols, rop_dbm, mode,
                workers=None):
    from .montecarlo import RunConfig

    m = cfg["montecarlo"]
    system = cfg.system()
    physics = ex.monte_carlo_physics(system, cal, rop_dbm, MODES[mode])
    receiver = cfg.receiver()
    try:
        return RunConfig(
            seed=m["seed"] if seed is None else seed,
            n_symbols=m["n_symbols"] if symbols is None else symbols,
            physics=physics,
            symbol_period_ps=round(1e12 / system.symbol_rate_baud),
            frame_length=m["frame_length"],
            pattern_offset=m["pattern_offset"],
            receiver_basis=receiver.basis,
            receiver_bit=receiver.bit,
            clock_phase_offset_ps=m["clock_phase_offset_ps"],
            batch_symbols=m["batch_symbols"],
            workers=m["workers"] if workers is None else workers,
        )
    except ValueError as exc:
        raise ConfigError(f"montecarlo: {exc}") from None


def cmd_simulate(args) -> int:
    from .montecarlo import simulate_quantum_run
    from .tagfile import write_tag_stream

    cfg = ExperimentConfig.load(args.config)
    cal = _calibration(cfg, args.calibration)
    run = _run_config(cfg, cal, args.seed, args.symbols, args.rop_dbm, args.mode, args.workers)
    stream, truth = simulate_quantum_run(run)
    write_tag_stream(stream, args.out)
    counts = truth.counts()
    print(f"wrote {len(stream)} tags ({run.n_symbols} symbols, seed {run.seed}) to {args.out}")
    print("  " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .montecarlo import reference_frame
    from .tagfile import read_tag_stream
    from .tagproc import analyze_stream

    cfg = ExperimentConfig.load(args.config)
    m = cfg["montecarlo"]
    stream = read_tag_stream(args.tags)
    seed = m["seed"] if args.seed is None else args.seed
    symbols = m["n_symbols"] if args.symbols is None else args.symbols
    frame = reference_frame(seed, m["frame_length"])
    sync, report = analyze_stream(
        stream, frame, cfg.receiver(), cfg["protocol"]["window_fraction"],
        duration_s=symbols * stream.symbol_period_ps * 1e-12, n_bins=m["phase_bins"],
        score_floor=m["sync_score_floor"])
    print(f"clock phase {sync.clock_phase:.1f} ps (score {sync.phase_score:.3f}), "
          f"frame offset {sync.frame_offset} (score {sync.correlation_score:.4f})")
    print(report.summary())
    if args.out:
        Path(args.out).write_text(report.to_csv())
    return EXIT_OK


def cmd_soax(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    system = cfg.system()
    cal = _calibration(cfg, args.calibration)
    table = ex.run_coexistence_sweep(system, cal, cfg.sweep_grid(), MODES[args.mode])
    p = system.protocol
    soax = ex.compute_soax(table, p.qber_threshold, system.anchors.target_ber,
                           p.distillation, p.aes_key_bits, p.aes_chunk_bytes)
    text = soax.summary()
    print(text)
    if args.out:
        Path(args.out).write_text(soax.to_csv())
        Path(args.out).with_suffix(".txt").write_text(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coexqkd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit constants to the anchors and check closure")
    p.add_argument("config")
    p.add_argument("--out", default="calibration.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="classical-ROP sweep as CSV (+ optional plot)")
    p.add_argument("config")
    p.add_argument("--mode", choices=sorted(MODES), default="fiber")
    p.add_argument("--out", required=True)
    p.add_argument("--plot")
    p.add_argument("--calibration", help="calibration JSON from `calibrate`")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo run written as a QTAG file")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--symbols", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--rop-dbm", type=float, help="classical ROP; omit for no classical channel")
    p.add_argument("--mode", choices=sorted(MODES), default="b2b")
    p.add_argument("--workers", type=int)
    p.add_argument("--calibration")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the tag-processing pipeline on a QTAG file")
    p.add_argument("tags")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="seed used by `simulate` (selects the frame)")
    p.add_argument("--symbols", type=int, help="symbols simulated (sets the duration)")
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("soax", help="safe operating area for co-existence")
    p.add_argument("config")
    p.add_argument("--mode", choices=sorted(MODES), default="fiber")
    p.add_argument("--out", help="CSV path; a .txt summary is written alongside")
    p.add_argument("--calibration")
    p.set_defaults(func=cmd_soax)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleCalibration as exc:
        print(f"infeasible calibration at step '{exc.step}' (anchor '{exc.anchor}'): {exc}",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    except TagFileError as exc:
        print(f"tag file error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SyncFailure as exc:
        print(f"sync failure: {exc}", file=sys.stderr)
        return EXIT_SYNC
    except UncoveredRangeError as exc:
        print(f"sweep range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except CoexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
