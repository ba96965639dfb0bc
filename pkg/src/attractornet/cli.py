"""Command-line interface.

Five subcommands cover the full pipeline:

* ``neuron-tf`` -- single-neuron gain curve under Poisson drive
* ``ltp-ltd``   -- LTP/LTD transition-probability map over a rate grid
* ``etf``       -- effective transfer function sweep with fixed-point report
* ``learn``     -- unsupervised learning run on a presentation schedule
* ``recall``    -- degraded-stimulus recall test against a stored matrix

Every command reads one optional configuration file (see ``config``), applies
``--set section.key=value`` overrides, and writes all outputs into a fresh run
directory, including an echo of the fully resolved configuration.  Run
directories are write-once: an existing non-empty target is refused.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure
(including interruption; an interrupted ``learn`` still leaves a valid
partial event log ending in a truncation marker).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .characterization import (
    CalibrationError,
    PlasticityProtocol,
    bifurcation_sweep,
    measure_plasticity_map,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .events import SchedulingError
from .learning import recall_test, run_learning
from .network import build
from .neuron import gain_curve, write_gain_csv
from .stimulus import alternating_schedule, builtin_patterns, disjoint_patterns, save_pattern

__all__ = ["main"]

OUTPUT_ROOT_ENV = "ATTRACTORNET_RUNS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    """Usage/configuration problem detected by the CLI itself."""


# ------------------------------------------------------------------ plumbing


def _parse_rates(text: str, name: str = "rates") -> list[float]:
    try:
        rates = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise CliError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if not rates:
        raise CliError(f"--{name}: empty list")
    if any(r < 0 for r in rates):
        raise CliError(f"--{name}: rates must be non-negative")
    return rates


def _run_dir(args, command: str) -> Path:
    if args.outdir is not None:
        path = Path(args.outdir)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        path = root / command
    if path.exists() and any(path.iterdir()):
        raise CliError(f"output directory {path} already exists and is not empty")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    if args.config is not None and not Path(args.config).is_file():
        raise ConfigError(f"config file not found: {args.config}")
    return load_config(args.config, args.set or ())


def _patterns(n: int):
    return builtin_patterns() if n == 2 else disjoint_patterns(n)


# ---------------------------------------------------------------- subcommands


def cmd_neuron_tf(args) -> int:
    cfg = _load(args)
    rates = _parse_rates(args.rates)
    out = _run_dir(args, "neuron-tf")
    save_config(cfg, out / "config.ini")
    rows = gain_curve(
        cfg.network.neuron, rates,
        n_sources=args.sources, efficacy_each=args.efficacy,
        duration=args.duration, seed=cfg.network.seed,
    )
    write_gain_csv(rows, out / "gain.csv")
    for r, nu, se in rows:
        print(f"in {r:8.2f} Hz/source -> out {nu:8.3f} +- {se:.3f} Hz")
    print(f"wrote {out / 'gain.csv'}")
    return EXIT_OK


def cmd_ltp_ltd(args) -> int:
    cfg = _load(args)
    pre = _parse_rates(args.pre_rates, "pre-rates")
    post = _parse_rates(args.post_rates, "post-rates")
    out = _run_dir(args, "ltp-ltd")
    save_config(cfg, out / "config.ini")
    protocol = PlasticityProtocol(n_neurons=args.probes, window=args.window)
    pmap = measure_plasticity_map(
        pre, post, cfg.network.neuron, cfg.network.synapse,
        protocol=protocol, seed=cfg.network.seed,
    )
    pmap.write_csv(out / "plasticity_map.csv")
    print(f"{pmap.n_probes} probe synapses per point")
    print(f"wrote {out / 'plasticity_map.csv'}")
    return EXIT_OK


def cmd_etf(args) -> int:
    cfg = _load(args)
    fractions = _parse_rates(args.fractions, "fractions")
    if any(f > 1.0 for f in fractions):
        raise CliError("--fractions: potentiated fractions must lie in [0, 1]")
    rates = _parse_rates(args.rates)
    patterns = {p.name: p for p in _patterns(cfg.schedule.patterns)}
    if args.subpop == "all":
        subpop = np.arange(cfg.network.n_exc)
    elif args.subpop in patterns:
        subpop = patterns[args.subpop].neuron_indices()
    else:
        raise CliError(
            f"--subpop: unknown subpopulation {args.subpop!r}; "
            f"expected 'all' or one of {sorted(patterns)}"
        )
    out = _run_dir(args, "etf")
    save_config(cfg, out / "config.ini")
    curves = bifurcation_sweep(
        cfg.network, subpop, fractions, rates,
        duration=args.duration, discard=args.discard,
    )
    with open(out / "fixed_points.txt", "w") as fh:
        for f, curve in curves.items():
            curve.write_csv(out / f"etf_f{f:g}.csv")
            fps = curve.fixed_points()
            fh.write(f"f={f:g}: " + "; ".join(f"{r:.3f} Hz ({k})" for r, k in fps) + "\n")
            print(f"f={f:g}: fixed points " + ", ".join(f"{r:.1f} Hz {k}" for r, k in fps))
    print(f"wrote {len(curves)} curve(s) to {out}")
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = _load(args)
    out = _run_dir(args, "learn")
    save_config(cfg, out / "config.ini")
    sched_cfg = cfg.schedule
    patterns = _patterns(sched_cfg.patterns)
    for p in patterns:
        save_pattern(p, out / f"pattern_{p.name}.txt")
    schedule = alternating_schedule(
        patterns, sched_cfg.n_rounds, sched_cfg.duration, sched_cfg.period
    )
    network = build(cfg.network)

    def progress(t: float) -> None:
        print(f"  t={t:7.1f} s", flush=True)

    result = run_learning(
        network, schedule,
        snapshot_every=args.snapshot_every or sched_cfg.snapshot_every,
        rate_on=sched_cfg.rate_on, rate_off=sched_cfg.rate_off,
        progress=progress if args.verbose else None,
    )

    result.log.write_text(out / "events.tsv", truncated=result.truncated)
    snap_dir = out / "snapshots"
    snap_dir.mkdir()
    for k, snap in enumerate(result.snapshots):
        snap.write(snap_dir / f"snap_{k:03d}.csv", result.pre_of_edges, result.post_of_edges)
    from .learning import write_traces_csv
    write_traces_csv(result.traces(), out / "traces.csv")
    network.export_topology(out / "matrix.csv")

    with open(out / "report.txt", "w") as fh:
        for snap in result.snapshots:
            fr = result.fractions_at(snap)
            line = f"t={snap.time:8.1f}  " + "  ".join(
                f"{k}={v:.3f}" for k, v in fr.items() if not np.isnan(v)
            )
            fh.write(line + "\n")
        if result.truncated:
            fh.write("# truncated\n")
    print(f"{len(result.log)} events, {len(result.snapshots)} snapshots -> {out}")
    if result.truncated:
        print("run interrupted; partial outputs carry a truncation marker", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_recall(args) -> int:
    cfg = _load(args)
    if not 0.0 <= args.removal <= 1.0:
        raise CliError(f"--removal must lie in [0, 1], got {args.removal}")
    patterns = _patterns(cfg.schedule.patterns)
    by_name = {p.name: p for p in patterns}
    if args.pattern not in by_name:
        raise CliError(f"--pattern: unknown pattern {args.pattern!r}; have {sorted(by_name)}")
    if args.matrix is not None and not Path(args.matrix).is_file():
        raise CliError(f"matrix file not found: {args.matrix}")
    out = _run_dir(args, "recall")
    save_config(cfg, out / "config.ini")

    network = build(cfg.network)
    if args.matrix is not None:
        network.load_topology(args.matrix)
    rng = cfg.network.rng("recall-degrade")
    with open(out / "report.txt", "w") as fh:
        fh.write("trial,pattern,removal,recall_coverage,intrusion,delay_rate_hz,"
                 "threshold_hz,attractor\n")
        for trial in range(args.trials):
            score = recall_test(
                network, by_name[args.pattern], args.removal, rng,
                all_patterns=patterns, rate_on=cfg.schedule.rate_on,
            )
            has_attractor = score.delay_rate_hz >= score.threshold_hz
            flag = "yes" if has_attractor else "no attractor"
            fh.write(
                f"{trial},{args.pattern},{args.removal:g},{score.recall_coverage:.4f},"
                f"{score.intrusion:.4f},{score.delay_rate_hz:.3f},"
                f"{score.threshold_hz:.3f},{flag}\n"
            )
            print(
                f"trial {trial}: coverage {score.recall_coverage:.3f}, "
                f"intrusion {score.intrusion:.3f}, delay rate "
                f"{score.delay_rate_hz:.1f} Hz ({flag})"
            )
    print(f"wrote {out / 'report.txt'}")
    return EXIT_OK


# --------------------------------------------------------------------- parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("-c", "--config", help="configuration file (INI key=value sections)")
    sub.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override one configuration value (repeatable)")
    sub.add_argument("-o", "--outdir",
                     help=f"run directory (default: $${OUTPUT_ROOT_ENV}/<command>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attractornet",
        description="Spiking attractor network with stochastic bistable synapses",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("neuron-tf", help="single-neuron gain curve")
    _add_common(p)
    p.add_argument("--rates", default="0,5,10,20,40,80,120,160",
                   help="comma-separated per-source rates, Hz")
    p.add_argument("--sources", type=int, default=64, help="independent Poisson sources")
    p.add_argument("--efficacy", type=float, default=0.05, help="efficacy per source")
    p.add_argument("--duration", type=float, default=10.0, help="measurement window, s")
    p.set_defaults(func=cmd_neuron_tf)

    p = subs.add_parser("ltp-ltd", help="LTP/LTD transition-probability map")
    _add_common(p)
    p.add_argument("--pre-rates", default="0,10,20,40,80,120",
                   help="presynaptic rate grid, Hz")
    p.add_argument("--post-rates", default="0,10,20,40,80,120",
                   help="postsynaptic rate grid, Hz")
    p.add_argument("--probes", type=int, default=16,
                   help="probe neurons per grid point (64 synapses each)")
    p.add_argument("--window", type=float, default=2.0, help="observation window, s")
    p.set_defaults(func=cmd_ltp_ltd)

    p = subs.add_parser("etf", help="effective transfer function and fixed points")
    _add_common(p)
    p.add_argument("--fractions", default="0.05,0.35,0.65,0.95",
                   help="potentiated-fraction levels to sweep")
    p.add_argument("--rates", default="0,25,50,100,150,200,250,300",
                   help="imposed input rate grid, Hz")
    p.add_argument("--subpop", default="happy",
                   help="subpopulation: a pattern name or 'all'")
    p.add_argument("--duration", type=float, default=1.0, help="window per point, s")
    p.add_argument("--discard", type=float, default=0.4, help="discarded transient, s")
    p.set_defaults(func=cmd_etf)

    p = subs.add_parser("learn", help="unsupervised learning run")
    _add_common(p)
    p.add_argument("--snapshot-every", type=int, default=None,
                   help="snapshot cadence in presentations (default from config)")
    p.add_argument("-v", "--verbose", action="store_true", help="print snapshot progress")
    p.set_defaults(func=cmd_learn)

    p = subs.add_parser("recall", help="degraded-stimulus recall test")
    _add_common(p)
    p.add_argument("--matrix", help="matrix file from a learn run (matrix.csv)")
    p.add_argument("--pattern", default="happy", help="pattern to degrade and present")
    p.add_argument("--removal", type=float, default=0.2,
                   help="fraction of active cells removed")
    p.add_argument("--trials", type=int, default=1, help="number of recall trials")
    p.set_defaults(func=cmd_recall)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except (CalibrationError, SchedulingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
