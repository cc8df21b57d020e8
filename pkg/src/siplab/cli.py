"""Command-line interface.

Subcommands map onto the experiment kinds plus the acceptance suite; every
stochastic run is driven by a JSON configuration file and is bit-for-bit
reproducible under a fixed seed and thread count.

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 acceptance failure.
"""

import argparse
import json
import os
import sys

from . import config as _config
from .acceptance import run_all
from .config import ConfigError, ExperimentKind
from .experiments import resolve_threads, run, sweep_report, write_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ACCEPTANCE = 4

_KIND_BY_COMMAND = {
    "hydro": ExperimentKind.HYDRO,
    "duality-check": ExperimentKind.DUALITY_CHECK,
    "mosco-check": ExperimentKind.MOSCO_CHECK,
    "moment-bounds": ExperimentKind.MOMENT_BOUNDS,
}


def _add_run_flags(sub):
    sub.add_argument("--config", required=True, metavar="PATH",
                     help="JSON experiment configuration")
    sub.add_argument("--out", metavar="DIR",
                     help="output directory (overrides the config)")
    sub.add_argument("--replicas", type=int, metavar="R",
                     help="replica count (overrides the config)")
    sub.add_argument("--seed", type=int, metavar="S",
                     help="master seed (overrides the config)")
    sub.add_argument("--threads", type=int, metavar="K",
                     help="worker processes (SIPLAB_THREADS overrides)")
    sub.add_argument("--check", action="store_true",
                     help="exit 4 if the run's verdict fails")
    sub.add_argument("--force", action="store_true",
                     help="overwrite an existing output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siplab",
        description="Simulation and numerical verification of the inclusion "
                    "process with long-range jumps.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("simulate", "run the experiment kind named in the config"),
        ("hydro", "hydrodynamic-limit convergence run"),
        ("duality-check", "forward-vs-dual Monte Carlo identity check"),
        ("fluctuations", "fluctuation-field statistics (stationary for a "
                         "constant profile, non-equilibrium otherwise)"),
        ("mosco-check", "Dirichlet-form and generator convergence tables"),
        ("moment-bounds", "Monte Carlo moments against a priori bounds"),
        ("sweep", "hydro run plus a convergence table over the n-ladder"),
    ]:
        _add_run_flags(subs.add_parser(name, help=text))
    subs.add_parser("check", help="run the full acceptance suite")
    return parser


def _load_config(args) -> "_config.ExperimentConfig":
    cfg = _config.load(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    command_kind = _KIND_BY_COMMAND.get(args.command)
    if args.command == "fluctuations":
        command_kind = (ExperimentKind.STATIONARY_FLUCT
                        if cfg.profile.kind.value == "constant"
                        else ExperimentKind.NONEQ_FLUCT)
    if args.command == "sweep":
        command_kind = ExperimentKind.HYDRO
    if command_kind is not None:
        overrides["kind"] = command_kind
    if not overrides:
        return cfg
    doc = _config.serialize(cfg)
    doc["kind"] = overrides.get("kind", cfg.kind).value
    doc["out_dir"] = overrides.get("out_dir", cfg.out_dir)
    doc["replicas"] = overrides.get("replicas", cfg.replicas)
    doc["master_seed"] = overrides.get("master_seed", cfg.master_seed)
    return _config.parse(doc)


def _run_command(args) -> int:
    cfg = _load_config(args)
    threads = resolve_threads(args.threads)
    manifest = run(cfg, threads=threads, force=args.force)
    print(f"wrote {len(manifest.files)} files to {cfg.out_dir} "
          f"(manifest {manifest.manifest_hash[:12]})")
    if args.command == "sweep":
        rows = sweep_report(manifest)
        path = os.path.join(cfg.out_dir, "sweep.csv")
        write_csv(path, ["metric", "t", "phi", "n", "value", "ok"], rows)
        print(f"wrote {path}")
    if manifest.verdict:
        status = "pass" if manifest.verdict.get("passed", True) else "FAIL"
        print(f"verdict: {status}")
        if args.check and not manifest.verdict.get("passed", True):
            return EXIT_ACCEPTANCE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        try:
            return EXIT_OK if run_all() else EXIT_ACCEPTANCE
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    try:
        return _run_command(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
