"""Command-line entry points.

    cas run --domain {campus|av} [--task {single|random}] --episodes N
            --trials K --seed S [--config PATH] --out DIR
    cas validate --config PATH
    cas competence [--domain {campus|av}] [--config PATH]

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .cas import competence
from .domains import ConfigError, build_av, build_campus, load_config
from .dump import dump_competence
from .harness import (experiment_config, run_experiment, write_csv,
                      write_events, write_summary)

_BUILDERS = {"campus": build_campus, "av": build_av}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _load_bundle(args):
    cfg = load_config(path=getattr(args, "config", None),
                      domain=getattr(args, "domain", None))
    name = cfg.get("domain")
    if name not in _BUILDERS:
        raise ConfigError(f"unknown domain {name!r}")
    if getattr(args, "domain", None) and args.domain != name:
        raise ConfigError(
            f"--domain {args.domain} does not match config domain {name}")
    return cfg, _BUILDERS[name](cfg)


def _cmd_run(args) -> int:
    cfg, bundle = _load_bundle(args)
    ec = experiment_config(cfg, episodes=args.episodes, trials=args.trials,
                           seed=args.seed, task=args.task)
    result = run_experiment(bundle, ec)
    os.makedirs(args.out, exist_ok=True)
    write_csv(result.records, os.path.join(args.out, "metrics.csv"))
    write_summary(result.records, os.path.join(args.out, "summary.json"))
    write_events(result.events, os.path.join(args.out, "events.csv"))
    if result.audit_violations:
        print(f"audit: {result.audit_violations} autonomy-profile violations",
              file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(result.records)} records to {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    # the domain builders validate the SSP and config tables on construction
    cfg, bundle = _load_bundle(args)
    print(f"ok: domain={cfg['domain']} states={bundle.ssp.n_states} "
          f"actions={bundle.ssp.n_actions} levels={len(bundle.levels)}")
    return EXIT_OK


def _cmd_competence(args) -> int:
    cfg, bundle = _load_bundle(args)
    comp = competence(bundle.make_cas(bundle.reference_lambda()),
                      bundle.reference_lambda())
    print(dump_competence(comp, bundle.state_names, bundle.action_names))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cas", description="competence-aware planning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--domain", choices=sorted(_BUILDERS))
    run.add_argument("--task", choices=["single", "random"], default="single")
    run.add_argument("--episodes", type=int, required=True)
    run.add_argument("--trials", type=int, required=True)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--config", help="domain config YAML path")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a domain config")
    val.add_argument("--domain", choices=sorted(_BUILDERS))
    val.add_argument("--config", help="domain config YAML path")
    val.set_defaults(func=_cmd_validate)

    comp = sub.add_parser("competence", help="dump the chi table")
    comp.add_argument("--domain", choices=sorted(_BUILDERS))
    comp.add_argument("--config", help="domain config YAML path")
    comp.set_defaults(func=_cmd_competence)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures (solver, execution)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
