"""Command line interface.

Subcommands::

    fiberpeel run --config cfg.json --branch contact|separated|unstable --out dir
    fiberpeel preset <name> --out cfg.json
    fiberpeel refforce --config cfg.json
    fiberpeel verify --config cfg.json

Exit codes: 0 success, 2 configuration/validation error, 3 solver terminated
without any converged step, 1 verification failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import scenario
from .scenario import NoConvergedStepError, ValidationError


def _add_config_arg(parser):
    parser.add_argument("--config", required=True, help="scenario config file (JSON)")


def build_parser():
    parser = argparse.ArgumentParser(prog="fiberpeel")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="per-step progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one branch of a scenario")
    _add_config_arg(p_run)
    p_run.add_argument("--branch", choices=("contact", "separated", "unstable"),
                       default="contact")
    p_run.add_argument("--out", required=True, help="output directory")

    p_preset = sub.add_parser("preset", help="write a preset configuration")
    p_preset.add_argument("name", help=f"one of {scenario.preset_names()}")
    p_preset.add_argument("--out", required=True, help="output file; families write "
                          "one file per member next to it")

    p_ref = sub.add_parser("refforce", help="print the reference force")
    _add_config_arg(p_ref)

    p_verify = sub.add_parser("verify", help="run the property suite")
    _add_config_arg(p_verify)
    return parser


def cmd_run(args):
    config = scenario.load_config(args.config)
    scenario.validate(config)
    result = scenario.run(config, args.branch, args.out)
    print(f"{len(result.records)} converged steps -> {result.curve_path}")
    print(f"summary: {os.path.join(result.out_dir, config.outputs.summary)}")
    return 0


def cmd_preset(args):
    members = scenario.preset_members(args.name)
    if len(members) == 1:
        scenario.save_config(members[0][1], args.out)
        print(args.out)
        return 0
    stem, ext = os.path.splitext(args.out)
    for tag, config in members:
        path = f"{stem}-{tag}{ext or '.json'}"
        scenario.save_config(config, path)
        print(path)
    return 0


def cmd_refforce(args):
    config = scenario.load_config(args.config)
    scenario.validate(config)
    f_ref = scenario.compute_reference_force(config)
    print(f"{f_ref:.12e}")
    return 0


def cmd_verify(args):
    config = scenario.load_config(args.config)
    scenario.validate(config)
    from .verification import run_property_suite

    results = run_property_suite(config)
    failures = 0
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
        failures += 0 if passed else 1
    return 0 if failures == 0 else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    np.seterr(over="ignore")
    try:
        handler = {
            "run": cmd_run,
            "preset": cmd_preset,
            "refforce": cmd_refforce,
            "verify": cmd_verify,
        }[args.command]
        return handler(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoConvergedStepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
