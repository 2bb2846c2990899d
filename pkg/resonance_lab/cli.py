"""
Command-line entry point

    python -m resonance_lab.cli linear-decay --dim 1 --out runs/linear
    python -m resonance_lab.cli nonlinear-scatter --config data/studies/nonlinear-scatter.conf --seed 7
    python -m resonance_lab.cli list
    python -m resonance_lab.cli fit runs/linear/data.csv --expected-slope -0.25 --column sup

Exit codes: 0 pass, 1 invalid spec or config, 2 any FAIL, 3 any UNTRUSTED without FAIL.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from resonance_lab.config import settings
from resonance_lab.errors import BlowUpError
from resonance_lab.models import EXIT_CODES, EXIT_INVALID_SPEC, StudyName, StudySpec, Verdict
from resonance_lab.studies import fit_and_verdict, run_study, study_registry
from resonance_lab.utils import configure_logging

logger = logging.getLogger("resonance_lab.cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonance-lab",
        description="Pseudospectral experiments for the fourth-order Schrödinger equation",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name in StudyName:
        study = commands.add_parser(name.value, help=study_registry.require(name.value).schema.description)
        study.add_argument("--config", type=Path, default=None,
                           help="key=value study config (default: STUDY_CONFIG_DIRECTORY/<study>.conf if present)")
        study.add_argument("--seed", type=int, default=None, help="64-bit seed")
        study.add_argument("--out", type=Path, default=None, help="Output directory")
        study.add_argument("--dim", type=int, default=None, help="Spatial dimension")
        study.add_argument("--grid", type=int, default=None, help="Grid points per axis (power of two)")
        study.add_argument("--smoke", action="store_true", help="Coarse 5-D smoke mode (nonlinear-scatter)")
        study.add_argument("--quiet", action="store_true", help="Only warnings and errors")

    listing = commands.add_parser("list", help="List studies and their checks")
    listing.add_argument("--json", action="store_true", help="Print full schemas as JSON")

    fit = commands.add_parser("fit", help="Fit a log-log slope from a data.csv")
    fit.add_argument("csv", type=Path, help="CSV file")
    fit.add_argument("--expected-slope", type=float, required=True, help="Reference slope")
    fit.add_argument("--tolerance", type=float, default=0.05, help="Allowed deviation")
    fit.add_argument("--t-column", default="t", help="Time column")
    fit.add_argument("--column", default=None, help="Value column (first numeric column when omitted)")
    fit.add_argument("--quiet", action="store_true", help="Only warnings and errors")
    return parser


def load_spec(args: argparse.Namespace) -> StudySpec:
    """Spec from the config file (explicit or default) with command-line overrides"""
    overrides = {"name": args.command, "seed": args.seed, "dim": args.dim, "n_per_axis": args.grid,
                 "smoke": True if args.smoke else None}
    config = args.config
    if config is None:
        default = Path(settings.STUDY_CONFIG_DIRECTORY) / f"{args.command}.conf"
        config = default if default.is_file() else None
    if config is not None:
        return StudySpec.from_config(config, **overrides)
    return StudySpec(**{key: value for key, value in overrides.items() if value is not None})


def _list(as_json: bool) -> int:
    schemas = study_registry.get_all_schemas()
    if as_json:
        print(json.dumps(schemas, indent=2, default=str))
        return 0
    for schema in schemas:
        print(f"{schema['name']:<20} {schema['description']}")
        print(f"{'':<20} checks: {', '.join(schema['checks'])}")
    return 0


def _fit(args: argparse.Namespace) -> int:
    try:
        result = fit_and_verdict(args.csv, args.expected_slope, args.tolerance,
                                 t_column=args.t_column, value_column=args.column)
    except (FileNotFoundError, ValueError) as e:
        logger.error("❌ %s", e)
        return EXIT_INVALID_SPEC
    print(json.dumps(result.model_dump(mode="json"), indent=2))
    return EXIT_CODES[Verdict.PASS if result.verdict == Verdict.RECORDED else result.verdict]


def _study(args: argparse.Namespace) -> int:
    try:
        spec = load_spec(args)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error("❌ Invalid study spec: %s", e)
        return EXIT_INVALID_SPEC
    try:
        outcome, target = run_study(spec, args.out)
    except BlowUpError as e:
        logger.error("❌ %s", e)
        return EXIT_CODES[Verdict.FAIL]
    print(f"{spec.name.value}: {outcome.verdict.value} -> {target}")
    return outcome.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("WARNING" if getattr(args, "quiet", False) else None)
    if args.command == "list":
        return _list(args.json)
    if args.command == "fit":
        return _fit(args)
    return _study(args)


if __name__ == "__main__":
    sys.exit(main())
