"""Command-line driver reproducing the figure tables."""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from config import config
from exceptions import DomainError, InvalidArgumentError, TradeoffError, ValidationError
from logger import setup_logger
from models import AsymptoticConfig, SweepTable
from services.sweep_service import SweepService
from services.validation_service import ValidationService
from utils.grid_parser import GridParser
from utils.table_codec import TableCodec

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_LAMBDA_GRID = "1e-3:1e3:40:log"
DEFAULT_EPS_GRID = "0.01:2:25:log"
DEFAULT_INV_DELTA_GRID = "0.2:3:57:lin"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tradeoffs",
        description="Standard vs adversarial risk tradeoffs in Gaussian linear regression",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sigma", type=float, default=config.DEFAULT_SIGMA, help="normalized noise level")
    common.add_argument("--v", type=float, default=config.DEFAULT_V, help="signal norm V")
    common.add_argument("--eps-test", type=float, default=config.DEFAULT_EPS_TEST, help="test-time budget")
    common.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    common.add_argument("--json", action="store_true", help="emit one JSON document instead of CSV")
    common.add_argument("--stamp", action="store_true", help="record wall-clock time in provenance")
    common.add_argument("--workers", type=int, default=None, help="process pool size")

    monte_carlo = argparse.ArgumentParser(add_help=False)
    monte_carlo.add_argument("--p", type=int, default=config.DEFAULT_P, help="parameter count")
    monte_carlo.add_argument("--seeds", type=int, default=config.DEFAULT_SEEDS, help="replicates per point")
    monte_carlo.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="master seed")

    sub = parser.add_subparsers(dest="command", required=True)

    pareto = sub.add_parser("pareto", parents=[common], help="Pareto-optimal (SR, AR) over lambda")
    pareto.add_argument("--lambda-grid", default=DEFAULT_LAMBDA_GRID)

    for name, help_text, deltas in (
        ("algo-curve", "adversarial training tradeoff curves, one per delta", "1,2,5,20"),
        ("sr-sweep", "standard risk against eps, one table per delta", "0.5,2,10"),
    ):
        curve = sub.add_parser(name, parents=[common, monte_carlo], help=help_text)
        curve.add_argument("--eps-grid", default=DEFAULT_EPS_GRID)
        curve.add_argument("--delta", default=deltas, help="comma list or grid of delta values")
        curve.add_argument("--empirical", action="store_true", help="add Monte Carlo columns")

    descent = sub.add_parser("double-descent", parents=[common, monte_carlo], help="standard risk against 1/delta")
    descent.add_argument("--inv-delta-grid", default=DEFAULT_INV_DELTA_GRID)
    descent.add_argument("--eps", default="0,0.1,0.4,0.8", help="comma list of training budgets")
    descent.add_argument("--empirical", action="store_true", help="add Monte Carlo columns")

    montecarlo = sub.add_parser("montecarlo", parents=[common, monte_carlo], help="per-replicate empirical risks")
    montecarlo.add_argument("--delta", type=float, default=2.0)
    montecarlo.add_argument("--eps", type=float, default=0.5)

    validate = sub.add_parser("validate", help="run the acceptance suite")
    validate.add_argument("--quick", action="store_true", help="5x fewer seeds, 2x tolerances")
    validate.add_argument("--only", default=None, help="comma list of criterion names")
    validate.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    validate.add_argument("--workers", type=int, default=None)
    validate.add_argument("--out", type=Path, default=None)
    return parser


def _config(args: argparse.Namespace, delta: float = 2.0, eps_train: float = 0.0) -> AsymptoticConfig:
    return AsymptoticConfig(
        delta=delta, sigma=args.sigma, v_norm=args.v, eps_train=eps_train, eps_test=args.eps_test
    )


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {out}")


def _emit_tables(tables: List[SweepTable], args: argparse.Namespace) -> None:
    text = TableCodec.to_json(tables) if args.json else TableCodec.dumps_many(tables)
    _emit(text, args.out)


def run_command(args: argparse.Namespace) -> int:
    """Dispatch a parsed command line; returns the exit status."""
    if args.command == "validate":
        only = None if args.only is None else [s.strip() for s in args.only.split(",") if s.strip()]
        suite = ValidationService("quick" if args.quick else "full", workers=args.workers, seed=args.seed)
        report = suite.run_suite(only)
        _emit(json.dumps(report.to_dict(), indent=2, default=float) + "\n", args.out)
        if not report.passed:
            logger.error(f"Failed criteria: {', '.join(report.failed_names())}")
            return EXIT_FAILURE
        return EXIT_OK

    sweeps = SweepService(workers=args.workers, stamp=args.stamp)
    if args.command == "pareto":
        tables = [sweeps.cmd_pareto(_config(args), GridParser.parse(args.lambda_grid))]
    elif args.command in ("algo-curve", "sr-sweep"):
        command = sweeps.cmd_algo_curve if args.command == "algo-curve" else sweeps.cmd_sr_sweep
        tables = command(
            _config(args),
            GridParser.parse(args.eps_grid),
            GridParser.parse(args.delta),
            empirical=args.empirical,
            seeds=args.seeds,
            p=args.p,
            seed=args.seed,
        )
    elif args.command == "double-descent":
        tables = sweeps.cmd_double_descent(
            _config(args),
            GridParser.parse(args.inv_delta_grid),
            GridParser.parse_list(args.eps),
            empirical=args.empirical,
            seeds=args.seeds,
            p=args.p,
            seed=args.seed,
        )
    else:
        cfg = _config(args, delta=args.delta, eps_train=args.eps)
        tables = [sweeps.cmd_montecarlo(cfg, p=args.p, seeds=args.seeds, seed=args.seed)]
    _emit_tables(tables, args)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (ValidationError, InvalidArgumentError, DomainError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except TradeoffError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
