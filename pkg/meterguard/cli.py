"""
Command-line entry point.

Usage:
    python -m meterguard reproduce --seed 7 --jobs 4
    python -m meterguard prepare-data --synthetic --count 20000 --seed 7
    python -m meterguard attack --kind fgsm --epsilon 0.1 --surrogate fnn-attacker
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_run_config, settings
from .models.architectures import ArchitectureId
from .schemas.attack import AttackConfig, AttackKind
from .schemas.run import RunConfig
from .services.attacks import generate_batch, save_batch
from .services.pipeline import Pipeline
from .utils.errors import MissingArtifactError, ValidationError, handle_stage_error

logger = logging.getLogger(__name__)

COMMANDS = ("prepare-data", "train", "distill", "attack", "evaluate", "report", "reproduce")

# Flags that map one-to-one onto RunConfig fields
_OVERRIDES = {
    "seed": "seed",
    "jobs": "jobs",
    "force": "force",
    "data_in": "data_in",
    "workdir": "workdir",
    "out": "reports_out",
    "count": "rows_per_side",
    "eps_grid": "eps_grid",
    "step_max": "step_max",
    "size_grid": "size_grid",
    "sigma": "sigma",
    "temperature": "temperature",
    "epochs": "epochs",
    "width_scale": "width_scale",
    "vectors_per_cell": "vectors_per_cell",
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value run configuration file")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--jobs", type=int, help="Worker threads")
    common.add_argument("--force", action="store_true", default=None, help="Rebuild cached stage outputs")
    common.add_argument("--data-in", help="Genuine profiles CSV, or raw readings with --raw")
    common.add_argument("--workdir", help="Stage output directory")
    common.add_argument("--out", help="Report directory")
    source = common.add_mutually_exclusive_group()
    source.add_argument("--synthetic", dest="raw", action="store_false", default=None, help="Synthesize genuine profiles")
    source.add_argument("--raw", dest="raw", action="store_true", default=None, help="--data-in holds raw readings")
    common.add_argument("--count", type=int, help="Rows per side (defender and attacker datasets)")
    common.add_argument("--eps-grid", help='Comma list or "log:a:b:n"')
    common.add_argument("--step-max", type=int)
    common.add_argument("--size-grid", help='Comma list or "log:a:b:n"')
    common.add_argument("--sigma", type=float, help="Random init standard deviation")
    common.add_argument("--temperature", type=float, help="Distillation temperature")
    common.add_argument("--epochs", type=int)
    common.add_argument("--width-scale", type=float)
    common.add_argument("--vectors-per-cell", type=int)
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="meterguard",
        description="Adversarial energy-theft workbench: train detectors, attack them, report.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.add_parser("prepare-data", parents=[common], help="Build defender/attacker datasets")
    sub.add_parser("train", parents=[common], help="Train the six classifiers")
    sub.add_parser("distill", parents=[common], help="Train distilled defenders")

    attack = sub.add_parser(
        "attack", parents=[common],
        help="Calibrate ssf-iter on the attacker surrogates, or generate one batch with --kind",
    )
    attack.add_argument("--kind", choices=[k.value for k in AttackKind])
    attack.add_argument("--surrogate", default="fnn-attacker", help="Model id whose gradients are used")
    attack.add_argument("--epsilon", type=float)
    attack.add_argument("--step", type=int)
    attack.add_argument("--size", type=float)
    attack.add_argument("--max-iter", type=int)
    attack.add_argument("--alpha", type=float)
    attack.add_argument("--u", type=float)
    attack.add_argument("--batch-size", dest="batch_count", type=int, default=1000, help="Vectors to generate")
    attack.add_argument("--batch-out", help="Destination CSV (default: <out>/batch-<kind>.csv)")

    sub.add_parser("evaluate", parents=[common], help="Run every attack sweep")
    sub.add_parser("report", parents=[common], help="Write report, plot-data and acceptance files")
    sub.add_parser("reproduce", parents=[common], help="Run all stages end to end")
    return parser


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {field: getattr(args, flag, None) for flag, field in _OVERRIDES.items()}
    overrides["raw"] = getattr(args, "raw", None)
    return load_run_config(args.config, overrides)


def _single_batch(args: argparse.Namespace, pipeline: Pipeline) -> Path:
    """Generate one adversarial batch against a trained surrogate."""
    cfg = pipeline.cfg
    kind = AttackKind(args.kind)
    params = {
        "epsilon": args.epsilon, "step": args.step, "size": args.size, "max_iter": args.max_iter,
        "alpha": args.alpha, "u": args.u,
    }
    fields = {name: value for name, value in params.items() if value is not None}
    if kind in (AttackKind.FGSM, AttackKind.FGV, AttackKind.DEEPFOOL, AttackKind.SSF_ITER, AttackKind.INIT_ONLY):
        fields["sigma"] = cfg.sigma
    try:
        config = AttackConfig(kind=kind, seed=cfg.seed, **fields)
    except ValueError as e:
        raise ValidationError(f"Invalid {kind.value} parameters: {e}") from e

    ArchitectureId.parse(args.surrogate)
    registry = pipeline.registry()
    if args.surrogate not in registry:
        raise MissingArtifactError("Model", args.surrogate)
    pool = pipeline.holdout_matrix() if kind is AttackKind.VA1 else None
    batch = generate_batch(config, registry[args.surrogate], args.batch_count, pool)
    out = Path(args.batch_out) if args.batch_out else Path(cfg.reports_out) / f"batch-{kind.value}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_batch(batch, out)
    logger.info(f"✅ Wrote {len(batch)} {config.label()} vectors to {out}")
    return out


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        0 on success, 2 on usage or validation errors, 1 on other failures
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    configure_logging(args.log_level)
    try:
        cfg = run_config_from_args(args)
        pipeline = Pipeline(cfg)
        if args.command == "reproduce":
            pipeline.run(cfg.stages)
        elif args.command == "prepare-data":
            pipeline.prepare_data()
        elif args.command == "train":
            pipeline.train()
        elif args.command == "distill":
            pipeline.distill()
        elif args.command == "attack":
            if args.kind:
                _single_batch(args, pipeline)
            else:
                pipeline.attack()
        elif args.command == "evaluate":
            pipeline.evaluate()
        elif args.command == "report":
            pipeline.report()
        logger.debug(f"Cache stats: {pipeline.cache.get_stats()}")
        logger.info(f"✅ {args.command} finished")
        return 0
    except Exception as e:
        code = handle_stage_error(e, context=args.command)
        logger.error(f"❌ {args.command} failed (exit {code})")
        return code


def main() -> None:
    sys.exit(run_cli())
