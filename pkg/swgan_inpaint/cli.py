"""
Command-line interface for S-WGAN inpainting.

Exit codes: 0 success, 1 validation error, 2 runtime or numeric abort.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

import pandas as pd

from swgan_inpaint.errors import (
    ConfigError,
    ContainerError,
    ImageIOError,
    NonFiniteLossError,
    ShapeError,
)
from swgan_inpaint.utils.config import PAPER_CRITIC_LR, PRESETS, RunConfig, StrokeMaskSpec, env_seed
from swgan_inpaint.utils.logging_setup import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (ConfigError, ShapeError, ImageIOError, ContainerError)


def run_command(func: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Map the error hierarchy onto exit codes."""
    try:
        return func(args)
    except NonFiniteLossError as e:
        logger.error(f"Numeric abort: {e}", extra={"term": e.term, "step": e.step})
        return EXIT_RUNTIME
    except VALIDATION_ERRORS as e:
        logger.error(f"{args.command} failed validation: {e}")
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


def cmd_mask_gen(args: argparse.Namespace) -> int:
    """Write mask_{index}.png stroke masks and print coverage statistics."""
    from swgan_inpaint.utils.images import mask_to_png, save_png
    from swgan_inpaint.utils.masks import coverage, synthesize_series

    raw = {}
    if args.spec:
        try:
            raw = json.loads(Path(args.spec).read_text())
        except FileNotFoundError:
            raise ConfigError([f"mask spec {args.spec} not found"]) from None
        except json.JSONDecodeError as e:
            raise ConfigError([f"mask spec {args.spec} is not valid JSON: {e}"]) from e
        known = {f.name for f in dataclasses.fields(StrokeMaskSpec)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"unknown mask spec key '{k}'" for k in unknown])
    spec = StrokeMaskSpec(**raw)
    seed = args.seed if args.seed is not None else env_seed()
    if seed is None:
        seed = spec.seed
    spec = dataclasses.replace(spec, seed=seed)
    if args.count < 0:
        raise ConfigError([f"--count must be non-negative, got {args.count}"])

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ImageIOError(f"cannot create output directory {out_dir}: {e}") from e

    masks = synthesize_series(spec, args.size, args.count)
    for index, mask in enumerate(masks):
        save_png(out_dir / f"mask_{index}.png", mask_to_png(mask))
    logger.info(f"Wrote {len(masks)} masks to {out_dir}", extra={"seed": seed, "size": args.size})

    print(f"\nGenerated {len(masks)} masks ({args.size}x{args.size}, seed {seed}) in {out_dir}")
    if masks:
        values = pd.Series([coverage(m) for m in masks])
        low, high = spec.coverage_bounds()
        print(f"  Coverage mean: {values.mean():.4f}")
        print(f"  Coverage min:  {values.min():.4f}")
        print(f"  Coverage max:  {values.max():.4f}")
        print(f"  Target range:  [{low}, {high}]")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from swgan_inpaint.ml.trainer import LOG_NAME, summarize_training_log, train_models
    from swgan_inpaint.utils.data_preparer import BatchLoader, resolve_entries, write_manifest

    config = RunConfig.from_file(args.config, preset=args.preset)
    if args.paper_lr:
        config.train.lr_critic = PAPER_CRITIC_LR
        logger.info(f"Critic learning rate set to {PAPER_CRITIC_LR}")
    if args.output_dir:
        config.output_dir = args.output_dir

    split = resolve_entries(config.data, config.train.seed)
    out_dir = Path(config.output_dir)
    write_manifest(split.train, out_dir / "train_manifest.json")
    write_manifest(split.test, out_dir / "test_manifest.json")
    loader = BatchLoader(
        split.train,
        config.generator.input_size,
        config.masks,
        invert_masks=config.data.invert_masks,
        num_workers=config.data.num_workers,
        cache_size=config.data.cache_size,
    )
    trainer, reports = train_models(config, loader, resume=args.resume)

    print(f"\nTraining finished at step {trainer.step} ({len(reports)} steps this run)")
    print(f"Outputs in {out_dir}")
    if reports:
        print("\nLoss summary:")
        print(summarize_training_log(out_dir / LOG_NAME).to_string(float_format=lambda v: f"{v:.6f}"))
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    from swgan_inpaint.ml.inference import inpaint, load_generator
    from swgan_inpaint.utils.images import denormalize, load_and_normalize, load_mask_file, save_png

    generator, _ = load_generator(args.checkpoint)
    image = load_and_normalize(args.image)
    mask = load_mask_file(args.mask, invert=args.invert_mask)
    reconstruction, elapsed = inpaint(generator, image, mask)
    save_png(args.out, denormalize(reconstruction))
    print(f"Wrote {args.out} (prediction took {elapsed * 1000:.1f} ms)")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from swgan_inpaint.ml.metrics import PSNR_CAP_DB, evaluate_pairs, pairs_from_dirs, pairs_from_manifest

    cap = PSNR_CAP_DB if args.psnr_cap is None else args.psnr_cap
    if cap <= 0:
        raise ConfigError([f"--psnr-cap must be positive, got {cap}"])
    pairs = pairs_from_manifest(args.pairs) if args.pairs else pairs_from_dirs(*args.dirs)
    report = evaluate_pairs(pairs, region=args.region, invert_masks=args.invert_masks, cap=cap)
    json_path, text_path = report.write(args.out_dir)
    print(report.to_text())
    print(f"\nReport written to {json_path} and {text_path}")
    return EXIT_OK


def cmd_grad_check(args: argparse.Namespace) -> int:
    from swgan_inpaint.ml.gradient_suite import run_gradient_suite

    results = run_gradient_suite(args.ops, points=args.points, seed=args.seed)
    table = pd.DataFrame(
        {
            "op": [r.op for r in results],
            "max_rel_err": [r.max_rel_err for r in results],
            "points": [r.points for r in results],
            "status": ["PASS" if r.passed else "FAIL" for r in results],
        }
    )
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"))
    failed = int((table["status"] == "FAIL").sum())
    print(f"\n{len(results) - failed}/{len(results)} ops passed (tolerance {results[0].tolerance:g})")
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swgan-inpaint",
        description="S-WGAN facial image inpainting",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  swgan-inpaint mask-gen --count 100 --size 64 --seed 0 --out-dir data/masks
  swgan-inpaint train --config data/config/desk.json
  swgan-inpaint train --config data/config/desk.json --paper-lr
  swgan-inpaint infer --checkpoint runs/desk/checkpoints/final.swgn --image face.png --mask mask_0.png --out out.png
  swgan-inpaint eval --dirs data/gt runs/desk/pred --region masked
  swgan-inpaint grad-check --ops all
        """,
    )
    parser.add_argument("--log-level", help="Logging level (default: LOG_LEVEL or INFO)")
    parser.add_argument("--log-file", help="Also log to this file (default: LOG_FILE)")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    mask_parser = subparsers.add_parser("mask-gen", help="Synthesize irregular stroke masks")
    mask_parser.add_argument("--spec", help="JSON file with stroke mask settings")
    mask_parser.add_argument("--count", type=int, default=10, help="Number of masks")
    mask_parser.add_argument("--size", type=int, default=64, help="Mask height and width")
    mask_parser.add_argument("--seed", type=int, help="Series seed (default: SWGAN_SEED or masks.seed)")
    mask_parser.add_argument("--out-dir", required=True, help="Output directory")
    mask_parser.set_defaults(func=cmd_mask_gen)

    train_parser = subparsers.add_parser("train", help="Train the generator and critic")
    train_parser.add_argument("--config", required=True, help="JSON run config")
    train_parser.add_argument("--preset", choices=sorted(PRESETS), help="Override the config's preset")
    train_parser.add_argument("--paper-lr", action="store_true",
                              help=f"Use the critic learning rate {PAPER_CRITIC_LR}")
    train_parser.add_argument("--resume", help="Checkpoint to resume from")
    train_parser.add_argument("--output-dir", help="Override the config's output directory")
    train_parser.set_defaults(func=cmd_train)

    infer_parser = subparsers.add_parser("infer", help="Inpaint one image")
    infer_parser.add_argument("--checkpoint", required=True, help="SWGN checkpoint")
    infer_parser.add_argument("--image", required=True, help="8-bit RGB PNG")
    infer_parser.add_argument("--mask", required=True, help="Mask PNG (white = known)")
    infer_parser.add_argument("--invert-mask", action="store_true", help="Treat black as known")
    infer_parser.add_argument("--out", required=True, help="Output PNG")
    infer_parser.set_defaults(func=cmd_infer)

    eval_parser = subparsers.add_parser("eval", help="MSE, MAE, PSNR and SSIM over image pairs")
    source = eval_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--pairs", help="JSON list of {ground_truth, prediction[, mask]}")
    source.add_argument("--dirs", nargs=2, metavar=("GT_DIR", "PRED_DIR"), help="Pair PNGs by name")
    eval_parser.add_argument("--region", choices=["full", "masked"], default="full")
    eval_parser.add_argument("--invert-masks", action="store_true")
    eval_parser.add_argument("--psnr-cap", type=float, help="PSNR reported for identical images, in dB (default: 99)")
    eval_parser.add_argument("--out-dir", default="eval", help="Where metrics.json/metrics.txt go")
    eval_parser.set_defaults(func=cmd_eval)

    grad_parser = subparsers.add_parser("grad-check", help="Finite-difference gradient suite")
    grad_parser.add_argument("--ops", nargs="+", default=["all"], help="Op names or 'all'")
    grad_parser.add_argument("--points", type=int, default=100, help="Random points checked per op")
    grad_parser.add_argument("--seed", type=int, default=0)
    grad_parser.set_defaults(func=cmd_grad_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        setup_logging(args.log_level, args.log_file)
    except ConfigError as e:
        print(f"Invalid logging settings: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return run_command(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
