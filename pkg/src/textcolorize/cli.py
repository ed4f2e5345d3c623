"""Command-line entry point: train / colorize / eval / synth / serve.

Exit codes: 0 success, 2 usage or configuration error, 3 data error
(missing/corrupt files, empty datasets), 4 runtime abort.  Flag values
override environment variables, which override the config file, which
overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_run_config
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    ProviderError,
    TrainingAborted,
    ValidationError,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def cmd_train(args: argparse.Namespace) -> int:
    from .trainer import train

    overrides: dict[str, object] = {}
    for item in args.set or []:
        key, value = _parse_override(item)
        overrides[key] = value
    if args.run_dir:
        overrides["run_dir"] = args.run_dir
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.ablate_text:
        overrides["ablate_text"] = True
    config = load_run_config(args.config, overrides=overrides)
    result = train(config, resume_from=args.resume)
    print(f"trained {result.iterations} iterations")
    print(f"final checkpoint: {result.final_checkpoint}")
    print(f"best checkpoint:  {result.best_checkpoint} (val L1 {result.final_val_l1:.4f})")
    print(f"metrics log:      {result.metrics_log}")
    return EXIT_OK


def cmd_colorize(args: argparse.Namespace) -> int:
    from .data import load_png, save_png
    from .inference import colorize_rgb, load_inference_model

    model = load_inference_model(args.checkpoint)
    rgb = load_png(args.image)
    result = colorize_rgb(model, rgb, args.text)
    save_png(args.out, result / 255.0)
    print(f"wrote {args.out} ({result.shape[1]}x{result.shape[0]}, model {model.id})")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .data import load_dataset, load_manifest, synth_generate
    from .inference import load_inference_model
    from .metrics import evaluate, get_distance_provider

    model = load_inference_model(args.checkpoint)
    size = model.config.image_size
    if args.manifest:
        manifest = load_manifest(args.manifest)
        samples, report = load_dataset(manifest, image_size=size)
        if report.errors:
            log.warning("%s", report)
        samples = [s for s in samples if s.split == args.split]
        if not samples:
            raise DataError(f"manifest {args.manifest} has no {args.split} samples")
    else:
        samples = synth_generate(args.synth_n, args.synth_seed, image_size=size, split="test")

    providers = [get_distance_provider(spec) for spec in (args.provider or ["stub"])]
    result = evaluate(model.generator, model.vocab, samples, providers, model_id=model.id)
    text_path = Path(f"{args.report}.txt")
    json_path = Path(f"{args.report}.json")
    result.write(text_path, json_path)
    print(result.table())
    print(f"wrote {text_path} and {json_path}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    from .data import save_png, synth_generate

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = synth_generate(args.n, args.seed, image_size=args.image_size)
    records = []
    for s in samples:
        save_png(out / f"{s.id}.png", s.image)
        (out / f"{s.id}.txt").write_text(s.description + "\n", encoding="utf-8")
        records.append(
            {"id": s.id, "image": f"{s.id}.png", "split": s.split, "description": s.description}
        )
    manifest = {"name": f"synth-{args.seed}", "kind": "plain", "root": ".", "records": records}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    print(f"wrote {len(samples)} samples and manifest.json to {out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import load_service_config, run_service

    config = load_service_config(args.config)
    updates: dict[str, object] = {}
    if args.host:
        updates["host"] = args.host
    if args.port is not None:
        updates["port"] = args.port
    if args.checkpoint:
        updates["checkpoints"] = tuple(args.checkpoint)
    if args.frontend_dir:
        updates["frontend_dir"] = args.frontend_dir
    if updates:
        from dataclasses import replace

        config = replace(config, **updates)
    run_service(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textcolorize",
        description="Text-guided image colorization: training, inference, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the adversarial training loop")
    p_train.add_argument("--config", help="JSON run config file")
    p_train.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                         help="override a config value (repeatable)")
    p_train.add_argument("--run-dir", help="output directory for checkpoints and logs")
    p_train.add_argument("--iterations", type=int)
    p_train.add_argument("--ablate-text", action="store_true",
                         help="train with zero text embeddings (no-conditioning ablation)")
    p_train.add_argument("--resume", help="checkpoint to resume from")
    p_train.set_defaults(func=cmd_train)

    p_col = sub.add_parser("colorize", help="colorize one image offline")
    p_col.add_argument("--image", required=True, help="input PNG (grayscale or RGB)")
    p_col.add_argument("--text", required=True, help="color description")
    p_col.add_argument("--checkpoint", required=True)
    p_col.add_argument("--out", required=True, help="output PNG path")
    p_col.set_defaults(func=cmd_colorize)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test set")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--manifest", help="dataset manifest (uses its test split)")
    p_eval.add_argument("--split", default="test", choices=["train", "test"])
    p_eval.add_argument("--synth-n", type=int, default=50,
                        help="synthetic sample count when no manifest is given")
    p_eval.add_argument("--synth-seed", type=int, default=0)
    p_eval.add_argument("--provider", action="append",
                        help='perceptual distance provider: "stub" or VGG19 weights path')
    p_eval.add_argument("--report", required=True, help="output path prefix")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate the synthetic shapes corpus")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--image-size", type=int, default=64)
    p_synth.set_defaults(func=cmd_synth)

    p_serve = sub.add_parser("serve", help="run the colorization HTTP service")
    p_serve.add_argument("--config", help="JSON service config file")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--checkpoint", action="append", help="checkpoint to preload (repeatable)")
    p_serve.add_argument("--frontend-dir", help="static web UI directory to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, ValidationError, ProviderError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingAborted as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
