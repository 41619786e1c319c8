"""Command line: `fen train` and `fen export`."""

from __future__ import annotations

import argparse
import os
import sys

from .config import FenConfig
from .export import export_corpus
from .train import load_checkpoint, train_toy


def _load_config(args) -> FenConfig:
    config = FenConfig.from_file(args.config) if args.config else FenConfig()
    if args.seed is not None:
        config.seed = args.seed
    return config


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="fen", description="Toy feature extraction network")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train on the procedural identity dataset")
    sp.add_argument("--config", help="config JSON")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True, help="checkpoint path (.pt)")

    sp = sub.add_parser("export", help="export per-stage feature sets")
    sp.add_argument("--config", help="config JSON (defaults to the checkpoint's)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--gallery-per-class", type=int, default=6)
    sp.add_argument("--probes-per-class", type=int, default=4)

    args = parser.parse_args(argv)
    if args.command == "train":
        config = _load_config(args)
        _, _, history = train_toy(config, checkpoint_path=args.out)
        print(f"trained {config.steps} steps: loss {history[0]:.4f} -> {history[-1]:.4f}")
        print(f"checkpoint: {args.out}")
        return
    if args.command == "export":
        model, _, ckpt_config, _ = load_checkpoint(args.checkpoint)
        config = FenConfig.from_file(args.config) if args.config else ckpt_config
        if args.seed is not None:
            config.seed = args.seed
        os.makedirs(args.out, exist_ok=True)
        export_corpus(model, config, args.out,
                      gallery_per_class=args.gallery_per_class,
                      probes_per_class=args.probes_per_class)
        print(f"exported {config.num_classes} identities to {args.out}")
        return
    print(f"unknown command {args.command!r}", file=sys.stderr)
    sys.exit(2)


if __name__ == "__main__":
    main()
