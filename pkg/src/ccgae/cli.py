"""Command-line entry point: train, sample, gradcheck, inspect.

Exit codes: 0 success, 2 config/usage problem, 3 data or file-format problem,
4 non-finite loss during training, 5 gradient check over threshold.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from .config import RunConfig, format_config, load_config
from .core import Activation, LossKind
from .corruption import CorruptionKind, CorruptionSpec
from .data import Dataset, binarize, load_idx_images, load_idx_labels, load_raw_dataset
from .errors import ConfigError, DivergenceError, FormatError
from .gradients import gae_finite_diff_errors, random_gae_instance
from .models import DaeParams, GaeParams, init_dae, init_gae, load_checkpoint, save_dae, save_gae
from .pgm import write_pgm_grid
from .rng import RngStream
from .sampling import ChainConfig, ChainInit, OutputMode, run_chain, save_trace
from .training import fit

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_GRADCHECK = 5

GRADCHECK_THRESHOLD = 1e-4
SAMPLE_CORRUPTION = CorruptionSpec(CorruptionKind.SALT_PEPPER, 0.5)


def resolve_threads() -> int:
    """Worker cap from CCGAE_THREADS; defaults to machine parallelism."""
    raw = os.environ.get("CCGAE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"CCGAE_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"CCGAE_THREADS must be >= 1, got {threads}")
    return threads


def _load_training_data(cfg: RunConfig) -> Dataset:
    if cfg.train_raw is not None:
        dataset = load_raw_dataset(cfg.train_raw)
        if cfg.binarize_threshold is not None:
            dataset = Dataset(
                binarize(dataset.examples, cfg.binarize_threshold),
                dataset.labels,
                dataset.n_classes,
            )
        return dataset
    images = load_idx_images(cfg.train_images)
    labels = load_idx_labels(cfg.train_labels)
    if cfg.binarize_threshold is not None:
        images = binarize(images, cfg.binarize_threshold)
    n_classes = cfg.n_y if cfg.model == "gae" else int(labels.max()) + 1 if labels.size else 1
    return Dataset(examples=images, labels=labels, n_classes=n_classes)


def cmd_train(config_path: str) -> int:
    cfg = load_config(config_path)
    print("# effective config")
    print(format_config(cfg), end="")
    print("# training")

    dataset = _load_training_data(cfg)
    if dataset.n_x != cfg.n_x:
        raise FormatError(f"dataset has n_x={dataset.n_x}, config declares n_x={cfg.n_x}")

    init_rng = RngStream.from_seed(cfg.hp.seed).split("init")
    if cfg.model == "gae":
        params: GaeParams | DaeParams = init_gae(
            cfg.n_x, cfg.n_y, cfg.n_f, cfg.n_h,
            cfg.hidden_activation, cfg.output_activation, init_rng,
        )
    else:
        params = init_dae(
            cfg.n_x, cfg.n_h, cfg.hidden_activation, cfg.output_activation,
            init_rng, tied=cfg.tied,
        )

    log_lines = ["epoch,mean_loss,lr,wall_seconds"]
    print(log_lines[0])

    def on_epoch(stats):
        line = f"{stats.epoch},{stats.mean_loss!r},{stats.lr!r},{stats.wall_seconds:.3f}"
        log_lines.append(line)
        print(line, flush=True)

    resolve_threads()  # fail fast on a bad CCGAE_THREADS value
    fit(params, dataset, cfg.hp, on_epoch=on_epoch)

    if cfg.model == "gae":
        save_gae(cfg.checkpoint_out, params, cfg.hp.loss)
    else:
        save_dae(cfg.checkpoint_out, params, cfg.hp.loss)
    print(f"wrote checkpoint {cfg.checkpoint_out}")
    if cfg.log_out is not None:
        Path(cfg.log_out).write_text("\n".join(log_lines) + "\n")
        print(f"wrote log {cfg.log_out}")
    return EXIT_OK


def _tile_shape(n_x: int) -> tuple[int, int]:
    side = math.isqrt(n_x)
    return (side, side) if side * side == n_x else (1, n_x)


def cmd_sample(
    checkpoint: str,
    label: int,
    steps: int,
    seed: int,
    out_path: str,
    trace_path: str | None = None,
) -> int:
    params, loss = load_checkpoint(checkpoint)
    if not isinstance(params, GaeParams):
        raise ValueError("sampling conditions on a class label and needs a gae checkpoint")
    mode = (
        OutputMode.BERNOULLI_SAMPLE if loss is LossKind.CROSS_ENTROPY else OutputMode.EXPECTED_VALUE
    )
    chain_cfg = ChainConfig(
        steps=steps,
        corruption=SAMPLE_CORRUPTION,
        output_mode=mode,
        init=ChainInit.ZEROS,
        seed=seed,
    )
    trace = run_chain(params, label, chain_cfg)
    rows, cols = _tile_shape(params.n_x)
    write_pgm_grid(list(trace.expected), rows, cols, grid_cols=min(25, steps), out_path=out_path)
    print(f"wrote {out_path} ({steps} steps, label {label}, {mode.value} states)")
    if trace_path is not None:
        save_trace(trace_path, trace)
        print(f"wrote trace {trace_path}")
    return EXIT_OK


def cmd_gradcheck(dims: tuple[int, int, int, int], seed: int) -> int:
    n_x, n_y, n_f, n_h = dims
    total = n_f * (n_x + n_y + n_h) + n_h + n_x
    if total > 10_000:
        raise ValueError(f"dims give {total} parameters; keep <= 10000 for finite differences")
    root = RngStream.from_seed(seed)
    worst_block, worst_err = "", -1.0
    for kind in (LossKind.SQUARED_ERROR, LossKind.CROSS_ENTROPY):
        for hidden in (Activation.RELU, Activation.LOGISTIC):
            rng = root.split("gradcheck", kind.value, hidden.value)
            p, x_tilde, y, target = random_gae_instance(
                n_x, n_y, n_f, n_h, kind, hidden, Activation.LOGISTIC, rng
            )
            errors = gae_finite_diff_errors(p, x_tilde, y, target, kind)
            cells = "  ".join(f"{name}={err:.3e}" for name, err in errors.items())
            print(f"{kind.value:>13} / {hidden.value:<8} {cells}")
            for name, err in errors.items():
                if err > worst_err:
                    worst_block, worst_err = name, err
    print(f"max relative error {worst_err:.3e} (threshold {GRADCHECK_THRESHOLD:g})")
    if worst_err >= GRADCHECK_THRESHOLD:
        print(f"FAIL: block {worst_block!r} exceeds threshold", file=sys.stderr)
        return EXIT_GRADCHECK
    print("OK")
    return EXIT_OK


def cmd_inspect(checkpoint: str) -> int:
    params, loss = load_checkpoint(checkpoint)
    if isinstance(params, GaeParams):
        print("kind: gae")
        print(f"dims: n_x={params.n_x} n_y={params.n_y} n_f={params.n_f} n_h={params.n_h}")
    else:
        print("kind: dae")
        print(f"dims: n_x={params.n_x} n_h={params.n_h}")
        print(f"tied: {'true' if params.tied else 'false'}")
    print(f"hidden_activation: {params.hidden_act.value}")
    print(f"output_activation: {params.output_act.value}")
    print(f"loss: {loss.value}")
    total = sum(b.size for b in params.blocks().values())
    print(f"parameters: {total}")
    return EXIT_OK


def _parse_dims(raw: str) -> tuple[int, int, int, int]:
    parts = raw.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("dims must be n_x,n_y,n_f,n_h")
    try:
        n_x, n_y, n_f, n_h = (int(s) for s in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {raw!r}") from None
    return n_x, n_y, n_f, n_h


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccgae",
        description="Denoising and class-conditional gated autoencoders: "
        "train, sample, and verify gradients.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model from a config file")
    train.add_argument("--config", required=True, help="flat key = value config file")

    sample = sub.add_parser("sample", help="run a conditional chain and write a PGM grid")
    sample.add_argument("--checkpoint", required=True)
    sample.add_argument("--label", type=int, required=True, help="conditioning class index")
    sample.add_argument("--steps", type=int, default=250)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", required=True, help="output PGM path")
    sample.add_argument("--trace", default=None, help="optional trace export path")

    grad = sub.add_parser("gradcheck", help="check analytic gradients vs finite differences")
    grad.add_argument("--dims", type=_parse_dims, default=(7, 3, 5, 4), help="n_x,n_y,n_f,n_h")
    grad.add_argument("--seed", type=int, default=0)

    inspect = sub.add_parser("inspect", help="print a checkpoint header")
    inspect.add_argument("--checkpoint", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "sample":
            return cmd_sample(
                args.checkpoint, args.label, args.steps, args.seed, args.out, args.trace
            )
        if args.command == "gradcheck":
            return cmd_gradcheck(args.dims, args.seed)
        if args.command == "inspect":
            return cmd_inspect(args.checkpoint)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
