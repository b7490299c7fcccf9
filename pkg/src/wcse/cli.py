"""Command-line interface.

Subcommands: ``gen`` (synthetic embedding files), ``whiten``
(post-process an embedding file), ``train``, ``eval``, ``ablate``.
Exit codes: 0 success, 1 validation error (bad flags, config, files),
2 numeric failure (singular covariance, collapsed embeddings,
non-finite loss). No environment variables are consulted; behavior
flows entirely from flags and the config file.
"""

import argparse
import dataclasses
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config, save_config
from .data import generate_synthetic
from .embfile import read_embeddings, write_embeddings
from .errors import NUMERIC_ERRORS, VALIDATION_ERRORS, ConfigError
from .pipeline import (
    ablate_line,
    build_datasets,
    evaluate,
    format_record,
    run_whiten_command,
    sweep_configs,
    train_run,
)

_BOOL_CHOICES = ("true", "false")


def _override_flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_overrides(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides (mirror config keys)")
    for f in dataclasses.fields(TrainConfig):
        flag = _override_flag(f.name)
        if f.name == "lambda_m":
            group.add_argument(flag, default=None, metavar="X|auto")
        elif f.type is bool:
            group.add_argument(flag, default=None, choices=_BOOL_CHOICES)
        elif f.type is int:
            group.add_argument(flag, default=None, type=int)
        elif f.type is float:
            group.add_argument(flag, default=None, type=float)
        else:
            group.add_argument(flag, default=None)


def _config_from_args(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    updates = {}
    for f in dataclasses.fields(TrainConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        if f.name == "lambda_m":
            updates[f.name] = None if raw == "auto" else float(raw)
        elif f.type is bool:
            updates[f.name] = raw == "true"
        else:
            updates[f.name] = raw
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg.validate()


def _cmd_gen(args) -> int:
    ds = generate_synthetic(
        args.clusters, args.per_cluster, args.dim, args.noise_scale, args.seed
    )
    x = ds.x
    if args.channel_decay != 1.0:
        if not 0.0 < args.channel_decay:
            raise ConfigError(f"channel-decay must be > 0, got {args.channel_decay}")
        x = x * (args.channel_decay ** np.arange(args.dim))
    write_embeddings(args.out, x)
    if args.labels_out:
        with open(args.labels_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(str(l) for l in ds.labels) + "\n")
    if args.centers_out:
        write_embeddings(args.centers_out, ds.centers)
    print(f"wrote {x.shape[0]}x{x.shape[1]} embeddings to {args.out}")
    return 0


def _cmd_whiten(args) -> int:
    before, after = run_whiten_command(
        args.input, args.out, args.kind, args.group_size, args.ridge, args.seed
    )
    print(format_record([("uniformity_before", before), ("uniformity_after", after)]))
    return 0


def _cmd_train(args) -> int:
    cfg = _config_from_args(args)
    train_x = read_embeddings(args.data) if args.data else None
    result = train_run(cfg, train_x)
    with open(args.checkpoint_out, "wb") as fh:
        fh.write(result.checkpoint_bytes)
    with open(args.report_out, "w", encoding="utf-8") as fh:
        fh.write(result.report_text)
    if args.config_out:
        save_config(cfg, args.config_out)
    print(
        format_record(
            [("best_step", result.best_step), ("best_spearman", result.best_spearman)]
        )
    )
    return 0


def _cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    state, whit = load_checkpoint(args.checkpoint)
    _, dev, harness = build_datasets(cfg)
    align, unif, rho = evaluate(state, whit, dev, harness)
    line = format_record(
        [("alignment", align), ("uniformity", unif), ("spearman", rho)]
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    print(line)
    return 0


def _cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    if "=" not in args.sweep:
        raise ConfigError("--sweep expects key=value1,value2,...")
    key, raw = args.sweep.split("=", 1)
    key = key.strip()
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError("--sweep lists no values")
    runs = sweep_configs(cfg, key, values)
    with open(args.out, "w", encoding="utf-8") as fh:
        for value, run_cfg in runs:
            result = train_run(run_cfg)
            fh.write(ablate_line(key, value, result) + "\n")
            fh.flush()
            report_path = f"{args.out}.{key}-{value}.report"
            with open(report_path, "w", encoding="utf-8") as rfh:
                rfh.write(result.report_text)
            print(f"{key}={value} done (best_spearman={result.best_spearman!r})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcse",
        description="Shuffled group whitening + multi-positive contrastive learning, desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic clustered embedding file")
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--per-cluster", type=int, default=32)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--noise-scale", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--channel-decay",
        type=float,
        default=1.0,
        help="geometric per-channel scaling (<1 makes the file anisotropic)",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", default=None)
    p.add_argument("--centers-out", default=None)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("whiten", help="whiten an embedding file in place of a model")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("pca", "zca", "group", "sgw"), default="zca")
    p.add_argument("--group-size", type=int, default=8)
    p.add_argument(
        "--ridge",
        type=float,
        default=1e-5,
        help="relative ridge epsilon for rank-deficient covariances",
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_whiten)

    p = sub.add_parser("train", help="train the toy encoder")
    p.add_argument("--config", default=None)
    p.add_argument("--data", default=None, help="optional training inputs (WEMB file)")
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--config-out", default=None, help="write the resolved config")
    _add_config_overrides(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the config's dev split")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None)
    _add_config_overrides(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="sweep one config key, training per value")
    p.add_argument("--config", default=None)
    p.add_argument("--sweep", required=True, help="key=value1,value2,...")
    p.add_argument("--out", required=True)
    _add_config_overrides(p)
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; those are validation
        # failures in this tool's contract.
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
