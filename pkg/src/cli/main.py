"""``ttnet`` command line.

Subcommands import their numeric modules lazily, after the thread limit has
been exported, so BLAS picks the limit up on first import.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from src.cli.config_file import load_run_config, parse_flat, parse_overrides
from src.core.errors import ConfigError, DomainError, FormatError, TtNetError
from src.core.logging import configure_logging
from src.core.settings import get_settings
from src.schemas.config import RunConfig

logger = logging.getLogger(__name__)

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in value.split(",") if item.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {value!r}"
        ) from exc


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat dotted-key config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="bound on kernel threads (0 = library default)")
    common.add_argument("--out-dir")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key; repeatable",
    )
    common.add_argument("--log-level")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="ttnet", description="Tensor-train layers for MLPs.")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", parents=[common], help="train a network")
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--lr", type=float)

    evaluate = commands.add_parser("eval", parents=[common], help="test error of a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--images", help="test images IDX file (overrides data.test_images)")
    evaluate.add_argument("--labels", help="test labels IDX file (overrides data.test_labels)")

    compress = commands.add_parser("compress", parents=[common], help="TT-decompose a matrix")
    source = compress.add_mutually_exclusive_group(required=True)
    source.add_argument("--matrix", help=".npy file holding a 2-D array")
    source.add_argument("--random", action="store_true", help="use a seeded Gaussian matrix")
    source.add_argument(
        "--count-only", action="store_true", help="only report counts for the given ranks"
    )
    compress.add_argument("--row-modes", type=_int_list, required=True)
    compress.add_argument("--col-modes", type=_int_list, required=True)
    compress.add_argument("--rank", type=int)
    compress.add_argument("--eps", type=float)
    compress.add_argument("--out", help="write the TT-matrix as a checkpoint record")

    gradcheck = commands.add_parser(
        "gradcheck", parents=[common], help="finite-difference gradient check"
    )
    gradcheck.add_argument("--row-modes", type=_int_list, default=(2, 3, 2))
    gradcheck.add_argument("--col-modes", type=_int_list, default=(3, 2, 2))
    gradcheck.add_argument("--rank", type=int, default=2)
    gradcheck.add_argument("--batch", type=int, default=3)
    gradcheck.add_argument("--step", type=float, default=1e-5)
    gradcheck.add_argument("--tolerance", type=float)
    gradcheck.add_argument("--network", action="store_true", help="check a tiny TT network")
    gradcheck.add_argument("--zero-upstream", action="store_true")
    gradcheck.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)

    bench = commands.add_parser("bench", parents=[common], help="time dense vs. TT forward")
    bench.add_argument("--row-modes", type=_int_list, default=(4, 4, 4, 4, 4, 4))
    bench.add_argument("--col-modes", type=_int_list, default=(2, 7, 8, 8, 7, 4))
    bench.add_argument("--ranks", type=_int_list, default=(4,))
    bench.add_argument("--batch", type=_int_list, default=(1, 100))
    bench.add_argument("--reps", type=int, default=10)
    bench.add_argument("--warmup", type=int, default=2)
    bench.add_argument("--precision", choices=("float32", "float64"), default="float32")
    bench.add_argument("--no-dense", action="store_true", help="skip the dense baseline")

    serve = commands.add_parser("serve", parents=[common], help="run the inference service")
    serve.add_argument("--checkpoint")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    return parser


def resolve_config(args: argparse.Namespace, base_text: str | None = None) -> RunConfig:
    """File keys (or ``base_text``), then ``--set`` pairs, then the dedicated flags."""
    overrides: dict[str, str] = {}
    if base_text is not None and args.config is None:
        overrides.update(parse_flat(base_text))
    overrides.update(parse_overrides(args.overrides))
    flag_keys = {
        "seed": "seed",
        "threads": "threads",
        "out_dir": "out_dir",
        "epochs": "epochs",
        "batch_size": "batch_size",
        "lr": "optimizer.lr",
        "images": "data.test_images",
        "labels": "data.test_labels",
    }
    for attribute, key in flag_keys.items():
        value = getattr(args, attribute, None)
        if value is not None:
            overrides[key] = str(value)
    return load_run_config(args.config, overrides)


def apply_thread_limit(threads: int) -> None:
    if threads <= 0:
        return
    for name in THREAD_ENV_VARS:
        os.environ[name] = str(threads)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "eval":
        apply_thread_limit(args.threads or get_settings().threads)
        from src.cli.evaluate import cmd_eval

        return cmd_eval(args)

    config = resolve_config(args)
    apply_thread_limit(config.threads or get_settings().threads)

    if args.command == "train":
        from src.cli.train import cmd_train

        return cmd_train(config)
    if args.command == "compress":
        from src.cli.compress import cmd_compress

        return cmd_compress(args, config)
    if args.command == "gradcheck":
        from src.cli.gradcheck import cmd_gradcheck

        return cmd_gradcheck(args, config)
    if args.command == "bench":
        from src.cli.bench import cmd_bench

        return cmd_bench(args, config)
    from src.cli.serve import cmd_serve

    return cmd_serve(args)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level_name = (args.log_level or get_settings().log_level).upper()
    configure_logging(getattr(logging, level_name, logging.INFO))
    try:
        return _dispatch(args)
    except ConfigError as exc:
        paths = ", ".join(exc.field_paths)
        print(f"config error: {exc.message}" + (f" [{paths}]" if paths else ""), file=sys.stderr)
        return EXIT_INVALID
    except (DomainError, FormatError) as exc:
        print(f"{exc.code.value} error: {exc.message}", file=sys.stderr)
        return EXIT_INVALID
    except TtNetError as exc:
        logger.exception("%s failed", args.command)
        print(f"{exc.code.value} error: {exc.message}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
