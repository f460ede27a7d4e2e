from __future__ import annotations

import argparse
import logging

from src.cli.main import apply_thread_limit, resolve_config
from src.cli.train import load_test_split
from src.core.settings import get_settings
from src.data.checkpoint import checkpoint_to_network, load_checkpoint
from src.nn.training import evaluate

logger = logging.getLogger(__name__)


def cmd_eval(args: argparse.Namespace) -> int:
    """Print the test error of a checkpoint.

    Without ``--config`` the run configuration echoed into the checkpoint
    supplies the data paths, resize mode and evaluation batch size.
    """
    checkpoint = load_checkpoint(args.checkpoint)
    config = resolve_config(args, base_text=checkpoint.config_text)
    apply_thread_limit(config.threads or get_settings().threads)

    net = checkpoint_to_network(checkpoint)
    test = load_test_split(config, checkpoint.precision)
    logger.info("evaluating %s on %d samples", args.checkpoint, len(test))
    error_rate = evaluate(
        net, test, batch_size=config.eval_batch_size, threads=max(config.threads, 1)
    )
    print(f"test_err={error_rate:.6f}")
    return 0
