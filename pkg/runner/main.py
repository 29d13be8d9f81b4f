import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load .env file from parent directory (root of project)
env_path = os.path.join(os.path.dirname(__file__), "..", ".env")
load_dotenv(env_path)

# Domain package lives at the repo root
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from qfilter.errors import IOFailure, QFilterError

from app.commands.v1 import COMMANDS
from app.core.config import get_settings
from app.core.config_file import load_config, with_seed
from app.core.orchestrator import EXIT_ERROR, run_subcommand

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfilter",
        description="Posterior dynamics of a continuously observed free particle",
    )
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="flat key=value config file (defaults when omitted)")
    parser.add_argument("--out", default=None, help="output directory (overrides outputs.dir)")
    parser.add_argument("--workers", type=int, default=None, help="process count for ensemble fan-out")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()

    # Setup logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        try:
            config = load_config(args.config)
        except OSError as e:
            raise IOFailure(f"cannot read config {args.config}: {e}")
        config = with_seed(config, settings.SEED)
        out_dir = args.out or config.outputs.dir or settings.OUTPUT_DIR
        workers = args.workers or config.run.workers or settings.WORKERS
        return run_subcommand(args.subcommand, config, out_dir, workers=workers)
    except QFilterError as e:
        print(e.to_line(), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
