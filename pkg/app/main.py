import sys

from app.cli.solve import run_cli
from app.core.logging import setup_logging


def main() -> int:
    setup_logging()
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
