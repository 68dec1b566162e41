#!/usr/bin/env python
"""Command-line utility for generating scenes and estimating camera motion."""
import sys


def main():
    """Run the command-line tools."""
    try:
        from config.cli import cli_main
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the project dependencies. Are they installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
