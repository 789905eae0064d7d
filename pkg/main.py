#!/usr/bin/env python3
"""
Main entry point for the baafseg command line.
"""

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = str(Path(__file__).parent.resolve())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from baafseg.cli import main  # noqa: E402


def run():
    """Run the command line and exit with its status code."""
    sys.exit(main())


if __name__ == "__main__":
    run()
