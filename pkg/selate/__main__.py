"""
Main entry point for running selate as a module.

Usage:
    python -m selate <command> [options]
"""

import sys

from .cli import main

if __name__ == '__main__':
    sys.exit(main())
