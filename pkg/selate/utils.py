"""
Utility functions and constants
"""

import math
import shutil
from typing import Sequence


class Color:
    """ANSI color codes for terminal output"""
    RED = '\033[91m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    MAGENTA = '\033[95m'
    BOLD = '\033[1m'
    DIM = '\033[2m'
    NC = '\033[0m'  # No Color


def get_terminal_width(default: int = 80) -> int:
    """Get terminal width, with fallback"""
    return shutil.get_terminal_size((default, 20)).columns


def format_mean_std(mean: float, std: float, digits: int = 2) -> str:
    """Format a mean and standard deviation as 'mean (std)'"""
    if math.isnan(mean):
        return "n/a"
    return f"{mean:.{digits}f} ({std:.{digits}f})"


def format_error(value: float, digits: int = 3) -> str:
    """Format a signed error, NaN rendered as 'failed'"""
    if math.isnan(value):
        return "failed"
    return f"{value:+.{digits}f}"


def parse_node_list(text: str) -> Sequence[str]:
    """Split a comma separated node list, ignoring blanks"""
    if not text:
        return []
    return [part.strip() for part in text.split(',') if part.strip()]
