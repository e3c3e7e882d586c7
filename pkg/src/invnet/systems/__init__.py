"""Exact forward models and dataset generators for the benchmark systems."""

from .base import (Dataset, generate_dataset, load_dataset, save_dataset,
                   split_indices)
from .odes import integrate, rk4_step

SYSTEM_TAGS = ("linear", "sine-nonper", "sine-periodic", "rcr", "lorenz", "rd")


def resolver(tag: str):
    """The exact re-solve function for a system tag (used for verification)."""
    from . import linear, lorenz, rcr, reaction_diffusion, sine

    table = {
        "linear": linear.resolve_outputs,
        "sine-nonper": sine.resolve_outputs,
        "sine-periodic": sine.resolve_outputs,
        "rcr": rcr.resolve_outputs,
        "lorenz": lorenz.resolve_outputs,
        "rd": reaction_diffusion.resolve_outputs,
    }
    if tag not in table:
        raise KeyError(f"unknown system tag {tag!r}")
    return table[tag]
