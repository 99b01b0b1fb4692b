"""Discrete optimal transport, cyclical monotonicity and convergence diagnostics."""

import json

from ._core import (
    DomainError,
    Potential,
    __version__,
    brute_force_ot,
    center_outward_ranks,
    hausdorff,
    is_cyclically_monotone,
    rockafellar_potential,
    solve_ot,
)
from ._core import run_experiment as _run_experiment


def converge(config):
    """Run a consistency experiment; `config` is a dict in the CLI config schema."""
    return json.loads(_run_experiment(json.dumps(config)))


__all__ = [
    "DomainError",
    "Potential",
    "__version__",
    "brute_force_ot",
    "center_outward_ranks",
    "converge",
    "hausdorff",
    "is_cyclically_monotone",
    "rockafellar_potential",
    "solve_ot",
]
