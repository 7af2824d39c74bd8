"""Variable selection for accelerated failure time models on right-censored data."""

from ._survenet import (
    InputError,
    SolverError,
    fit,
    km_weights,
    run_cli,
    simulate,
    sis_screen,
    version,
)

__version__ = version().split()[-1]

METHODS = ("enet", "aenet", "aenetcc", "wenet", "wenetcc")

__all__ = [
    "InputError",
    "METHODS",
    "SolverError",
    "fit",
    "km_weights",
    "run_cli",
    "simulate",
    "sis_screen",
    "version",
]
