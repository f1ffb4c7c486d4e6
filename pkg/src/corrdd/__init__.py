"""Stochastic simulation of a qubit under correlated double-drive decoupling."""

import os

import numba

# the default layer search probes TBB first and warns when it is too old
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

from .errors import ConfigError, ContractViolation, FitFailure, InvalidArgument, NoPositiveSolution  # noqa: E402

__all__ = ["ConfigError", "ContractViolation", "FitFailure", "InvalidArgument", "NoPositiveSolution"]
__version__ = "0.1.0"
