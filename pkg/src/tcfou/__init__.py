"""Simulation and numerical verification of time-changed fractional
Ornstein-Uhlenbeck processes."""
from .bernstein import BernsteinFunction
from .errors import (AccuracyError, DomainError, HorizonError, NumericError, ResourceError,
                     TcfouError)
from .fou import FouModel, ProcessPath
from .numerics import Grid, RngStream
from .timechange import TcfouModel

__all__ = ["BernsteinFunction", "FouModel", "ProcessPath", "TcfouModel", "Grid", "RngStream",
           "TcfouError", "DomainError", "AccuracyError", "HorizonError", "NumericError",
           "ResourceError"]
__version__ = "0.1.0"
