"""Drifted Brownian meanders and excursions: exact laws, samplers and checks."""

from .errors import ConvergenceError, DomainError, RejectionBudgetError
from .excursion_laws import ExcursionSpec
from .extremes_fpt import FptQuery, MaxQuery
from .gauss_kernels import DEFAULT_NUMERICS, BandParams, KernelParams, NumericsConfig
from .meander_laws import MeanderSpec, TimeValueGrid
from .path_sampler import PathBatch, PathSample, SimConfig
from .representation import LastZeroLaw, SignMix, TruncExp
from .verify_stats import GofReport

__version__ = "0.1.0"

__all__ = [
    "BandParams", "ConvergenceError", "DEFAULT_NUMERICS", "DomainError", "ExcursionSpec", "FptQuery",
    "GofReport", "KernelParams", "LastZeroLaw", "MaxQuery", "MeanderSpec", "NumericsConfig", "PathBatch",
    "PathSample", "RejectionBudgetError", "SignMix", "SimConfig", "TimeValueGrid", "TruncExp",
]
