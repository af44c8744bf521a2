"""Interior-point LP solver with a preconditioner for dense columns."""
from .errors import (DimensionError, DomainError, IndefiniteMatrixError, LpDenseError, ModelError,
                     MpsParseError, StrategyError)
from .ipm import SolveOptions, SolveStats, Termination, solve
from .model import DensityPolicy, StandardLp, detect_dense, presolve, scale_lp, standardize
from .mps import RawLp, emit_mps, parse_mps, read_mps
from .sparse import Permutation, SparseMatrix
from .strategies import DirectionStrategy

__all__ = [
    "DensityPolicy", "DimensionError", "DirectionStrategy", "DomainError", "IndefiniteMatrixError",
    "LpDenseError", "ModelError", "MpsParseError", "Permutation", "RawLp", "SolveOptions", "SolveStats",
    "SparseMatrix", "StandardLp", "StrategyError", "Termination", "detect_dense", "emit_mps",
    "parse_mps", "presolve", "read_mps", "scale_lp", "solve", "standardize",
]
