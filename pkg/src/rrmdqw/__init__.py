"""Hadamard walk with a periodically relocated absorbing detector."""

__version__ = "0.1.0"

from .detector import PolicyKind, PolicySpec, RngStream, build_trajectory, position_at
from .ensemble import EnsembleStats, RecordSpec, RunConfig, merge, run_ensemble, run_realization
from .walk import SYMMETRIC_COIN, WalkerState, init_state, step, survival

__all__ = [
    "PolicyKind", "PolicySpec", "RngStream", "build_trajectory", "position_at",
    "EnsembleStats", "RecordSpec", "RunConfig", "merge", "run_ensemble", "run_realization",
    "SYMMETRIC_COIN", "WalkerState", "init_state", "step", "survival",
]
