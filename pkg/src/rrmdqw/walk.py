"""State-vector evolution of the 1D Hadamard walk with a single absorbing site.

The walker lives on a finite window ``[x_min, x_max]`` that is chosen wide
enough that the light cone never reaches its edges.  One time step is

    coin (Hadamard)  ->  shift (L to x-1, R to x+1)  ->  absorb at detector

and no renormalisation is applied after absorption, so the total
occupation is the survival probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

INV_SQRT2 = 1.0 / math.sqrt(2.0)

#: removed probabilities at or below this count as "nothing detected"
DETECTION_EPSILON = 1e-30

#: amplitude components smaller than this are set to zero after each coin
#: step; keeps the far tails out of subnormal range (which is very slow)
UNDERFLOW_CUTOFF = 1e-250

#: symmetric initial coin (|L> + i|R>)/sqrt(2)
SYMMETRIC_COIN = (INV_SQRT2 + 0j, 1j * INV_SQRT2)


class LatticeError(RuntimeError):
    """Amplitude reached the edge of the lattice window."""


@dataclass
class WalkerState:
    """Spinor field on ``[x_min, x_max]`` at integer time ``t``.

    ``psi`` has shape ``(2, n_sites)``; row 0 is the left-moving
    component, row 1 the right-moving one.
    """

    t: int
    x_min: int
    x_max: int
    origin: int
    psi: np.ndarray = field(repr=False)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.x_min, self.x_max + 1)

    @property
    def psi_L(self) -> np.ndarray:
        return self.psi[0]

    @property
    def psi_R(self) -> np.ndarray:
        return self.psi[1]

    def index(self, x: int) -> int:
        if not self.x_min <= x <= self.x_max:
            raise IndexError(f"site {x} outside lattice [{self.x_min}, {self.x_max}]")
        return x - self.x_min

    def copy(self) -> "WalkerState":
        return replace(self, psi=self.psi.copy())


@dataclass(frozen=True)
class StepOutcome:
    removed_probability: float
    detection_event: bool


def default_window(origin: int, horizon: int) -> tuple[int, int]:
    return origin - (horizon + 2), origin + (horizon + 2)


def check_coin(coin) -> tuple[complex, complex]:
    a, b = complex(coin[0]), complex(coin[1])
    norm = abs(a) ** 2 + abs(b) ** 2
    if not math.isfinite(norm) or abs(norm - 1.0) > 1e-12:
        raise ValueError(f"coin state must be normalised, |a|^2+|b|^2 = {norm!r}")
    return a, b


def init_state(origin: int = 0, coin=SYMMETRIC_COIN, horizon: int = 0,
               x_min: int | None = None, x_max: int | None = None) -> WalkerState:
    """Delta-localised walker at ``origin`` with chirality amplitudes ``coin``.

    The lattice window defaults to ``origin -/+ (horizon + 2)``.  An explicit
    window must still contain the full light cone up to ``horizon``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    a, b = check_coin(coin)
    lo, hi = default_window(origin, horizon)
    x_min = lo if x_min is None else x_min
    x_max = hi if x_max is None else x_max
    if x_min > origin - horizon or x_max < origin + horizon:
        raise ValueError(
            f"lattice [{x_min}, {x_max}] does not contain the light cone of "
            f"horizon {horizon} around {origin}")
    psi = np.zeros((2, x_max - x_min + 1), dtype=np.complex128)
    psi[0, origin - x_min] = a
    psi[1, origin - x_min] = b
    return WalkerState(t=0, x_min=x_min, x_max=x_max, origin=origin, psi=psi)


def coin_step(state: WalkerState) -> WalkerState:
    """Apply the Hadamard coin at every site."""
    L, R = state.psi
    psi = np.empty_like(state.psi)
    psi[0] = (L + R) * INV_SQRT2
    psi[1] = (L - R) * INV_SQRT2
    flat = psi.view(np.float64)
    flat[np.abs(flat) < UNDERFLOW_CUTOFF] = 0.0
    return replace(state, psi=psi)


def shift_step(state: WalkerState) -> WalkerState:
    """Move the L component one site left and the R component one site right."""
    L, R = state.psi
    if L[0] != 0 or R[0] != 0 or L[-1] != 0 or R[-1] != 0:
        raise LatticeError(
            f"amplitude on lattice edge at t={state.t}; window [{state.x_min}, "
            f"{state.x_max}] is too small")
    psi = np.zeros_like(state.psi)
    psi[0, :-1] = L[1:]
    psi[1, 1:] = R[:-1]
    return replace(state, psi=psi)


def absorb(state: WalkerState, x_det: int | None) -> tuple[WalkerState, StepOutcome]:
    """Zero both spinor components at ``x_det`` and report what was removed.

    ``None`` means no detector.  A detector outside the lattice window is
    also a no-op, since the amplitude there vanishes by the light cone.
    """
    if x_det is None or not state.x_min <= x_det <= state.x_max:
        return state, StepOutcome(0.0, False)
    i = x_det - state.x_min
    removed = float(abs(state.psi[0, i]) ** 2 + abs(state.psi[1, i]) ** 2)
    if removed == 0.0:
        return state, StepOutcome(0.0, False)
    psi = state.psi.copy()
    psi[:, i] = 0
    return replace(state, psi=psi), StepOutcome(removed, removed > DETECTION_EPSILON)


def step(state: WalkerState, x_det: int | None) -> tuple[WalkerState, StepOutcome]:
    """Advance one tick; ``x_det`` is the detector site acting on the new state."""
    new = shift_step(coin_step(state))
    new.t = state.t + 1
    return absorb(new, x_det)


def occupation(state: WalkerState, x: int) -> float:
    i = state.index(x)
    return float(abs(state.psi[0, i]) ** 2 + abs(state.psi[1, i]) ** 2)


def occupation_profile(state: WalkerState) -> np.ndarray:
    """f(x, t) for every lattice site, aligned with ``state.sites``."""
    return (state.psi.real ** 2 + state.psi.imag ** 2).sum(axis=0)


def survival(state: WalkerState) -> float:
    return float(occupation_profile(state).sum())
