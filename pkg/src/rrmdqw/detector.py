"""Detector placement rules and their realised trajectories.

Five policies are supported:

========  =============  ==============================================
CLI name  kind           detector position X_D(t)
========  =============  ==============================================
``iw``    NONE           never present
``siw``   FIXED          ``x_D`` forever
``qqw``   QUENCH         ``x_D`` for ``t <= t_q``, then removed for good
``rr1``   RANDOM_BEYOND  Model 1: every ``t_R`` ticks jump to a uniform
                         site in ``{x_D+1, ..., L_R}``
``rr2``   RANDOM_WINDOW  Model 2: every ``t_R`` ticks jump to a uniform
                         site in ``{X, ..., X+t_R-1}`` (exclusive upper
                         bound, default) or ``{X, ..., X+t_R}``
========  =============  ==============================================

``X_D(t)`` is the site that absorbs the amplitude produced at tick ``t``.
Interval ``k`` covers ticks ``(k*t_R, (k+1)*t_R]`` (interval 0 also owns
``t = 0``), so the old detector still absorbs what arrives exactly at a
relocation instant.

Model 2's window as written, ``X <= X_new <= X + t_R``, would let a
``t_R = 1`` detector hop; the exclusive bound is the default because it
reproduces the stated SIW limit at ``t_R = 1``.  ``inclusive`` is kept as
an option.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class PolicyKind(str, enum.Enum):
    NONE = "iw"
    FIXED = "siw"
    QUENCH = "qqw"
    RANDOM_BEYOND = "rr1"
    RANDOM_WINDOW = "rr2"

    @property
    def stochastic(self) -> bool:
        return self in (PolicyKind.RANDOM_BEYOND, PolicyKind.RANDOM_WINDOW)


WINDOW_MODES = ("exclusive", "inclusive")


@dataclass(frozen=True)
class PolicySpec:
    """Detector rule.

    ``L_R`` (Model 1 upper bound) of ``None`` resolves to ``10 * t_max`` when a
    trajectory is built.  ``t_q`` (quench time) of ``None`` resolves to
    ``t_R``.
    """

    kind: PolicyKind = PolicyKind.NONE
    x_D: int = 10
    t_R: int = 1
    L_R: int | None = None
    window_upper: str = "exclusive"
    t_q: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.t_R < 1:
            raise ValueError(f"t_R must be >= 1, got {self.t_R}")
        if self.kind is not PolicyKind.NONE and self.x_D < 1:
            raise ValueError(f"x_D must be >= 1, got {self.x_D}")
        if self.window_upper not in WINDOW_MODES:
            raise ValueError(f"window_upper must be one of {WINDOW_MODES}")
        if self.L_R is not None and self.L_R <= self.x_D:
            raise ValueError(f"L_R must exceed x_D ({self.L_R} <= {self.x_D})")
        if self.t_q is not None and self.t_q < 0:
            raise ValueError("t_q must be >= 0")

    def resolved_L_R(self, t_max: int) -> int:
        if self.L_R is not None:
            return self.L_R
        return max(10 * t_max, self.x_D + 1)

    @property
    def quench_time(self) -> int:
        return self.t_R if self.t_q is None else self.t_q

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "x_D": self.x_D, "t_R": self.t_R,
                "L_R": self.L_R, "window_upper": self.window_upper, "t_q": self.t_q}

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        return cls(**d)


class RngStream:
    """Counter-based random stream keyed by ``(base_seed, stream_id)``.

    Backed by numpy's Philox generator, whose output is a pure function of
    the 128-bit key and the counter, so stream ``k`` yields the same draws
    whichever thread runs it and in whatever order.
    """

    def __init__(self, base_seed: int, stream_id: int):
        if not 0 <= base_seed < 2 ** 64 or not 0 <= stream_id < 2 ** 64:
            raise ValueError("base_seed and stream_id must be unsigned 64-bit integers")
        self.base_seed = int(base_seed)
        self.stream_id = int(stream_id)
        self.draws = 0
        key = np.array([self.base_seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in ``{lo, ..., hi}``."""
        self.draws += 1
        return int(self._gen.integers(lo, hi, endpoint=True))

    def __repr__(self):
        return f"RngStream(base_seed={self.base_seed}, stream_id={self.stream_id}, draws={self.draws})"


def relocate_model1(rng: RngStream, x_D: int, L_R: int) -> int:
    if L_R <= x_D:
        raise ValueError(f"empty relocation range: L_R={L_R} <= x_D={x_D}")
    return rng.integer(x_D + 1, L_R)


def relocate_model2(rng: RngStream, x_old: int, t_R: int,
                    window_upper: str = "exclusive") -> int:
    if t_R < 1:
        raise ValueError("t_R must be >= 1")
    if window_upper == "exclusive":
        return rng.integer(x_old, x_old + t_R - 1)
    if window_upper == "inclusive":
        return rng.integer(x_old, x_old + t_R)
    raise ValueError(f"unknown window mode {window_upper!r}")


@dataclass(frozen=True)
class DetectorTrajectory:
    """Realised detector positions, one per relocation interval.

    Only meaningful for the relocating policies; for the others
    ``positions`` is just ``(x_D,)`` and :func:`position_at` consults the
    policy directly.
    """

    policy: PolicySpec
    positions: tuple[int, ...] = field(default=())

    def position_at(self, t: int) -> int | None:
        return position_at(self.policy, self, t)

    def sites(self, t_max: int) -> list[int | None]:
        """X_D(t) for t = 0..t_max."""
        return [position_at(self.policy, self, t) for t in range(t_max + 1)]

    def interval_of(self, t: int) -> int:
        return 0 if t <= 0 else (t - 1) // self.policy.t_R


def position_at(policy: PolicySpec, trajectory: DetectorTrajectory | None, t: int) -> int | None:
    if t < 0:
        raise ValueError("t must be >= 0")
    kind = policy.kind
    if kind is PolicyKind.NONE:
        return None
    if kind is PolicyKind.FIXED:
        return policy.x_D
    if kind is PolicyKind.QUENCH:
        return policy.x_D if t <= policy.quench_time else None
    k = 0 if t == 0 else (t - 1) // policy.t_R
    if trajectory is None or k >= len(trajectory.positions):
        raise IndexError(f"trajectory does not cover t={t}")
    return trajectory.positions[k]


def n_intervals(t_R: int, t_max: int) -> int:
    return max(1, math.ceil(t_max / t_R))


def build_trajectory(policy: PolicySpec, rng: RngStream | None, t_max: int) -> DetectorTrajectory:
    """Draw the detector trajectory covering ticks ``0..t_max``."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if not policy.kind.stochastic:
        return DetectorTrajectory(policy, (policy.x_D,))
    if rng is None:
        raise ValueError("relocating policies need an RngStream")
    K = n_intervals(policy.t_R, t_max)
    pos = [policy.x_D]
    if policy.kind is PolicyKind.RANDOM_BEYOND:
        L_R = policy.resolved_L_R(t_max)
        for _ in range(K - 1):
            pos.append(relocate_model1(rng, policy.x_D, L_R))
    else:
        for _ in range(K - 1):
            pos.append(relocate_model2(rng, pos[-1], policy.t_R, policy.window_upper))
    return DetectorTrajectory(policy, tuple(pos))
