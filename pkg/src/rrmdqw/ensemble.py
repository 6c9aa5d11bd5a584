"""Independent realizations over detector-relocation randomness.

Each realization owns its RNG stream ``(base_seed, stream_id)`` and walker
state.  Results are folded into :class:`EnsembleStats` (streaming mean and
M2) strictly in ascending ``stream_id`` order, so the aggregate is
bit-identical whatever the number of worker threads.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .detector import (DetectorTrajectory, PolicyKind, PolicySpec, RngStream,
                       build_trajectory)
from .walk import (DETECTION_EPSILON, SYMMETRIC_COIN, check_coin, default_window,
                   init_state)

log = logging.getLogger(__name__)

@dataclass(frozen=True)
class RecordSpec:
    """What to keep from every realization.

    ``tracked_sites`` get a full time series ``f(x, 0..t_max)``;
    ``snapshot_times`` get a full lattice profile.  Survival is always kept.
    """

    snapshot_times: tuple[int, ...] = ()
    tracked_sites: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(sorted(set(int(t) for t in self.snapshot_times))))
        object.__setattr__(self, "tracked_sites", tuple(int(x) for x in self.tracked_sites))


@dataclass(frozen=True)
class RunConfig:
    policy: PolicySpec = field(default_factory=PolicySpec)
    t_max: int = 1000
    origin: int = 0
    coin: tuple[complex, complex] = SYMMETRIC_COIN
    x_min: int | None = None
    x_max: int | None = None
    n_realizations: int = 500
    base_seed: int = 0
    record: RecordSpec = field(default_factory=RecordSpec)

    def __post_init__(self):
        check_coin(self.coin)
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        lo, hi = self.window
        if lo > self.origin - self.t_max or hi < self.origin + self.t_max:
            raise ValueError(f"lattice [{lo}, {hi}] smaller than the light cone")
        for t in self.record.snapshot_times:
            if not 0 <= t <= self.t_max:
                raise ValueError(f"snapshot time {t} outside [0, {self.t_max}]")
        for x in self.record.tracked_sites:
            if not lo <= x <= hi:
                raise ValueError(f"tracked site {x} outside lattice [{lo}, {hi}]")

    @property
    def window(self) -> tuple[int, int]:
        lo, hi = default_window(self.origin, self.t_max)
        return (lo if self.x_min is None else self.x_min,
                hi if self.x_max is None else self.x_max)

    @property
    def sites(self) -> np.ndarray:
        lo, hi = self.window
        return np.arange(lo, hi + 1)

    def replace(self, **changes) -> "RunConfig":
        from dataclasses import replace
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.to_dict(),
            "t_max": self.t_max,
            "origin": self.origin,
            "coin": [[c.real, c.imag] for c in map(complex, self.coin)],
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_realizations": self.n_realizations,
            "base_seed": self.base_seed,
            "record": {"snapshot_times": list(self.record.snapshot_times),
                       "tracked_sites": list(self.record.tracked_sites)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "policy" in d:
            d["policy"] = PolicySpec.from_dict(d["policy"])
        if "coin" in d:
            d["coin"] = tuple(complex(re, im) for re, im in d["coin"])
        if "record" in d:
            d["record"] = RecordSpec(**d["record"])
        return cls(**d)


@dataclass
class RealizationResult:
    """One realization.

    ``series`` and ``profiles`` hold f(x, t) as measured at tick ``t``: the
    probability that reaches the detector site at ``t`` is counted there,
    since it is only removed before the next step.  ``survival`` is taken
    after the removal.
    """

    stream_id: int
    trajectory: DetectorTrajectory
    series: np.ndarray      # (n_tracked, t_max + 1)
    profiles: np.ndarray    # (n_snapshots, n_sites)
    survival: np.ndarray    # (t_max + 1,)
    removed: np.ndarray     # (t_max + 1,), removed[0] == 0

    @property
    def absorbed(self) -> np.ndarray:
        """Cumulative removed probability up to each tick."""
        return np.cumsum(self.removed)

    @property
    def final_survival(self) -> float:
        return float(self.survival[-1])

    @property
    def detections(self) -> list[tuple[int, int, float]]:
        """``(t, site, removed probability)`` for every detection event."""
        ticks = np.nonzero(self.removed > DETECTION_EPSILON)[0]
        return [(int(t), self.trajectory.position_at(int(t)), float(self.removed[t]))
                for t in ticks]

    @property
    def detection_count(self) -> int:
        return int(np.count_nonzero(self.removed > DETECTION_EPSILON))


def detector_sites(config: RunConfig, trajectory: DetectorTrajectory) -> np.ndarray:
    """Lattice index of the detector for every tick, as the kernel wants it."""
    lo, hi = config.window
    policy = config.policy
    t = np.arange(config.t_max + 1)
    if policy.kind is PolicyKind.NONE:
        x = np.full(t.shape, lo - 1)
    elif policy.kind is PolicyKind.FIXED:
        x = np.full(t.shape, policy.x_D)
    elif policy.kind is PolicyKind.QUENCH:
        x = np.where(t <= policy.quench_time, policy.x_D, lo - 1)
    else:
        k = np.maximum(t - 1, 0) // policy.t_R
        x = np.asarray(trajectory.positions, dtype=np.int64)[k]
    inside = (x >= lo) & (x <= hi)
    return np.where(inside, x - lo, kernel.NO_DETECTOR).astype(np.int64)


def run_realization(config: RunConfig, stream_id: int = 0) -> RealizationResult:
    """One walker evolved under one sampled detector trajectory."""
    rng = RngStream(config.base_seed, stream_id) if config.policy.kind.stochastic else None
    trajectory = build_trajectory(config.policy, rng, config.t_max)
    lo, hi = config.window
    state = init_state(config.origin, config.coin, config.t_max, lo, hi)
    det = detector_sites(config, trajectory)
    rec = config.record
    out = kernel.evolve(state, config.t_max, det, rec.tracked_sites, rec.snapshot_times)
    series, profiles, removed = out["series"], out["snapshots"], out["removed"]
    # the kernel reports the field after removal; put the arriving weight back
    for m, x in enumerate(rec.tracked_sites):
        hit = det == x - lo
        series[m, hit] += removed[hit]
    for k, t in enumerate(rec.snapshot_times):
        if det[t] >= 0:
            profiles[k, det[t]] += removed[t]
    return RealizationResult(stream_id, trajectory, series, profiles, out["survival"], removed)


@dataclass
class EnsembleStats:
    """Streaming count / mean / M2 of every recorded quantity.

    Fields: ``series`` (tracked sites x ticks), ``profiles`` (snapshots x
    sites), ``survival`` and ``absorbed`` (per tick) and ``detections``
    (scalar count per realization).
    """

    record: RecordSpec
    count: int = 0
    mean: dict = field(default_factory=dict)
    m2: dict = field(default_factory=dict)

    def add(self, result: RealizationResult) -> None:
        values = {
            "series": result.series,
            "profiles": result.profiles,
            "survival": result.survival,
            "absorbed": result.absorbed,
            "detections": np.array(float(result.detection_count)),
        }
        self.count += 1
        if self.count == 1:
            for k, v in values.items():
                self.mean[k] = np.array(v, dtype=float)
                self.m2[k] = np.zeros_like(self.mean[k])
            return
        for k, v in values.items():
            delta = v - self.mean[k]
            self.mean[k] += delta / self.count
            self.m2[k] += delta * (v - self.mean[k])

    def variance(self, name: str) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean[name])
        return self.m2[name] / (self.count - 1)

    def stderr(self, name: str) -> np.ndarray:
        return np.sqrt(self.variance(name) / max(self.count, 1))

    def copy(self) -> "EnsembleStats":
        return EnsembleStats(self.record, self.count,
                             {k: v.copy() for k, v in self.mean.items()},
                             {k: v.copy() for k, v in self.m2.items()})


def merge(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
    """Pooled statistics of two disjoint sets of realizations."""
    if a.record != b.record:
        raise ValueError("cannot merge statistics with different record specs")
    if b.count == 0:
        return a.copy()
    if a.count == 0:
        return b.copy()
    n = a.count + b.count
    mean, m2 = {}, {}
    for k in a.mean:
        delta = b.mean[k] - a.mean[k]
        mean[k] = a.mean[k] + delta * (b.count / n)
        m2[k] = a.m2[k] + b.m2[k] + delta ** 2 * (a.count * b.count / n)
    return EnsembleStats(a.record, n, mean, m2)


def run_ensemble(config: RunConfig, workers: int = 1, progress=None,
                 streams: range | None = None) -> EnsembleStats:
    """Average ``config.n_realizations`` realizations (streams ``0..n-1``).

    ``streams`` selects another block of stream ids, e.g. to form batch
    means.  Deterministic policies are evolved once and folded ``n`` times,
    which gives exactly what ``n`` separate runs would.
    """
    stats = EnsembleStats(config.record)
    streams = range(config.n_realizations) if streams is None else streams
    n = len(streams)
    if not config.policy.kind.stochastic:
        result = run_realization(config, 0)
        for _ in range(n):
            stats.add(result)
        return stats
    log.debug("running %d realizations of %s with %d worker(s)", n, config.policy.kind.value, workers)
    if workers <= 1:
        results = (run_realization(config, k) for k in streams)
        for r in results:
            stats.add(r)
            if progress:
                progress(r.stream_id)
        return stats
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order, i.e. ascending stream_id
        for r in pool.map(lambda k: run_realization(config, k), streams):
            stats.add(r)
            if progress:
                progress(r.stream_id)
    return stats
