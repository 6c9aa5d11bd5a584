"""Experiment recipes shared by the command line and the acceptance tests.

Every recipe takes a :class:`RunConfig` and returns plain observables
(:class:`Series`, :class:`Profile`, estimates); nothing here writes files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .detector import PolicyKind, PolicySpec
from .ensemble import EnsembleStats, RecordSpec, RunConfig, run_ensemble
from .observables import (CrossingReport, CrossoverFit, Profile, SaturationEstimate,
                          Series, correlation_ratio, count_unity_crossings,
                          crossover_fit, profile_ratio, ratio_series, saturation)

#: sweeps stretch the run to this many t_R so the saturation window
#: (which starts at 4 t_R) exists
DEFAULT_HORIZON_FACTOR = 5


def policy_meta(config: RunConfig) -> dict:
    p = config.policy
    return {"policy": p.kind.value, "x_D": p.x_D, "t_R": p.t_R,
            "n": config.n_realizations}


def site_series(stats: EnsembleStats, config: RunConfig, x: int) -> Series:
    """Ensemble-mean f(x, t) for a tracked site, with standard error."""
    i = config.record.tracked_sites.index(x)
    t = np.arange(config.t_max + 1)
    return Series(t, stats.mean["series"][i], stats.stderr("series")[i],
                  dict(policy_meta(config), site=x))


def snapshot_profile(stats: EnsembleStats, config: RunConfig, t: int) -> Profile:
    i = config.record.snapshot_times.index(t)
    return Profile(config.sites, stats.mean["profiles"][i], stats.stderr("profiles")[i],
                   t, policy_meta(config))


def reference_config(config: RunConfig) -> RunConfig:
    """The detector-free walk with the same lattice, horizon and records."""
    return config.replace(policy=PolicySpec(PolicyKind.NONE, config.policy.x_D, 1),
                          n_realizations=1)


@lru_cache(maxsize=64)
def _deterministic(config: RunConfig) -> EnsembleStats:
    return run_ensemble(config)


def run_with_reference(config: RunConfig, workers: int = 1):
    """Ensemble statistics for ``config`` and for its detector-free reference."""
    stats = (_deterministic(config) if not config.policy.kind.stochastic
             else run_ensemble(config, workers=workers))
    ref = _deterministic(reference_config(config))
    return stats, ref


def with_records(config: RunConfig, sites=(), times=()) -> RunConfig:
    rec = config.record
    sites = tuple(dict.fromkeys(tuple(rec.tracked_sites) + tuple(sites)))
    times = tuple(sorted(set(rec.snapshot_times) | set(times)))
    return config.replace(record=RecordSpec(times, sites))


@dataclass
class DetectorRatio:
    """f(x_D, t) / f_inf(x_D, t) and what is extracted from it."""

    config: RunConfig
    ratio: Series
    saturation: SaturationEstimate
    crossings: CrossingReport
    stats: EnsembleStats = field(repr=False)


def detector_ratio(config: RunConfig, workers: int = 1, window_fraction: float = 0.25,
                   band: float = 0.005) -> DetectorRatio:
    x_D = config.policy.x_D
    config = with_records(config, sites=(x_D,))
    stats, ref = run_with_reference(config, workers)
    f = site_series(stats, config, x_D)
    f_inf = site_series(ref, reference_config(config), x_D)
    r = ratio_series(f, f_inf)
    return DetectorRatio(config, r, saturation(r, window_fraction),
                         count_unity_crossings(r, band), stats)


def sweep_horizon(t_R: int, t_max: int, factor: float | None) -> int:
    if not factor:
        return t_max
    return max(t_max, int(math.ceil(factor * t_R)))


@dataclass
class SaturationCurve:
    x_D: int
    kind: str
    curve: Series                         # (f/f_inf)_sat against t_R
    points: list[DetectorRatio] = field(repr=False)
    crossings: CrossingReport | None = None
    fit: CrossoverFit | None = None
    fit_error: str | None = None


def saturation_curve(base: RunConfig, t_R_values, x_D: int | None = None,
                     horizon_factor: float | None = DEFAULT_HORIZON_FACTOR,
                     workers: int = 1, band: float = 0.005,
                     progress=None, stderr_k: float = 0.0) -> SaturationCurve:
    """(f/f_inf)_sat at x_D for every t_R, with unity crossings and crossover fit.

    Each point runs to ``max(base.t_max, horizon_factor * t_R)`` ticks so
    that its saturation window lies inside the run.
    """
    x_D = base.policy.x_D if x_D is None else x_D
    t_R_values = sorted(set(int(v) for v in t_R_values))
    points, sat, se = [], [], []
    for t_R in t_R_values:
        t_max = sweep_horizon(t_R, base.t_max, horizon_factor)
        policy = PolicySpec(base.policy.kind, x_D, t_R, base.policy.L_R,
                            base.policy.window_upper, base.policy.t_q)
        cfg = base.replace(policy=policy, t_max=t_max, x_min=None, x_max=None,
                           record=RecordSpec((), (x_D,)))
        dr = detector_ratio(cfg, workers)
        points.append(dr)
        sat.append(dr.saturation.value)
        se.append(dr.saturation.stderr)
        if progress:
            progress(t_R, dr)
    meta = {"policy": base.policy.kind.value, "x_D": x_D, "axis": "t_R",
            "n": base.n_realizations}
    curve = Series(np.array(t_R_values), np.array(sat), np.array(se), meta)
    out = SaturationCurve(x_D, base.policy.kind.value, curve, points)
    finite = curve.select(np.isfinite(curve.value))
    out.crossings = count_unity_crossings(finite, band, stderr_k)
    try:
        out.fit = crossover_fit(finite)
    except ValueError as exc:
        out.fit_error = str(exc)
    return out


def profile_snapshot(config: RunConfig, t: int | None = None, workers: int = 1):
    """Mean profile at ``t`` (default ``t_max``) and the matching reference profile."""
    t = config.t_max if t is None else t
    config = with_records(config, times=(t,))
    stats, ref = run_with_reference(config, workers)
    return (snapshot_profile(stats, config, t),
            snapshot_profile(ref, reference_config(config), t))


def profile_ratio_at(config: RunConfig, t: int | None = None, workers: int = 1) -> Profile:
    prof, ref = profile_snapshot(config, t, workers)
    return profile_ratio(prof, ref, config.policy.x_D)


def correlation_series(config: RunConfig, r_values, workers: int = 1) -> dict[int, Series]:
    """g/g_inf between x_D + r and x_D for each ``r``."""
    r_values = [int(r) for r in r_values]
    for r in r_values:
        if r % 2:
            raise ValueError(f"r={r} is odd: sites x_D+r and x_D are never occupied "
                             "on the same tick, so g/g_inf is undefined")
    x_D = config.policy.x_D
    config = with_records(config, sites=[x_D] + [x_D + r for r in r_values])
    stats, ref = run_with_reference(config, workers)
    ref_cfg = reference_config(config)
    f0, finf0 = site_series(stats, config, x_D), site_series(ref, ref_cfg, x_D)
    out = {}
    for r in r_values:
        fr = site_series(stats, config, x_D + r)
        finfr = site_series(ref, ref_cfg, x_D + r)
        out[r] = correlation_ratio(fr, f0, finfr, finf0, r)
    return out


def l1_distance(a: Profile, b: Profile) -> float:
    if a.x.shape != b.x.shape or np.any(a.x != b.x):
        raise ValueError("profiles on different grids")
    return float(np.abs(a.value - b.value).sum())


def l1_stderr(a: Profile) -> float:
    """Standard error of an L1 distance to a fixed profile (first order, sites independent)."""
    if a.stderr is None:
        return 0.0
    return float(np.sqrt((a.stderr ** 2).sum()))
