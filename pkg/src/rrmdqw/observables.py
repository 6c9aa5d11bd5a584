"""Ratios to the detector-free walk and the scalars extracted from them.

f_inf (the infinite walk) vanishes at a site on every other tick and
before the walker can reach it, so every ratio here is defined only where
the reference exceeds ``epsilon``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPSILON = 1e-30


@dataclass
class Series:
    """Values against time (or against t_R for sweep curves)."""

    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t)
        self.value = np.asarray(self.value, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.value.shape:
                raise ValueError("stderr and value shapes differ")
        if self.t.shape != self.value.shape or self.t.ndim != 1:
            raise ValueError("t and value must be 1-d arrays of equal length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("series abscissa must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def select(self, mask) -> "Series":
        se = None if self.stderr is None else self.stderr[mask]
        return Series(self.t[mask], self.value[mask], se, dict(self.meta))


@dataclass
class Profile:
    """Values over lattice sites (or displacements ``r``) at one time."""

    x: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None = None
    t: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x)
        self.value = np.asarray(self.value, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)

    def at(self, x: int) -> float:
        i = np.searchsorted(self.x, x)
        if i >= len(self.x) or self.x[i] != x:
            raise KeyError(x)
        return float(self.value[i])


@dataclass(frozen=True)
class SaturationEstimate:
    value: float
    window: tuple[float, float]
    slope: float
    converged: bool
    stderr: float = float("nan")
    n_points: int = 0


@dataclass(frozen=True)
class CrossingReport:
    count: int
    last_crossing: float | None
    crossings: tuple[float, ...] = ()


@dataclass(frozen=True)
class CrossoverFit:
    t_R_star: float
    slope_below: float
    slope_above: float
    sse: float
    degenerate: bool
    decade_above: bool
    intercept_above: float = float("nan")


def _ratio_stderr(num_se, num, den, den_se=None):
    if num_se is None:
        return None
    out = num_se / den
    if den_se is not None:
        out = np.hypot(out, num * den_se / den ** 2)
    return out


def ratio_series(f: Series, f_inf: Series, epsilon: float = EPSILON) -> Series:
    """f / f_inf on the ticks where f_inf > epsilon.

    The reference is treated as exact; the standard error of ``f`` is
    scaled through.
    """
    if f.t.shape != f_inf.t.shape or np.any(f.t != f_inf.t):
        raise ValueError("series must share the same time grid")
    ok = f_inf.value > epsilon
    if not ok.any():
        raise ValueError("reference series is zero everywhere; no valid ticks")
    se = _ratio_stderr(None if f.stderr is None else f.stderr[ok], f.value[ok],
                       f_inf.value[ok])
    meta = dict(f.meta)
    meta["parity_filter"] = f"f_inf > {epsilon:g}"
    return Series(f.t[ok], f.value[ok] / f_inf.value[ok], se, meta)


def saturation_onset(meta: dict) -> float:
    """Default start of the saturation window: max(4 t_R, 2 x_D)."""
    t_R = meta.get("t_R") or 0
    x_D = meta.get("x_D") or 0
    return max(4 * t_R, 2 * x_D)


def saturation(series: Series, window_fraction: float = 0.25,
               onset: float | None = None, min_points: int = 20) -> SaturationEstimate:
    """Long-time level of a ratio series.

    Mean over the trailing ``window_fraction`` of the points at or after
    ``onset`` (default from the series metadata).  ``converged`` requires the
    fitted drift across the window to stay under 1% of the level.
    """
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must be in (0, 1]")
    if onset is None:
        onset = saturation_onset(series.meta)
    after = series.select(series.t >= onset)
    if len(series) < min_points or len(after) < 2:
        return SaturationEstimate(float("nan"), (float("nan"), float("nan")),
                                  float("nan"), False, n_points=len(after))
    m = max(2, int(np.ceil(window_fraction * len(after))))
    win = after.select(np.arange(len(after)) >= len(after) - m)
    value = float(win.value.mean())
    slope = float(np.polyfit(win.t.astype(float), win.value, 1)[0])
    t_lo, t_hi = float(win.t[0]), float(win.t[-1])
    converged = abs(slope) * (t_hi - t_lo) < 0.01 * abs(value)
    # neighbouring ticks are correlated, so quote the mean per-point error
    # (an upper bound on the error of the window mean)
    se = float(win.stderr.mean()) if win.stderr is not None else float("nan")
    return SaturationEstimate(value, (t_lo, t_hi), slope, bool(converged), se, len(win))


def count_unity_crossings(series: Series, band: float = 0.005,
                          stderr_k: float = 0.0) -> CrossingReport:
    """Count sign changes of ``value - 1`` with a hysteresis band.

    A crossing is registered only once the curve has left ``1 +/- band`` on
    the opposite side from where it last was.  With ``stderr_k > 0`` the
    half-width at each point widens to ``max(band, stderr_k * stderr)`` so
    excursions inside the ensemble noise are not counted.  Each crossing is
    located by linear interpolation across the last sign change of
    ``value - 1``.
    """
    if band < 0 or stderr_k < 0:
        raise ValueError("band and stderr_k must be >= 0")
    v = series.value
    t = series.t.astype(float)
    width = np.full(len(v), float(band))
    if stderr_k and series.stderr is not None:
        width = np.maximum(width, stderr_k * np.nan_to_num(series.stderr))
    state = 0
    crossings = []
    for i, val in enumerate(v):
        if val > 1 + width[i]:
            new = 1
        elif val < 1 - width[i]:
            new = -1
        else:
            continue
        if state and new != state:
            crossings.append(_locate_crossing(t, v, i))
        state = new
    return CrossingReport(len(crossings), crossings[-1] if crossings else None,
                          tuple(crossings))


def _locate_crossing(t, v, i):
    d = v - 1.0
    for j in range(i, 0, -1):
        if d[j] == 0:
            return float(t[j])
        if np.sign(d[j]) != np.sign(d[j - 1]):
            if d[j - 1] == 0:
                return float(t[j - 1])
            w = d[j - 1] / (d[j - 1] - d[j])
            return float(t[j - 1] + w * (t[j] - t[j - 1]))
    return float(t[i])


def _line_sse(x, y):
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(resid @ resid), coef


def crossover_fit(sat_curve: Series, min_segment: int = 3,
                  degenerate_tol: float = 1e-9) -> CrossoverFit:
    """Two straight lines in log(value) vs log(t_R), split where the SSE is least.

    Candidate breakpoints are the interior grid points; the breakpoint is the
    first t_R of the upper segment.  ``degenerate`` flags a curve where every
    split fits equally well (a single power law); ``decade_above`` reports
    whether the upper segment spans at least a factor of ten.
    """
    keep = (sat_curve.value > 0) & np.isfinite(sat_curve.value)
    x = np.log(sat_curve.t[keep].astype(float))
    y = np.log(sat_curve.value[keep])
    n = len(x)
    if n < 2 * min_segment or n < 8:
        raise ValueError(f"crossover fit needs at least {max(8, 2 * min_segment)} positive points, got {n}")
    best = None
    sses = []
    for b in range(min_segment, n - min_segment + 1):
        sse_lo, c_lo = _line_sse(x[:b], y[:b])
        sse_hi, c_hi = _line_sse(x[b:], y[b:])
        total = sse_lo + sse_hi
        sses.append(total)
        if best is None or total < best[0]:
            best = (total, b, c_lo, c_hi)
    total, b, c_lo, c_hi = best
    sses = np.array(sses)
    scale = max(float(np.var(y)) * n, 1e-300)
    degenerate = bool(np.all(sses - total <= degenerate_tol * scale + 1e-24))
    t_star = float(np.exp(x[b]))
    return CrossoverFit(t_star, float(c_lo[0]), float(c_hi[0]), total, degenerate,
                        bool(x[-1] - x[b] >= np.log(10) - 1e-12), float(c_hi[1]))


def profile_ratio(f_profile: Profile, f_inf_profile: Profile, x_D: int,
                  epsilon: float = EPSILON) -> Profile:
    """f(x_D + r) / f_inf(x_D + r) over the sites the reference reaches."""
    if f_profile.x.shape != f_inf_profile.x.shape or np.any(f_profile.x != f_inf_profile.x):
        raise ValueError("profiles must share the same site grid")
    if f_profile.t != f_inf_profile.t:
        raise ValueError("profiles must be taken at the same time")
    ok = f_inf_profile.value > epsilon
    se = _ratio_stderr(None if f_profile.stderr is None else f_profile.stderr[ok],
                       f_profile.value[ok], f_inf_profile.value[ok])
    meta = dict(f_profile.meta, x_D=x_D, axis="r")
    return Profile(f_profile.x[ok] - x_D, f_profile.value[ok] / f_inf_profile.value[ok],
                   se, f_profile.t, meta)


def correlation_ratio(f_r: Series, f_0: Series, f_inf_r: Series, f_inf_0: Series,
                      r: int | None = None, epsilon: float = EPSILON) -> Series:
    """g / g_inf with g(x_D + r, t) = f(x_D + r, t) f(x_D, t).

    Sites an odd distance apart are never occupied on the same tick, so odd
    ``r`` is rejected.  ``r`` defaults to the difference of the ``site``
    entries in the series metadata.
    """
    if r is None:
        r = f_r.meta.get("site", 0) - f_0.meta.get("site", 0)
    if r % 2:
        raise ValueError(f"r={r} is odd: f(x_D+r) and f(x_D) are never both nonzero")
    for s in (f_0, f_inf_r, f_inf_0):
        if s.t.shape != f_r.t.shape or np.any(s.t != f_r.t):
            raise ValueError("series must share the same time grid")
    ok = (f_inf_r.value > epsilon) & (f_inf_0.value > epsilon)
    if not ok.any():
        raise ValueError("no tick where both reference series are nonzero")
    g = f_r.value[ok] * f_0.value[ok]
    g_inf = f_inf_r.value[ok] * f_inf_0.value[ok]
    se = None
    if f_r.stderr is not None and f_0.stderr is not None:
        # first-order propagation, sites treated as uncorrelated
        se = np.hypot(f_r.stderr[ok] * f_0.value[ok], f_0.stderr[ok] * f_r.value[ok]) / g_inf
    meta = dict(f_0.meta, r=r, parity_filter=f"f_inf > {epsilon:g}")
    return Series(f_r.t[ok], g / g_inf, se, meta)
