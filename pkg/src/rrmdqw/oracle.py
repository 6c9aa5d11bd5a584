"""Brute-force path sum over every coin history.

A path is the initial chirality followed by the chirality chosen at each of
``t`` coin tosses.  Each toss multiplies the amplitude by
H[new, old] = +-1/sqrt(2) (minus only for R -> R) and moves the walker one
site (L to the left, R to the right).  A path dies when it lands on the
detector site for that tick.  Amplitudes of surviving paths are summed
coherently per (site, chirality).

When the initial coin is a Gaussian integer multiple of a power of
1/sqrt(2) (the default symmetric coin is), the sums are carried out in exact
integer arithmetic and converted to float only at the end.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .observables import Profile
from .walk import SYMMETRIC_COIN, check_coin

MAX_TIME = 20


def _dyadic_coin(coin, max_power=6):
    """Gaussian integers ``g`` and ``k`` with coin == g / sqrt(2)**k, or None."""
    for k in range(max_power + 1):
        scale = math.sqrt(2.0) ** k
        g = []
        for a in coin:
            re, im = a.real * scale, a.imag * scale
            rr, ri = round(re), round(im)
            if abs(re - rr) > 1e-12 or abs(im - ri) > 1e-12:
                break
            g.append((int(rr), int(ri)))
        else:
            return g, k
    return None


def _enumerate(t, origin, det):
    """Final site, final chirality, sign and initial chirality of every live path."""
    n_paths = 1 << (t + 1)
    p = np.arange(n_paths, dtype=np.int64)
    prev = (p & 1).astype(np.int8)          # 0 = L, 1 = R
    x = np.full(n_paths, origin, dtype=np.int64)
    sign = np.ones(n_paths, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)
    c0 = prev.copy()
    for s in range(1, t + 1):
        cur = ((p >> s) & 1).astype(np.int8)
        sign = np.where((cur == 1) & (prev == 1), -sign, sign)
        x += 2 * cur.astype(np.int64) - 1
        d = det[s] if s < len(det) else None
        if d is not None:
            alive &= x != d
        prev = cur
    return x[alive], prev[alive], sign[alive], c0[alive]


def oracle_profile(origin: int = 0, coin=SYMMETRIC_COIN, trajectory=None, t: int = 0) -> Profile:
    """Exact occupation profile at time ``t`` by explicit path summation.

    ``trajectory[s]`` is the detector site acting at tick ``s`` (``None``
    for no detector); a missing or short trajectory means no detector.
    The returned profile covers ``origin - t .. origin + t``; its
    ``meta["survival"]`` holds the total and ``meta["exact"]`` whether
    integer arithmetic was used.
    """
    if not 0 <= t <= MAX_TIME:
        raise ValueError(f"path-sum oracle limited to 0 <= t <= {MAX_TIME}, got {t}")
    a = check_coin(coin)
    det = list(trajectory) if trajectory is not None else []
    x, c, sign, c0 = _enumerate(t, origin, det)
    sites = np.arange(origin - t, origin + t + 1)
    key = (x - sites[0]) * 2 + c
    n_keys = 2 * len(sites)
    dyadic = _dyadic_coin(a)
    values = np.zeros(len(sites))
    if dyadic is not None:
        g, k = dyadic
        g_re = np.array([g[0][0], g[1][0]], dtype=np.int64)[c0] * sign
        g_im = np.array([g[0][1], g[1][1]], dtype=np.int64)[c0] * sign
        re = np.zeros(n_keys, dtype=np.int64)
        im = np.zeros(n_keys, dtype=np.int64)
        np.add.at(re, key, g_re)
        np.add.at(im, key, g_im)
        norm2 = re * re + im * im
        denom = 1 << (t + k)
        per_site = norm2[0::2] + norm2[1::2]
        values = np.array([float(Fraction(int(v), denom)) for v in per_site])
        total = float(Fraction(int(per_site.sum()), denom))
    else:
        amp = np.array(a, dtype=np.complex128)[c0] * sign * 2.0 ** (-t / 2)
        re = np.bincount(key, weights=amp.real, minlength=n_keys)
        im = np.bincount(key, weights=amp.imag, minlength=n_keys)
        norm2 = re * re + im * im
        values = norm2[0::2] + norm2[1::2]
        total = float(values.sum())
    return Profile(sites, values, None, t,
                   {"survival": total, "exact": dyadic is not None})


def compare(engine_profile: Profile, reference: Profile) -> float:
    """Largest absolute difference over all sites and over the survival."""
    xs = np.union1d(engine_profile.x, reference.x)
    a = np.zeros(len(xs))
    b = np.zeros(len(xs))
    a[np.searchsorted(xs, engine_profile.x)] = engine_profile.value
    b[np.searchsorted(xs, reference.x)] = reference.value
    diff = float(np.max(np.abs(a - b))) if len(xs) else 0.0
    s_a = engine_profile.meta.get("survival", float(engine_profile.value.sum()))
    s_b = reference.meta.get("survival", float(reference.value.sum()))
    return max(diff, abs(s_a - s_b))
