"""Compiled inner loop for long runs.

Performs the same arithmetic as :func:`rrmdqw.walk.step` in the same order,
so a run through this kernel is bit-identical to stepping a
:class:`~rrmdqw.walk.WalkerState` by hand.  Work per tick is restricted to
the current light cone.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .walk import INV_SQRT2, UNDERFLOW_CUTOFF, LatticeError, WalkerState

NO_DETECTOR = -1


@njit(cache=True, nogil=True, inline="always")
def _flush(v):
    return 0.0 if abs(v) < UNDERFLOW_CUTOFF else v


@njit(cache=True, nogil=True)
def _record(t, i, A, B, lo, hi, tracked, snap_times, k_snap, series, snaps):
    for m in range(tracked.shape[0]):
        j = tracked[m]
        series[m, i] = A[j].real ** 2 + A[j].imag ** 2 + B[j].real ** 2 + B[j].imag ** 2
    while k_snap < snap_times.shape[0] and snap_times[k_snap] == t:
        for j in range(lo, hi + 1):
            snaps[k_snap, j] = (A[j].real ** 2 + A[j].imag ** 2
                                + B[j].real ** 2 + B[j].imag ** 2)
        k_snap += 1
    return k_snap


@njit(cache=True, nogil=True)
def _evolve(L, R, t0, t_max, det, tracked, snap_times, series, snaps, surv, removed):
    """Evolve ``(L, R)`` in place from ``t0`` to ``t_max``.

    Returns -1 on success, otherwise the tick at which amplitude sat on the
    lattice edge (``L``/``R`` then hold the state at that tick).
    """
    n = L.shape[0]
    c = INV_SQRT2
    lo = 0
    hi = -1
    for j in range(n):
        if L[j] != 0 or R[j] != 0:
            if hi < 0:
                lo = j
            hi = j

    # a field living on one parity class stays on one: skip the dead sites
    stride = 2
    for j in range(lo, hi + 1):
        if (j - lo) % 2 == 1 and (L[j] != 0 or R[j] != 0):
            stride = 1
            break

    A = L.copy()
    B = R.copy()
    A2 = np.zeros_like(L)
    B2 = np.zeros_like(R)

    k_snap = 0
    while k_snap < snap_times.shape[0] and snap_times[k_snap] < t0:
        k_snap += 1
    s = 0.0
    for j in range(lo, hi + 1):
        s += A[j].real ** 2 + A[j].imag ** 2 + B[j].real ** 2 + B[j].imag ** 2
    surv[0] = s
    k_snap = _record(t0, 0, A, B, lo, hi, tracked, snap_times, k_snap, series, snaps)

    status = -1
    for t in range(t0 + 1, t_max + 1):
        s = 0.0
        if hi >= 0:
            if lo == 0 or hi == n - 1:
                status = t - 1
                break
            # new field on [lo-1, hi+1]; the old one is dead outside [lo, hi]
            A2[hi] = 0
            A2[hi + 1] = 0
            B2[lo - 1] = 0
            B2[lo] = 0
            for j in range(lo - 1, hi, stride):
                u = A[j + 1]
                v = B[j + 1]
                a = complex(_flush((u.real + v.real) * c), _flush((u.imag + v.imag) * c))
                A2[j] = a
                s += a.real ** 2 + a.imag ** 2
            for j in range(lo + 1, hi + 2, stride):
                u = A[j - 1]
                v = B[j - 1]
                b = complex(_flush((u.real - v.real) * c), _flush((u.imag - v.imag) * c))
                B2[j] = b
                s += b.real ** 2 + b.imag ** 2
            lo -= 1
            hi += 1
        d = det[t]
        r = 0.0
        if d >= 0 and lo <= d <= hi:
            r = (A2[d].real ** 2 + A2[d].imag ** 2
                 + B2[d].real ** 2 + B2[d].imag ** 2)
            if r != 0.0:
                A2[d] = 0
                B2[d] = 0
                s -= r
        removed[t - t0] = r
        surv[t - t0] = s
        A, A2 = A2, A
        B, B2 = B2, B
        k_snap = _record(t, t - t0, A, B, lo, hi, tracked, snap_times, k_snap,
                         series, snaps)

    L[:] = A
    R[:] = B
    return status


def detector_indices(positions, x_min: int, x_max: int) -> np.ndarray:
    """Map detector sites (``None`` = absent) to lattice indices for the kernel.

    Sites outside the window are treated as absent: no amplitude can be
    there.
    """
    out = np.full(len(positions), NO_DETECTOR, dtype=np.int64)
    for t, x in enumerate(positions):
        if x is not None and x_min <= x <= x_max:
            out[t] = x - x_min
    return out


def evolve(state: WalkerState, t_max: int, det_index: np.ndarray,
           tracked_sites=(), snapshot_times=()):
    """Run ``state`` forward to ``t_max``, recording along the way.

    ``det_index[t]`` is the lattice index of the detector acting on the
    amplitude produced at tick ``t`` (``NO_DETECTOR`` when absent).

    Returns a dict with ``series`` (tracked sites x ticks), ``snapshots``
    (snapshot times x lattice), ``survival`` and ``removed`` (one entry per
    tick from ``state.t`` to ``t_max``) and the final ``state``.
    """
    t0 = state.t
    if t_max < t0:
        raise ValueError("t_max before current time")
    det_index = np.asarray(det_index, dtype=np.int64)
    if det_index.shape[0] < t_max + 1:
        raise ValueError("detector index array shorter than t_max + 1")
    n_t = t_max - t0 + 1
    tracked = np.array([state.index(x) for x in tracked_sites], dtype=np.int64)
    snap_times = np.asarray(sorted(snapshot_times), dtype=np.int64)
    series = np.zeros((len(tracked), n_t))
    snaps = np.zeros((len(snap_times), state.psi.shape[1]))
    surv = np.zeros(n_t)
    removed = np.zeros(n_t)
    L = state.psi[0].copy()
    R = state.psi[1].copy()
    status = _evolve(L, R, t0, t_max, det_index, tracked, snap_times, series,
                     snaps, surv, removed)
    if status >= 0:
        raise LatticeError(
            f"amplitude on lattice edge at t={status}; window [{state.x_min}, "
            f"{state.x_max}] is too small")
    final = WalkerState(t=t_max, x_min=state.x_min, x_max=state.x_max,
                        origin=state.origin, psi=np.stack([L, R]))
    return {"series": series, "snapshots": snaps, "survival": surv,
            "removed": removed, "state": final}
