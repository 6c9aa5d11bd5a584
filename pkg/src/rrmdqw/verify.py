"""Self-checks behind ``rrmdqw verify``.

Each check returns a :class:`CheckResult`.  The engine under test is a
step function with the signature of :func:`rrmdqw.walk.step`, so a
deliberately broken engine can be passed in to confirm the suite notices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import kernel, walk
from .detector import PolicyKind, PolicySpec
from .ensemble import RunConfig, run_realization
from .observables import Profile
from .oracle import compare, oracle_profile


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def swapped_shift_step(state, x_det):
    """A broken step that moves L to the right and R to the left."""
    new = walk.coin_step(state)
    L, R = new.psi
    psi = np.zeros_like(new.psi)
    psi[0, 1:] = L[:-1]
    psi[1, :-1] = R[1:]
    new = replace(new, psi=psi, t=state.t + 1)
    return walk.absorb(new, x_det)


def engine_profile(origin, coin, trajectory, t, step_fn=walk.step) -> Profile:
    """Profile at ``t`` from stepping the engine along a fixed detector trajectory."""
    state = walk.init_state(origin, coin, t)
    for s in range(1, t + 1):
        d = trajectory[s] if s < len(trajectory) else None
        state, _ = step_fn(state, d)
    return Profile(state.sites, walk.occupation_profile(state), None, t,
                   {"survival": walk.survival(state)})


def random_trajectory(rng, t, origin=0, p_present=0.7):
    out = [None]
    for _ in range(t):
        out.append(int(rng.integers(origin - 4, origin + 5)) if rng.random() < p_present else None)
    return out


# the symmetric coin alone cannot expose a mirrored engine: its walk is
# invariant under x -> -x combined with swapping the shift directions
ORACLE_COINS = [walk.SYMMETRIC_COIN, (1, 0), (0, 1),
                (walk.INV_SQRT2, walk.INV_SQRT2), (0.6, 0.8j)]


def check_oracle(n_trajectories=100, t_max=12, seed=0, step_fn=walk.step, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_trajectories):
        t = int(rng.integers(1, t_max + 1))
        traj = random_trajectory(rng, t)
        coin = ORACLE_COINS[i % len(ORACLE_COINS)]
        diff = compare(engine_profile(0, coin, traj, t, step_fn), oracle_profile(0, coin, traj, t))
        worst = max(worst, diff)
    return CheckResult("oracle equivalence", worst < tol,
                       f"{n_trajectories} random trajectories, t <= {t_max}: max |df| = {worst:.3e}")


def check_unitarity(t_max=1000, tol=1e-10):
    state = walk.init_state(0, walk.SYMMETRIC_COIN, t_max)
    out = kernel.evolve(state, t_max, np.full(t_max + 1, kernel.NO_DETECTOR))
    err = float(np.max(np.abs(out["survival"] - 1.0)))
    return CheckResult("unitarity", err < tol, f"max |S(t) - 1| for t <= {t_max}: {err:.3e}")


def check_conservation(t_max=1000, tol=1e-10, seed=0):
    worst = 0.0
    non_monotone = 0
    policies = [PolicySpec(PolicyKind.FIXED, 10, 1), PolicySpec(PolicyKind.QUENCH, 10, 50),
                PolicySpec(PolicyKind.RANDOM_BEYOND, 10, 20, L_R=200),
                PolicySpec(PolicyKind.RANDOM_WINDOW, 10, 5)]
    for policy in policies:
        res = run_realization(RunConfig(policy, t_max=t_max, n_realizations=1, base_seed=seed), 0)
        worst = max(worst, float(np.max(np.abs(res.survival + res.absorbed - 1.0))))
        non_monotone += int(np.sum(np.diff(res.survival) > 1e-14))
    ok = worst < tol and non_monotone == 0
    return CheckResult("conservation", ok,
                       f"max |S + absorbed - 1| = {worst:.3e}; survival increases: {non_monotone}")


def check_parity_light_cone(t_max=60, step_fn=walk.step):
    state = walk.init_state(0, walk.SYMMETRIC_COIN, t_max)
    bad = 0
    x = state.sites
    for t in range(1, t_max + 1):
        state, _ = step_fn(state, 7 if t < 30 else None)
        f = walk.occupation_profile(state)
        dead = (np.abs(x) > t) | ((x + t) % 2 == 1)
        bad += int(np.count_nonzero(f[dead]))
    return CheckResult("parity and light cone", bad == 0,
                       f"nonzero f at unreachable (x, t): {bad}")


def check_coin_involution(seed=0, tol=1e-14):
    rng = np.random.default_rng(seed)
    state = walk.init_state(0, walk.SYMMETRIC_COIN, 20)
    psi = rng.normal(size=state.psi.shape) + 1j * rng.normal(size=state.psi.shape)
    state = replace(state, psi=psi / np.linalg.norm(psi))
    twice = walk.coin_step(walk.coin_step(state))
    err = float(np.max(np.abs(twice.psi - state.psi)))
    return CheckResult("coin involution", err < tol, f"max |H H psi - psi| = {err:.3e}")


def check_kernel(t_max=300, seed=0, step_fn=walk.step):
    rng = np.random.default_rng(seed)
    traj = [None] + [int(rng.integers(-20, 40)) if rng.random() < 0.5 else None for _ in range(t_max)]
    state = walk.init_state(0, walk.SYMMETRIC_COIN, t_max)
    out = kernel.evolve(state, t_max, kernel.detector_indices(traj, state.x_min, state.x_max))
    for s in range(1, t_max + 1):
        state, _ = step_fn(state, traj[s])
    same = bool(np.array_equal(out["state"].psi, state.psi))
    return CheckResult("compiled kernel", same,
                       f"kernel and step-by-step fields bit-identical after {t_max} ticks: {same}")


def run_all(step_fn=walk.step, quick=False) -> list[CheckResult]:
    t_long = 200 if quick else 1000
    return [
        check_oracle(step_fn=step_fn),
        check_parity_light_cone(step_fn=step_fn),
        check_coin_involution(),
        check_kernel(step_fn=step_fn),
        check_unitarity(t_long),
        check_conservation(t_long),
    ]


MUTATIONS = {"swap-shift": swapped_shift_step}


def report(results, stream=None, elapsed=None) -> bool:
    import sys
    stream = stream or sys.stdout
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}", file=stream)
    ok = all(r.passed for r in results)
    tail = f" in {elapsed:.1f} s" if elapsed is not None else ""
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed{tail}", file=stream)
    return ok


def verify(mutation: str | None = None, stream=None) -> bool:
    t0 = time.perf_counter()
    step_fn = MUTATIONS[mutation] if mutation else walk.step
    results = run_all(step_fn)
    return report(results, stream, time.perf_counter() - t0)
