"""Exit criteria at desk scale: t_max = 1000, n <= 500, one CPU.

Each test prints one PASS/FAIL line (collected again at the end of the
session).  Run only these with ``pytest -m acceptance -s``.
"""

import numpy as np
import pytest
from scipy import stats

from rrmdqw import cli, experiments as ex, verify
from rrmdqw.detector import PolicyKind, PolicySpec, RngStream, relocate_model1, relocate_model2
from rrmdqw.ensemble import RecordSpec, RunConfig, run_ensemble, run_realization
from rrmdqw.observables import (correlation_ratio, count_unity_crossings, crossover_fit,
                                ratio_series, saturation)

pytestmark = pytest.mark.acceptance

K = PolicyKind
RELOCATING = (K.RANDOM_BEYOND, K.RANDOM_WINDOW)


def max_diff(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def test_01_oracle_equivalence(verdict):
    r = verify.check_oracle(n_trajectories=100, t_max=12, tol=1e-12)
    verdict(1, "oracle equivalence", r.passed, r.detail)


def test_02_unitarity_and_conservation(verdict):
    u = verify.check_unitarity(1000, 1e-10)
    worst = 0.0
    for policy in [PolicySpec(K.FIXED, 10), PolicySpec(K.QUENCH, 10, 50),
                   PolicySpec(K.RANDOM_BEYOND, 10, 20), PolicySpec(K.RANDOM_BEYOND, 10, 10, L_R=1000),
                   PolicySpec(K.RANDOM_WINDOW, 10, 5), PolicySpec(K.RANDOM_WINDOW, 10, 50)]:
        for seed in range(3):
            res = run_realization(RunConfig(policy, t_max=1000, n_realizations=1, base_seed=seed), 0)
            worst = max(worst, max_diff(res.survival + res.absorbed, 1.0))
    verdict(2, "unitarity/conservation", u.passed and worst < 1e-10,
            f"{u.detail}; max |S + absorbed - 1| over 18 runs = {worst:.2e}")


REC = RecordSpec((100, 500, 1000), (10, 0, -20, 30))


def siw_like(policy, seeds=range(5)):
    """Worst deviation of a relocating run from SIW over all recorded outputs."""
    siw = run_realization(RunConfig(PolicySpec(K.FIXED, 10), t_max=1000, n_realizations=1,
                                    record=REC), 0)
    worst = 0.0
    for seed in seeds:
        res = run_realization(RunConfig(policy, t_max=1000, n_realizations=1, base_seed=seed,
                                        record=REC), 0)
        for name in ("series", "profiles", "survival", "removed"):
            worst = max(worst, max_diff(getattr(res, name), getattr(siw, name)))
    return worst


def test_03_degenerate_limits(verdict):
    d1 = siw_like(PolicySpec(K.RANDOM_WINDOW, 10, 1))
    d2 = max(siw_like(PolicySpec(k, 10, 1000)) for k in RELOCATING)
    d3 = max(siw_like(PolicySpec(k, 10, 5000)) for k in RELOCATING)
    ok = max(d1, d2, d3) < 1e-12
    verdict(3, "degenerate limits", ok,
            f"rr2 t_R=1 vs SIW {d1:.1e}; t_R=t_max {d2:.1e}; t_R>t_max {d3:.1e}")


def test_04_pre_relocation_equality(verdict):
    siw = ex.detector_ratio(RunConfig(PolicySpec(K.FIXED, 10), t_max=1000, n_realizations=1)).ratio
    worst, checked = 0.0, 0
    for kind in RELOCATING:
        for t_R in (20, 40, 100):
            for seed in (0, 1, 7, 12345):
                cfg = RunConfig(PolicySpec(kind, 10, t_R), t_max=1000, n_realizations=1,
                                base_seed=seed)
                r = ex.detector_ratio(cfg).ratio
                early = r.select(r.t <= t_R)
                ref = siw.select(siw.t <= t_R)
                assert np.array_equal(early.t, ref.t)
                worst = max(worst, max_diff(early.value, ref.value))
                checked += 1
    verdict(4, "pre-relocation equality", worst < 1e-12,
            f"{checked} runs (both models, t_R 20/40/100, 4 seeds): max diff {worst:.1e}")


def batch_l1(cfg, refs, batches=10):
    """L1 distances of the full mean profile and of each batch mean to each reference."""
    per = cfg.n_realizations // batches
    cfg = ex.with_records(cfg, times=(cfg.t_max,))
    full = run_ensemble(cfg)
    parts = [run_ensemble(cfg, streams=range(b * per, (b + 1) * per)) for b in range(batches)]
    i = cfg.record.snapshot_times.index(cfg.t_max)

    def dists(s):
        return np.array([np.abs(s.mean["profiles"][i] - ref).sum() for ref in refs])

    return dists(full), np.array([dists(p) for p in parts])


def ref_profile(kind, t_max=1000):
    cfg = RunConfig(PolicySpec(kind, 10), t_max=t_max, n_realizations=1, record=RecordSpec((t_max,)))
    return run_realization(cfg, 0).profiles[0]


def test_05_fig1_regimes(verdict):
    iw, siw = ref_profile(K.NONE), ref_profile(K.FIXED)
    lines, ok = [], True

    def margin(full, batches, sign):
        # sign * (a - b) must exceed twice the batch-means standard error
        d = sign * (full[0] - full[1])
        se = np.std(sign * (batches[:, 0] - batches[:, 1]), ddof=1) / np.sqrt(len(batches))
        return d, se

    # (a) t_R = 50: closer to SIW than to IW
    for kind in RELOCATING:
        full, b = batch_l1(RunConfig(PolicySpec(kind, 10, 50), n_realizations=500), [iw, siw])
        d, se = margin(full, b, +1)
        ok &= d > 2 * se
        lines.append(f"{kind.value} t_R=50 L1(IW)-L1(SIW)={d:.3f} (SE {se:.1e})")
    # (b) t_R = 10, L_R = 1000
    f1, b1 = batch_l1(RunConfig(PolicySpec(K.RANDOM_BEYOND, 10, 10, L_R=1000), n_realizations=500),
                      [iw, siw])
    d, se = margin(f1, b1, -1)
    ok &= d > 2 * se
    lines.append(f"rr1 t_R=10 L1(SIW)-L1(IW)={d:.3f} (SE {se:.1e})")
    f2, b2 = batch_l1(RunConfig(PolicySpec(K.RANDOM_WINDOW, 10, 10), n_realizations=500), [iw, siw])
    d = f2[0] - f1[0]
    se = np.std(b2[:, 0] - b1[:, 0], ddof=1) / np.sqrt(len(b1))
    ok &= d > 2 * se
    lines.append(f"L1(IW) rr2-rr1={d:.3f} (SE {se:.1e})")
    verdict(5, "Fig. 1 regimes", bool(ok), "; ".join(lines))


def test_06_qqw_limit(verdict):
    rec = RecordSpec((1000,))
    qqw = run_realization(RunConfig(PolicySpec(K.QUENCH, 10, 20), n_realizations=1, record=rec), 0)
    cfg = RunConfig(PolicySpec(K.RANDOM_BEYOND, 10, 20, L_R=10 ** 6), n_realizations=500, record=rec)
    match = sum(max_diff(run_realization(cfg, k).profiles[0], qqw.profiles[0]) < 1e-10
                for k in range(cfg.n_realizations))
    frac = match / cfg.n_realizations
    verdict(6, "QQW limit of Model 1", frac >= 0.95, f"{match}/500 realizations match ({frac:.1%})")


def test_07_upper_branch_slope(verdict):
    base = RunConfig(PolicySpec(K.RANDOM_WINDOW, 10, 150), t_max=1000, n_realizations=500)
    sc = ex.saturation_curve(base, [150, 200, 300, 400, 600, 800])
    slope = np.polyfit(np.log(sc.curve.t), np.log(sc.curve.value), 1)[0]
    verdict(7, "1/t_R upper branch", abs(slope + 1) <= 0.2, f"log-log slope {slope:.3f}")


def crossover_grid(x_D):
    # saturation needs t_R >= x_D, so each grid starts at the detector site
    return sorted(set(int(round(v)) for v in np.geomspace(x_D, 800, 20)))


@pytest.mark.parametrize("kind", RELOCATING, ids=lambda k: k.value)
def test_08_crossover_quadratic(verdict, kind):
    star = {}
    for x_D in (10, 20):
        base = RunConfig(PolicySpec(kind, x_D, x_D), t_max=1000, n_realizations=100)
        fit = crossover_fit(ex.saturation_curve(base, crossover_grid(x_D)).curve)
        star[x_D] = fit.t_R_star
    ratio = star[20] / star[10]
    verdict(8, f"t_R* growth ({kind.value})", 2 <= ratio <= 6,
            f"t_R* = {star[10]:.0f} (x_D=10), {star[20]:.0f} (x_D=20), ratio {ratio:.2f}")


TABLE_I = {20: (3, 200), 25: (4, 325)}


def crossing_grid(x_D):
    low = list(range(x_D, 100, 4))
    return low + [int(round(v)) for v in np.geomspace(100, 800, 14)]


@pytest.mark.parametrize("kind", RELOCATING, ids=lambda k: k.value)
@pytest.mark.parametrize("x_D", [20, 25])
def test_09_table_one(verdict, x_D, kind):
    base = RunConfig(PolicySpec(kind, x_D, x_D), t_max=1000, n_realizations=100)
    sc = ex.saturation_curve(base, crossing_grid(x_D), stderr_k=2)
    raw = count_unity_crossings(sc.curve.select(np.isfinite(sc.curve.value)))
    count, last = sc.crossings.count, sc.crossings.last_crossing
    want, t_cross = TABLE_I[x_D]
    lo, hi = (100, 300) if x_D == 20 else (150, 525)
    ok = abs(count - want) <= 1 and last is not None and lo <= last <= hi
    verdict(9, f"Table I x_D={x_D} ({kind.value})", ok,
            f"{count} crossings (raw band {raw.count}), last at t_R={last:.0f}; "
            f"expected {want} +- 1, last in [{lo}, {hi}]")


def test_10_detection_count(verdict):
    res = run_realization(RunConfig(PolicySpec(K.RANDOM_BEYOND, 10, 20), n_realizations=1), 0)
    # the old detector still absorbs at the relocation tick t = t_R
    ticks = [t for t, _, _ in res.detections if t <= 20]
    verdict(10, "detection count", abs(len(ticks) - 5) <= 1,
            f"{len(ticks)} detections before relocation at ticks {ticks}")


def test_11_correlation_identity(verdict):
    worst, n = 0.0, 0
    for kind, t_R in [(K.RANDOM_WINDOW, 10), (K.RANDOM_BEYOND, 50), (K.FIXED, 1), (K.QUENCH, 30)]:
        cfg = RunConfig(PolicySpec(kind, 10, t_R), t_max=600, n_realizations=20,
                        record=RecordSpec((), (10, 30, -10, 14)))
        st_, ref = ex.run_with_reference(cfg)
        ref_cfg = ex.reference_config(cfg)
        f0, i0 = ex.site_series(st_, cfg, 10), ex.site_series(ref, ref_cfg, 10)
        for x in (30, -10, 14):
            fr, ir = ex.site_series(st_, cfg, x), ex.site_series(ref, ref_cfg, x)
            g = correlation_ratio(fr, f0, ir, i0, x - 10)
            a, b = ratio_series(fr, ir), ratio_series(f0, i0)
            prod = a.value[np.isin(a.t, g.t)] * b.value[np.isin(b.t, g.t)]
            worst = max(worst, float(np.max(np.abs(g.value - prod) / np.maximum(1, prod))))
            n += 1
    verdict(11, "correlation identity", worst < 1e-12, f"{n} site pairs: max rel diff {worst:.1e}")


def test_12_correlation_regimes(verdict):
    lines, ok = [], True
    cases = [(K.RANDOM_WINDOW, 10, 20, +1), (K.RANDOM_WINDOW, 10, -20, +1),
             (K.RANDOM_BEYOND, 50, 20, -1), (K.RANDOM_WINDOW, 50, 20, -1)]
    for kind, t_R, r, side in cases:
        cfg = RunConfig(PolicySpec(kind, 10, t_R), t_max=1000, n_realizations=500)
        est = saturation(ex.correlation_series(cfg, [r])[r])
        good = side * (est.value - 1) > 2 * est.stderr
        ok &= good
        lines.append(f"{kind.value} t_R={t_R} r={r:+d}: {est.value:.3f} +- {est.stderr:.3f}")
    verdict(12, "correlation regimes", bool(ok), "; ".join(lines))


def value_columns(path):
    return [line.split(b",")[:2] for line in path.read_bytes().splitlines()]


def test_13_reproducibility(verdict, tmp_path):
    args = ["run", "--model", "rr2", "--tr", "10", "--tmax", "1000", "--n", "40", "--seed", "2024"]
    dirs = {}
    for name, workers in [("a", 1), ("b", 1), ("c", 4)]:
        dirs[name] = tmp_path / name
        assert cli.main(args + ["--workers", str(workers), "--out", str(dirs[name])]) == 0
    files = sorted(p.name for p in dirs["a"].glob("*.csv"))
    same_run = all((dirs["a"] / f).read_bytes() == (dirs["b"] / f).read_bytes() for f in files)
    same_threads = all((dirs["a"] / f).read_bytes() == (dirs["c"] / f).read_bytes() for f in files)
    verdict(13, "reproducibility", same_run and same_threads,
            f"{len(files)} CSVs byte-identical across runs: {same_run}, 1 vs 4 threads: {same_threads}")


def test_14_sampler_uniformity(verdict):
    n = 10 ** 5
    rng = RngStream(11, 0)
    m1 = np.array([relocate_model1(rng, 10, 110) for _ in range(n)])
    p1 = stats.chisquare(np.bincount(m1 - 11, minlength=100)).pvalue
    rng = RngStream(11, 1)
    m2 = np.array([relocate_model2(rng, 40, 50) for _ in range(n)])
    p2 = stats.chisquare(np.bincount(m2 - 40, minlength=50)).pvalue
    in_range = m1.min() >= 11 and m1.max() <= 110 and m2.min() >= 40 and m2.max() <= 89
    verdict(14, "sampler uniformity", p1 > 1e-3 and p2 > 1e-3 and in_range,
            f"Model 1 (100 sites) p={p1:.3f}; Model 2 (50 sites) p={p2:.3f}")
