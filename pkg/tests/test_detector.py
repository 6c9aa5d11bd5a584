import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rrmdqw.detector import (PolicyKind, PolicySpec, RngStream, build_trajectory,
                             n_intervals, position_at, relocate_model1, relocate_model2)

K = PolicyKind


def test_fixed_position():
    assert position_at(PolicySpec(K.FIXED, 10), None, 999) == 10


def test_none_position():
    assert position_at(PolicySpec(K.NONE), None, 5) is None


def test_quench_removed_after_tq():
    p = PolicySpec(K.QUENCH, 10, t_q=50)
    assert position_at(p, None, 50) == 10
    assert position_at(p, None, 51) is None


def test_quench_defaults_to_t_R():
    p = PolicySpec(K.QUENCH, 10, 20)
    assert position_at(p, None, 20) == 10 and position_at(p, None, 21) is None


def test_window_t_R_1_never_moves():
    p = PolicySpec(K.RANDOM_WINDOW, 10, 1)
    traj = build_trajectory(p, RngStream(3, 0), 500)
    assert set(traj.sites(500)) == {10}


def test_interval_boundaries():
    p = PolicySpec(K.RANDOM_BEYOND, 10, 20, L_R=1000)
    traj = build_trajectory(p, RngStream(0, 0), 100)
    assert len(traj.positions) == 5
    # the old detector still absorbs at t = k * t_R
    assert traj.position_at(0) == traj.position_at(20) == 10
    assert traj.position_at(21) == traj.positions[1]
    assert traj.position_at(40) == traj.positions[1]
    assert traj.interval_of(41) == 2


def test_short_run_single_interval():
    p = PolicySpec(K.RANDOM_BEYOND, 10, 50)
    traj = build_trajectory(p, RngStream(0, 0), 30)
    assert traj.positions == (10,)


def test_trajectory_needs_rng():
    with pytest.raises(ValueError):
        build_trajectory(PolicySpec(K.RANDOM_WINDOW, 10, 5), None, 10)


def test_trajectory_does_not_cover():
    traj = build_trajectory(PolicySpec(K.RANDOM_WINDOW, 10, 5), RngStream(0, 0), 10)
    with pytest.raises(IndexError):
        traj.position_at(11)


def test_n_intervals():
    assert n_intervals(20, 100) == 5
    assert n_intervals(20, 101) == 6
    assert n_intervals(50, 10) == 1


@pytest.mark.parametrize("kw", [dict(t_R=0), dict(x_D=0), dict(L_R=10), dict(window_upper="open")])
def test_policy_validation(kw):
    args = dict(kind=K.RANDOM_BEYOND, x_D=10, t_R=5)
    args.update(kw)
    with pytest.raises(ValueError):
        PolicySpec(**args)


def test_policy_round_trip():
    p = PolicySpec(K.RANDOM_WINDOW, 12, 7, None, "inclusive", None)
    assert PolicySpec.from_dict(p.to_dict()) == p
    assert PolicySpec("rr1").kind is K.RANDOM_BEYOND


def test_default_L_R():
    assert PolicySpec(K.RANDOM_BEYOND, 10, 5).resolved_L_R(1000) == 10000


# samplers

def test_model1_singleton():
    rng = RngStream(1, 2)
    assert {relocate_model1(rng, 10, 11) for _ in range(100)} == {11}


def test_model1_empty_range():
    with pytest.raises(ValueError):
        relocate_model1(RngStream(0, 0), 10, 10)


def test_model1_chi_square():
    rng = RngStream(0, 0)
    draws = np.array([relocate_model1(rng, 10, 110) for _ in range(100_000)])
    assert draws.min() >= 11 and draws.max() <= 110
    counts = np.bincount(draws - 11, minlength=100)
    assert stats.chisquare(counts).pvalue > 0.001


def test_model2_exclusive_t_R_1():
    rng = RngStream(0, 0)
    assert {relocate_model2(rng, 7, 1) for _ in range(100)} == {7}


def test_model2_inclusive_t_R_1():
    rng = RngStream(0, 0)
    draws = np.array([relocate_model2(rng, 7, 1, "inclusive") for _ in range(20_000)])
    assert set(draws) == {7, 8}
    assert abs(np.mean(draws == 8) - 0.5) < 0.02


def test_model2_mean_displacement():
    rng = RngStream(5, 0)
    d = np.array([relocate_model2(rng, 0, 20) for _ in range(100_000)])
    assert d.min() == 0 and d.max() == 19
    assert abs(d.mean() - 9.5) < 0.2


def test_model1_huge_L_R_rarely_near():
    p = PolicySpec(K.RANDOM_BEYOND, 10, 20, L_R=10 ** 6)
    near = 0
    for k in range(200):
        traj = build_trajectory(p, RngStream(0, k), 1000)
        near += sum(x <= 1000 for x in traj.positions[1:])
    assert near / (200 * 49) < 1e-2


# streams

def test_stream_reproducible_and_independent():
    a = [RngStream(9, 4).integer(0, 10 ** 9) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    assert RngStream(9, 4).integer(0, 10 ** 9) != RngStream(9, 5).integer(0, 10 ** 9)
    assert RngStream(9, 4).integer(0, 10 ** 9) != RngStream(10, 4).integer(0, 10 ** 9)


def test_stream_counts_draws():
    rng = RngStream(0, 0)
    for _ in range(4):
        rng.integer(0, 3)
    assert rng.draws == 4


def test_stream_rejects_negative_seed():
    with pytest.raises(ValueError):
        RngStream(-1, 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), stream=st.integers(0, 2 ** 20),
       x_D=st.integers(1, 50), t_R=st.integers(1, 30), mode=st.sampled_from(["exclusive", "inclusive"]))
def test_window_steps_bounded(seed, stream, x_D, t_R, mode):
    p = PolicySpec(K.RANDOM_WINDOW, x_D, t_R, window_upper=mode)
    traj = build_trajectory(p, RngStream(seed, stream), 300)
    steps = np.diff(traj.positions)
    top = t_R if mode == "inclusive" else t_R - 1
    assert traj.positions[0] == x_D
    assert np.all((steps >= 0) & (steps <= top))
    assert build_trajectory(p, RngStream(seed, stream), 300) == traj


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), x_D=st.integers(1, 50),
       span=st.integers(1, 500), t_R=st.integers(1, 30))
def test_beyond_in_range(seed, x_D, span, t_R):
    p = PolicySpec(K.RANDOM_BEYOND, x_D, t_R, L_R=x_D + span)
    traj = build_trajectory(p, RngStream(seed, 0), 200)
    later = np.array(traj.positions[1:])
    assert np.all((later > x_D) & (later <= x_D + span))
