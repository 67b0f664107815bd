import math

import numpy as np
import pytest

from mcastsim import analytic, schedulers
from mcastsim.analytic import OrderStatSpec
from mcastsim.schedulers import CAP_VIOLATION, CONTINUE, SUCCESS, IrState, IrStateError

from oracles import ks_distance


# ---------------------------------------------------------------------------
# fixed-fraction scheduler
# ---------------------------------------------------------------------------

def test_static_schedule_hand_example():
    decision = schedulers.static_schedule([0.1, 0.9, 0.4, 2.0], 2, 1.0)
    assert decision.target_position == 3
    assert decision.rate == pytest.approx(math.log(1.9), abs=1e-12)
    assert decision.decodable_set == frozenset({1, 3})
    assert decision.group == 0


def test_static_schedule_worst_and_best_reductions():
    gains = [0.5, 2.0, 0.1, 1.3]
    worst = schedulers.static_schedule(gains, 1, 1.0)
    assert worst.decodable_set == frozenset({0, 1, 2, 3})
    assert worst.target_position == 1
    assert worst.rate == pytest.approx(math.log1p(0.1))
    best = schedulers.static_schedule(gains, 4, 1.0)
    assert best.decodable_set == frozenset({1})
    assert best.target_position == 4
    assert best.rate == pytest.approx(math.log1p(2.0))


def test_static_schedule_breaks_ties_toward_low_index():
    decision = schedulers.static_schedule([1.0, 1.0, 1.0, 1.0], 2, 1.0)
    assert decision.decodable_set == frozenset({0, 1})
    decision = schedulers.static_schedule([0.5, 1.0, 1.0, 0.2], 4, 1.0)
    assert decision.decodable_set == frozenset({1})


def test_static_schedule_validates_input():
    with pytest.raises(ValueError):
        schedulers.static_schedule([1.0, 2.0, 3.0], 2, 1.0)
    with pytest.raises(ValueError):
        schedulers.static_schedule([1.0, -2.0], 1, 1.0)
    with pytest.raises(ValueError):
        schedulers.static_schedule([1.0, 2.0], 1, 0.0)


def test_static_rate_distribution_matches_order_statistic():
    n, alpha, power = 6, 3, 1.0
    spec = OrderStatSpec(n_users=n, position=n - n // alpha + 1)
    rng = np.random.default_rng(515)
    rates = np.empty(10 ** 5)
    for i in range(rates.size):
        rates[i] = schedulers.static_schedule(rng.exponential(1.0, n), alpha, power).rate

    def rate_cdf(r):
        return analytic.order_stat_cdf(spec, math.expm1(r) / power)

    assert ks_distance(rates, rate_cdf) < 0.01


def test_static_schedule_scale_invariance():
    rng = np.random.default_rng(99)
    for _ in range(200):
        gains = rng.exponential(1.0, 8)
        base = schedulers.static_schedule(gains, 2, 1.0)
        for lam in (1.5, 3.0, 10.0):
            scaled = schedulers.static_schedule(lam * gains, 2, 1.0)
            assert scaled.rate >= base.rate
            assert scaled.target_position == base.target_position
            assert scaled.decodable_set == base.decodable_set


def test_static_alpha_two_targets_median_position():
    for n in (2, 4, 8, 12):
        decision = schedulers.static_schedule(np.arange(1.0, n + 1.0), 2, 1.0)
        assert decision.target_position == n // 2 + 1


# ---------------------------------------------------------------------------
# multigroup fixed-fraction
# ---------------------------------------------------------------------------

def test_multigroup_reduces_to_single_group():
    gains = [0.3, 1.2, 0.8, 0.5]
    single = schedulers.static_schedule(gains, 2, 1.0)
    multi = schedulers.multigroup_static_schedule([gains], 2, 1.0)
    assert multi == single


def test_multigroup_picks_best_group_minimum():
    groups = [[0.2, 0.7], [0.5, 0.6]]
    decision = schedulers.multigroup_static_schedule(groups, 1, 1.0)
    assert decision.group == 1
    assert decision.rate == pytest.approx(math.log1p(0.5))
    assert decision.decodable_set == frozenset({0, 1})


def test_multigroup_argmax_contract():
    rng = np.random.default_rng(7)
    for _ in range(100):
        groups = rng.exponential(1.0, (3, 6))
        decision = schedulers.multigroup_static_schedule(groups, 2, 1.0)
        per_group = [schedulers.static_schedule(g, 2, 1.0).rate for g in groups]
        assert decision.rate == max(per_group)
        assert decision.group == per_group.index(max(per_group))


# ---------------------------------------------------------------------------
# mutual-information accumulation
# ---------------------------------------------------------------------------

def test_ir_single_user_success():
    state = IrState.fresh(1, 0.5)
    state, verdict = schedulers.ir_advance(state, [1.0], 1.0)
    assert verdict == SUCCESS
    assert state.accumulated_mi[0] == pytest.approx(math.log(2.0))
    assert state.attempts == 1


def test_ir_tiny_target_succeeds_first_attempt():
    state = IrState.fresh(5, 1e-12)
    _, verdict = schedulers.ir_advance(state, [0.4, 0.1, 2.0, 0.9, 0.3], 1.0)
    assert verdict == SUCCESS


def test_ir_two_users_continue():
    state = IrState.fresh(2, 1.0)
    state, verdict = schedulers.ir_advance(state, [1.0, 0.1], 1.0)
    assert verdict == CONTINUE
    assert min(state.accumulated_mi) == pytest.approx(math.log(1.1))


def test_ir_accumulation_is_monotone():
    rng = np.random.default_rng(3)
    state = IrState.fresh(3, 50.0)
    previous = state.accumulated_mi
    for _ in range(10):
        state, verdict = schedulers.ir_advance(state, rng.exponential(1.0, 3), 1.0)
        assert all(b >= a for a, b in zip(previous, state.accumulated_mi))
        previous = state.accumulated_mi
        assert verdict == CONTINUE


def test_ir_cap_and_stopped_state():
    state = IrState.fresh(2, 100.0, attempt_cap=1)
    state, verdict = schedulers.ir_advance(state, [0.5, 0.5], 1.0)
    assert verdict == CAP_VIOLATION
    with pytest.raises(IrStateError):
        schedulers.ir_advance(state, [0.5, 0.5], 1.0)


def test_ir_failure_probability_structure():
    # failure after m attempts for N users = 1 - (1 - p1(m))^N with p1 the
    # single-user failure probability, by independence across users
    rng = np.random.default_rng(2024)
    target, attempts, runs, n = 1.5, 2, 20000, 4

    def failure_fraction(users, generator):
        fails = 0
        for _ in range(runs):
            acc = np.zeros(users)
            for _ in range(attempts):
                acc += np.log1p(generator.exponential(1.0, users))
            fails += acc.min() <= target
        return fails / runs

    p1 = failure_fraction(1, rng)
    pn = failure_fraction(n, np.random.default_rng(2025))
    predicted = 1 - (1 - p1) ** n
    se1 = math.sqrt(p1 * (1 - p1) / runs) * n * (1 - p1) ** (n - 1)
    sen = math.sqrt(pn * (1 - pn) / runs)
    assert abs(pn - predicted) <= 2 * math.hypot(se1, sen)


# ---------------------------------------------------------------------------
# cooperation
# ---------------------------------------------------------------------------

def test_coop_hand_example():
    inter = np.array([[0.0, 1.5], [0.7, 0.0]])
    decision = schedulers.cooperative_schedule([2.0, 0.3], inter, 1.0)
    assert decision.stage1_rate == pytest.approx(math.log(3.0))
    assert decision.first_half_set == frozenset({0})
    assert decision.stage2_rate == pytest.approx(math.log(2.5))
    assert decision.effective_rate == pytest.approx(math.log(2.5))


def test_coop_strong_relays_never_bind():
    rng = np.random.default_rng(5)
    bs = rng.exponential(1.0, 6)
    inter = np.full((6, 6), 1e12)
    np.fill_diagonal(inter, 0.0)
    decision = schedulers.cooperative_schedule(bs, inter, 1.0)
    assert decision.effective_rate == decision.stage1_rate


def test_coop_effective_rate_is_min_and_half_split():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = 8
        bs = rng.exponential(1.0, n)
        inter = rng.exponential(1.0, (n, n))
        np.fill_diagonal(inter, 0.0)
        decision = schedulers.cooperative_schedule(bs, inter, 1.0)
        assert decision.effective_rate <= decision.stage1_rate + 1e-15
        assert decision.effective_rate <= decision.stage2_rate + 1e-15
        assert len(decision.first_half_set) == n // 2
        # stage 1 rates the median position gain
        ordered = np.sort(bs)
        assert decision.stage1_rate == pytest.approx(math.log1p(ordered[n // 2]))


def test_coop_rejects_odd_user_count():
    inter = np.zeros((3, 3))
    with pytest.raises(ValueError):
        schedulers.cooperative_schedule([1.0, 2.0, 3.0], inter, 1.0)


def test_multigroup_coop_reduction_and_argmax():
    rng = np.random.default_rng(8)
    bs = rng.exponential(1.0, 4)
    inter = rng.exponential(1.0, (4, 4))
    np.fill_diagonal(inter, 0.0)
    single = schedulers.cooperative_schedule(bs, inter, 1.0)
    decision, group = schedulers.multigroup_cooperative_schedule([bs], [inter], 1.0)
    assert group == 0 and decision == single

    # second group has uniformly stronger channels, so it must win
    strong_bs = bs + 5.0
    strong_inter = inter + 5.0
    np.fill_diagonal(strong_inter, 0.0)
    decision, group = schedulers.multigroup_cooperative_schedule(
        [bs, strong_bs], [inter, strong_inter], 1.0
    )
    assert group == 1
    assert decision.effective_rate >= single.effective_rate


def test_multigroup_coop_argmax_contract():
    rng = np.random.default_rng(9)
    for _ in range(50):
        bs_groups = [rng.exponential(1.0, 4) for _ in range(3)]
        inter_groups = []
        for _ in range(3):
            m = rng.exponential(1.0, (4, 4))
            np.fill_diagonal(m, 0.0)
            inter_groups.append(m)
        decision, group = schedulers.multigroup_cooperative_schedule(bs_groups, inter_groups, 1.0)
        rates = [
            schedulers.cooperative_schedule(b, u, 1.0).effective_rate
            for b, u in zip(bs_groups, inter_groups)
        ]
        assert 2 * decision.effective_rate == max(2 * r for r in rates)
        assert group == rates.index(max(rates))
