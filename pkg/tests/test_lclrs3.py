# -*- coding: utf-8 -*-
import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core import (
    DomainError,
    InstanceRecord,
    PolicyError,
    SizeLimitError,
    instance_from_record,
    make_instance,
    max_kappa_expectation,
)
from exact import optimal_value
from lclrs3 import (
    HALF,
    Lclrs3Instance,
    best_permutation,
    evaluate_normal_policy,
    exp_interval,
    g_value,
    h_diagnostics,
    index_payoff_gap,
    is_lclrs3,
    lclrs3_box,
    loss,
    partition_answer,
    partition_brute_force,
    rational_exp_half,
    reduce_partition,
    reduction_constants,
    reduction_meta,
    scheduling_sum,
    utility,
)

F = Fraction


@pytest.fixture
def trio():
    """Three LCLRS3 boxes with indices 3/4, 7/8 and 5/8."""
    return Lclrs3Instance.from_masses([
        (F(1, 4), F(0), F(1, 16)),
        (F(1, 8), F(1, 4), F(1, 64)),
        (F(1, 5), F(1, 10), F(3, 40)),
    ])


def test_trio_indices(trio):
    assert trio.tau == (F(3, 4), F(7, 8), F(5, 8))
    assert trio.r == (F(3, 4), F(5, 8), F(7, 10))


def test_is_lclrs3_accepts_missing_half_mass():
    ok, violations = is_lclrs3(make_instance([(F(1, 16), [(0, F(3, 4)), (1, F(1, 4))])]))
    assert ok and violations == []


@pytest.mark.parametrize("box, reason", [
    (lclrs3_box(F(1, 2), F(0), F(1, 16)), "expected value >= 1/2"),
    (lclrs3_box(F(1, 4), F(0), F(0)), "cost <= 0"),
    (lclrs3_box(F(0), F(1, 2), F(1, 16)), "no mass at 1"),
    (lclrs3_box(F(1, 4), F(0), F(1, 5)), "index < 1/2"),
])
def test_is_lclrs3_rejects(box, reason):
    ok, violations = is_lclrs3(make_instance([]).with_boxes([box]))
    assert not ok
    assert reason in [v.reason for v in violations]


def test_is_lclrs3_rejects_other_support():
    ok, violations = is_lclrs3(make_instance([(F(1, 16), [(0, F(3, 4)), (F(2, 3), F(1, 4))])]))
    assert not ok
    assert violations[0].reason == "support not inside {0, 1/2, 1}"


def test_from_instance_needs_lclrs3():
    with pytest.raises(DomainError):
        Lclrs3Instance.from_instance(make_instance([(0, [(1, 1)])]))


def test_g_value(trio):
    assert g_value(trio, 0, []) == 0
    assert g_value(trio, 1, [0]) == 0
    assert g_value(trio, 0, [1]) == F(1, 8) * (F(7, 8) - F(3, 4))
    with pytest.raises(DomainError):
        g_value(trio, 0, [0, 1])


def test_single_box_normal_policy():
    inst = Lclrs3Instance.from_masses([(F(1, 4), F(1, 8), F(1, 16))])
    assert evaluate_normal_policy(inst, [0]) == F(1, 4) + F(1, 16)
    assert loss(inst, [0]) == 0


def test_loss_symmetric_for_identical_boxes():
    inst = Lclrs3Instance.from_masses([(F(1, 4), F(1, 8), F(1, 16))] * 2)
    assert loss(inst, [0, 1]) == loss(inst, [1, 0])
    assert best_permutation(inst) == ((0, 1), evaluate_normal_policy(inst, [0, 1]))


def test_payoff_identity_holds_for_every_order(trio):
    for sigma in itertools.permutations(range(3)):
        assert index_payoff_gap(trio, sigma) == 0


def test_utility_relation(trio):
    for sigma in itertools.permutations(range(3)):
        gap = max_kappa_expectation(trio.base) - evaluate_normal_policy(trio, sigma)
        assert utility(trio, sigma) == -gap


def test_best_permutation_matches_dp(trio):
    _, value = best_permutation(trio)
    assert value == optimal_value(trio.base)[0]


def test_permutation_checks(trio):
    with pytest.raises(PolicyError):
        evaluate_normal_policy(trio, [0, 1])
    with pytest.raises(PolicyError):
        loss(trio, [0, 0, 1])
    with pytest.raises(SizeLimitError):
        best_permutation(trio, limit=2)


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.fractions(min_value=F(1, 64), max_value=F(63, 64), max_denominator=64), min_size=1, max_size=6),
       st.fractions(min_value=0, max_value=1, max_denominator=32))
def test_scheduling_sum(r, c):
    p = [c * (1 - ri) for ri in r]
    assert scheduling_sum(p, r) == c * (1 - math.prod(r))


@settings(max_examples=1000, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=1024))
def test_exp_interval_encloses_taylor_bounds(x):
    lo, hi = exp_interval(-x, 64)
    assert 1 - x <= lo <= hi <= 1 - x + x * x / 2
    assert hi - lo <= F(1, 2 ** 64)


def test_exp_interval_domain():
    assert exp_interval(F(0)) == (1, 1)
    with pytest.raises(DomainError):
        exp_interval(F(3, 2))


def test_rational_exp_half():
    assert rational_exp_half(F(0), F(1, 10)) == 2
    err = F(1, 2 ** 40)
    t = rational_exp_half(HALF, err)
    lo, hi = exp_interval(F(1, 4), 80)
    assert 2 * lo - err <= t <= 2 * hi + err
    assert abs(float(t) - 2 * math.exp(0.25)) <= 1e-11
    with pytest.raises(DomainError):
        rational_exp_half(HALF, F(0))
    with pytest.raises(DomainError):
        rational_exp_half(F(2), F(1, 10))


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=4096))
def test_rational_exp_half_tightens_with_err(y):
    lo, hi = exp_interval(y / 2, 96)
    previous = None
    for k in range(2, 41, 2):
        err = F(1, 2 ** k)
        t = rational_exp_half(y, err)
        assert 2 * lo - err <= t <= 2 * hi + err
        if previous is not None:
            assert abs(t - previous[0]) <= err + previous[1]
        previous = (t, err)


@pytest.fixture(scope="module")
def unit_pair():
    return reduce_partition([1, 1])


def test_reduction_parameters(unit_pair):
    red = unit_pair
    inst = red.instance
    gamma = F(65536)
    assert red.gamma == gamma and red.delta == F(1, 2 ** 14)
    assert (red.low, red.high) == (2, 3)
    assert inst.p[:2] == inst.q[:2] == (1 / gamma, 1 / gamma)
    assert inst.p[2] == 1 / gamma
    assert inst.q[2] == 1 - 41 / gamma
    assert inst.c[2] == F(1, 131072)
    assert inst.r[2] == 40 / gamma
    assert inst.tau[2] == HALF
    assert (inst.p[3], inst.q[3], inst.c[3], inst.tau[3]) == (F(1, 8), F(1, 8), F(1, 32), F(3, 4))
    assert HALF < red.tau_h < F(3, 4)
    assert all(inst.tau[3] > inst.tau[i] > red.tau_h for i in range(2))
    assert is_lclrs3(inst.base)[0]


def test_reduction_rejects_bad_sources():
    with pytest.raises(DomainError):
        reduce_partition([])
    with pytest.raises(DomainError):
        reduce_partition([3])
    with pytest.raises(DomainError):
        reduce_partition([0, 1])


def test_reduction_constants(unit_pair):
    k1, k2, _ = reduction_constants(unit_pair)
    assert k2 / k1 == unit_pair.t
    meta = reduction_meta(unit_pair)
    assert set(meta) == {"gamma", "delta", "y", "t", "tau_H", "k1", "k2", "C"}
    assert meta["gamma"] == "65536"


def test_residual_and_convexity(unit_pair):
    red = unit_pair
    n = red.n
    k1, _, _ = reduction_constants(red)
    # calibrated constant, see fixtures/loss_1_1.json
    bound = 64 * n * n * red.delta ** 4 / k1
    orders = [s for s in itertools.permutations(range(n + 2)) if s[-1] == red.high]
    for sigma in orders:
        diagnostics = h_diagnostics(red, sigma)
        assert diagnostics.ratio == red.t
        assert diagnostics.k1 == k1
        assert diagnostics.h_lo <= diagnostics.h_hi
        assert diagnostics.residual <= bound
    edge = F(1, 2 ** (6 * n))
    window = [-edge, F(0), red.y / 2, red.y, red.y + edge]
    diagnostics = h_diagnostics(red, orders[0])
    for x in window:
        lo, hi = diagnostics.h_second_derivative(x)
        assert 1 <= lo <= hi <= 4


def test_reduction_matches_frozen_instance(load_fixture):
    red = reduce_partition([1, 2])
    frozen = instance_from_record(InstanceRecord.model_validate(load_fixture("reduction_1_2.json")))
    assert red.instance.base == frozen
    assert reduction_meta(red) == load_fixture("reduction_1_2.meta.json")


def test_loss_matches_frozen_values(unit_pair, load_fixture):
    frozen = load_fixture("loss_1_1.json")
    assert frozen["source"] == list(unit_pair.source)
    assert len(frozen["losses"]) == 24
    for entry in frozen["losses"]:
        assert loss(unit_pair.instance, entry["sigma"]) == F(entry["loss"])


@pytest.mark.parametrize("source", [[1, 1], [1, 2], [2, 3]])
def test_only_the_high_box_can_close(source):
    red = reduce_partition(source)
    inst, n, gamma = red.instance, red.n, red.gamma
    by_last: dict[int, list[F]] = {}
    for sigma in itertools.permutations(range(n + 2)):
        by_last.setdefault(sigma[-1], []).append(utility(inst, sigma))
    source_last = max(u for last, values in by_last.items() if last < n for u in values)
    assert source_last <= 40 / gamma * max(inst.c[:n])
    assert max(by_last[red.low]) <= F(3, 8) / gamma
    assert max(by_last[red.high]) >= F(38, 32) / gamma > source_last


@pytest.mark.parametrize("source, expected", [
    ([1, 1], "yes"),
    ([1, 2], "no"),
    ([1, 1, 2], "yes"),
])
def test_partition_answer(source, expected):
    answer = partition_answer(reduce_partition(source))
    assert answer.label == expected
    assert answer.sigma[-1] == len(source) + 1


def test_partition_answer_size_limit():
    with pytest.raises(SizeLimitError):
        partition_answer(reduce_partition([1, 1, 1, 1]))


@pytest.mark.parametrize("source, expected", [
    ([1, 1], True),
    ([1, 2], False),
    ([1, 1, 2], True),
    ([3, 1, 1, 2, 2, 1], True),
    ([2, 4, 8], False),
])
def test_partition_brute_force(source, expected):
    assert partition_brute_force(source) is expected
