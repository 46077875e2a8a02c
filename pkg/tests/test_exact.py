# -*- coding: utf-8 -*-
from fractions import Fraction

import pytest
from hypothesis import given, settings

from core import PolicyError, SizeLimitError, make_instance, max_kappa_expectation
from exact import (
    Action,
    BellmanSolver,
    StructuredPolicy,
    TableRecord,
    ValueTable,
    best_structured_policy,
    classic_optimal_value,
    evaluate_structured_policy,
    evaluate_table_policy,
    optimal_value,
)
from policies import half_approx
from strategies import instances

HALF = Fraction(1, 2)
COIN = [(0, HALF), (1, HALF)]


def test_two_box_optimum(two_box):
    value, table = optimal_value(two_box)
    assert value == Fraction(5, 8)
    assert table.action(0b11, Fraction(0)) == Action.open(0)
    assert table.action(0b10, Fraction(0)) == Action.take(1)
    assert table.action(0b10, Fraction(1)) == Action.quit()


def test_take_unopened_beats_opening():
    inst = make_instance([(Fraction(6, 10), COIN)])
    value, table = optimal_value(inst)
    assert value == HALF
    assert table.action(0b1, Fraction(0)) == Action.take(0)


def test_classic_optimum(two_box):
    assert classic_optimal_value(two_box) == Fraction(9, 16)
    assert classic_optimal_value(make_instance([(0, [(Fraction(7, 3), 1)])])) == Fraction(7, 3)
    assert classic_optimal_value(make_instance([(Fraction(7, 10), COIN)])) == 0


def test_size_limit(two_box):
    with pytest.raises(SizeLimitError):
        optimal_value(two_box, limit=1)


def test_table_policy_replays_its_value(two_box):
    value, table = optimal_value(two_box)
    assert evaluate_table_policy(table, two_box) == value


def test_table_records_round_trip(two_box):
    _, table = optimal_value(two_box)
    records = [TableRecord.model_validate(r.model_dump(mode="json")) for r in table.to_records()]
    assert ValueTable.from_records(table.n, records).entries == table.entries
    assert records[0].unopened == [0, 1]


def test_missing_state_is_a_policy_error():
    with pytest.raises(PolicyError):
        ValueTable(2).action(0b11, Fraction(0))


def test_structured_examples(two_box):
    assert evaluate_structured_policy(two_box, StructuredPolicy()) == Fraction(9, 16)
    assert evaluate_structured_policy(two_box, StructuredPolicy(committed=(1,))) == HALF
    split = StructuredPolicy(committed=(0, 1), thresholds=(Fraction(1),))
    assert evaluate_structured_policy(two_box, split) == Fraction(5, 8)


def test_never_threshold_runs_through(two_box):
    never = StructuredPolicy(committed=(0, 1), thresholds=(None,))
    # open box 0, then take box 1 whatever box 0 showed
    assert evaluate_structured_policy(two_box, never) == -Fraction(1, 8) + HALF


def test_best_structured_policy(two_box):
    policy, value = best_structured_policy(two_box)
    assert value == Fraction(5, 8)
    assert len(policy.committed) == 2


def test_best_structured_single_box_takes_it():
    inst = make_instance([(Fraction(6, 10), COIN)])
    policy, value = best_structured_policy(inst)
    assert policy.committed == (0,)
    assert value == HALF


def test_structured_search_keeps_index_policy_when_optimal():
    inst = make_instance([(0, [(0, HALF), (2, HALF)]), (0, [(1, 1)])])
    policy, value = best_structured_policy(inst)
    assert value == max_kappa_expectation(inst) == Fraction(3, 2)
    assert policy.committed == ()


def test_structured_policy_validation(two_box):
    with pytest.raises(PolicyError):
        evaluate_structured_policy(two_box, StructuredPolicy(committed=(0, 0), thresholds=(None,)))
    with pytest.raises(PolicyError):
        evaluate_structured_policy(two_box, StructuredPolicy(committed=(0, 1)))
    with pytest.raises(PolicyError):
        evaluate_structured_policy(two_box, StructuredPolicy(committed=(2,)))


def test_structured_policy_json():
    policy = StructuredPolicy(committed=(2, 0, 1), thresholds=(Fraction(3, 4), None))
    data = policy.to_json_dict()
    assert data == {"sigma": [2, 0, 1], "thresholds": ["3/4", "never"]}
    assert StructuredPolicy.from_json_dict(data) == policy
    with pytest.raises(PolicyError):
        StructuredPolicy.from_json_dict({"sigma": [0, 1], "thresholds": ["often"]})


@settings(max_examples=40, deadline=None)
@given(instances(max_n=3))
def test_structured_search_matches_dp(inst):
    opt, _ = optimal_value(inst)
    _, structured = best_structured_policy(inst)
    assert structured == opt


@settings(max_examples=60, deadline=None)
@given(instances(max_n=4))
def test_optimum_sandwich(inst):
    opt, _ = optimal_value(inst)
    approx = half_approx(inst)
    assert classic_optimal_value(inst) <= opt
    assert approx <= opt <= 2 * approx


@settings(max_examples=40, deadline=None)
@given(instances(max_n=3))
def test_value_to_go_grows_slower_than_best(inst):
    solver = BellmanSolver(inst)
    levels = sorted({Fraction(0)} | {v for b in inst.boxes for v in b.dist.values} | {Fraction(5)})
    values = [solver.value(solver.full_mask, b) for b in levels]
    for (b0, v0), (b1, v1) in zip(zip(levels, values), zip(levels[1:], values[1:])):
        assert v0 <= v1
        assert v1 - b1 <= v0 - b0
