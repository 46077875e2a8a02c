# -*- coding: utf-8 -*-
from fractions import Fraction

import pytest

from core import validate_instance
from lclrs3 import is_lclrs3
from verify import (
    SUITES,
    VerifyService,
    case_rng,
    random_instance,
    random_large_instance,
    random_lclrs3_instance,
    random_probabilities,
    reduction_cases,
)


def test_case_rng_is_reproducible():
    assert random_instance(case_rng(5, 3)) == random_instance(case_rng(5, 3))


@pytest.mark.parametrize("case", range(20))
def test_generators_emit_valid_instances(case):
    inst = random_instance(case_rng(0, case))
    assert 1 <= inst.n <= 6
    assert validate_instance(inst) == []
    assert all(len(b.dist.support) <= 4 and 0 <= b.cost <= 1 for b in inst.boxes)
    assert validate_instance(random_large_instance(case_rng(0, case))) == []
    assert is_lclrs3(random_lclrs3_instance(case_rng(0, case)).base)[0]


def test_random_probabilities_sum_to_one():
    probs = random_probabilities(case_rng(1, 1), 4)
    assert len(probs) == 4 and sum(probs) == 1 and all(p > 0 for p in probs)
    assert random_probabilities(case_rng(1, 2), 1) == [Fraction(1)]


def test_reduction_cases():
    cases = reduction_cases()
    assert len(cases) == 132
    assert cases[0] == (1,)
    assert cases[-1] == (8, 8, 8)


@pytest.mark.parametrize("suite, cases", [
    ("index-identity", 200),
    ("structure", 100),
    ("normal", 100),
    ("eq1", 50),
    ("reduction", 132),
    ("sandwich", 100),
    ("discretization", 100),
    ("lift", 100),
])
def test_suites_pass(suite, cases):
    report = VerifyService(threads=2).run(suite, seed=0, cases=cases)
    assert report.cases == cases
    assert report.passed, report.failures[:1]
    assert all(report.properties.values())


def test_unknown_suite():
    with pytest.raises(KeyError):
        VerifyService().run("nope")
    assert "reduction" in SUITES
