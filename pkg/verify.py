# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : verify.py
@Date    : 2026/10/18

Randomized property suites. Case k of a suite at seed s always draws the same
instance: the generator is numpy's default_rng seeded with [s, k].
"""
import asyncio
import itertools
import logging
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core import (
    PandoraError,
    PnoiInstance,
    compute_index,
    expected_excess,
    expected_value,
    instance_to_json,
    kappa_distribution,
    make_instance,
    max_kappa_expectation,
)
from exact import best_structured_policy, classic_optimal_value, evaluate_table_policy, optimal_value
from lclrs3 import (
    Lclrs3Instance,
    best_permutation,
    index_payoff_gap,
    is_lclrs3,
    partition_answer,
    partition_brute_force,
    reduce_partition,
    reduction_constants,
)
from policies import half_approx
from ptas import (
    build_lpnoi,
    choose_theta,
    f_value,
    grid_round,
    large_points,
    lift_policy,
    policy_value,
    ptas_pipeline,
    quasi_index_value,
    s_discretize,
    solve_ssdp_exact,
    w_value,
)
from settings import settings

logger = logging.getLogger(__name__)

SUITES = ("index-identity", "structure", "normal", "eq1", "reduction", "sandwich", "discretization", "lift")


class CaseFailure(BaseModel):
    model_config = ConfigDict(frozen=True)

    case: int = Field(..., description="case index")
    prop: str = Field(..., description="violated property")
    detail: str = Field("", description="values involved")
    instance: Optional[str] = Field(None, description="counterexample as instance JSON")


class SuiteReport(BaseModel):
    suite: str = Field(..., description="suite name")
    seed: int = Field(..., description="seed")
    cases: int = Field(..., description="cases run")
    properties: dict[str, bool] = Field(default_factory=dict, description="pass/fail per property")
    failures: list[CaseFailure] = Field(default_factory=list, description="failures in case order")

    @property
    def passed(self) -> bool:
        return not self.failures


def case_rng(seed: int, case: int) -> np.random.Generator:
    return np.random.default_rng([seed, case])


def random_fraction(rng: np.random.Generator, low: int, high: int, max_den: int = 64) -> Fraction:
    """Uniform numerator over a random denominator <= max_den, inside [low, high]."""
    den = int(rng.integers(1, max_den + 1))
    return Fraction(int(rng.integers(low * den, high * den + 1)), den)


def random_probabilities(rng: np.random.Generator, k: int, max_den: int = 64) -> list[Fraction]:
    den = int(rng.integers(k, max_den + 1))
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, den), size=k - 1, replace=False)) if k > 1 else []
    edges = [0, *cuts, den]
    return [Fraction(b - a, den) for a, b in zip(edges, edges[1:])]


def random_instance(rng: np.random.Generator, max_n: int = 6, max_support: int = 4, max_value: int = 4,
                    max_den: int = 64) -> PnoiInstance:
    """
    Generator for the randomized suites: support <= max_support, denominators
    <= max_den, 1 <= n <= max_n, values in [0, max_value], costs in [0, 1].
    """
    n = int(rng.integers(1, max_n + 1))
    boxes = []
    for _ in range(n):
        k = int(rng.integers(1, max_support + 1))
        values: set[Fraction] = set()
        while len(values) < k:
            values.add(random_fraction(rng, 0, max_value, max_den))
        probs = random_probabilities(rng, k, max_den)
        boxes.append((random_fraction(rng, 0, 1, max_den), list(zip(sorted(values), probs))))
    return make_instance(boxes)


def random_support01_instance(rng: np.random.Generator, max_n: int = 10, max_den: int = 64) -> PnoiInstance:
    n = int(rng.integers(1, max_n + 1))
    boxes = []
    for _ in range(n):
        p = Fraction(int(rng.integers(0, max_den + 1)), max_den)
        boxes.append((random_fraction(rng, 0, 1, max_den) / 2, [(0, 1 - p), (1, p)]))
    return make_instance(boxes)


def random_lclrs3_instance(rng: np.random.Generator, max_n: int = 5) -> Lclrs3Instance:
    """p = a/64 with 1 <= a <= 31, q keeps p + q/2 < 1/2, c = p k/16 with 1 <= k <= 8."""
    n = int(rng.integers(1, max_n + 1))
    boxes = []
    for _ in range(n):
        a = int(rng.integers(1, 32))
        b = int(rng.integers(0, 64 - 2 * a))
        k = int(rng.integers(1, 9))
        p, q = Fraction(a, 64), Fraction(b, 64)
        boxes.append((p, q, p * k / 16))
    return Lclrs3Instance.from_masses(boxes)


def random_large_instance(rng: np.random.Generator, max_n: int = 5, max_support: int = 3) -> PnoiInstance:
    """Small common values plus rare large ones, so values above the threshold occur."""
    n = int(rng.integers(1, max_n + 1))
    boxes = []
    for _ in range(n):
        k = int(rng.integers(1, max_support + 1))
        values: set[Fraction] = set()
        while len(values) < k:
            values.add(random_fraction(rng, 0, 2, 16))
        pairs = list(zip(sorted(values), random_probabilities(rng, k, 32)))
        if rng.random() < 0.7:
            tail = Fraction(1, int(rng.integers(8, 65)))
            big = Fraction(int(rng.integers(20, 201)))
            pairs = [(v, p * (1 - tail)) for v, p in pairs] + [(big, tail)]
        boxes.append((random_fraction(rng, 0, 1, 16) / 4, pairs))
    return make_instance(boxes)


Check = Callable[[int, np.random.Generator], list[tuple[str, bool, str, Optional[PnoiInstance]]]]


def _fmt(*values: Fraction) -> str:
    return " ".join(str(v) for v in values)


def check_index_identity(case: int, rng: np.random.Generator):
    inst = random_instance(rng)
    index_value = max_kappa_expectation(inst)
    classic = classic_optimal_value(inst)
    reversed_inst = inst.with_boxes(reversed(inst.boxes))
    return [
        ("index equation", all(expected_excess(b.dist, compute_index(b)) == b.cost for b in inst.boxes), "", inst),
        ("classic optimum = E[max kappa]", classic == index_value, _fmt(classic, index_value), inst),
        ("box order invariance", max_kappa_expectation(reversed_inst) == index_value, "", inst),
    ]


def check_structure(case: int, rng: np.random.Generator):
    inst = random_instance(rng, max_n=5, max_support=3)
    opt, _ = optimal_value(inst)
    _, structured = best_structured_policy(inst)
    classic = classic_optimal_value(inst)
    best_mean = max(expected_value(b.dist) for b in inst.boxes)
    approx = half_approx(inst)
    return [
        ("structured optimum = optimum", structured == opt, _fmt(structured, opt), inst),
        ("optimum dominates classic and means", opt >= classic and opt >= best_mean and opt >= 0, "", inst),
        ("half approximation", approx <= opt <= 2 * approx, _fmt(approx, opt), inst),
    ]


def check_normal(case: int, rng: np.random.Generator):
    inst = random_lclrs3_instance(rng)
    _, normal = best_permutation(inst)
    opt, _ = optimal_value(inst.base)
    return [("best normal policy = optimum", normal == opt, _fmt(normal, opt), inst.base)]


def check_eq1(case: int, rng: np.random.Generator):
    inst = random_lclrs3_instance(rng)
    gaps = [index_payoff_gap(inst, sigma) for sigma in itertools.permutations(range(inst.n))]
    return [("payoff identity for every order", all(g == 0 for g in gaps), "", inst.base)]


def reduction_cases() -> list[tuple[int, ...]]:
    """Every multiset with 1 <= n <= 3 and values in [1, 2^n], shortest first."""
    cases = []
    for n in range(1, 4):
        cases.extend(itertools.combinations_with_replacement(range(1, 2 ** n + 1), n))
    return cases


def check_reduction(case: int, rng: np.random.Generator):
    cases = reduction_cases()
    source = cases[case % len(cases)]
    red = reduce_partition(source)
    answer = partition_answer(red)
    k1, k2, _ = reduction_constants(red)
    ok, _ = is_lclrs3(red.instance.base)
    expected = partition_brute_force(source)
    return [
        ("reduction is LCLRS3", ok, str(list(source)), None),
        ("answer agrees with subset sum", answer.answer == expected, f"{list(source)} {answer.label}", None),
        ("high box last", answer.sigma[-1] == red.high, str(list(answer.sigma)), None),
        ("k2 / k1 = t", k2 / k1 == red.t, str(list(source)), None),
    ]


def check_sandwich(case: int, rng: np.random.Generator):
    inst = random_large_instance(rng)
    epsilon = Fraction(1, 4)
    theta = choose_theta(inst, epsilon)
    everything = list(range(inst.n))
    grid = sorted({v for b in inst.boxes for v in kappa_distribution(b).values} | {theta.value})
    upper = all(f_value(inst, everything, v) >= w_value(inst, everything, v) for v in grid)
    lower = all(w_value(inst, everything, v) >= (1 - epsilon) * f_value(inst, everything, v)
                for v in grid if v >= theta.value)
    quasi = True
    if theta.alg_payoff > 0:
        lp = build_lpnoi(inst, large_points(inst, theta))
        quasi = all(quasi_index_value(lp, everything, v) >= (1 - epsilon) * f_value(inst, everything, v)
                    for v in lp.points.points)
    return [
        ("F >= W everywhere", upper, "", inst),
        ("W >= (1 - eps) F above theta", lower, "", inst),
        ("quasi-index >= (1 - eps) F", quasi, "", inst),
    ]


def check_discretization(case: int, rng: np.random.Generator):
    inst = random_large_instance(rng)
    epsilon = Fraction(1, 4)
    theta = choose_theta(inst, epsilon)
    opt, _ = optimal_value(inst)
    small = s_discretize(inst, theta)
    opt_small, table = optimal_value(small)
    executed = evaluate_table_policy(table, inst, lambda x: grid_round(theta, x))
    results = [
        ("theta bracket", opt / epsilon <= theta.value <= 2 * opt / epsilon, _fmt(theta.value, opt), inst),
        ("grid loss at most one step", opt_small >= opt - theta.grid_step, _fmt(opt_small, opt), inst),
        ("grid policy gains on raw values", executed >= opt_small, _fmt(executed, opt_small), inst),
    ]
    if theta.alg_payoff > 0:
        points = large_points(small, theta)
        everything = list(range(inst.n))
        drops = [f_value(small, everything, a) - f_value(small, everything, b)
                 for a, b in zip(points.points, points.points[1:])]
        results.append(("gap budget", all(d < points.budget for d in drops), "", inst))
    return results


def check_lift(case: int, rng: np.random.Generator):
    inst = random_large_instance(rng)
    opt, _ = optimal_value(inst)
    results = []
    for epsilon in (Fraction(1, 4), Fraction(1, 10)):
        theta = choose_theta(inst, epsilon)
        if theta.alg_payoff > 0:
            lp = build_lpnoi(inst, large_points(inst, theta))
            opt_l, policy = solve_ssdp_exact(lp)
            lifted = lift_policy(lp, policy, inst)
            results.append((f"lifted >= rounded value (eps={epsilon})",
                            lifted >= policy_value(lp, policy) == opt_l, _fmt(lifted, opt_l), inst))
            results.append((f"rounded optimum within 5 eps (eps={epsilon})",
                            opt >= opt_l >= (1 - 5 * epsilon) * opt, _fmt(opt_l, opt), inst))
            monotone = all(lp.open_transition(state, v) >= max(state, v)
                           for (_, state) in policy.entries for b in inst.boxes for v in b.dist.values)
            results.append((f"rounding never lowers the state (eps={epsilon})", monotone, "", inst))
        result = ptas_pipeline(inst, epsilon)
        results.append((f"pipeline within 5 eps (eps={epsilon})",
                        (1 - 5 * epsilon) * opt <= result.payoff <= opt, _fmt(result.payoff, opt), inst))
    return results


CHECKS: dict[str, Check] = {
    "index-identity": check_index_identity,
    "structure": check_structure,
    "normal": check_normal,
    "eq1": check_eq1,
    "reduction": check_reduction,
    "sandwich": check_sandwich,
    "discretization": check_discretization,
    "lift": check_lift,
}


class VerifyService:
    def __init__(self, threads: Optional[int] = None):
        self.threads = threads or settings.threads

    def run_case(self, suite: str, seed: int, case: int) -> list[tuple[str, bool, str, Optional[str]]]:
        try:
            outcomes = CHECKS[suite](case, case_rng(seed, case))
        except PandoraError as e:
            logger.error(f"Error in suite {suite} case {case}: {e}")
            return [("no error", False, str(e), None)]
        return [(name, ok, detail, instance_to_json(inst) if inst is not None and not ok else None)
                for name, ok, detail, inst in outcomes]

    async def _run_async(self, suite: str, seed: int, cases: int) -> list[list[tuple]]:
        semaphore = asyncio.Semaphore(self.threads)

        async def one(case: int):
            async with semaphore:
                return await asyncio.to_thread(self.run_case, suite, seed, case)

        return list(await asyncio.gather(*(one(case) for case in range(cases))))

    def run(self, suite: str, seed: int = 0, cases: int = 100) -> SuiteReport:
        """
        Run a suite synchronously
        :param suite: suite name
        :param seed: seed
        :param cases: number of cases
        :return: report with pass/fail per property
        """
        if suite not in CHECKS:
            raise KeyError(f"unknown suite {suite!r}, expected one of {', '.join(SUITES)}")
        if suite == "reduction":
            cases = min(cases, len(reduction_cases()))
        outcomes = asyncio.run(self._run_async(suite, seed, cases))
        report = SuiteReport(suite=suite, seed=seed, cases=cases)
        for case, results in enumerate(outcomes):
            for name, ok, detail, instance in results:
                report.properties[name] = report.properties.get(name, True) and ok
                if not ok:
                    report.failures.append(CaseFailure(case=case, prop=name, detail=detail, instance=instance))
        logger.info(f"verify {suite}: cases={cases} failures={len(report.failures)}")
        return report
