# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : policies.py
@Date    : 2026/10/18
"""
import logging
import math
from fractions import Fraction
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core import (
    DiscreteDistribution,
    DomainError,
    PnoiInstance,
    PolicyError,
    Scalar,
    compute_index,
    ensure_valid,
    expected_value,
    index_order,
    max_kappa_expectation,
)
from exact import ActionKind, PolicyTrace, TraceStep

logger = logging.getLogger(__name__)


class SimulationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(0, ge=0, lt=2 ** 64, description="64-bit Philox key")
    trials: int = Field(1000, ge=1, description="number of simulated runs")


class SimulationSummary(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    policy: str = Field(..., description="simulated policy name")
    trials: int = Field(..., description="number of runs")
    seed: int = Field(..., description="PRNG seed")
    mean: Scalar = Field(..., description="exact mean payoff over the runs")
    stderr: float = Field(..., description="standard error of the mean")


class CommitPolicy(BaseModel):
    """
    Probe boxes in order, stop at the first value 1; if every probe shows 0,
    take the commit box unopened. commit=None is the pure index policy.
    """
    model_config = ConfigDict(frozen=True)

    commit: Optional[int] = Field(None, description="box taken unopened when all probes fail")
    probe_order: list[int] = Field(default_factory=list, description="probed boxes, decreasing index")


def trial_uniforms(seed: int, trial: int, n: int) -> np.ndarray:
    """
    n uniforms in [0, 1) for one trial; Philox keyed by the seed, counter set
    from the trial so every trial's stream is fixed regardless of run order.
    """
    bit_generator = np.random.Philox(key=seed, counter=[0, 0, trial, 0])
    return np.random.Generator(bit_generator).random(n)


def sample_value(dist: DiscreteDistribution, u: float) -> Fraction:
    """Inverse CDF over the sorted support; value k owns [F(v_{k-1}), F(v_k))."""
    u = Fraction(float(u))
    cumulative = Fraction(0)
    for v, p in dist.support:
        cumulative += p
        if u < cumulative:
            return v
    return dist.support[-1][0]


def index_policy_trace(inst: PnoiInstance, values: list[Fraction]) -> PolicyTrace:
    """
    Run the index policy against fixed realized values: open the unopened box
    with the highest index while that index is positive and exceeds the best
    revealed value, then take the best opened box.
    """
    steps: list[TraceStep] = []
    cost = Fraction(0)
    best: Optional[Fraction] = None
    best_box: Optional[int] = None
    for i in index_order(inst):
        tau = compute_index(inst.boxes[i])
        if tau <= 0 or (best is not None and tau <= best):
            break
        cost += inst.boxes[i].cost
        steps.append(TraceStep(action=ActionKind.OPEN, box=i, value=values[i], running_cost=cost))
        if best is None or values[i] > best:
            best, best_box = values[i], i
    if best is None:
        return PolicyTrace(steps=steps, payoff=-cost)
    steps.append(TraceStep(action=ActionKind.QUIT, box=best_box, value=best, running_cost=cost))
    return PolicyTrace(steps=steps, payoff=best - cost)


def run_index_policy(inst: PnoiInstance, cfg: SimulationConfig) -> list[PolicyTrace]:
    """
    Monte-Carlo traces of the index policy
    :param inst: valid instance
    :param cfg: seed and number of trials
    :return: one trace per trial, in trial order
    """
    ensure_valid(inst)
    dists = [b.dist for b in inst.boxes]
    traces = []
    for trial in range(cfg.trials):
        draws = trial_uniforms(cfg.seed, trial, inst.n)
        values = [sample_value(d, u) for d, u in zip(dists, draws)]
        traces.append(index_policy_trace(inst, values))
    logger.debug(f"run_index_policy: n={inst.n} trials={cfg.trials} seed={cfg.seed}")
    return traces


def check_non_exposed(traces: list[PolicyTrace], inst: PnoiInstance) -> bool:
    """
    True iff every opened box whose value exceeds its index is the box taken.
    """
    taus = [compute_index(b) for b in inst.boxes]
    for k, trace in enumerate(traces):
        for step in trace.steps:
            if step.box is not None and not 0 <= step.box < inst.n:
                raise PolicyError(f"trace {k} refers to box {step.box}, instance has {inst.n} boxes")
        taken = trace.taken
        for box, value in trace.opened:
            if value is None:
                raise PolicyError(f"trace {k} opens box {box} without a revealed value")
            if value > taus[box] and taken != box:
                return False
    return True


def summarize_traces(traces: list[PolicyTrace], policy: str = "index", seed: int = 0) -> SimulationSummary:
    if not traces:
        return SimulationSummary(policy=policy, trials=0, seed=seed, mean=Fraction(0), stderr=0.0)
    payoffs = [t.payoff for t in traces]
    mean = sum(payoffs, Fraction(0)) / len(payoffs)
    if len(payoffs) > 1:
        variance = float(sum((x - mean) ** 2 for x in payoffs)) / (len(payoffs) - 1)
        stderr = math.sqrt(variance / len(payoffs))
    else:
        stderr = 0.0
    return SimulationSummary(policy=policy, trials=len(payoffs), seed=seed, mean=mean, stderr=stderr)


def _probe_value(ps: list[Fraction], costs: list[Fraction], order: list[int]) -> tuple[Fraction, Fraction]:
    """Payoff of probing order until a 1 shows, and the chance every probe shows 0."""
    value = Fraction(0)
    all_zero = Fraction(1)
    for k in order:
        value += all_zero * (ps[k] - costs[k])
        all_zero *= 1 - ps[k]
    return value, all_zero


def support01_optimal(inst: PnoiInstance) -> tuple[CommitPolicy, Fraction]:
    """
    Optimal policy for instances supported on {0, 1}: the best of the pure index
    policy and the n commit policies.
    :param inst: valid instance with every support inside {0, 1}
    :return: best policy and its exact payoff
    """
    ensure_valid(inst)
    for i, box in enumerate(inst.boxes):
        if not set(box.dist.values) <= {Fraction(0), Fraction(1)}:
            raise DomainError(f"box {i}: support not inside {{0, 1}}")
    ps = [box.dist.prob_at_most(Fraction(1)) - box.dist.prob_at_most(Fraction(0)) for box in inst.boxes]
    costs = [box.cost for box in inst.boxes]
    taus = [compute_index(box) for box in inst.boxes]

    order = [i for i in index_order(inst) if taus[i] > 0]
    best_value, _ = _probe_value(ps, costs, order)
    best_policy = CommitPolicy(commit=None, probe_order=order)
    for i in range(inst.n):
        probes = [j for j in index_order(inst) if j != i and taus[j] >= ps[i]]
        value, all_zero = _probe_value(ps, costs, probes)
        value += all_zero * ps[i]
        if value > best_value:
            best_value, best_policy = value, CommitPolicy(commit=i, probe_order=probes)
    return best_policy, best_value


def half_approx(inst: PnoiInstance) -> Fraction:
    """Better of the index policy and taking the highest-mean box unopened."""
    ensure_valid(inst)
    return max(max_kappa_expectation(inst), max(expected_value(b.dist) for b in inst.boxes))
