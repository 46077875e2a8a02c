# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : ptas.py
@Date    : 2026/10/18

Discretization pipeline: threshold selection, small-value grid rounding,
large-value points, the rounded-state SSDP, its exact solution and lifting
policies back to the raw instance.
"""
import bisect
import logging
import math
from fractions import Fraction
from typing import Callable, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core import (
    DomainError,
    PnoiInstance,
    PolicyError,
    Scalar,
    ensure_valid,
    expected_excess,
    expected_max_kappa,
    expected_value,
    format_scalar,
    index_order,
    kappa_distribution,
    parse_scalar,
)
from exact import Action, ActionKind, boxes_of, check_size, mask_of
from policies import half_approx
from settings import settings

logger = logging.getLogger(__name__)


class Theta(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: Scalar = Field(..., description="large-value threshold, 2 * alg_payoff / epsilon")
    alg_payoff: Scalar = Field(..., description="half-approximation payoff the threshold is derived from")
    epsilon: Scalar = Field(..., description="accuracy parameter in (0, 1/2]")

    @model_validator(mode="after")
    def check_threshold(self) -> "Theta":
        if not 0 < self.epsilon <= Fraction(1, 2):
            raise ValueError(f"epsilon must lie in (0, 1/2], got {format_scalar(self.epsilon)}")
        if self.value != 2 * self.alg_payoff / self.epsilon:
            raise ValueError("theta must equal 2 * alg_payoff / epsilon")
        return self

    @property
    def grid_step(self) -> Fraction:
        return self.value * self.epsilon ** 2

    @classmethod
    def from_payoff(cls, alg_payoff, epsilon) -> "Theta":
        alg_payoff, epsilon = parse_scalar(alg_payoff), parse_scalar(epsilon)
        if not 0 < epsilon <= Fraction(1, 2):
            raise DomainError(f"epsilon must lie in (0, 1/2], got {format_scalar(epsilon)}")
        return cls(value=2 * alg_payoff / epsilon, alg_payoff=alg_payoff, epsilon=epsilon)


def choose_theta(inst: PnoiInstance, epsilon) -> Theta:
    """
    Threshold 2 * half_approx / epsilon, inside [OPT / epsilon, 2 OPT / epsilon]
    """
    return Theta.from_payoff(half_approx(inst), epsilon)


def grid_round(theta: Theta, x: Fraction) -> Fraction:
    """Round down to the grid of step theta * epsilon^2."""
    step = theta.grid_step
    if step == 0:
        return x
    return math.floor(x / step) * step


def s_discretize(inst: PnoiInstance, theta: Theta) -> PnoiInstance:
    if theta.grid_step == 0:
        return inst
    boxes = [box.model_copy(update={"dist": box.dist.map(lambda v: grid_round(theta, v))}) for box in inst.boxes]
    return inst.with_boxes(boxes)


def f_value(inst: PnoiInstance, boxes: Sequence[int], v: Fraction) -> Fraction:
    """F(S, v) = sum_i E[(kappa_i - v)_+]"""
    return sum((expected_excess(kappa_distribution(inst.boxes[i]), v) for i in boxes), Fraction(0))


def w_value(inst: PnoiInstance, boxes: Sequence[int], v: Fraction) -> Fraction:
    """W(S, v) = E[(max_i kappa_i - v)_+]"""
    if not boxes:
        return Fraction(0)
    return expected_max_kappa(inst, boxes, v) - v


class LargePoints(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: tuple[Scalar, ...] = Field(..., description="increasing points from theta to the largest value")
    theta: Scalar = Field(..., description="first point")
    max_value: Scalar = Field(..., description="largest support value of the instance")
    budget: Scalar = Field(Fraction(0), description="per-gap drop budget of F")

    @property
    def m(self) -> int:
        return len(self.points)


def large_points(inst: PnoiInstance, theta: Theta) -> LargePoints:
    """
    Points theta = x_1 < ... < x_m = MaxV where F([n], .) drops by less than
    epsilon * alg_payoff between neighbours. Each step drops F by at least half
    the budget unless it reaches MaxV, so m <= 2 F([n], theta) / budget + 2.
    :param inst: instance, usually already grid-discretized
    :param theta: threshold
    :return: LargePoints
    """
    ensure_valid(inst)
    max_value = inst.max_value
    budget = theta.epsilon * theta.alg_payoff
    if max_value <= theta.value:
        return LargePoints(points=(theta.value,), theta=theta.value, max_value=max_value, budget=budget)

    everything = range(inst.n)
    breakpoints = sorted({v for b in inst.boxes for v in kappa_distribution(b).values
                          if theta.value < v < max_value} | {max_value})
    level = {x: f_value(inst, everything, x) for x in breakpoints}

    def f_at(x: Fraction) -> Fraction:
        return level[x] if x in level else f_value(inst, everything, x)

    points = [theta.value]
    current = theta.value
    while current < max_value:
        start = f_at(current)
        ahead = [b for b in breakpoints if b > current]
        if start < budget:
            nxt = max_value
        elif budget == 0:
            nxt = ahead[0]
        else:
            # F is linear between breakpoints: find where it has dropped by budget / 2
            target = start - budget / 2
            lo, lo_level = current, start
            nxt = max_value
            for b in ahead:
                if level[b] <= target:
                    nxt = lo + (lo_level - target) * (b - lo) / (lo_level - level[b])
                    break
                lo, lo_level = b, level[b]
            reachable = [b for b in ahead if b > nxt and start - level[b] < budget]
            if reachable:
                nxt = reachable[-1]
        points.append(nxt)
        current = nxt
    logger.debug(f"large_points: theta={format_scalar(theta.value)} m={len(points)}")
    return LargePoints(points=tuple(points), theta=theta.value, max_value=max_value, budget=budget)


def dl_round(points: LargePoints, x: Fraction) -> Fraction:
    """Identity below theta, otherwise the smallest point >= x."""
    if x > points.max_value and x > points.points[-1]:
        raise DomainError(f"{format_scalar(x)} exceeds the largest value {format_scalar(points.max_value)}")
    if x < points.theta:
        return x
    return points.points[bisect.bisect_left(points.points, x)]


class LpnoiInstance(BaseModel):
    """
    Rounded-state SSDP: opening box i at state I pays max(I, v) - I - c_i and
    moves to dl_round(max(I, v)); taking it unopened pays E[v_i] - I and ends.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: PnoiInstance = Field(..., description="instance whose raw values drive payoffs")
    points: LargePoints = Field(..., description="large-value rounding points")

    @property
    def n(self) -> int:
        return self.base.n

    def states(self) -> list[Fraction]:
        small = {v for b in self.base.boxes for v in b.dist.values if v < self.points.theta}
        return sorted(small | set(self.points.points) | {Fraction(0)})

    def round(self, x: Fraction) -> Fraction:
        return dl_round(self.points, x)

    def open_transition(self, state: Fraction, v: Fraction) -> Fraction:
        return self.round(max(state, v))

    def open_payoff(self, state: Fraction, i: int, v: Fraction) -> Fraction:
        return max(state, v) - state - self.base.boxes[i].cost

    def take_payoff(self, state: Fraction, i: int) -> Fraction:
        return expected_value(self.base.boxes[i].dist) - state

    @staticmethod
    def end_payoff(state: Fraction) -> Fraction:
        return Fraction(0)

    def expected_open_payoff(self, state: Fraction, i: int) -> Fraction:
        box = self.base.boxes[i]
        return expected_excess(box.dist, state) - box.cost


def build_lpnoi(inst: PnoiInstance, points: LargePoints) -> LpnoiInstance:
    ensure_valid(inst)
    if inst.max_value > points.max_value:
        raise DomainError(f"instance value {format_scalar(inst.max_value)} exceeds the rounding range")
    return LpnoiInstance(base=inst, points=points)


class SsdpRecord(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    unopened: list[int] = Field(..., description="unopened box indices")
    state: Scalar = Field(..., description="rounded best value")
    action: Action = Field(..., description="prescribed action; quit is the end action")


class SsdpPolicy:
    """Action per (unopened mask, state), with the value-to-go it was solved for."""

    def __init__(self, n: int, entries: Optional[dict[tuple[int, Fraction], tuple[Fraction, Action]]] = None):
        self.n = n
        self.entries = entries if entries is not None else {}

    def __len__(self) -> int:
        return len(self.entries)

    def action(self, mask: int, state: Fraction) -> Action:
        try:
            return self.entries[(mask, state)][1]
        except KeyError:
            raise PolicyError(f"policy has no action for unopened={list(boxes_of(mask))} "
                              f"state={format_scalar(state)}")

    def to_records(self) -> list[SsdpRecord]:
        ordered = sorted(self.entries.items(), key=lambda kv: (-bin(kv[0][0]).count("1"), kv[0][0], kv[0][1]))
        return [SsdpRecord(unopened=list(boxes_of(mask)), state=state, action=action)
                for (mask, state), (_, action) in ordered]

    @classmethod
    def from_records(cls, n: int, records: Sequence[SsdpRecord]) -> "SsdpPolicy":
        # values are not part of the file format
        return cls(n, {(mask_of(r.unopened), r.state): (Fraction(0), r.action) for r in records})

    @classmethod
    def end_immediately(cls, n: int) -> "SsdpPolicy":
        return cls(n, {((1 << n) - 1, Fraction(0)): (Fraction(0), Action.quit())})


def solve_ssdp_exact(lp: LpnoiInstance, limit: Optional[int] = None) -> tuple[Fraction, SsdpPolicy]:
    """
    V(S, I) = max{ 0, E[v_i] - I, sum_v Pr[v] (max(I, v) - I - c_i + V(S - i, round(max(I, v)))) }
    over actions with non-negative expected marginal payoff; ties keep end, then
    take, then open, lowest box first.
    :param lp: rounded-state process
    :param limit: box limit, defaults to settings.dp_limit
    :return: OPT^L and the argmax policy
    """
    check_size(lp.base, limit, settings.dp_limit, "SSDP solver")
    boxes = lp.base.boxes
    policy = SsdpPolicy(lp.n)
    entries = policy.entries

    def value(mask: int, state: Fraction) -> Fraction:
        key = (mask, state)
        if key in entries:
            return entries[key][0]
        top, choice = lp.end_payoff(state), Action.quit()
        for i in boxes_of(mask):
            gain = lp.take_payoff(state, i)
            if gain > top:
                top, choice = gain, Action.take(i)
        for i in boxes_of(mask):
            if lp.expected_open_payoff(state, i) < 0:
                continue
            box = boxes[i]
            rest = mask & ~(1 << i)
            total = Fraction(0)
            for v, p in box.dist.support:
                total += p * (lp.open_payoff(state, i, v) + value(rest, lp.open_transition(state, v)))
            if total > top:
                top, choice = total, Action.open(i)
        entries[key] = (top, choice)
        return top

    opt = value((1 << lp.n) - 1, Fraction(0))
    logger.debug(f"solve_ssdp_exact: n={lp.n} states={len(entries)} value={format_scalar(opt)}")
    return opt, policy


def policy_value(lp: LpnoiInstance, pol: SsdpPolicy) -> Fraction:
    """Exact value of pol on the rounded-state process."""
    memo: dict[tuple[int, Fraction], Fraction] = {}

    def run(mask: int, state: Fraction) -> Fraction:
        key = (mask, state)
        if key in memo:
            return memo[key]
        action = pol.action(mask, state)
        if action.kind is ActionKind.QUIT:
            result = lp.end_payoff(state)
        elif action.kind is ActionKind.TAKE:
            result = lp.take_payoff(state, action.box)
        else:
            rest = mask & ~(1 << action.box)
            result = Fraction(0)
            for v, p in lp.base.boxes[action.box].dist.support:
                result += p * (lp.open_payoff(state, action.box, v) + run(rest, lp.open_transition(state, v)))
        memo[key] = result
        return result

    return run((1 << lp.n) - 1, Fraction(0))


def lift_policy(lp: LpnoiInstance, pol: SsdpPolicy, inst: PnoiInstance,
                observe: Optional[Callable[[Fraction], Fraction]] = None) -> Fraction:
    """
    Execute pol on inst: the policy sees rounded states, the payoff is the raw
    value taken minus raw costs
    :param lp: process the policy was solved on
    :param pol: policy
    :param inst: instance to run on, lp.base unless observe maps its values into lp's range
    :param observe: raw value to lp value, identity by default
    :return: exact expected payoff on inst
    """
    if inst.n != lp.n:
        raise PolicyError(f"policy has {lp.n} boxes, instance has {inst.n}")
    observe = observe or (lambda x: x)
    # same payoff rules, charged against the raw best value
    raw = lp.model_copy(update={"base": inst})
    memo: dict[tuple[int, Fraction, Fraction], Fraction] = {}

    def run(mask: int, state: Fraction, raw_best: Fraction) -> Fraction:
        key = (mask, state, raw_best)
        if key in memo:
            return memo[key]
        action = pol.action(mask, state)
        if action.kind is ActionKind.QUIT:
            result = raw.end_payoff(raw_best)
        elif action.kind is ActionKind.TAKE:
            result = raw.take_payoff(raw_best, action.box)
        else:
            rest = mask & ~(1 << action.box)
            result = Fraction(0)
            for v, p in inst.boxes[action.box].dist.support:
                result += p * (raw.open_payoff(raw_best, action.box, v)
                               + run(rest, lp.open_transition(state, observe(v)), max(raw_best, v)))
        memo[key] = result
        return result

    return run((1 << inst.n) - 1, Fraction(0), Fraction(0))


def quasi_index_value(lp: LpnoiInstance, boxes: Sequence[int], v: Fraction,
                      order: Optional[Sequence[int]] = None) -> Fraction:
    """
    Expected marginal payoff of opening, from large state v, every box of the
    set with positive expected marginal payoff, stopping once the state rises
    :param lp: rounded-state process
    :param boxes: candidate set S
    :param v: a large rounding point
    :param order: opening order, decreasing index by default
    :return: exact value
    """
    if v not in lp.points.points:
        raise DomainError(f"{format_scalar(v)} is not a large rounding point")
    qualifying = [i for i in boxes if lp.expected_open_payoff(v, i) > 0]
    if order is None:
        order = index_order(lp.base, qualifying)
    else:
        order = [i for i in order if i in qualifying]
    total = Fraction(0)
    stay = Fraction(1)
    for i in order:
        total += stay * lp.expected_open_payoff(v, i)
        stay *= lp.base.boxes[i].dist.prob_at_most(v)
    return total


class PtasResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: Theta = Field(..., description="threshold")
    points: LargePoints = Field(..., description="large rounding points")
    opt_l: Scalar = Field(..., description="optimal value of the rounded-state process")
    payoff: Scalar = Field(..., description="exact payoff of the lifted policy on the input")
    policy: SsdpPolicy = Field(..., description="policy on the rounded-state process")

    @property
    def m(self) -> int:
        return self.points.m


def ptas_pipeline(inst: PnoiInstance, epsilon, limit: Optional[int] = None) -> PtasResult:
    """
    threshold -> grid rounding -> large points -> rounded-state process -> exact
    solve -> lift to the input, whose values are observed through both roundings
    """
    ensure_valid(inst)
    theta = choose_theta(inst, epsilon)
    if theta.alg_payoff == 0:
        points = LargePoints(points=(theta.value,), theta=theta.value, max_value=inst.max_value)
        return PtasResult(theta=theta, points=points, opt_l=Fraction(0), payoff=Fraction(0),
                          policy=SsdpPolicy.end_immediately(inst.n))
    small = s_discretize(inst, theta)
    points = large_points(small, theta)
    lp = build_lpnoi(small, points)
    opt_l, policy = solve_ssdp_exact(lp, limit)
    payoff = lift_policy(lp, policy, inst, observe=lambda x: grid_round(theta, x))
    logger.info(f"ptas_pipeline: theta={format_scalar(theta.value)} m={points.m} "
                f"opt_L={format_scalar(opt_l)} payoff={format_scalar(payoff)}")
    return PtasResult(theta=theta, points=points, opt_l=opt_l, payoff=payoff, policy=policy)
