# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : lclrs3.py
@Date    : 2026/10/18

Low-cost low-return support-3 instances: normal-policy payoffs, the Loss and
Utility objectives, the Partition reduction and its h(x) diagnostics.
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from core import (
    ConstructionError,
    DomainError,
    PnoiBox,
    PnoiInstance,
    PolicyError,
    Scalar,
    SizeLimitError,
    Violation,
    compute_index,
    expected_max_kappa,
    expected_value,
    format_scalar,
    make_box,
    max_kappa_expectation,
    validate_instance,
)
from settings import settings

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)
SUPPORT3 = {Fraction(0), HALF, Fraction(1)}


def lclrs3_box(p: Fraction, q: Fraction, c: Fraction) -> PnoiBox:
    """Box with mass p at 1, q at 1/2 and the rest at 0."""
    return make_box(c, [(0, 1 - p - q), (HALF, q), (1, p)])


def is_lclrs3(inst: PnoiInstance) -> tuple[bool, list[Violation]]:
    """
    Check the three LCLRS3 conditions
    :param inst: any instance
    :return: (ok, violations)
    """
    violations = validate_instance(inst)
    if violations:
        return False, violations
    for i, box in enumerate(inst.boxes):
        dist = box.dist
        if not set(dist.values) <= SUPPORT3:
            violations.append(Violation(box=i, reason="support not inside {0, 1/2, 1}"))
            continue
        mass = dict(dist.support)
        if mass.get(Fraction(1), Fraction(0)) <= 0:
            violations.append(Violation(box=i, reason="no mass at 1"))
        if box.cost <= 0:
            violations.append(Violation(box=i, reason="cost <= 0"))
        if expected_value(dist) >= HALF:
            violations.append(Violation(box=i, reason="expected value >= 1/2"))
        if compute_index(box) < HALF:
            violations.append(Violation(box=i, reason="index < 1/2"))
    return not violations, violations


class Lclrs3Instance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: PnoiInstance = Field(..., description="underlying instance")
    p: tuple[Scalar, ...] = Field(..., description="mass at 1")
    q: tuple[Scalar, ...] = Field(..., description="mass at 1/2")
    r: tuple[Scalar, ...] = Field(..., description="mass at 0")
    c: tuple[Scalar, ...] = Field(..., description="costs")
    tau: tuple[Scalar, ...] = Field(..., description="indices, 1 - c/p")

    @classmethod
    def from_instance(cls, inst: PnoiInstance) -> "Lclrs3Instance":
        ok, violations = is_lclrs3(inst)
        if not ok:
            raise DomainError("not an LCLRS3 instance: " + "; ".join(str(v) for v in violations))
        masses = [dict(b.dist.support) for b in inst.boxes]
        return cls(
            base=inst,
            p=tuple(m.get(Fraction(1), Fraction(0)) for m in masses),
            q=tuple(m.get(HALF, Fraction(0)) for m in masses),
            r=tuple(m.get(Fraction(0), Fraction(0)) for m in masses),
            c=tuple(b.cost for b in inst.boxes),
            tau=tuple(compute_index(b) for b in inst.boxes),
        )

    @classmethod
    def from_masses(cls, boxes: Sequence[tuple[Fraction, Fraction, Fraction]]) -> "Lclrs3Instance":
        """Build from (p, q, c) triples."""
        return cls.from_instance(PnoiInstance(boxes=tuple(lclrs3_box(p, q, c) for p, q, c in boxes)))

    @property
    def n(self) -> int:
        return self.base.n


def check_permutation(sigma: Sequence[int], n: int) -> tuple[int, ...]:
    sigma = tuple(sigma)
    if sorted(sigma) != list(range(n)):
        raise PolicyError(f"not a permutation of {n} boxes: {list(sigma)}")
    return sigma


def g_value(inst: Lclrs3Instance, i: int, boxes: Sequence[int]) -> Fraction:
    """
    E[(max_{j in boxes} kappa_j - tau_i)_+], 0 for an empty set
    """
    if i in boxes:
        raise DomainError(f"box {i} is in its own comparison set")
    if not boxes:
        return Fraction(0)
    return expected_max_kappa(inst.base, sorted(boxes), inst.tau[i]) - inst.tau[i]


class NormalPolicyEvaluator:
    """
    Cached evaluation of normal policies and Loss terms for one instance, shared
    across a permutation sweep.
    """

    def __init__(self, inst: Lclrs3Instance):
        self.inst = inst
        self.means = [expected_value(b.dist) for b in inst.base.boxes]
        self._switch: dict[frozenset, Fraction] = {}
        self._g: dict[tuple[int, frozenset], Fraction] = {}

    def switch_value(self, remaining: frozenset) -> Fraction:
        if remaining not in self._switch:
            self._switch[remaining] = expected_max_kappa(self.inst.base, sorted(remaining), HALF)
        return self._switch[remaining]

    def g(self, i: int, boxes: frozenset) -> Fraction:
        key = (i, boxes)
        if key not in self._g:
            self._g[key] = g_value(self.inst, i, sorted(boxes))
        return self._g[key]

    def normal_value(self, sigma: tuple[int, ...]) -> Fraction:
        inst = self.inst
        value = Fraction(0)
        all_zero = Fraction(1)
        for k, i in enumerate(sigma[:-1]):
            remaining = frozenset(sigma[k + 1:])
            value += all_zero * (-inst.c[i] + inst.p[i] + inst.q[i] * self.switch_value(remaining))
            all_zero *= inst.r[i]
        return value + all_zero * self.means[sigma[-1]]

    def loss(self, sigma: tuple[int, ...]) -> Fraction:
        inst = self.inst
        total = Fraction(0)
        all_zero = Fraction(1)
        for k, i in enumerate(sigma):
            later = frozenset(j for j in sigma[k + 1:] if inst.tau[j] > inst.tau[i])
            total += inst.p[i] * self.g(i, later) * all_zero
            all_zero *= inst.r[i]
        return total

    def saved_cost(self, sigma: tuple[int, ...]) -> Fraction:
        """c_last times the chance every earlier box shows 0."""
        all_zero = Fraction(1)
        for i in sigma[:-1]:
            all_zero *= self.inst.r[i]
        return self.inst.c[sigma[-1]] * all_zero

    def utility(self, sigma: tuple[int, ...]) -> Fraction:
        return self.saved_cost(sigma) - self.loss(sigma)


def evaluate_normal_policy(inst: Lclrs3Instance, sigma: Sequence[int]) -> Fraction:
    """
    Exact payoff of the normal policy with order sigma: stop on 1, switch to the
    index policy with outside option 1/2 on 1/2, continue on 0, and take the last
    box unopened if every earlier box showed 0.
    """
    sigma = check_permutation(sigma, inst.n)
    return NormalPolicyEvaluator(inst).normal_value(sigma)


def loss(inst: Lclrs3Instance, sigma: Sequence[int]) -> Fraction:
    sigma = check_permutation(sigma, inst.n)
    return NormalPolicyEvaluator(inst).loss(sigma)


def utility(inst: Lclrs3Instance, sigma: Sequence[int]) -> Fraction:
    sigma = check_permutation(sigma, inst.n)
    return NormalPolicyEvaluator(inst).utility(sigma)


def index_payoff_gap(inst: Lclrs3Instance, sigma: Sequence[int]) -> Fraction:
    """
    E[max kappa] - (normal payoff + Loss - saved cost); zero for every permutation.
    """
    sigma = check_permutation(sigma, inst.n)
    evaluator = NormalPolicyEvaluator(inst)
    rhs = evaluator.normal_value(sigma) + evaluator.loss(sigma) - evaluator.saved_cost(sigma)
    return max_kappa_expectation(inst.base) - rhs


def best_permutation(inst: Lclrs3Instance, limit: Optional[int] = None) -> tuple[tuple[int, ...], Fraction]:
    """
    Exhaustive argmax of the normal-policy payoff over all orders
    :param inst: LCLRS3 instance
    :param limit: box limit, defaults to settings.permutation_limit
    :return: lexicographically first optimal order and its payoff
    """
    limit = settings.permutation_limit if limit is None else limit
    if inst.n > limit:
        raise SizeLimitError(f"permutation sweep supports at most {limit} boxes, got {inst.n}")
    evaluator = NormalPolicyEvaluator(inst)
    best_sigma, best_value = None, None
    for sigma in itertools.permutations(range(inst.n)):
        value = evaluator.normal_value(sigma)
        if best_value is None or value > best_value:
            best_sigma, best_value = sigma, value
    return best_sigma, best_value


def scheduling_sum(p: Sequence[Fraction], r: Sequence[Fraction]) -> Fraction:
    """sum_i p_i prod_{j<i} r_j"""
    total = Fraction(0)
    prefix = Fraction(1)
    for pi, ri in zip(p, r):
        total += pi * prefix
        prefix *= ri
    return total


def _taylor_terms(x: Fraction, tolerance: Fraction) -> tuple[Fraction, Fraction]:
    """
    Partial sum of exp(x) for |x| <= 1 and a bound on the tail, 3|x|^(K+1)/(K+1)!,
    with K large enough that the bound is at most tolerance.
    """
    total = Fraction(0)
    term = Fraction(1)
    k = 0
    while True:
        total += term
        k += 1
        term = term * x / k
        tail = 3 * abs(term)
        if tail <= tolerance:
            return total, tail


def exp_interval(x: Fraction, bits: Optional[int] = None) -> tuple[Fraction, Fraction]:
    """
    Certified dyadic enclosure [lo, hi] of e^x with hi - lo <= 2^-bits
    :param x: exponent, |x| <= 1
    :param bits: precision, defaults to settings.h_precision_bits
    :return: (lo, hi)
    """
    bits = settings.h_precision_bits if bits is None else bits
    x = Fraction(x)
    if abs(x) > 1:
        raise DomainError(f"exp_interval needs |x| <= 1, got {format_scalar(x)}")
    if x == 0:
        return Fraction(1), Fraction(1)
    scale = 2 ** (bits + 2)
    total, tail = _taylor_terms(x, Fraction(1, scale))
    lo = Fraction(math.floor((total - tail) * scale), scale)
    hi = Fraction(math.ceil((total + tail) * scale), scale)
    return lo, hi


def rational_exp_half(y: Fraction, err: Fraction) -> Fraction:
    """
    Dyadic t with |t - 2 e^(y/2)| <= err
    :param y: 0 <= y <= 1
    :param err: positive tolerance
    :return: t
    """
    y, err = Fraction(y), Fraction(err)
    if err <= 0:
        raise DomainError(f"err must be positive, got {format_scalar(err)}")
    if not 0 <= y <= 1:
        raise DomainError(f"y must lie in [0, 1], got {format_scalar(y)}")
    if y == 0:
        return Fraction(2)
    total, _ = _taylor_terms(y / 2, err / 4)
    bits = 1
    while Fraction(1, 2 ** bits) > err / 2:
        bits += 1
    scale = 2 ** bits
    return Fraction(round(2 * total * scale), scale)


class ReductionOutput(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    instance: Lclrs3Instance = Field(..., description="n + 2 boxes; box n is the low box, box n + 1 the high box")
    source: tuple[int, ...] = Field(..., description="Partition multiset")
    gamma: Scalar = Field(..., description="2^(8n)")
    delta: Scalar = Field(..., description="2^(-7n)")
    y: Scalar = Field(..., description="sum of p_i + p_i^2 over the source boxes")
    t: Scalar = Field(..., description="dyadic approximation of 2 e^(y/2)")
    tau_h: Scalar = Field(..., description="base index of the source boxes")
    tau_l: Scalar = Field(HALF, description="index of the low box")

    @property
    def n(self) -> int:
        return len(self.source)

    @property
    def low(self) -> int:
        return self.n

    @property
    def high(self) -> int:
        return self.n + 1


def reduce_partition(source: Sequence[int]) -> ReductionOutput:
    """
    Build the LCLRS3 instance encoding a Partition multiset
    :param source: integers with 1 <= s_i <= 2^n
    :return: the reduction with every parameter exact
    """
    source = tuple(int(s) for s in source)
    n = len(source)
    if n < 1:
        raise DomainError("partition multiset is empty")
    for s in source:
        if not 1 <= s <= 2 ** n:
            raise DomainError(f"partition value {s} outside [1, {2 ** n}]")

    gamma = Fraction(2 ** (8 * n))
    delta = Fraction(1, 2 ** (7 * n))
    ps = [s / gamma for s in source]
    y = sum((p + p * p for p in ps), Fraction(0))
    t = rational_exp_half(y, delta * delta / 4)
    tau_h = (-3 * t * gamma + 28 + 94 * t) / (-4 * t * gamma + 56 + 104 * t)
    tau_l = HALF

    p_low, q_low = 1 / gamma, 1 - 41 / gamma
    p_high, q_high = Fraction(1, 8), Fraction(1, 8)
    boxes = []
    for p in ps:
        tau = tau_h + p * p_low * (1 - p_high) * (tau_h - tau_l) / (2 * p_high)
        boxes.append(lclrs3_box(p, p, p * (1 - tau)))
    boxes.append(lclrs3_box(p_low, q_low, p_low / 2))
    boxes.append(lclrs3_box(p_high, q_high, Fraction(1, 32)))
    base = PnoiInstance(boxes=tuple(boxes))

    try:
        instance = Lclrs3Instance.from_instance(base)
    except DomainError as e:
        logger.error(f"Error building reduction for {list(source)}: {e}")
        raise ConstructionError(str(e))
    taus = instance.tau
    if not (taus[n] == tau_l and all(taus[n + 1] > taus[i] > tau_h for i in range(n)) and tau_h > tau_l):
        raise ConstructionError(f"index ordering violated for {list(source)}")
    logger.debug(f"reduce_partition: n={n} tau_H={format_scalar(tau_h)}")
    return ReductionOutput(instance=instance, source=source, gamma=gamma, delta=delta, y=y, t=t,
                           tau_h=tau_h, tau_l=tau_l)


def reduction_constants(red: ReductionOutput) -> tuple[Fraction, Fraction, Fraction]:
    """
    (k1, k2, C) of the Loss approximation
    """
    inst, n = red.instance, red.n
    lo, hi = red.low, red.high
    p_hi, tau_hi = inst.p[hi], inst.tau[hi]
    k1 = (-HALF * p_hi * (tau_hi - red.tau_h) * (inst.p[lo] + inst.q[lo])
          + inst.p[lo] * ((1 - p_hi) * (red.tau_h - red.tau_l) + p_hi * (tau_hi - red.tau_l)))
    k2 = inst.p[lo] * (1 - p_hi) * (red.tau_h - red.tau_l)
    all_zero = Fraction(1)
    for i in range(n + 1):
        all_zero *= inst.r[i]
    c_const = (HALF * p_hi * (tau_hi - red.tau_h) * (1 - all_zero)
               + HALF * k2 * sum((inst.p[i] ** 2 for i in range(n)), Fraction(0)))
    return k1, k2, c_const


def reduction_meta(red: ReductionOutput) -> dict[str, str]:
    k1, k2, c_const = reduction_constants(red)
    values = {"gamma": red.gamma, "delta": red.delta, "y": red.y, "t": red.t, "tau_H": red.tau_h,
              "k1": k1, "k2": k2, "C": c_const}
    return {k: format_scalar(v) for k, v in values.items()}


class ReductionDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k1: Scalar = Field(..., description="linear coefficient of the Loss approximation")
    k2: Scalar = Field(..., description="coupling coefficient, k2 / k1 = t")
    c_const: Scalar = Field(..., description="permutation-independent part of Loss")
    x: Scalar = Field(..., description="sum of p_i + p_i^2 over boxes before the low box")
    y: Scalar = Field(..., description="sum of p_i + p_i^2 over all source boxes")
    z: Scalar = Field(..., description="sum of p_i^2 / 2 over boxes after the low box")
    loss: Scalar = Field(..., description="exact Loss of the permutation")
    h_lo: Scalar = Field(..., description="lower end of the h(x) enclosure")
    h_hi: Scalar = Field(..., description="upper end of the h(x) enclosure")
    bits: int = Field(..., description="precision of the exp enclosures")

    @property
    def ratio(self) -> Fraction:
        return self.k2 / self.k1

    @property
    def scaled_loss(self) -> Fraction:
        """(Loss - C) / k1"""
        return (self.loss - self.c_const) / self.k1

    @property
    def residual(self) -> Fraction:
        """Upper bound on |(Loss - C)/k1 - h(x)|."""
        return max(abs(self.scaled_loss - self.h_lo), abs(self.scaled_loss - self.h_hi))

    def h(self, x: Fraction) -> tuple[Fraction, Fraction]:
        """h(x) = e^(-2x) (1 - (k2/k1) e^(-y+x)) as an interval"""
        a_lo, a_hi = exp_interval(-2 * Fraction(x), self.bits)
        b_lo, b_hi = exp_interval(Fraction(x) - self.y, self.bits)
        f_lo, f_hi = 1 - self.ratio * b_hi, 1 - self.ratio * b_lo
        products = [a_lo * f_lo, a_lo * f_hi, a_hi * f_lo, a_hi * f_hi]
        return min(products), max(products)

    def h_second_derivative(self, x: Fraction) -> tuple[Fraction, Fraction]:
        """h''(x) = 4 e^(-2x) - (k2/k1) e^(-y) e^(-x) as an interval"""
        a_lo, a_hi = exp_interval(-2 * Fraction(x), self.bits)
        b_lo, b_hi = exp_interval(-self.y - Fraction(x), self.bits)
        return 4 * a_lo - self.ratio * b_hi, 4 * a_hi - self.ratio * b_lo


def h_diagnostics(red: ReductionOutput, sigma: Sequence[int], bits: Optional[int] = None) -> ReductionDiagnostics:
    """
    Loss of sigma against the h(x) approximation
    :param red: reduction output
    :param sigma: permutation of the n + 2 boxes
    :param bits: width of the exp enclosures, defaults to settings.h_precision_bits
    :return: diagnostics with the exact constants and the h(x) enclosure
    """
    bits = settings.h_precision_bits if bits is None else bits
    inst = red.instance
    sigma = check_permutation(sigma, inst.n)
    position = sigma.index(red.low)
    before = [i for i in sigma[:position] if i < red.n]
    after = [i for i in sigma[position + 1:] if i < red.n]
    x = sum((inst.p[i] + inst.p[i] ** 2 for i in before), Fraction(0))
    z = sum((inst.p[i] ** 2 / 2 for i in after), Fraction(0))
    k1, k2, c_const = reduction_constants(red)
    diagnostics = ReductionDiagnostics(k1=k1, k2=k2, c_const=c_const, x=x, y=red.y, z=z,
                                       loss=NormalPolicyEvaluator(inst).loss(sigma),
                                       h_lo=Fraction(0), h_hi=Fraction(0), bits=bits)
    h_lo, h_hi = diagnostics.h(x)
    return diagnostics.model_copy(update={"h_lo": h_lo, "h_hi": h_hi})


class PartitionAnswer(BaseModel):
    model_config = ConfigDict(frozen=True)

    answer: bool = Field(..., description="True when the multiset splits evenly")
    sigma: tuple[int, ...] = Field(..., description="optimal order of the reduction boxes")
    before: tuple[int, ...] = Field(..., description="source boxes ordered before the low box")
    after: tuple[int, ...] = Field(..., description="source boxes ordered after the low box")

    @property
    def label(self) -> str:
        return "yes" if self.answer else "no"


def partition_answer(red: ReductionOutput, limit: Optional[int] = None) -> PartitionAnswer:
    """
    Decide Partition by solving the reduction exactly: yes iff the source boxes
    before and after the low box carry equal mass at 1 in the optimal order.
    """
    limit = settings.reduction_answer_limit if limit is None else limit
    if red.n > limit:
        raise SizeLimitError(f"partition answers are limited to {limit} source values, got {red.n}")
    sigma, _ = best_permutation(red.instance, limit=max(settings.permutation_limit, red.n + 2))
    position = sigma.index(red.low)
    before = tuple(i for i in sigma[:position] if i < red.n)
    after = tuple(i for i in sigma[position + 1:] if i < red.n)
    p = red.instance.p
    answer = sum((p[i] for i in before), Fraction(0)) == sum((p[i] for i in after), Fraction(0))
    return PartitionAnswer(answer=answer, sigma=sigma, before=before, after=after)


def partition_brute_force(source: Sequence[int]) -> bool:
    total = sum(source)
    if total % 2:
        return False
    reachable = {0}
    for s in source:
        reachable |= {r + s for r in reachable}
    return total // 2 in reachable
