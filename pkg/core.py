# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : core.py
@Date    : 2026/10/18

Instance model, exact scalars, Weitzman indices, kappa distributions and the
closed-form payoff of the index policy.
"""
import bisect
import logging
from fractions import Fraction
from functools import lru_cache
from typing import Annotated, Any, Iterable, Optional, Sequence

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer

logger = logging.getLogger(__name__)

# boxes whose index and kappa distribution stay memoized
INDEX_CACHE_SIZE = 4096


class PandoraError(Exception):
    """Base class for every error raised by this package."""


class InvalidInstanceError(PandoraError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class SizeLimitError(PandoraError):
    pass


class DomainError(PandoraError):
    pass


class PolicyError(PandoraError):
    pass


class ConstructionError(PandoraError):
    pass


def parse_scalar(value: Any) -> Fraction:
    """
    Parse "a/b", an integer or a Fraction into an exact Fraction
    :param value: raw scalar
    :return: Fraction in canonical form
    """
    if isinstance(value, bool):
        raise ValueError(f"not a scalar: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # exact binary value of the float
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational scalar: {value!r}") from e
    raise ValueError(f"not a scalar: {value!r}")


def format_scalar(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


Scalar = Annotated[
    Fraction,
    BeforeValidator(parse_scalar),
    PlainSerializer(format_scalar, return_type=str, when_used="json"),
]

_MODEL_CONFIG = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class DiscreteDistribution(BaseModel):
    model_config = _MODEL_CONFIG

    support: tuple[tuple[Scalar, Scalar], ...] = Field(..., description="(value, probability) pairs, sorted by value")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Any, Any]]) -> "DiscreteDistribution":
        """Canonical distribution: masses at equal values merged, zero masses dropped, sorted by value."""
        merged: dict[Fraction, Fraction] = {}
        for value, prob in pairs:
            value, prob = parse_scalar(value), parse_scalar(prob)
            merged[value] = merged.get(value, Fraction(0)) + prob
        return cls(support=tuple((v, p) for v, p in sorted(merged.items()) if p != 0))

    @property
    def values(self) -> list[Fraction]:
        return [v for v, _ in self.support]

    @property
    def probabilities(self) -> list[Fraction]:
        return [p for _, p in self.support]

    @property
    def max_value(self) -> Fraction:
        return self.support[-1][0]

    def prob_at_most(self, x: Fraction) -> Fraction:
        return sum((p for v, p in self.support if v <= x), Fraction(0))

    def map(self, fn) -> "DiscreteDistribution":
        return DiscreteDistribution.from_pairs((fn(v), p) for v, p in self.support)


class PnoiBox(BaseModel):
    model_config = _MODEL_CONFIG

    cost: Scalar = Field(..., description="inspection cost c_i")
    dist: DiscreteDistribution = Field(..., description="value distribution F_i")


class PnoiInstance(BaseModel):
    model_config = _MODEL_CONFIG

    boxes: tuple[PnoiBox, ...] = Field(..., description="sealed boxes, 0-based")

    @property
    def n(self) -> int:
        return len(self.boxes)

    @property
    def max_value(self) -> Fraction:
        return max(b.dist.max_value for b in self.boxes)

    def with_boxes(self, boxes: Sequence[PnoiBox]) -> "PnoiInstance":
        return PnoiInstance(boxes=tuple(boxes))


class Violation(BaseModel):
    model_config = ConfigDict(frozen=True)

    box: Optional[int] = Field(None, description="offending box, None for instance-level problems")
    reason: str = Field(..., description="what is wrong")

    def __str__(self) -> str:
        if self.box is None:
            return self.reason
        return f"box {self.box}: {self.reason}"


def make_box(cost: Any, pairs: Iterable[tuple[Any, Any]]) -> PnoiBox:
    return PnoiBox(cost=parse_scalar(cost), dist=DiscreteDistribution.from_pairs(pairs))


def make_instance(boxes: Iterable[tuple[Any, Iterable[tuple[Any, Any]]]]) -> PnoiInstance:
    """
    Build an instance from (cost, [(value, prob), ...]) tuples
    """
    return PnoiInstance(boxes=tuple(make_box(c, pairs) for c, pairs in boxes))


def validate_distribution(dist: DiscreteDistribution, box: Optional[int] = None) -> list[Violation]:
    violations = []
    if not dist.support:
        return [Violation(box=box, reason="empty support")]
    values = dist.values
    if any(b <= a for a, b in zip(values, values[1:])):
        violations.append(Violation(box=box, reason="support values not strictly increasing"))
    if values[0] < 0:
        violations.append(Violation(box=box, reason="value < 0"))
    if any(p <= 0 for p in dist.probabilities):
        violations.append(Violation(box=box, reason="probability <= 0"))
    if sum(dist.probabilities) != 1:
        violations.append(Violation(box=box, reason="probabilities sum != 1"))
    return violations


def validate_instance(inst: PnoiInstance) -> list[Violation]:
    """
    Check every instance invariant
    :param inst: instance to check
    :return: list of violations, empty when the instance is valid
    """
    if not inst.boxes:
        return [Violation(reason="instance has no boxes")]
    violations = []
    for i, box in enumerate(inst.boxes):
        if box.cost < 0:
            violations.append(Violation(box=i, reason="cost < 0"))
        violations.extend(validate_distribution(box.dist, box=i))
    return violations


def ensure_valid(inst: PnoiInstance) -> PnoiInstance:
    violations = validate_instance(inst)
    if violations:
        raise InvalidInstanceError(violations)
    return inst


def expected_value(dist: DiscreteDistribution) -> Fraction:
    return sum((v * p for v, p in dist.support), Fraction(0))


def expected_excess(dist: DiscreteDistribution, threshold: Fraction) -> Fraction:
    """E[(X - threshold)_+]"""
    return sum(((v - threshold) * p for v, p in dist.support if v > threshold), Fraction(0))


@lru_cache(maxsize=INDEX_CACHE_SIZE)
def compute_index(box: PnoiBox) -> Fraction:
    """
    Weitzman index: the smallest tau with E[(v - tau)_+] = cost
    :param box: a valid box
    :return: exact index
    """
    if not box.dist.support:
        raise InvalidInstanceError([Violation(reason="empty support")])
    support = box.dist.support
    cost = box.cost
    if cost == 0:
        return support[-1][0]
    # sweep breakpoints from the top: above v_j the excess is linear in tau
    mass = Fraction(0)
    weighted = Fraction(0)
    for j in range(len(support) - 1, -1, -1):
        value, prob = support[j]
        if mass > 0 and weighted - mass * value >= cost:
            return (weighted - cost) / mass
        mass += prob
        weighted += prob * value
    # below the smallest value the excess is E[v] - tau
    return (weighted - cost) / mass


@lru_cache(maxsize=INDEX_CACHE_SIZE)
def kappa_distribution(box: PnoiBox) -> DiscreteDistribution:
    tau = compute_index(box)
    return box.dist.map(lambda v: min(v, tau))


def index_order(inst: PnoiInstance, boxes: Optional[Iterable[int]] = None) -> list[int]:
    """Boxes by decreasing index, lowest box index first on ties."""
    boxes = range(inst.n) if boxes is None else boxes
    return sorted(boxes, key=lambda i: (-compute_index(inst.boxes[i]), i))


def expected_max(dists: Sequence[DiscreteDistribution], outside: Optional[Fraction] = None) -> Fraction:
    """
    E[max(outside, max_j X_j)] for independent X_j, by multiplying CDFs over the merged support
    :param dists: independent distributions
    :param outside: free outside option, or None
    :return: exact expectation
    """
    if not dists:
        if outside is None:
            raise DomainError("expected_max of an empty family without an outside option")
        return Fraction(outside)
    points = sorted({v for d in dists for v in d.values} | ({outside} if outside is not None else set()))
    if outside is not None:
        points = points[bisect.bisect_left(points, outside):]
    cumulative = []
    for d in dists:
        values = d.values
        acc, running = [], Fraction(0)
        for p in d.probabilities:
            running += p
            acc.append(running)
        cumulative.append((values, acc))

    total = Fraction(0)
    previous = Fraction(0)
    for x in points:
        cdf = Fraction(1)
        for values, acc in cumulative:
            k = bisect.bisect_right(values, x)
            cdf *= acc[k - 1] if k else 0
            if cdf == 0:
                break
        total += x * (cdf - previous)
        previous = cdf
    return total


def expected_max_kappa(inst: PnoiInstance, boxes: Iterable[int], outside: Optional[Fraction] = None) -> Fraction:
    return expected_max([kappa_distribution(inst.boxes[i]) for i in boxes], outside)


def max_kappa_expectation(inst: PnoiInstance) -> Fraction:
    """
    Expected payoff of the index policy, E[max(0, max_i kappa_i)]
    """
    return expected_max_kappa(inst, range(inst.n), Fraction(0))


class BoxRecord(BaseModel):
    model_config = _MODEL_CONFIG

    cost: Scalar = Field(..., description="inspection cost")
    support: list[tuple[Scalar, Scalar]] = Field(..., description="[value, probability] pairs")


class InstanceRecord(BaseModel):
    model_config = _MODEL_CONFIG

    boxes: list[BoxRecord] = Field(..., description="boxes in order")


def instance_from_record(record: InstanceRecord) -> PnoiInstance:
    return PnoiInstance(boxes=tuple(
        PnoiBox(cost=b.cost, dist=DiscreteDistribution(support=tuple(b.support))) for b in record.boxes
    ))


def instance_to_record(inst: PnoiInstance) -> InstanceRecord:
    return InstanceRecord(boxes=[BoxRecord(cost=b.cost, support=list(b.dist.support)) for b in inst.boxes])


def instance_from_json(text: str) -> PnoiInstance:
    return instance_from_record(InstanceRecord.model_validate_json(text))


def instance_to_json(inst: PnoiInstance, indent: Optional[int] = 2) -> str:
    return instance_to_record(inst).model_dump_json(indent=indent)
