# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : exact.py
@Date    : 2026/10/18

Brute-force optimal-policy oracle over (unopened subset, best revealed value)
states, and exact evaluation / exhaustive search of structured policies.
"""
import logging
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from core import (
    PnoiInstance,
    PolicyError,
    Scalar,
    SizeLimitError,
    ensure_valid,
    expected_max_kappa,
    expected_value,
    format_scalar,
    max_kappa_expectation,
    parse_scalar,
)
from settings import settings

logger = logging.getLogger(__name__)


class ActionKind(str, Enum):
    QUIT = "quit"
    TAKE = "take"
    OPEN = "open"


class Action(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ActionKind = Field(..., description="quit with the best opened box, take a box unopened, or open a box")
    box: Optional[int] = Field(None, description="target box, None for quit")

    @classmethod
    def quit(cls) -> "Action":
        return cls(kind=ActionKind.QUIT)

    @classmethod
    def take(cls, box: int) -> "Action":
        return cls(kind=ActionKind.TAKE, box=box)

    @classmethod
    def open(cls, box: int) -> "Action":
        return cls(kind=ActionKind.OPEN, box=box)


class TableRecord(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    unopened: list[int] = Field(..., description="unopened box indices")
    best: Scalar = Field(..., description="largest revealed value, 0 if none")
    value: Scalar = Field(..., description="optimal value-to-go")
    action: Action = Field(..., description="argmax action")


def mask_of(boxes: Sequence[int]) -> int:
    mask = 0
    for i in boxes:
        mask |= 1 << i
    return mask


def boxes_of(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def check_size(inst: PnoiInstance, limit: Optional[int], default: int, what: str) -> None:
    limit = default if limit is None else limit
    if inst.n > limit:
        raise SizeLimitError(f"{what} supports at most {limit} boxes, got {inst.n}")


class ValueTable:
    """
    Memoized Bellman values keyed by (unopened mask, best value).
    """

    def __init__(self, n: int, entries: Optional[dict[tuple[int, Fraction], tuple[Fraction, Action]]] = None):
        self.n = n
        self.entries = entries if entries is not None else {}

    def __len__(self) -> int:
        return len(self.entries)

    def value(self, mask: int, best: Fraction) -> Fraction:
        return self.entries[(mask, best)][0]

    def action(self, mask: int, best: Fraction) -> Action:
        try:
            return self.entries[(mask, best)][1]
        except KeyError:
            raise PolicyError(f"no action for unopened={list(boxes_of(mask))} best={format_scalar(best)}")

    def to_records(self) -> list[TableRecord]:
        ordered = sorted(self.entries.items(), key=lambda kv: (-bin(kv[0][0]).count("1"), kv[0][0], kv[0][1]))
        return [
            TableRecord(unopened=list(boxes_of(mask)), best=best, value=value, action=action)
            for (mask, best), (value, action) in ordered
        ]

    @classmethod
    def from_records(cls, n: int, records: Sequence[TableRecord]) -> "ValueTable":
        return cls(n, {(mask_of(r.unopened), r.best): (r.value, r.action) for r in records})


class BellmanSolver:
    """
    V(S, b) = max{ b, max_i E[v_i], max_i (-c_i + sum_v Pr[v] V(S - i, max(b, v))) }

    :param inst: valid instance
    :param allow_take: False drops the take-unopened branch (classic Pandora's box)
    """

    def __init__(self, inst: PnoiInstance, allow_take: bool = True):
        self.inst = inst
        self.allow_take = allow_take
        self.means = [expected_value(b.dist) for b in inst.boxes]
        self.table = ValueTable(inst.n)

    @property
    def full_mask(self) -> int:
        return (1 << self.inst.n) - 1

    def value(self, mask: int, best: Fraction) -> Fraction:
        key = (mask, best)
        entries = self.table.entries
        if key in entries:
            return entries[key][0]
        # ties keep the earlier action: quit, then take, then open, lowest box first
        top, choice = best, Action.quit()
        if self.allow_take:
            for i in boxes_of(mask):
                if self.means[i] > top:
                    top, choice = self.means[i], Action.take(i)
        for i in boxes_of(mask):
            box = self.inst.boxes[i]
            rest = mask & ~(1 << i)
            total = -box.cost
            for v, p in box.dist.support:
                total += p * self.value(rest, max(best, v))
            if total > top:
                top, choice = total, Action.open(i)
        entries[key] = (top, choice)
        return top

    def solve(self) -> tuple[Fraction, ValueTable]:
        return self.value(self.full_mask, Fraction(0)), self.table


def optimal_value(inst: PnoiInstance, limit: Optional[int] = None) -> tuple[Fraction, ValueTable]:
    """
    Exact PNOI optimum by exhaustive dynamic programming
    :param inst: instance
    :param limit: box limit, defaults to settings.dp_limit
    :return: optimal value and the memoized table
    """
    ensure_valid(inst)
    check_size(inst, limit, settings.dp_limit, "exact DP")
    value, table = BellmanSolver(inst).solve()
    logger.debug(f"optimal_value: n={inst.n} states={len(table)} value={format_scalar(value)}")
    return value, table


def classic_optimal_value(inst: PnoiInstance, limit: Optional[int] = None) -> Fraction:
    ensure_valid(inst)
    check_size(inst, limit, settings.dp_limit, "exact DP")
    value, _ = BellmanSolver(inst, allow_take=False).solve()
    return value


def evaluate_table_policy(table: ValueTable, inst: PnoiInstance,
                          observe: Callable[[Fraction], Fraction] = lambda x: x) -> Fraction:
    """
    Run a table policy on inst. Revealed values are mapped through observe to
    pick the table state; payoffs use the raw values of inst.
    :param table: policy table, usually solved on a discretized copy of inst
    :param inst: instance the policy is executed on
    :param observe: map from raw values to the table's state space
    :return: exact expected payoff on inst
    """
    if table.n != inst.n:
        raise PolicyError(f"table has {table.n} boxes, instance has {inst.n}")
    means = [expected_value(b.dist) for b in inst.boxes]
    memo: dict[tuple[int, Fraction, Fraction], Fraction] = {}

    def run(mask: int, state: Fraction, raw_best: Fraction) -> Fraction:
        key = (mask, state, raw_best)
        if key in memo:
            return memo[key]
        action = table.action(mask, state)
        if action.kind is ActionKind.QUIT:
            result = raw_best
        elif action.kind is ActionKind.TAKE:
            result = means[action.box]
        else:
            box = inst.boxes[action.box]
            rest = mask & ~(1 << action.box)
            result = -box.cost
            for v, p in box.dist.support:
                result += p * run(rest, max(state, observe(v)), max(raw_best, v))
        memo[key] = result
        return result

    return run((1 << inst.n) - 1, Fraction(0), Fraction(0))


NEVER = "never"


class StructuredPolicy(BaseModel):
    """
    Committed boxes in order, with a switch threshold for every committed box but
    the last. None means the box never triggers the switch.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    committed: tuple[int, ...] = Field((), description="ordered committed boxes")
    thresholds: tuple[Optional[Fraction], ...] = Field((), description="switch thresholds, None for never")

    def validate_for(self, inst: PnoiInstance) -> None:
        if len(set(self.committed)) != len(self.committed):
            raise PolicyError(f"duplicate committed boxes: {list(self.committed)}")
        for i in self.committed:
            if not 0 <= i < inst.n:
                raise PolicyError(f"committed box {i} out of range for {inst.n} boxes")
        if len(self.thresholds) != max(len(self.committed) - 1, 0):
            raise PolicyError(f"{len(self.committed)} committed boxes need {max(len(self.committed) - 1, 0)} "
                              f"thresholds, got {len(self.thresholds)}")

    def to_json_dict(self) -> dict:
        return {
            "sigma": list(self.committed),
            "thresholds": [NEVER if t is None else format_scalar(t) for t in self.thresholds],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "StructuredPolicy":
        try:
            return cls(
                committed=tuple(int(i) for i in data.get("sigma", [])),
                thresholds=tuple(None if t == NEVER else parse_scalar(t) for t in data.get("thresholds", [])),
            )
        except (TypeError, ValueError) as e:
            raise PolicyError(f"malformed structured policy: {e}")


class _Frontier:
    """Probability mass over the best value of still-running paths, plus payoff already settled."""

    __slots__ = ("mass", "settled")

    def __init__(self, mass: dict[Fraction, Fraction], settled: Fraction):
        self.mass = mass
        self.settled = settled

    @property
    def running(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0))


class _StructuredEvaluator:
    def __init__(self, inst: PnoiInstance):
        self.inst = inst
        self.means = [expected_value(b.dist) for b in inst.boxes]
        self.switch_cache: dict[tuple[frozenset, Fraction], Fraction] = {}

    def switch_value(self, unopened: frozenset, best: Fraction) -> Fraction:
        key = (unopened, best)
        if key not in self.switch_cache:
            self.switch_cache[key] = expected_max_kappa(self.inst, sorted(unopened), best)
        return self.switch_cache[key]

    def start(self) -> _Frontier:
        return _Frontier({Fraction(0): Fraction(1)}, Fraction(0))

    def advance(self, frontier: _Frontier, box: int, threshold: Optional[Fraction],
                unopened_after: frozenset) -> _Frontier:
        dist = self.inst.boxes[box].dist
        cost = self.inst.boxes[box].cost
        settled = frontier.settled - cost * frontier.running
        mass: dict[Fraction, Fraction] = {}
        for b, q in frontier.mass.items():
            for v, p in dist.support:
                nb = max(b, v)
                if threshold is not None and v >= threshold:
                    settled += q * p * self.switch_value(unopened_after, nb)
                else:
                    mass[nb] = mass.get(nb, Fraction(0)) + q * p
        return _Frontier(mass, settled)

    def finish(self, frontier: _Frontier, last: int) -> Fraction:
        return frontier.settled + frontier.running * self.means[last]


def evaluate_structured_policy(inst: PnoiInstance, pol: StructuredPolicy) -> Fraction:
    """
    Exact payoff of a structured policy: open committed boxes in order until a
    value reaches the box's threshold, then run the index policy on every
    unopened box with the best value as a free outside option; if no threshold
    fires, take the last committed box unopened.
    """
    ensure_valid(inst)
    pol.validate_for(inst)
    if not pol.committed:
        return max_kappa_expectation(inst)
    evaluator = _StructuredEvaluator(inst)
    frontier = evaluator.start()
    unopened = frozenset(range(inst.n))
    for box, threshold in zip(pol.committed[:-1], pol.thresholds):
        unopened = unopened - {box}
        frontier = evaluator.advance(frontier, box, threshold, unopened)
    return evaluator.finish(frontier, pol.committed[-1])


def best_structured_policy(inst: PnoiInstance, limit: Optional[int] = None) -> tuple[StructuredPolicy, Fraction]:
    """
    Exhaustive search over ordered committed subsets and thresholds drawn from
    each box's support values plus never.
    :param inst: instance
    :param limit: box limit, defaults to settings.structured_limit
    :return: first maximizer in enumeration order and its payoff
    """
    ensure_valid(inst)
    check_size(inst, limit, settings.structured_limit, "structured policy search")
    evaluator = _StructuredEvaluator(inst)
    best_policy = StructuredPolicy()
    best_value = max_kappa_expectation(inst)
    candidates = [[*inst.boxes[i].dist.values, None] for i in range(inst.n)]
    visited = 0

    def extend(prefix: tuple[int, ...], thresholds: tuple, frontier: _Frontier, unopened: frozenset) -> None:
        nonlocal best_policy, best_value, visited
        for j in sorted(unopened):
            visited += 1
            value = evaluator.finish(frontier, j)
            if value > best_value:
                best_policy = StructuredPolicy(committed=prefix + (j,), thresholds=thresholds)
                best_value = value
            rest = unopened - {j}
            if not rest:
                continue
            for threshold in candidates[j]:
                extend(prefix + (j,), thresholds + (threshold,),
                       evaluator.advance(frontier, j, threshold, rest), rest)

    extend((), (), evaluator.start(), frozenset(range(inst.n)))
    logger.debug(f"best_structured_policy: n={inst.n} policies={visited} value={format_scalar(best_value)}")
    return best_policy, best_value


class TraceStep(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    action: ActionKind = Field(..., description="action taken")
    box: Optional[int] = Field(None, description="box acted on, None for quit")
    value: Optional[Scalar] = Field(None, description="revealed value, None when nothing was revealed")
    running_cost: Scalar = Field(..., description="total inspection cost paid after this step")


class PolicyTrace(BaseModel):
    """One simulated run; payoff = value taken - sum of paid costs."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    steps: list[TraceStep] = Field(default_factory=list, description="actions in order")
    payoff: Scalar = Field(..., description="value taken minus total cost")

    @property
    def opened(self) -> list[tuple[int, Fraction]]:
        return [(s.box, s.value) for s in self.steps if s.action is ActionKind.OPEN]

    @property
    def taken(self) -> Optional[int]:
        for s in reversed(self.steps):
            if s.action in (ActionKind.TAKE, ActionKind.QUIT):
                return s.box
        return None
