"""Observer-dependent collapse rules and their evaluation at branching events.

A rule replaces the Born weights of a branching event, but only when the
evaluating frame is the reader and the reader's experience of the event
matches every branch through one of the rule's clauses ("otherwise, Born").
Four timing classes control *when* a clause's trigger is read off:

* at-collapse: against the token bundle the reader experiences on each branch;
* after-collapse: against the reader's possible states a fixed number of
  steps past the event (lookahead supplied by the tree walker);
* before-superposition / during-superposition: gated by a recorded observer
  state at the T_B/T_BS/T_DS phase (steering rules).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .core import NORMALIZATION_TOL, Designation, ObserverId, Phase, Qualia, format_qualia
from .errors import DegenerateComposition, InsufficientHorizon, MalformedRule


class Timing(enum.Enum):
    AT_COLLAPSE = "at_collapse"
    AFTER_COLLAPSE = "after_collapse"
    DURING_SUPERPOSITION = "during_superposition"
    BEFORE_SUPERPOSITION = "before_superposition"


@dataclass(frozen=True)
class ConstantWeight:
    """A branch probability that ignores the underlying amplitudes."""

    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise MalformedRule(f"constant weight {self.value} outside [0, 1]")


@dataclass(frozen=True)
class BornScaledWeight:
    """f = p * |c_target|^2 for the clause's branch; its partner clause takes
    the probability-conserving complement g = 1 - f. Only meaningful on
    two-branch events."""

    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise MalformedRule(f"born scale factor {self.p} outside [0, 1]")


WeightSpec = Union[ConstantWeight, BornScaledWeight]


@dataclass(frozen=True)
class SubsystemLabel:
    """A physical-state trigger target (a subsystem label, not an experience).

    Rules built on these are exactly the kind the experience checker marks
    Forbidden; they are representable so that the checker has something to
    reject.
    """

    name: str
    value: str

    def __str__(self) -> str:
        return f"label({self.name}={self.value})"


TriggerTarget = Union[Qualia, SubsystemLabel]


class CmpOp(enum.Enum):
    EQ = "=="
    NE = "!="


@dataclass(frozen=True)
class PhaseCondition:
    """Conjunction of tests on the observer's recorded state at given phases.

    A test on a phase with no recorded state evaluates false either way: the
    scenario did not assert anything there, so the steering clause cannot
    claim it did.
    """

    atoms: tuple = ()  # tuple[(Phase, CmpOp, Qualia), ...]

    def holds(self, phase_states: Mapping[Phase, Qualia]) -> bool:
        for phase, op, token in self.atoms:
            recorded = phase_states.get(phase)
            if recorded is None:
                return False
            if op is CmpOp.EQ and recorded != token:
                return False
            if op is CmpOp.NE and recorded == token:
                return False
        return True


@dataclass(frozen=True)
class Clause:
    """One Pr(observer : from -> to) = weight line of a rule."""

    observer: str  # "reader" | "any"
    from_token: Optional[Qualia]  # None means wildcard *
    to_target: TriggerTarget
    weight: WeightSpec
    condition: Optional[PhaseCondition] = None

    def __post_init__(self):
        if self.observer not in ("reader", "any"):
            raise MalformedRule(f"unknown observer predicate {self.observer!r}")


@dataclass(frozen=True)
class Rule:
    """An ordered clause list with a timing class; fallback is always Born.

    Clause order is significant: the first matching clause wins, which is how
    wildcard/specific ties and mixed lookahead subtrees resolve.
    """

    id: str
    timing: Timing
    clauses: tuple = ()
    horizon: int = 0  # steps, AFTER_COLLAPSE only

    def __post_init__(self):
        if self.timing is Timing.AFTER_COLLAPSE and self.horizon < 1:
            raise MalformedRule(f"rule {self.id!r}: after-collapse horizon must be >= 1")
        if self.timing is not Timing.AFTER_COLLAPSE and self.horizon:
            raise MalformedRule(f"rule {self.id!r}: horizon only applies after collapse")
        validate_clause_weights(self.id, self.clauses)

    def trigger_qualia(self) -> frozenset:
        """Concrete experience tokens this rule triggers on (labels excluded)."""
        out = set()
        for c in self.clauses:
            if isinstance(c.to_target, Qualia):
                out.add(c.to_target)
            if c.from_token is not None:
                out.add(c.from_token)
        return frozenset(out)


def validate_clause_weights(rule_id: str, clauses: Sequence[Clause]) -> None:
    """Load-time probability conservation: within each condition group the
    constant weights must sum to 1, and born-scaled clauses must come as a
    pair sharing one scale factor (the second is the complement)."""
    groups: dict = {}
    for c in clauses:
        groups.setdefault(c.condition, []).append(c)
    for cond, group in groups.items():
        scaled = [c for c in group if isinstance(c.weight, BornScaledWeight)]
        consts = [c for c in group if isinstance(c.weight, ConstantWeight)]
        if scaled and consts:
            raise MalformedRule(
                f"rule {rule_id!r}: cannot mix constant and born-scaled weights in one group"
            )
        if scaled:
            if len(scaled) != 2:
                raise MalformedRule(
                    f"rule {rule_id!r}: born-scaled weights come in complement pairs"
                )
            if scaled[0].weight.p != scaled[1].weight.p:
                raise MalformedRule(f"rule {rule_id!r}: born-scaled pair must share one factor")
        elif consts:
            total = math.fsum(c.weight.value for c in consts)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise MalformedRule(
                    f"rule {rule_id!r}: clause weights sum to {total}, not 1"
                )


# --------------------------------------------------------------------------
# Branching events


@dataclass(frozen=True)
class BranchingEvent:
    """Everything the engine needs to know about one branching, in one frame.

    ``collapse_bundles[i]`` is the tuple of tokens the frame observer
    experiences on child i at its collapse (empty when the branch delivers
    nothing before branching again). ``horizon_states(i, h)`` returns the set
    of observer states reachable on child i at ``step + h`` and may raise
    InsufficientHorizon.
    """

    step: int
    born: tuple
    collapse_bundles: tuple = ()
    child_labels: tuple = ()
    from_token: Optional[Qualia] = None
    phase_states: Mapping[Phase, Qualia] = field(default_factory=dict)
    horizon_states: Optional[Callable[[int, int], frozenset]] = None

    def __post_init__(self):
        n = len(self.born)
        if n == 0:
            raise ValueError("event with no children")
        if self.collapse_bundles and len(self.collapse_bundles) != n:
            raise ValueError("collapse_bundles/born length mismatch")
        if self.child_labels and len(self.child_labels) != n:
            raise ValueError("child_labels/born length mismatch")
        total = math.fsum(self.born)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"child Born probabilities sum to {total}, not 1")

    def bundle(self, i: int) -> tuple:
        return self.collapse_bundles[i] if self.collapse_bundles else ()

    def labels(self, i: int) -> Mapping[str, str]:
        return self.child_labels[i] if self.child_labels else {}


def _clause_matches_child(rule: Rule, clause: Clause, event: BranchingEvent, i: int) -> bool:
    if clause.from_token is not None and clause.from_token != event.from_token:
        return False
    target = clause.to_target
    if isinstance(target, SubsystemLabel):
        return event.labels(i).get(target.name) == target.value
    if rule.timing is Timing.AFTER_COLLAPSE:
        if event.horizon_states is None:
            raise InsufficientHorizon(
                f"rule {rule.id!r} needs lookahead but the event supplies none"
            )
        return target in event.horizon_states(i, rule.horizon)
    return target in event.bundle(i)


def _match_rule(rule: Rule, event: BranchingEvent, frame: ObserverId) -> Optional[tuple]:
    """Weights assigned by ``rule`` to the event's children, or None if it
    does not fire.

    A rule fires only when the frame is the reader (rules describe the
    reader's traversal; any other frame sees plain Born statistics), its
    active clauses cover every child, and the assigned weights form a
    probability vector. An all-zero assignment means the rule cannot resolve
    the event and falls back to Born.
    """
    if frame.designation is not Designation.READER:
        return None
    active = [c for c in rule.clauses if c.condition is None or c.condition.holds(event.phase_states)]
    if not active:
        return None

    n = len(event.born)
    matched: list = []
    for i in range(n):
        hit = None
        for c in active:
            if _clause_matches_child(rule, c, event, i):
                hit = c
                break
        if hit is None:
            return None
        matched.append(hit)

    weights = [0.0] * n
    scaled = [i for i, c in enumerate(matched) if isinstance(c.weight, BornScaledWeight)]
    if scaled:
        if n != 2 or len(scaled) != 2:
            return None  # born-scaled pairs are defined for two-branch events
        # the child matched by the earlier clause in rule order is the f-target
        order = {id(c): k for k, c in enumerate(active)}
        target = 0 if order[id(matched[0])] <= order[id(matched[1])] else 1
        f = matched[target].weight.p * event.born[target]
        weights[target] = f
        weights[1 - target] = 1.0 - f
    else:
        for i, c in enumerate(matched):
            weights[i] = c.weight.value

    total = math.fsum(weights)
    if total == 0.0:
        return None  # rule forbids every branch: unresolvable, Born applies
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise MalformedRule(
            f"rule {rule.id!r} fired with weights summing to {total} on this event"
        )
    return tuple(weights)


@dataclass(frozen=True)
class EventResolution:
    probabilities: tuple
    fired: tuple  # rule ids that fired, in input order


def resolve_event(
    rules: Iterable[Rule], event: BranchingEvent, frame: ObserverId
) -> EventResolution:
    """Probability vector over the event's children in the given frame,
    together with the ids of the rules that fired."""
    firing = []
    for rule in rules:
        w = _match_rule(rule, event, frame)
        if w is not None:
            firing.append((rule, w))
    if not firing:
        return EventResolution(tuple(event.born), ())
    if len(firing) == 1:
        return EventResolution(firing[0][1], (firing[0][0].id,))
    composite = _compose_weights(event.born, [w for _, w in firing])
    return EventResolution(composite, tuple(r.id for r, _ in firing))


def evaluate_event(rules: Sequence[Rule], event: BranchingEvent, frame: ObserverId) -> tuple:
    """Probability vector over child branches (sums to 1 within 1e-9)."""
    return resolve_event(rules, event, frame).probabilities


def _compose_weights(born: Sequence[float], weight_vectors: Sequence[Sequence[float]]) -> tuple:
    """Multiplicative reweighting of the Born base: each firing rule
    contributes its weight-to-Born ratio, then the vector is renormalized.
    Reduces to the single rule's weights when only one fires."""
    n = len(born)
    out = []
    for i in range(n):
        if born[i] == 0.0:
            out.append(0.0)
            continue
        v = born[i]
        for w in weight_vectors:
            v *= w[i] / born[i]
        out.append(v)
    total = math.fsum(out)
    if total <= 0.0:
        raise DegenerateComposition("composed rules cancel every branch")
    return tuple(v / total for v in out)


def compose(rules: Sequence[Rule], event: BranchingEvent, frame: ObserverId) -> tuple:
    """Composite probability vector when several rules fire on one event."""
    return resolve_event(rules, event, frame).probabilities


# --------------------------------------------------------------------------
# Plausibility checkers


class Verdict(enum.Enum):
    FORBIDDEN = "Forbidden"
    IMPLAUSIBLE = "Implausible"
    PLAUSIBLE = "Plausible"


@dataclass(frozen=True)
class PlausibilityReport:
    verdict: Verdict
    reasons: tuple = ()  # tuple[(heuristic-name, explanation), ...]
    overlap_score: float = 0.0


def check_observer_experience(rule: Rule) -> PlausibilityReport:
    """Rules must depend on the reader's experience, not on physical states.

    Any clause whose trigger is a subsystem label could in principle be
    measured by an external observer, so the rule is Forbidden.
    """
    offending = [c for c in rule.clauses if isinstance(c.to_target, SubsystemLabel)]
    if offending:
        reasons = tuple(
            (
                "observer-experience",
                f"trigger on physical state {c.to_target} is observable by externals",
            )
            for c in offending
        )
        return PlausibilityReport(Verdict.FORBIDDEN, reasons, 0.0)
    return PlausibilityReport(
        Verdict.PLAUSIBLE, (("observer-experience", "all triggers are reader experiences"),), 0.0
    )


def check_consensus_consistency(rule: Rule, standard_channels: Sequence) -> PlausibilityReport:
    """The more ordinary communication overlaps the rule's triggers, the more
    likely someone calibrating or reporting results would invoke the rule by
    accident, and the less plausible the rule is."""
    triggers = rule.trigger_qualia()
    if not triggers:
        return PlausibilityReport(
            Verdict.PLAUSIBLE, (("consensus-consistency", "rule has no trigger tokens"),), 0.0
        )
    delivered: set = set()
    for ch in standard_channels:
        delivered |= ch.tokens()
    overlapping = triggers & delivered
    score = len(overlapping) / len(triggers)
    if score >= 0.5:
        reasons = (
            (
                "consensus-consistency",
                "standard channels deliver "
                + ", ".join(sorted(format_qualia(t) for t in overlapping))
                + "; reporting results would invoke the rule",
            ),
        )
        return PlausibilityReport(Verdict.IMPLAUSIBLE, reasons, score)
    if score > 0.0:
        reasons = (
            (
                "consensus-consistency",
                f"partial overlap ({score:.2f}) with standard channels",
            ),
        )
        return PlausibilityReport(Verdict.PLAUSIBLE, reasons, score)
    return PlausibilityReport(
        Verdict.PLAUSIBLE,
        (("consensus-consistency", "no overlap with standard channels"),),
        0.0,
    )


def check_experience_induction(rule: Rule, history: Sequence[Qualia]) -> PlausibilityReport:
    """A rule that assigns probability zero to a token the reader has already
    experienced is contradicted by that very history."""
    forbidden_tokens = {
        c.to_target
        for c in rule.clauses
        if isinstance(c.weight, ConstantWeight)
        and c.weight.value == 0.0
        and isinstance(c.to_target, Qualia)
    }
    contradictions = sum(1 for t in history if t in forbidden_tokens)
    if contradictions:
        reasons = (
            (
                "experience-induction",
                f"{contradictions} past experience(s) carry tokens the rule forbids",
            ),
        )
        return PlausibilityReport(Verdict.IMPLAUSIBLE, reasons, 0.0)
    return PlausibilityReport(
        Verdict.PLAUSIBLE,
        (("experience-induction", "no past experience contradicts the rule"),),
        0.0,
    )
