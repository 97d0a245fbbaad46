"""The canonical rule library: every named rule shape, as factories.

Matching ``.mwr`` sources ship next to this module; ``load_named(name)``
parses the file so the DSL path is exercised, while the factories build the
same rules programmatically (handy when a weight or horizon is a parameter).
"""

from __future__ import annotations

import importlib.resources as _resources
from typing import Optional

from ..core import ALIVE, BLUE, CURIOUS, DEATH, LOSE, NO_PAIN, PAIN, RED, WIN, Phase, Qualia
from ..dsl import parse_many
from ..rules import (
    BornScaledWeight,
    Clause,
    CmpOp,
    ConstantWeight,
    PhaseCondition,
    Rule,
    SubsystemLabel,
    Timing,
)


def _pair(rule_id: str, timing: Timing, a: Qualia, wa: float, b: Qualia, wb: float,
          from_token: Optional[Qualia] = None, horizon: int = 0) -> Rule:
    return Rule(
        id=rule_id,
        timing=timing,
        horizon=horizon,
        clauses=(
            Clause("reader", from_token, a, ConstantWeight(wa)),
            Clause("reader", from_token, b, ConstantWeight(wb)),
        ),
    )


def redness_rule(f: float, rule_id: str = "redness") -> Rule:
    """See red with probability f, blue with 1-f; otherwise Born."""
    return _pair(rule_id, Timing.AT_COLLAPSE, RED, f, BLUE, 1.0 - f)


def scaled_redness_rule(p: float, rule_id: str = "redness_scaled") -> Rule:
    """Amplitude-scaled variant: f = p * |c_red|^2, g = 1 - f."""
    return Rule(
        id=rule_id,
        timing=Timing.AT_COLLAPSE,
        clauses=(
            Clause("reader", None, RED, BornScaledWeight(p)),
            Clause("reader", None, BLUE, BornScaledWeight(p)),
        ),
    )


def pain_rule(f: float, rule_id: str = "pain") -> Rule:
    """Transition into pain with probability f instead of the Born weight."""
    return _pair(rule_id, Timing.AT_COLLAPSE, PAIN, f, NO_PAIN, 1.0 - f, from_token=NO_PAIN)


def death_rule(f: float, rule_id: str = "general_death") -> Rule:
    """Experience the death transition with probability f (0 = immortality)."""
    return _pair(rule_id, Timing.AT_COLLAPSE, DEATH, f, ALIVE, 1.0 - f, from_token=ALIVE)


def no_death_rule() -> Rule:
    return death_rule(0.0, rule_id="no_death")


def after_collapse_no_death_rule(horizon: int = 2, rule_id: str = "no_death_after") -> Rule:
    """Bias by the state the branch reaches ``horizon`` steps past the event:
    branches whose future holds death get weight zero."""
    return _pair(
        rule_id, Timing.AFTER_COLLAPSE, DEATH, 0.0, ALIVE, 1.0, from_token=ALIVE, horizon=horizon
    )


def win_seeking_rule(horizon: int, rule_id: str = "win_seeking") -> Rule:
    """After-collapse rule steering toward branches whose future contains a
    win. The WIN clause comes first so mixed subtrees resolve toward it."""
    return Rule(
        id=rule_id,
        timing=Timing.AFTER_COLLAPSE,
        horizon=horizon,
        clauses=(
            Clause("reader", None, WIN, ConstantWeight(1.0)),
            Clause("reader", None, LOSE, ConstantWeight(0.0)),
        ),
    )


def curiosity_steering_rule(rule_id: str = "curiosity") -> Rule:
    """Curiosity before the superposition flips the death bias."""
    curious = PhaseCondition(((Phase.T_B, CmpOp.EQ, CURIOUS),))
    return Rule(
        id=rule_id,
        timing=Timing.BEFORE_SUPERPOSITION,
        clauses=(
            Clause("reader", ALIVE, DEATH, ConstantWeight(1.0), curious),
            Clause("reader", ALIVE, ALIVE, ConstantWeight(0.0), curious),
        ),
    )


def pain_steering_rule(rule_id: str = "pain_steering") -> Rule:
    """Pain delivered before the superposition steers collapse to blue,
    its absence to red."""
    in_pain = PhaseCondition(((Phase.T_BS, CmpOp.EQ, PAIN),))
    no_pain = PhaseCondition(((Phase.T_BS, CmpOp.NE, PAIN),))
    return Rule(
        id=rule_id,
        timing=Timing.BEFORE_SUPERPOSITION,
        clauses=(
            Clause("reader", None, BLUE, ConstantWeight(1.0), in_pain),
            Clause("reader", None, RED, ConstantWeight(0.0), in_pain),
            Clause("reader", None, BLUE, ConstantWeight(0.0), no_pain),
            Clause("reader", None, RED, ConstantWeight(1.0), no_pain),
        ),
    )


def only_during_superposition_rule(rule_id: str = "only_during_superposition") -> Rule:
    """Born-rule violation only when pain holds during the superposition and
    did not before it; in every other situation the weights are even."""
    cond = PhaseCondition(
        ((Phase.T_DS, CmpOp.EQ, PAIN), (Phase.T_B, CmpOp.EQ, NO_PAIN))
    )
    return Rule(
        id=rule_id,
        timing=Timing.DURING_SUPERPOSITION,
        clauses=(
            Clause("reader", None, BLUE, ConstantWeight(1.0), cond),
            Clause("reader", None, RED, ConstantWeight(0.0), cond),
            Clause("reader", None, BLUE, ConstantWeight(0.5)),
            Clause("reader", None, RED, ConstantWeight(0.5)),
        ),
    )


def hear_trigger_rule(f: float = 0.0, rule_id: str = "hear_red") -> Rule:
    """A rule triggered by hearing result phrases; the consensus checker
    flags it because ordinary speech would invoke it."""
    return _pair(
        rule_id,
        Timing.AT_COLLAPSE,
        Qualia.hear("I saw RED"),
        f,
        Qualia.hear("I saw BLUE"),
        1.0 - f,
    )


def physical_cat_rule(rule_id: str = "no_dead_cats_in_pov") -> Rule:
    """Triggers on the cat subsystem's label instead of any experience;
    the observer-experience checker must mark it Forbidden."""
    return Rule(
        id=rule_id,
        timing=Timing.AT_COLLAPSE,
        clauses=(
            Clause("reader", None, SubsystemLabel("cat", "DEAD"), ConstantWeight(0.0)),
            Clause("reader", None, SubsystemLabel("cat", "ALIVE"), ConstantWeight(1.0)),
        ),
    )


def digit_rule(k: float, rule_id: str = "digit_shift") -> Rule:
    """Shift perception of the 1 digit up by k on an even split (the
    equal-superposition instance of the |c|^2 +/- k family)."""
    return _pair(
        rule_id, Timing.AT_COLLAPSE, Qualia.digit(0), 0.5 - k, Qualia.digit(1), 0.5 + k
    )


def load_named(name: str) -> list:
    """Parse one of the shipped ``.mwr`` files (e.g. ``"paper_rules"``)."""
    text = _resources.files(__package__).joinpath(f"{name}.mwr").read_text("utf-8")
    return parse_many(text)
