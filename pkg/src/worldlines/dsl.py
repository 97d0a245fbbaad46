"""Text format for rules (``.mwr`` files) so rules are data, not code.

The grammar, one block per rule::

    rule redness at_collapse {
      Pr(reader : * -> RED) = 0.25;
      Pr(reader : * -> BLUE) = 0.75;
      otherwise born
    }

Timing is one of ``at_collapse``, ``after_collapse(horizon=N)``,
``during_superposition``, ``before_superposition``. A clause may carry a
steering condition before its weight: ``when state_at(T_B) == CURIOUS`` (only
conjunctions with ``and``). Weights are decimal literals (exponent suffixes
accepted, so every float round-trips) or ``p * born`` for amplitude-scaled
pairs. Trigger targets are qualia tokens or, for rules the
plausibility checker exists to reject, ``label(name=value)``. ``#`` starts a
line comment. parse and print are exact inverses on well-formed rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .core import Phase, Qualia, format_qualia
from .errors import ParseError
from .rules import (
    BornScaledWeight,
    Clause,
    CmpOp,
    ConstantWeight,
    PhaseCondition,
    Rule,
    SubsystemLabel,
    Timing,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d+|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>->|==|!=|[{}():;=*,])
    """,
    re.VERBOSE,
)

_ATOM_QUALIA = {"RED", "BLUE", "PAIN", "NO_PAIN", "DEATH", "DYING", "ALIVE", "CURIOUS", "WIN", "LOSE"}
_TIMING_KEYWORDS = {
    "at_collapse": Timing.AT_COLLAPSE,
    "after_collapse": Timing.AFTER_COLLAPSE,
    "during_superposition": Timing.DURING_SUPERPOSITION,
    "before_superposition": Timing.BEFORE_SUPERPOSITION,
}


@dataclass(frozen=True)
class _Tok:
    kind: str  # "number" | "string" | "ident" | "op" | "eof"
    text: str
    line: int
    col: int


def _lex(src: str) -> List[_Tok]:
    toks = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected: Sequence[str]):
        t = self.cur
        got = t.text if t.kind != "eof" else "end of input"
        raise ParseError(
            f"expected {' or '.join(expected)}, got {got!r}", t.line, t.col, tuple(expected)
        )

    def _eat(self, kind: str, text: Optional[str] = None) -> _Tok:
        t = self.cur
        if t.kind != kind or (text is not None and t.text != text):
            self._fail([text if text is not None else f"<{kind}>"])
        self.i += 1
        return t

    def _peek(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("ident", "op")

    def parse_file(self) -> List[Rule]:
        rules = []
        while self.cur.kind != "eof":
            rules.append(self.parse_rule())
        if not rules:
            self._fail(["rule"])
        return rules

    def parse_rule(self) -> Rule:
        self._eat("ident", "rule")
        name = self._eat("ident").text
        timing_tok = self._eat("ident")
        timing = _TIMING_KEYWORDS.get(timing_tok.text)
        if timing is None:
            self.i -= 1
            self._fail(sorted(_TIMING_KEYWORDS))
        horizon = 0
        if timing is Timing.AFTER_COLLAPSE:
            self._eat("op", "(")
            self._eat("ident", "horizon")
            self._eat("op", "=")
            horizon_tok = self._eat("number")
            if not horizon_tok.text.isdigit():
                self.i -= 1
                self._fail(["an integer horizon"])
            horizon = int(horizon_tok.text)
            self._eat("op", ")")
        self._eat("op", "{")
        clauses = []
        while not self._peek("otherwise"):
            clauses.append(self.parse_clause())
        self._eat("ident", "otherwise")
        self._eat("ident", "born")
        if self._peek(";"):
            self._eat("op", ";")
        self._eat("op", "}")
        return Rule(id=name, timing=timing, clauses=tuple(clauses), horizon=horizon)

    def parse_clause(self) -> Clause:
        self._eat("ident", "Pr")
        self._eat("op", "(")
        obs_tok = self.cur
        if obs_tok.text not in ("reader", "any"):
            self._fail(["reader", "any"])
        self.i += 1
        self._eat("op", ":")
        if self._peek("*"):
            self._eat("op", "*")
            from_token = None
        else:
            from_token = self.parse_qualia()
        self._eat("op", "->")
        if self._peek("label"):
            target = self.parse_label()
        else:
            target = self.parse_qualia()
        self._eat("op", ")")
        condition = None
        if self._peek("when"):
            condition = self.parse_condition()
        self._eat("op", "=")
        weight = self.parse_weight()
        self._eat("op", ";")
        return Clause(
            observer=obs_tok.text,
            from_token=from_token,
            to_target=target,
            weight=weight,
            condition=condition,
        )

    def parse_condition(self) -> PhaseCondition:
        self._eat("ident", "when")
        atoms = [self.parse_condition_atom()]
        while self._peek("and"):
            self._eat("ident", "and")
            atoms.append(self.parse_condition_atom())
        return PhaseCondition(tuple(atoms))

    def parse_condition_atom(self):
        self._eat("ident", "state_at")
        self._eat("op", "(")
        phase_tok = self._eat("ident")
        try:
            phase = Phase[phase_tok.text]
        except KeyError:
            self.i -= 1
            self._fail([p.name for p in Phase])
        self._eat("op", ")")
        if self._peek("=="):
            self._eat("op", "==")
            op = CmpOp.EQ
        elif self._peek("!="):
            self._eat("op", "!=")
            op = CmpOp.NE
        else:
            self._fail(["==", "!="])
        return (phase, op, self.parse_qualia())

    def parse_weight(self):
        value = float(self._eat("number").text)
        if self._peek("*"):
            self._eat("op", "*")
            self._eat("ident", "born")
            return BornScaledWeight(value)
        return ConstantWeight(value)

    def parse_label(self) -> SubsystemLabel:
        self._eat("ident", "label")
        self._eat("op", "(")
        name = self._eat("ident").text
        self._eat("op", "=")
        value = self._eat("ident").text
        self._eat("op", ")")
        return SubsystemLabel(name, value)

    def parse_qualia(self) -> Qualia:
        t = self.cur
        if t.kind != "ident":
            self._fail(["a qualia token"])
        if t.text in _ATOM_QUALIA:
            self.i += 1
            return Qualia(t.text)
        if t.text in ("HEAR", "READ", "CUSTOM"):
            self.i += 1
            self._eat("op", "(")
            s = self._eat("string").text
            self._eat("op", ")")
            raw = s[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            return Qualia(t.text, raw)
        if t.text == "DIGIT":
            self.i += 1
            self._eat("op", "(")
            bit_tok = self._eat("number")
            if bit_tok.text not in ("0", "1"):
                self.i -= 1
                self._fail(["0", "1"])
            self._eat("op", ")")
            return Qualia.digit(int(bit_tok.text))
        self._fail(sorted(_ATOM_QUALIA) + ["HEAR", "READ", "DIGIT", "CUSTOM"])


def parse(src: str) -> Rule:
    """Parse source holding exactly one rule block."""
    rules = parse_many(src)
    if len(rules) != 1:
        raise ParseError(f"expected exactly one rule, found {len(rules)}", 1, 1)
    return rules[0]


def parse_many(src: str) -> List[Rule]:
    """Parse a ``.mwr`` file: one or more rule blocks."""
    return _Parser(src).parse_file()


def _print_weight(w) -> str:
    if isinstance(w, BornScaledWeight):
        return f"{w.p!r} * born"
    return repr(w.value)


def _print_target(t) -> str:
    if isinstance(t, SubsystemLabel):
        return f"label({t.name}={t.value})"
    return format_qualia(t)


def _print_condition(cond: PhaseCondition) -> str:
    return " and ".join(
        f"state_at({phase.name}) {op.value} {format_qualia(tok)}" for phase, op, tok in cond.atoms
    )


def print_rule(rule: Rule) -> str:
    """Canonical text for a rule; ``parse(print_rule(r))`` equals ``r``."""
    head = f"rule {rule.id} {rule.timing.value}"
    if rule.timing is Timing.AFTER_COLLAPSE:
        head += f"(horizon={rule.horizon})"
    lines = [head + " {"]
    for c in rule.clauses:
        frm = "*" if c.from_token is None else format_qualia(c.from_token)
        line = f"  Pr({c.observer} : {frm} -> {_print_target(c.to_target)})"
        if c.condition is not None:
            line += f" when {_print_condition(c.condition)}"
        line += f" = {_print_weight(c.weight)};"
        lines.append(line)
    lines.append("  otherwise born")
    lines.append("}")
    return "\n".join(lines)


def print_rules(rules: Sequence[Rule]) -> str:
    return "\n\n".join(print_rule(r) for r in rules) + "\n"
