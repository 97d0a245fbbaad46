"""Branching worldline trees: scenario construction, perspective-dependent
resolution, exact enumeration and seeded Monte Carlo.

A tree node branches when a quantum event splits the worldline. What the
evaluating observer experiences decides which rules can fire there: the
reader's rules never fire in an external frame (an isolated measurement does
not collapse the reader's superposition), so external frames see plain Born
statistics — the Wigner's-friend semantics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from .core import (
    ALIVE,
    BLUE,
    DEATH,
    DYING,
    LOSE,
    NO_PAIN,
    NORMALIZATION_TOL,
    PAIN,
    RED,
    READER,
    WIN,
    Amplitude,
    Channel,
    Designation,
    ObserverId,
    Phase,
    PhaseTag,
    Qualia,
    born_probability,
    format_qualia,
    light_channel,
    speech_channel,
)
from .errors import InsufficientHorizon, UnknownScenario
from .rules import BranchingEvent, Rule, resolve_event

EXTERNAL = ObserverId("external", Designation.EXTERNAL)

MAX_DEPTH = 16
MAX_LEAVES = 1 << 16

_EQUAL = 2 ** -0.5


@dataclass
class BranchNode:
    """One worldline node.

    ``reader_qualia`` holds the token bundle delivered to the reader at this
    node (several tokens mean simultaneous stimuli, e.g. a color with a digit
    under it). ``observer_state`` declares the reader's condition at the node
    for steering conditions and after-collapse lookahead; it may be set where
    no experience is delivered (a dead cat has a state but no experience).
    """

    id: str
    labels: Dict[str, str] = field(default_factory=dict)
    amplitude: Amplitude = 1.0 + 0j
    phase: PhaseTag = PhaseTag(0, Phase.T_B)
    reader_qualia: Tuple[Qualia, ...] = ()
    observer_state: Optional[Qualia] = None
    children: List["BranchNode"] = field(default_factory=list)
    truncated: bool = False

    def is_leaf(self) -> bool:
        return not self.children


def validate_tree(root: BranchNode) -> None:
    """Unitarity and bookkeeping invariants for a built tree."""
    n_leaves = 0
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        if depth > MAX_DEPTH:
            raise ValueError(f"tree deeper than {MAX_DEPTH}")
        if node.children:
            own = born_probability(node.amplitude)
            total = math.fsum(born_probability(c.amplitude) for c in node.children)
            if abs(total - own) > NORMALIZATION_TOL:
                raise ValueError(
                    f"node {node.id}: child weight {total} != own weight {own} (unitarity)"
                )
            for c in node.children:
                if c.phase.step <= node.phase.step:
                    raise ValueError(f"node {c.id}: step must increase along paths")
                stack.append((c, depth + 1))
        else:
            n_leaves += 1
    if n_leaves > MAX_LEAVES:
        raise ValueError(f"tree has more than {MAX_LEAVES} leaves")


@dataclass
class Scenario:
    """A named, eagerly built tree plus its observer cast."""

    name: str
    root: BranchNode
    reader: ObserverId = READER
    channel: Optional[Channel] = None
    params: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Terminal reader-experience sequences and their probabilities.

    Zero-probability outcomes are dropped; what remains sums to 1.
    """

    probs: Mapping[Tuple[Qualia, ...], float]

    def __post_init__(self):
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"outcome probabilities sum to {total}")

    def __getitem__(self, key) -> float:
        return self.probs[_as_sequence(key)]

    def get(self, key, default: float = 0.0) -> float:
        return self.probs.get(_as_sequence(key), default)

    def by_string(self) -> Dict[str, float]:
        return {sequence_key(seq): p for seq, p in self.probs.items()}

    def to_json(self) -> str:
        """Canonical form: sorted keys, 12 significant digits."""
        body = {k: float(f"{v:.12g}") for k, v in self.by_string().items()}
        return json.dumps(body, sort_keys=True)


def _as_sequence(key) -> Tuple[Qualia, ...]:
    if isinstance(key, Qualia):
        return (key,)
    return tuple(key)


def sequence_key(seq: Sequence[Qualia]) -> str:
    return ",".join(format_qualia(q) for q in seq)


# --------------------------------------------------------------------------
# Frame-dependent evaluation


def _spine_bundle(child: BranchNode) -> Tuple[Qualia, ...]:
    """Tokens the reader experiences on this branch at its collapse: the
    first non-empty bundle reached before the branch splits again."""
    node = child
    while True:
        if node.reader_qualia:
            return tuple(node.reader_qualia)
        if len(node.children) != 1:
            return ()
        node = node.children[0]


def _spine_labels(child: BranchNode) -> Dict[str, str]:
    """Subsystem facts accumulated on this branch before it splits again."""
    merged: Dict[str, str] = {}
    node = child
    while True:
        merged.update(node.labels)
        if len(node.children) != 1:
            return merged
        node = node.children[0]


def _state_at(node: BranchNode, inherited: Optional[Qualia]) -> Optional[Qualia]:
    if node.observer_state is not None:
        return node.observer_state
    if node.reader_qualia:
        return node.reader_qualia[-1]
    return inherited


def _horizon_states(child: BranchNode, target_step: int, inherited: Optional[Qualia]) -> frozenset:
    """Observer states reachable in ``child``'s subtree at ``target_step``.

    A leaf reached earlier is an absorbing end: its state persists. Walking
    past a truncated frontier is an InsufficientHorizon error because the
    states there are unknown.
    """
    found = set()
    stack = [(child, inherited)]
    while stack:
        node, inh = stack.pop()
        state = _state_at(node, inh)
        if node.phase.step >= target_step:
            if state is not None:
                found.add(state)
            continue
        if node.is_leaf():
            if node.truncated:
                raise InsufficientHorizon(
                    f"lookahead to step {target_step} passes the truncated node {node.id}"
                )
            if state is not None:
                found.add(state)
            continue
        for c in node.children:
            stack.append((c, state))
    return frozenset(found)


@dataclass
class _FlatTree:
    """Kernel-ready arrays plus the per-leaf outcome sequences."""

    child_offset: np.ndarray
    child_index: np.ndarray
    cum_probs: np.ndarray
    leaf_slot: np.ndarray
    leaf_sequences: List[Tuple[Qualia, ...]]
    leaf_probs: List[float]
    leaf_labels: List[Dict[str, str]]
    fired: Dict[str, Tuple[str, ...]]  # branching node id -> rule ids


def _evaluate(scenario: Scenario, rules: Sequence[Rule], frame: ObserverId) -> _FlatTree:
    """Resolve every branching of the tree in ``frame`` and flatten it."""
    rules = tuple(rules)
    nodes: List[BranchNode] = []
    kids: List[List[int]] = []
    probs: List[List[float]] = []
    meta: List[Tuple[Tuple[Qualia, ...], float, Dict[str, str]]] = []
    fired: Dict[str, Tuple[str, ...]] = {}

    def visit(
        node: BranchNode,
        seq: Tuple[Qualia, ...],
        pathprob: float,
        current: Optional[Qualia],
        phase_states: Dict[Phase, Qualia],
        labels: Dict[str, str],
    ) -> int:
        idx = len(nodes)
        nodes.append(node)
        kids.append([])
        probs.append([])
        if node.labels:
            labels = {**labels, **node.labels}
        if node.observer_state is not None:
            phase_states = dict(phase_states)
            phase_states[node.phase.phase] = node.observer_state
            current = node.observer_state
        if node.reader_qualia:
            seq = seq + tuple(node.reader_qualia)
            current = node.reader_qualia[-1]
        meta.append((seq, pathprob, labels))
        if not node.children:
            return idx
        if len(node.children) == 1:
            branch_probs = (1.0,)
        else:
            own = math.fsum(born_probability(c.amplitude) for c in node.children)
            born = tuple(born_probability(c.amplitude) / own for c in node.children)
            event = BranchingEvent(
                step=node.phase.step,
                born=born,
                collapse_bundles=tuple(_spine_bundle(c) for c in node.children),
                child_labels=tuple(_spine_labels(c) for c in node.children),
                from_token=current,
                phase_states=phase_states,
                horizon_states=lambda i, h, _n=node, _cur=current: _horizon_states(
                    _n.children[i], _n.phase.step + h, _cur
                ),
            )
            resolution = resolve_event(rules, event, frame)
            branch_probs = resolution.probabilities
            if resolution.fired:
                fired[node.id] = resolution.fired
        for child, p in zip(node.children, branch_probs):
            j = visit(child, seq, pathprob * p, current, phase_states, labels)
            kids[idx].append(j)
            probs[idx].append(p)
        return idx

    visit(scenario.root, (), 1.0, None, {}, {})

    m = len(nodes)
    child_offset = np.zeros(m + 1, dtype=np.int64)
    child_index: List[int] = []
    cum: List[float] = []
    leaf_slot = np.full(m, -1, dtype=np.int64)
    leaf_sequences: List[Tuple[Qualia, ...]] = []
    leaf_probs: List[float] = []
    leaf_labels: List[Dict[str, str]] = []
    for i in range(m):
        child_offset[i + 1] = child_offset[i] + len(kids[i])
        if kids[i]:
            child_index.extend(kids[i])
            acc = 0.0
            block = []
            for p in probs[i]:
                acc += p
                block.append(acc)
            block[-1] = 1.0  # guard against float drift in the last slot
            cum.extend(block)
        else:
            leaf_slot[i] = len(leaf_sequences)
            leaf_sequences.append(meta[i][0])
            leaf_probs.append(meta[i][1])
            leaf_labels.append(meta[i][2])

    return _FlatTree(
        child_offset=child_offset,
        child_index=np.asarray(child_index, dtype=np.int64),
        cum_probs=np.asarray(cum, dtype=np.float64),
        leaf_slot=leaf_slot,
        leaf_sequences=leaf_sequences,
        leaf_probs=leaf_probs,
        leaf_labels=leaf_labels,
        fired=fired,
    )


def enumerate_exact(
    scenario: Scenario, rules: Sequence[Rule] = (), frame: ObserverId = READER
) -> OutcomeDistribution:
    """Walk the whole tree applying the rules in the given frame; exact."""
    flat = _evaluate(scenario, rules, frame)
    agg: Dict[Tuple[Qualia, ...], float] = {}
    for seq, p in zip(flat.leaf_sequences, flat.leaf_probs):
        if p != 0.0:
            agg[seq] = agg.get(seq, 0.0) + p
    return OutcomeDistribution(agg)


class TrialSampler:
    """Reusable sampler: the tree is resolved once, then trials are drawn
    through the compiled kernel (or its pure-Python twin) with per-trial
    counter-derived seeds, so tallies are independent of execution order."""

    def __init__(self, scenario: Scenario, rules: Sequence[Rule] = (), frame: ObserverId = READER):
        self._flat = _evaluate(scenario, rules, frame)

    @property
    def outcomes(self) -> List[Tuple[Qualia, ...]]:
        return list(self._flat.leaf_sequences)

    def sample(self, seed: int) -> Tuple[Qualia, ...]:
        """One trajectory; equals trial 0 of :meth:`tally` at the same seed."""
        flat = self._flat
        leaf = _kernel.walk_one(flat.child_offset, flat.child_index, flat.cum_probs, seed)
        return flat.leaf_sequences[flat.leaf_slot[leaf]]

    def sample_detail(self, seed: int) -> Tuple[Tuple[Qualia, ...], Dict[str, str]]:
        """Trajectory plus the subsystem labels accumulated along its path."""
        flat = self._flat
        leaf = _kernel.walk_one(flat.child_offset, flat.child_index, flat.cum_probs, seed)
        slot = flat.leaf_slot[leaf]
        return flat.leaf_sequences[slot], dict(flat.leaf_labels[slot])

    def tally(self, n: int, seed: int) -> Dict[Tuple[Qualia, ...], int]:
        if n < 1:
            raise ValueError("trial count must be >= 1")
        flat = self._flat
        counts = np.zeros(len(flat.leaf_sequences), dtype=np.int64)
        _kernel.run_trials(
            flat.child_offset,
            flat.child_index,
            flat.cum_probs,
            flat.leaf_slot,
            counts,
            n,
            seed,
        )
        agg: Dict[Tuple[Qualia, ...], int] = {}
        for seq, c in zip(flat.leaf_sequences, counts):
            if c:
                agg[seq] = agg.get(seq, 0) + int(c)
        return agg


def sample_trajectory(
    scenario: Scenario, rules: Sequence[Rule], frame: ObserverId, seed: int
) -> Tuple[Qualia, ...]:
    """One root-to-leaf trajectory, deterministic in the 64-bit seed."""
    return TrialSampler(scenario, rules, frame).sample(seed)


def run_trials(
    scenario: Scenario, rules: Sequence[Rule], frame: ObserverId, n: int, seed: int
) -> Dict[Tuple[Qualia, ...], int]:
    """Tally of ``n`` independent trajectories (trial i uses seed XOR i).

    Seeds of *separate* runs should be well separated or passed through
    ``_kernel.mix64`` first: adjacent raw seeds enumerate overlapping
    trial-seed sets.
    """
    return TrialSampler(scenario, rules, frame).tally(n, seed)


# --------------------------------------------------------------------------
# Scenario catalogue

WIGNER_SPEECH = speech_channel({"RED": "I saw RED", "BLUE": "I saw BLUE"})
WIGNER_RED_LIGHT = Channel("red_light", {"RED": RED, "BLUE": BLUE})


def _amp_pair(amplitudes) -> Tuple[complex, complex]:
    if amplitudes is None:
        return complex(_EQUAL), complex(_EQUAL)
    a, b = amplitudes
    return complex(a), complex(b)


def build_scenario(name: str, **params) -> Scenario:
    """Construct one of the built-in scenarios (deterministic trees)."""
    builders = {
        "redness": _build_redness,
        "pain": _build_pain,
        "wigner_friend": _build_wigner_friend,
        "schrodinger_cat": _build_schrodinger_cat,
        "lottery": _build_lottery,
        "pain_steering": _build_pain_steering,
    }
    try:
        builder = builders[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; expected one of {sorted(builders)}"
        ) from None
    scenario = builder(**params)
    validate_tree(scenario.root)
    return scenario


def _build_redness(amplitudes=None, channel: Optional[Channel] = None, with_digits: bool = False) -> Scenario:
    c_l, c_r = _amp_pair(amplitudes)
    channel = channel or light_channel()
    left_bundle: Tuple[Qualia, ...] = (channel.deliver("L"),)
    right_bundle: Tuple[Qualia, ...] = (channel.deliver("R"),)
    if with_digits:
        left_bundle += (Qualia.digit(1),)
        right_bundle += (Qualia.digit(0),)
    root = BranchNode(
        id="prepare",
        phase=PhaseTag(0, Phase.T_BS),
        children=[
            BranchNode(
                id="left",
                labels={"arm": "L", "detector": "RED_FLASH"},
                amplitude=c_l,
                phase=PhaseTag(1, Phase.T_AT),
                reader_qualia=left_bundle,
            ),
            BranchNode(
                id="right",
                labels={"arm": "R", "detector": "BLUE_FLASH"},
                amplitude=c_r,
                phase=PhaseTag(1, Phase.T_AT),
                reader_qualia=right_bundle,
            ),
        ],
    )
    return Scenario(
        "redness", root, channel=channel, params={"with_digits": with_digits}
    )


def _build_pain(amplitudes=None) -> Scenario:
    c_l, c_r = _amp_pair(amplitudes)
    root = BranchNode(
        id="prepare",
        phase=PhaseTag(0, Phase.T_BS),
        observer_state=NO_PAIN,
        children=[
            BranchNode(
                id="shock",
                labels={"arm": "L", "device": "SHOCK"},
                amplitude=c_l,
                phase=PhaseTag(1, Phase.T_AT),
                reader_qualia=(PAIN,),
                observer_state=PAIN,
            ),
            BranchNode(
                id="no_shock",
                labels={"arm": "R", "device": "IDLE"},
                amplitude=c_r,
                phase=PhaseTag(1, Phase.T_AT),
                reader_qualia=(NO_PAIN,),
                observer_state=NO_PAIN,
            ),
        ],
    )
    return Scenario("pain", root)


def _build_wigner_friend(amplitudes=None, channel: Optional[Channel] = None) -> Scenario:
    c_a, c_b = _amp_pair(amplitudes)
    channel = channel or WIGNER_SPEECH
    root = BranchNode(
        id="friend_measures",
        phase=PhaseTag(0, Phase.T_BS),
        children=[
            BranchNode(
                id="friend_red",
                labels={"coin": "H", "detector": "RED_FLASH", "friend": "SAW_RED"},
                amplitude=c_a,
                phase=PhaseTag(1, Phase.T_AT),
                children=[
                    BranchNode(
                        id="reader_told_red",
                        labels={},
                        amplitude=c_a,
                        phase=PhaseTag(2, Phase.T_P),
                        reader_qualia=(channel.deliver("RED"),),
                    )
                ],
            ),
            BranchNode(
                id="friend_blue",
                labels={"coin": "T", "detector": "BLUE_FLASH", "friend": "SAW_BLUE"},
                amplitude=c_b,
                phase=PhaseTag(1, Phase.T_AT),
                children=[
                    BranchNode(
                        id="reader_told_blue",
                        labels={},
                        amplitude=c_b,
                        phase=PhaseTag(2, Phase.T_P),
                        reader_qualia=(channel.deliver("BLUE"),),
                    )
                ],
            ),
        ],
    )
    return Scenario("wigner_friend", root, channel=channel)


def _build_schrodinger_cat(
    amplitudes=None, dying_perceivable: bool = True, initial_state: Qualia = ALIVE
) -> Scenario:
    c_h, c_t = _amp_pair(amplitudes)
    dying_bundle = (DYING,) if dying_perceivable else ()
    death_bundle = () if dying_perceivable else (DEATH,)
    root = BranchNode(
        id="before",
        phase=PhaseTag(0, Phase.T_B),
        observer_state=initial_state,
        children=[
            BranchNode(
                id="prepare",
                phase=PhaseTag(1, Phase.T_BS),
                observer_state=ALIVE,
                children=[
                    BranchNode(
                        id="survives",
                        labels={"coin": "H", "cat": "ALIVE"},
                        amplitude=c_h,
                        phase=PhaseTag(2, Phase.T_AT),
                        reader_qualia=(ALIVE,),
                        observer_state=ALIVE,
                        children=[
                            BranchNode(
                                id="still_alive",
                                labels={"cat": "ALIVE"},
                                amplitude=c_h,
                                phase=PhaseTag(3, Phase.T_P),
                                observer_state=ALIVE,
                            )
                        ],
                    ),
                    BranchNode(
                        id="poisoned",
                        labels={"coin": "T", "cat": "DYING"},
                        amplitude=c_t,
                        phase=PhaseTag(2, Phase.T_AT),
                        reader_qualia=dying_bundle,
                        observer_state=DYING,
                        children=[
                            BranchNode(
                                id="dead",
                                labels={"cat": "DEAD"},
                                amplitude=c_t,
                                phase=PhaseTag(3, Phase.T_P),
                                reader_qualia=death_bundle,
                                observer_state=DEATH,
                            )
                        ],
                    ),
                ],
            )
        ],
    )
    return Scenario(
        "schrodinger_cat",
        root,
        params={"dying_perceivable": dying_perceivable, "initial_state": initial_state},
    )


def _build_lottery(k: int = 10, winning: Optional[str] = None) -> Scenario:
    if not (1 <= k <= 15):
        raise ValueError("lottery depth k must be in 1..15")
    if winning is None:
        winning = ("10" * k)[:k]
    if len(winning) != k or set(winning) - {"0", "1"}:
        raise ValueError("winning string must be k bits of 0/1")

    def grow(prefix: str, amplitude: complex, step: int) -> BranchNode:
        depth = len(prefix)
        if depth == k:
            result = WIN if prefix == winning else LOSE
            return BranchNode(
                id=f"ticket_{prefix}",
                labels={"ticket": prefix},
                amplitude=amplitude,
                phase=PhaseTag(step, Phase.T_AT),
                children=[
                    BranchNode(
                        id=f"reveal_{prefix}",
                        labels={"result": result.kind},
                        amplitude=amplitude,
                        phase=PhaseTag(step + 1, Phase.T_P),
                        reader_qualia=(result,),
                        observer_state=result,
                    )
                ],
            )
        return BranchNode(
            id=f"bits_{prefix or 'root'}",
            labels={f"bit{depth - 1}": prefix[-1]} if prefix else {},
            amplitude=amplitude,
            phase=PhaseTag(step, Phase.T_AT if prefix else Phase.T_BS),
            children=[
                grow(prefix + "0", amplitude * _EQUAL, step + 1),
                grow(prefix + "1", amplitude * _EQUAL, step + 1),
            ],
        )

    root = grow("", 1.0 + 0j, 0)
    return Scenario("lottery", root, params={"k": k, "winning": winning})


def _build_pain_steering(
    amplitudes=None,
    steer_state: Qualia = PAIN,
    before_state: Qualia = NO_PAIN,
    during_state: Optional[Qualia] = None,
    channel: Optional[Channel] = None,
) -> Scenario:
    c_l, c_r = _amp_pair(amplitudes)
    channel = channel or light_channel()
    during = during_state if during_state is not None else steer_state
    root = BranchNode(
        id="baseline",
        phase=PhaseTag(0, Phase.T_B),
        observer_state=before_state,
        children=[
            BranchNode(
                id="stimulus",
                phase=PhaseTag(1, Phase.T_BS),
                reader_qualia=(steer_state,),
                observer_state=steer_state,
                children=[
                    BranchNode(
                        id="waiting",
                        phase=PhaseTag(2, Phase.T_DS),
                        observer_state=during,
                        children=[
                            BranchNode(
                                id="left",
                                labels={"arm": "L", "detector": "RED_FLASH"},
                                amplitude=c_l,
                                phase=PhaseTag(3, Phase.T_AT),
                                reader_qualia=(channel.deliver("L"),),
                            ),
                            BranchNode(
                                id="right",
                                labels={"arm": "R", "detector": "BLUE_FLASH"},
                                amplitude=c_r,
                                phase=PhaseTag(3, Phase.T_AT),
                                reader_qualia=(channel.deliver("R"),),
                            ),
                        ],
                    )
                ],
            )
        ],
    )
    return Scenario(
        "pain_steering",
        root,
        channel=channel,
        params={
            "steer_state": steer_state,
            "before_state": before_state,
            "during_state": during,
        },
    )


# --------------------------------------------------------------------------
# Canonical JSON dumps


def scenario_to_json(scenario: Scenario) -> str:
    def node_dict(node: BranchNode) -> dict:
        return {
            "id": node.id,
            "labels": dict(sorted(node.labels.items())),
            "amplitude": [node.amplitude.real, node.amplitude.imag],
            "phase": {"phase": node.phase.phase.name, "step": node.phase.step},
            "reader_qualia": [format_qualia(q) for q in node.reader_qualia],
            "observer_state": (
                format_qualia(node.observer_state) if node.observer_state else None
            ),
            "children": [node_dict(c) for c in node.children],
        }

    body = {
        "name": scenario.name,
        "channel": scenario.channel.name if scenario.channel else None,
        "tree": node_dict(scenario.root),
    }
    return json.dumps(body, sort_keys=True)
