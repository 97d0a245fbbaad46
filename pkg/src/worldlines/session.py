"""End-to-end experiment sessions: calibration, stimulus generation,
append-only JSONL logging, observation capture and the final decision.

A log is one header line, one line per issued trial, one line per recorded
observation and (once finalized) one footer line. Replaying the trial and
observation lines reproduces the footer bit-exactly. Ground-truth stimulus
fields live only in the log; API payloads for unanswered trials never carry
them (the software form of experimental isolation).
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .core import (
    BLUE,
    LOSE,
    NO_PAIN,
    PAIN,
    RED,
    READER,
    WIN,
    Channel,
    Qualia,
    format_qualia,
    light_channel,
    parse_qualia,
    speech_channel,
    written_channel,
)
from .dsl import parse_many
from .errors import (
    CalibrationChannelConflict,
    DuplicateObservation,
    ForbiddenRuleInSimulation,
    IncompleteSession,
    InvalidObservation,
    SessionComplete,
    UnknownSeq,
    UnknownSession,
)
from ._kernel import mix64
from .multiverse import Scenario, TrialSampler, build_scenario
from .optics import CalibrationReport, DetectorConfig, SourceConfig, partner_calibrate, select_window_click
from .errors import NoClickInWindow
from .rules import (
    Rule,
    Verdict,
    check_consensus_consistency,
    check_experience_induction,
    check_observer_experience,
)
from . import stats

DATA_DIR_ENV = "WORLDLINES_DATA_DIR"

#: Channels ordinary result reporting would use; the consensus checker runs
#: against these.
STANDARD_CHANNELS = (
    speech_channel({"RED": "I saw RED", "BLUE": "I saw BLUE"}),
    written_channel({"RED": "result: RED", "BLUE": "result: BLUE"}),
)

_CALIBRATION_SEED_SALT = 0xCA11B7A7E


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    head_token: Qualia
    alphabet: Tuple[Qualia, ...]
    human_allowed: bool
    null_p: float = 0.5


def _experiment_spec(experiment: str, lottery_k: int) -> ExperimentSpec:
    table = {
        "redness": ExperimentSpec("redness", RED, (RED, BLUE), True),
        "pain": ExperimentSpec("pain", PAIN, (PAIN, NO_PAIN), False),
        "lottery": ExperimentSpec("lottery", WIN, (WIN, LOSE), False, null_p=2.0 ** -lottery_k),
        "pain_steering": ExperimentSpec("pain_steering", RED, (RED, BLUE), True),
    }
    if experiment not in table:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {sorted(table)}")
    return table[experiment]


@dataclass
class SessionConfig:
    experiment: str
    planned_n: int
    alpha: float = 0.05
    stimulus_rate: float = 1.0  # flashes per second
    mode: str = "SIMULATED"  # SIMULATED | HUMAN
    seed: int = 0
    rule_texts: Tuple[str, ...] = ()
    lottery_k: int = 10
    calibration_tolerance: float = 0.005
    reader_history: Tuple[Qualia, ...] = ()

    def __post_init__(self):
        if self.planned_n < 1:
            raise ValueError("planned_n must be >= 1")
        if not 0.0 < self.alpha <= 0.2:
            raise ValueError("alpha must lie in (0, 0.2]")
        if self.stimulus_rate <= 0:
            raise ValueError("stimulus_rate must be positive")
        if self.mode not in ("SIMULATED", "HUMAN"):
            raise ValueError("mode must be SIMULATED or HUMAN")
        if not 1 <= self.lottery_k <= 32:
            raise ValueError("lottery_k must lie in 1..32")
        spec = _experiment_spec(self.experiment, self.lottery_k)
        if self.mode == "HUMAN" and not spec.human_allowed:
            raise ValueError(
                f"{self.experiment} cannot run in HUMAN mode (hardware out of scope)"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rule_texts"] = list(self.rule_texts)
        d["reader_history"] = [format_qualia(q) for q in self.reader_history]
        return d

    @staticmethod
    def from_dict(d: dict) -> "SessionConfig":
        d = dict(d)
        d["rule_texts"] = tuple(d.get("rule_texts", ()))
        d["reader_history"] = tuple(parse_qualia(t) for t in d.get("reader_history", ()))
        return SessionConfig(**d)


@dataclass
class TrialRecord:
    seq: int
    scheduled_at_ms: int
    stimulus: Dict[str, object]  # ground truth; never leaves the server
    delivered_qualia: Qualia  # the token the reader is meant to experience
    prelude: Tuple[Qualia, ...] = ()  # earlier tokens of the trial (steering stimuli)
    observation: Optional[Qualia] = None
    observed_at_ms: Optional[int] = None

    def log_line(self) -> dict:
        return {
            "type": "trial",
            "seq": self.seq,
            "scheduled_at_ms": self.scheduled_at_ms,
            "stimulus": self.stimulus,
            "delivered_qualia": format_qualia(self.delivered_qualia),
            "prelude": [format_qualia(q) for q in self.prelude],
        }


class Session:
    """Single-writer state machine for one experiment run."""

    def __init__(self, config: SessionConfig, log_path: Path, session_id: Optional[str] = None):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.config = config
        self.log_path = log_path
        self.lock = threading.Lock()
        self.spec = _experiment_spec(config.experiment, config.lottery_k)
        self.rules: List[Rule] = []
        for text in config.rule_texts:
            self.rules.extend(parse_many(text))
        self.plausibility = {
            rule.id: {
                "observer_experience": check_observer_experience(rule),
                "consensus_consistency": check_consensus_consistency(rule, STANDARD_CHANNELS),
                "experience_induction": check_experience_induction(rule, config.reader_history),
            }
            for rule in self.rules
        }
        self.calibration: Optional[CalibrationReport] = None
        self.trials: List[TrialRecord] = []
        self.footer: Optional[dict] = None
        self.sequential = stats.sequential_start(
            config.planned_n, config.alpha, self.spec.head_token, self.spec.alphabet
        )
        self._sampler: Optional[TrialSampler] = None
        self._channel: Channel = light_channel()
        self._log_fh = None

    # -- creation ---------------------------------------------------------

    def calibrate_and_open(self) -> None:
        theta, report = partner_calibrate(
            SourceConfig(),
            DetectorConfig(),
            tolerance=self.config.calibration_tolerance,
            seed=(self.config.seed ^ _CALIBRATION_SEED_SALT) & ((1 << 64) - 1),
        )
        self.calibration = report
        # what the reader experiences when taking the partner's note: the
        # verbatim text plus the stable "reading a calibration ratio" token
        report_channel = written_channel(
            {"NOTE": report.written_note(), "RATIO": "calibration ratio"},
            name="calibration_note",
        )
        for rule in self.rules:
            overlap = check_consensus_consistency(rule, [report_channel])
            if overlap.overlap_score > 0.0:
                raise CalibrationChannelConflict(
                    f"rule {rule.id!r} triggers on the written calibration note"
                )
        self._append(
            {
                "type": "header",
                "session_id": self.id,
                "config": self.config.to_dict(),
                "calibration": json.loads(report.to_json()),
                "plausibility": {
                    rid: {
                        check: {
                            "verdict": rep.verdict.value,
                            "overlap_score": rep.overlap_score,
                            "reasons": [list(r) for r in rep.reasons],
                        }
                        for check, rep in checks.items()
                    }
                    for rid, checks in self.plausibility.items()
                },
            }
        )

    # -- trial issue / observe / finalize ----------------------------------

    def has_forbidden_rule(self) -> bool:
        return any(
            checks["observer_experience"].verdict is Verdict.FORBIDDEN
            for checks in self.plausibility.values()
        )

    def _scenario(self) -> Scenario:
        if self.config.experiment == "lottery":
            return build_scenario("lottery", k=self.config.lottery_k)
        return build_scenario(self.config.experiment)

    def _lottery_direct_draw(self, seq: int, scheduled: int, seq_seed: int) -> TrialRecord:
        """Rule-free lottery draw for k past the tree bound: the k bits are
        sampled directly (same splitmix stream) instead of walking a
        2^k-leaf tree."""
        from ._kernel.walk_py import _next_double

        k = self.config.lottery_k
        winning = ("10" * k)[:k]
        state = seq_seed
        bits = []
        for _ in range(k):
            state, u = _next_double(state)
            bits.append("0" if u < 0.5 else "1")
        ticket = "".join(bits)
        result = WIN if ticket == winning else LOSE
        return TrialRecord(
            seq=seq,
            scheduled_at_ms=scheduled,
            stimulus={"labels": {"ticket": ticket, "result": result.kind}},
            delivered_qualia=result,
        )

    def next_stimulus(self) -> TrialRecord:
        with self.lock:
            if self.footer is not None or len(self.trials) >= self.config.planned_n:
                raise SessionComplete(f"session {self.id} has no trials left")
            seq = len(self.trials)
            scheduled = round(seq * 1000.0 / self.config.stimulus_rate)
            if self.config.mode == "SIMULATED":
                if self.has_forbidden_rule():
                    raise ForbiddenRuleInSimulation(
                        "a loaded rule is Forbidden; simulated runs refuse it"
                    )
                # diffuse the session seed so sessions with adjacent seeds
                # draw disjoint trial streams
                seq_seed = mix64(self.config.seed) ^ seq
                if self.config.experiment == "lottery" and self.config.lottery_k > 15:
                    if self.rules:
                        raise ValueError("rule-driven lottery needs k <= 15 (tree bound)")
                    record = self._lottery_direct_draw(seq, scheduled, seq_seed)
                else:
                    if self._sampler is None:
                        self._sampler = TrialSampler(self._scenario(), self.rules, READER)
                    sequence, labels = self._sampler.sample_detail(seq_seed)
                    record = TrialRecord(
                        seq=seq,
                        scheduled_at_ms=scheduled,
                        stimulus={"labels": labels},
                        delivered_qualia=sequence[-1],
                        prelude=tuple(sequence[:-1]),
                    )
            else:
                click = None
                attempt = 0
                while click is None:
                    try:
                        click = select_window_click(
                            SourceConfig(),
                            DetectorConfig(),
                            seed=(self.config.seed ^ (seq * 1024 + attempt)) & ((1 << 64) - 1),
                            window_index=seq,
                        )
                    except NoClickInWindow:
                        attempt += 1
                record = TrialRecord(
                    seq=seq,
                    scheduled_at_ms=scheduled,
                    stimulus={"arm": click.arm, "is_dark": click.is_dark},
                    delivered_qualia=self._channel.deliver(click.arm),
                )
            self.trials.append(record)
            self._append(record.log_line())
            return record

    def record_observation(self, seq: int, token: Qualia, observed_at_ms: int) -> dict:
        with self.lock:
            if not 0 <= seq < len(self.trials):
                raise UnknownSeq(f"trial {seq} was never issued")
            record = self.trials[seq]
            if record.observation is not None:
                raise DuplicateObservation(f"trial {seq} already has an observation")
            if token not in self.spec.alphabet:
                raise InvalidObservation(
                    f"{format_qualia(token)} is outside the {self.spec.name} alphabet"
                )
            record.observation = token
            record.observed_at_ms = observed_at_ms
            # the live tally is the reader's own measurement
            stats.sequential_update(self.sequential, token)
            self._append(
                {
                    "type": "observation",
                    "seq": seq,
                    "token": format_qualia(token),
                    "observed_at_ms": observed_at_ms,
                }
            )
            return {"seq": seq, "recorded": True}

    def finalize(self) -> dict:
        with self.lock:
            if self.footer is not None:
                return self.footer
            if len(self.trials) < self.config.planned_n or any(
                t.observation is None for t in self.trials
            ):
                raise IncompleteSession(
                    f"session {self.id}: {sum(t.observation is not None for t in self.trials)}"
                    f"/{self.config.planned_n} trials observed"
                )
            self.footer = compute_footer(
                [t.log_line() for t in self.trials],
                [
                    {
                        "seq": t.seq,
                        "token": format_qualia(t.observation),
                        "observed_at_ms": t.observed_at_ms,
                    }
                    for t in self.trials
                ],
                self.config,
            )
            self._append({"type": "footer", **self.footer})
            self.close()
            return self.footer

    # -- presentation -------------------------------------------------------

    def live_view(self) -> dict:
        """Everything the UI may see; never an unanswered trial's stimulus."""
        with self.lock:
            answered = sum(1 for t in self.trials if t.observation is not None)
            view = {
                "session_id": self.id,
                "experiment": self.config.experiment,
                "mode": self.config.mode,
                "planned_n": self.config.planned_n,
                "alpha": self.config.alpha,
                "stimulus_rate": self.config.stimulus_rate,
                "trials_issued": len(self.trials),
                "trials_observed": answered,
                "tally": {
                    format_qualia(tok): n for tok, n in sorted(
                        self.sequential.counts.items(), key=lambda kv: format_qualia(kv[0])
                    )
                },
                "p_value": self.sequential.p_value if answered else None,
                "advisory": self.sequential.advisory,
                "calibration": json.loads(self.calibration.to_json()) if self.calibration else None,
                "plausibility": {
                    rid: {check: rep.verdict.value for check, rep in checks.items()}
                    for rid, checks in self.plausibility.items()
                },
                "finalized": self.footer is not None,
            }
            if self.footer is not None:
                view["footer"] = self.footer
            return view

    def _append(self, line: dict) -> None:
        if self._log_fh is None:
            self._log_fh = open(self.log_path, "a", encoding="utf-8")
        self._log_fh.write(json.dumps(line, sort_keys=True) + "\n")
        self._log_fh.flush()

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


def compute_footer(trial_lines: Sequence[dict], observation_lines: Sequence[dict], config: SessionConfig) -> dict:
    """Pure footer computation from log lines, reused by replay.

    The primary decision runs on the ground-truth tally (the delivered
    qualia histogram); the reader's own tally is reported next to it with
    the discrepancy count.
    """
    spec = _experiment_spec(config.experiment, config.lottery_k)
    head = format_qualia(spec.head_token)
    observations = {line["seq"]: line for line in observation_lines}
    ground_heads = 0
    human_heads = 0
    discrepancies = 0
    total = 0
    for line in trial_lines:
        obs = observations.get(line["seq"])
        if obs is None:
            raise IncompleteSession(f"trial {line['seq']} has no observation")
        total += 1
        delivered = line["delivered_qualia"]
        if delivered == head:
            ground_heads += 1
        if obs["token"] == head:
            human_heads += 1
        if obs["token"] != delivered:
            discrepancies += 1
    null_p = spec.null_p if spec.null_p != 0.5 else None
    ground = stats.Tally(ground_heads, total)
    human = stats.Tally(human_heads, total)
    decision = stats.decide(ground, config.alpha, null_p)
    human_decision = stats.decide(human, config.alpha, null_p)
    if null_p is None:
        p_ground = stats.p_value_two_tailed(ground_heads, total)
        p_human = stats.p_value_two_tailed(human_heads, total)
    else:
        from fractions import Fraction

        p_ground = stats.p_value_general(ground_heads, total, Fraction(null_p))
        p_human = stats.p_value_general(human_heads, total, Fraction(null_p))
    return {
        "tally": {"heads": ground_heads, "total": total, "head_token": head},
        "human_tally": {"heads": human_heads, "total": total, "head_token": head},
        "p_value": p_ground,
        "human_p_value": p_human,
        "decision": decision.value,
        "human_decision": human_decision.value,
        "retest_required": decision is stats.Decision.BORN_REJECTED,
        "discrepancies": discrepancies,
        "alpha": config.alpha,
        "planned_n": config.planned_n,
    }


def replay_footer(log_path: Path) -> Tuple[dict, Optional[dict]]:
    """Recompute the footer from a log's trial/observation lines.

    Returns (recomputed, stored); stored is None when the log was never
    finalized. Bit-exact equality of the two is the replay invariant.
    """
    trials: List[dict] = []
    observations: List[dict] = []
    config: Optional[SessionConfig] = None
    stored: Optional[dict] = None
    with open(log_path, encoding="utf-8") as fh:
        for raw in fh:
            line = json.loads(raw)
            if line["type"] == "header":
                config = SessionConfig.from_dict(line["config"])
            elif line["type"] == "trial":
                trials.append(line)
            elif line["type"] == "observation":
                observations.append(line)
            elif line["type"] == "footer":
                stored = {k: v for k, v in line.items() if k != "type"}
    if config is None:
        raise ValueError(f"{log_path}: no header line")
    return compute_footer(trials, observations, config), stored


class SessionStore:
    """Registry of live sessions plus their on-disk logs."""

    def __init__(self, data_dir: Optional[str] = None):
        base = data_dir or os.environ.get(DATA_DIR_ENV) or "./worldlines-data"
        self.data_dir = Path(base)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, config: SessionConfig) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(config, self.data_dir / f"{session_id}.jsonl", session_id)
        session.calibrate_and_open()
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(f"no session {session_id!r}") from None

    def ids(self) -> List[str]:
        with self._lock:
            return sorted(self._sessions)
