"""Exception types shared across the package."""


class WorldlinesError(Exception):
    """Base class for all package errors."""


class InvalidAmplitude(WorldlinesError):
    """Amplitude component is NaN or infinite."""


class MalformedRule(WorldlinesError):
    """Rule clauses do not conserve probability (weights must sum to 1)."""


class InsufficientHorizon(WorldlinesError):
    """An after-collapse lookahead reaches past the known part of the tree."""


class DegenerateComposition(WorldlinesError):
    """Composing rules produced an all-zero probability vector."""


class ParseError(WorldlinesError):
    """Rule source text rejected by the grammar.

    Carries the 1-based line/column of the offending token and the set of
    things the parser would have accepted there.
    """

    def __init__(self, message: str, line: int, col: int, expected: tuple = ()):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        super().__init__(f"{line}:{col}: {message}")


class UnknownScenario(WorldlinesError):
    """Scenario name not in the built-in catalogue."""


class NoClickInWindow(WorldlinesError):
    """A selection window contained no detector clicks; retry the next one."""


class CalibrationFailed(WorldlinesError):
    """Partner calibration did not converge within the iteration budget."""


class InvalidTally(WorldlinesError):
    """Tally with heads < 0, total < 1 or heads > total."""


class UnreachablePower(WorldlinesError):
    """No sample size can distinguish f = 1/2 from the Born baseline."""


class InvalidObservation(WorldlinesError):
    """Observation token outside the experiment's outcome alphabet."""


class SessionComplete(WorldlinesError):
    """All planned trials have already been issued."""


class DuplicateObservation(WorldlinesError):
    """An observation for this trial was already recorded."""


class UnknownSeq(WorldlinesError):
    """No issued trial with this sequence number."""


class IncompleteSession(WorldlinesError):
    """Finalize called before every planned trial was observed."""


class UnknownSession(WorldlinesError):
    """No session with this id."""


class ForbiddenRuleInSimulation(WorldlinesError):
    """A rule judged Forbidden by the experience checker cannot drive a
    simulated session."""


class CalibrationChannelConflict(WorldlinesError):
    """The calibration report channel would deliver a loaded rule's own
    trigger tokens, which would invalidate the calibration."""
