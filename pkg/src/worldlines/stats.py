"""Exact two-tailed binomial decision pipeline.

Everything is computed by exact summation (big integers / rationals), not
Monte Carlo: p-values, realized Type-I rates for the discrete rejection
region, false-negative rates, sample-size planning and the family-wise
retest arithmetic. A seeded Monte Carlo cross-check for the false-negative
computation is kept for tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binom as _binom

from .core import Qualia
from .errors import InvalidObservation, InvalidTally, UnreachablePower


@dataclass(frozen=True)
class Tally:
    """Heads/total counts (heads = the designated outcome, e.g. red flashes)."""

    heads: int
    total: int

    def __post_init__(self):
        if self.total < 1 or not 0 <= self.heads <= self.total:
            raise InvalidTally(f"invalid tally {self.heads}/{self.total}")


class Decision(enum.Enum):
    BORN_REJECTED = "BornRejected"
    BORN_NOT_REJECTED = "BornNotRejected"


@lru_cache(maxsize=4096)
def _suffix_counts(n: int) -> Tuple[int, ...]:
    """suffix[h] = sum_{x>=h} C(n, x), computed in one O(n) big-int pass."""
    row = [0] * (n + 2)
    c = 1  # C(n, n)
    row[n] = 1
    for x in range(n, 0, -1):
        c = c * x // (n - x + 1)  # C(n, x-1) from C(n, x)
        row[x - 1] = row[x] + c
    return tuple(row)


def p_value_exact(heads: int, total: int) -> Fraction:
    """Two-tailed exact p-value under the fair null, as a rational.

    Counts every outcome at least as extreme on both tails:
    p = [#sequences with X >= max(h, n-h)] * 2 / 2^n, clamped to 1.
    """
    if total < 1 or not 0 <= heads <= total:
        raise InvalidTally(f"invalid tally {heads}/{total}")
    hi = max(heads, total - heads)
    p = Fraction(2 * _suffix_counts(total)[hi], 1 << total)
    return min(p, Fraction(1))


def p_value_two_tailed(heads: int, total: int) -> float:
    return float(p_value_exact(heads, total))


def p_value_general(heads: int, total: int, null_p: Fraction) -> float:
    """Two-tailed exact test against an arbitrary null (method of small
    p-values: sum the probability of every outcome no more likely than the
    observed one). Used for lottery-style baselines; reduces to the fair-coin
    test's rejection ordering at null_p = 1/2."""
    if total < 1 or not 0 <= heads <= total:
        raise InvalidTally(f"invalid tally {heads}/{total}")
    pmf = _binom.pmf(np.arange(total + 1), total, float(null_p))
    observed = pmf[heads]
    return float(min(pmf[pmf <= observed * (1 + 1e-12)].sum(), 1.0))


def decide(tally: Tally, alpha: float = 0.05, null_p: Optional[float] = None) -> Decision:
    """BornRejected iff the (exact, two-tailed) p-value is below alpha."""
    if null_p is None or null_p == 0.5:
        p = p_value_exact(tally.heads, tally.total)
        return Decision.BORN_REJECTED if p < Fraction(alpha).limit_denominator(10**9) else Decision.BORN_NOT_REJECTED
    p = p_value_general(tally.heads, tally.total, Fraction(null_p).limit_denominator(10**9))
    return Decision.BORN_REJECTED if p < alpha else Decision.BORN_NOT_REJECTED


def rejection_threshold(total: int, alpha: float) -> Optional[int]:
    """Smallest h above total/2 whose p-value is below alpha; the rejection
    region is {X >= h} | {X <= total - h}. None when nothing rejects."""
    alpha_f = Fraction(alpha).limit_denominator(10**9)
    suffix = _suffix_counts(total)
    denom = 1 << total

    def p(h: int) -> Fraction:
        return min(Fraction(2 * suffix[h], denom), Fraction(1))

    if p(total) >= alpha_f:
        return None
    lo, hi = total // 2 + 1, total  # p is non-increasing in h on this range
    while lo < hi:
        mid = (lo + hi) // 2
        if p(mid) < alpha_f:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class PowerPoint:
    """One (f, N, alpha) evaluation: realized Type-I rate of the discrete
    region and the exact false-negative rate at the true weight f."""

    f: float
    n: int
    alpha_nominal: float
    alpha_achieved: float
    fn_rate: float


def false_negative_rate(f: float, n: int, alpha: float = 0.05) -> PowerPoint:
    """Exact: the region rejects outcomes with p-value strictly below alpha
    (so alpha_achieved <= alpha), and fn sums the binomial(N, f) mass that
    stays inside the acceptance band."""
    if not 0.0 < f <= 1.0:
        raise ValueError("f must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    h = rejection_threshold(n, alpha)
    if h is None:
        return PowerPoint(f, n, alpha, 0.0, 1.0)
    suffix = _suffix_counts(n)
    alpha_achieved = Fraction(2 * suffix[h], 1 << n)
    fn = float(_binom.cdf(h - 1, n, f) - _binom.cdf(n - h, n, f))
    return PowerPoint(f, n, alpha, float(alpha_achieved), fn)


def plan_sample_size(f: float, alpha: float = 0.05, fn_target: float = 0.05) -> int:
    """Smallest N whose exact false-negative rate is within target, found by
    doubling then binary search. Discrete-alpha jitter can make fn locally
    non-monotone; the search treats it as monotone, which the desk-scale
    anchors tolerate."""
    if f == 0.5:
        raise UnreachablePower("f = 1/2 is the Born baseline itself")
    if not 0.0 < f <= 1.0:
        raise ValueError("f must lie in (0, 1]")
    n = 8
    while false_negative_rate(f, n, alpha).fn_rate > fn_target:
        n *= 2
        if n > 1 << 20:
            raise UnreachablePower(f"no N up to 2^20 reaches fn <= {fn_target}")
    lo, hi = n // 2, n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if false_negative_rate(f, mid, alpha).fn_rate <= fn_target:
            hi = mid
        else:
            lo = mid
    return hi


def family_wise(k: int, alpha: float = 0.05, retest: bool = False) -> float:
    """Chance of at least one false positive across k independent tests;
    the retest-once protocol squares each test's false-positive rate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    per_test = alpha * alpha if retest else alpha
    return 1.0 - (1.0 - per_test) ** k


def mc_false_negative_rate(
    f: float, n: int, alpha: float, n_sim: int, seed: int
) -> float:
    """Monte Carlo cross-check of :func:`false_negative_rate` (tests only)."""
    h = rejection_threshold(n, alpha)
    rng = np.random.default_rng(seed)
    draws = rng.binomial(n, f, size=n_sim)
    if h is None:
        return 1.0
    rejected = (draws >= h) | (draws <= n - h)
    return float(1.0 - rejected.mean())


# --------------------------------------------------------------------------
# Live sequential statistics


@dataclass
class SequentialState:
    """Running tally for a live session with a predetermined plan.

    There is no optional stopping: the advisory appears only once the
    planned number of observations is in.
    """

    planned_n: int
    alpha: float
    head_token: Qualia
    alphabet: frozenset
    counts: Dict[Qualia, int] = field(default_factory=dict)
    observed: int = 0
    p_value: float = 1.0
    advisory: Optional[str] = None

    @property
    def heads(self) -> int:
        return self.counts.get(self.head_token, 0)


def sequential_start(
    planned_n: int, alpha: float, head_token: Qualia, alphabet: Sequence[Qualia]
) -> SequentialState:
    return SequentialState(
        planned_n=planned_n, alpha=alpha, head_token=head_token, alphabet=frozenset(alphabet)
    )


def sequential_update(state: SequentialState, observation: Qualia) -> SequentialState:
    """Fold one observation in and recompute the live p-value."""
    if observation not in state.alphabet:
        raise InvalidObservation(f"{observation} is outside the session alphabet")
    state.counts[observation] = state.counts.get(observation, 0) + 1
    state.observed += 1
    state.p_value = p_value_two_tailed(state.heads, state.observed)
    if state.observed >= state.planned_n:
        tally = Tally(state.heads, state.observed)
        if decide(tally, state.alpha) is Decision.BORN_REJECTED:
            state.advisory = "positive - retest required"
        else:
            state.advisory = "plan complete - no deviation found"
    return state


def power_curve_rows(
    f_grid: Sequence[float], n_grid: Sequence[int], alpha: float = 0.05
) -> List[Tuple[float, int, float, float]]:
    """Rows (f, N, alpha_achieved, fn_rate) for CSV export."""
    rows = []
    for f in f_grid:
        for n in n_grid:
            pt = false_negative_rate(f, n, alpha)
            rows.append((f, n, pt.alpha_achieved, pt.fn_rate))
    return rows
