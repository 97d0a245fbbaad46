"""The compiled kernel and the pure-Python fallback must agree bit for bit."""

import numpy as np
import pytest

from worldlines._kernel import IMPL, walk_py
from worldlines.core import READER
from worldlines.multiverse import TrialSampler, build_scenario
from worldlines import rulebook as rb

try:
    from worldlines._kernel import _walk

    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")


def _flat_arrays(name, rules):
    sampler = TrialSampler(build_scenario(name), rules, READER)
    flat = sampler._flat
    return flat.child_offset, flat.child_index, flat.cum_probs, flat.leaf_slot


CASES = [
    ("redness", []),
    ("redness", [rb.redness_rule(0.6)]),
    ("wigner_friend", []),
    ("schrodinger_cat", [rb.no_death_rule()]),
    ("lottery", []),
    ("pain_steering", [rb.pain_steering_rule()]),
]


@needs_ext
@pytest.mark.parametrize("name,rules", CASES)
@pytest.mark.parametrize("seed", [0, 1, 0xDEADBEEF, (1 << 64) - 1])
def test_tallies_identical(name, rules, seed):
    co, ci, cp, ls = _flat_arrays(name, rules)
    n_leaves = int(ls.max()) + 1
    for n in (1, 7, 1000):
        counts_c = np.zeros(n_leaves, dtype=np.int64)
        counts_p = np.zeros(n_leaves, dtype=np.int64)
        _walk.run_trials(co, ci, cp, ls, counts_c, n, seed)
        walk_py.run_trials(co, ci, cp, ls, counts_p, n, seed)
        assert np.array_equal(counts_c, counts_p)


@needs_ext
@pytest.mark.parametrize("seed", range(50))
def test_single_walks_identical(seed):
    co, ci, cp, ls = _flat_arrays("lottery", [])
    assert _walk.walk_one(co, ci, cp, seed) == walk_py.walk_one(co, ci, cp, seed)


def test_tally_independent_of_trial_order():
    """The counter-derived per-trial streams make the batched tally equal the
    aggregation of individually executed trials in any order."""
    co, ci, cp, ls = _flat_arrays("schrodinger_cat", [])
    n_leaves = int(ls.max()) + 1
    n, seed = 500, 777
    batched = np.zeros(n_leaves, dtype=np.int64)
    walk_py.run_trials(co, ci, cp, ls, batched, n, seed)
    by_hand = np.zeros(n_leaves, dtype=np.int64)
    for trial in reversed(range(n)):  # deliberately reversed order
        leaf = walk_py.walk_one(co, ci, cp, seed ^ trial)
        by_hand[ls[leaf]] += 1
    assert np.array_equal(batched, by_hand)


def test_import_selection_reports_impl():
    assert IMPL in ("cython", "python")


def test_python_fallback_env_override(tmp_path):
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from worldlines._kernel import IMPL; print(IMPL)"],
        env={"WORLDLINES_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin:/usr/local/bin"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
