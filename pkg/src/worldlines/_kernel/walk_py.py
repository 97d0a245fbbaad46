"""Pure-Python trial-walk kernel: the fallback twin of ``_walk.pyx``.

Both implementations must produce bit-identical results: the per-trial RNG is
a splitmix64 stream seeded with ``seed XOR trial_index`` (a counter-based
contract, so trials are order-independent and parallelizable), and uniform
doubles are built as ``(z >> 11) * 2^-53`` in IEEE arithmetic in both
languages.
"""

from __future__ import annotations

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0


def _next_double(state: int) -> tuple:
    state = (state + _GAMMA) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    z ^= z >> 31
    return state, (z >> 11) * _INV_2_53


def mix64(x: int) -> int:
    """Diffuse a seed through the splitmix finalizer.

    Callers running several independent batches (e.g. many sessions) must
    mix their batch seeds first: raw adjacent seeds s and s+1 would make
    ``seed XOR trial`` enumerate the same trial-seed set in another order.
    """
    x = (x + _GAMMA) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def walk_one(child_offset, child_index, cum_probs, seed: int) -> int:
    """One root-to-leaf walk; returns the leaf's node id."""
    state = seed & _M64
    v = 0
    while True:
        lo = child_offset[v]
        hi = child_offset[v + 1]
        if hi == lo:
            return v
        if hi - lo == 1:
            v = child_index[lo]
            continue
        state, u = _next_double(state)
        j = lo
        while j < hi - 1 and not (u < cum_probs[j]):
            j += 1
        v = child_index[j]


def run_trials(child_offset, child_index, cum_probs, leaf_slot, counts, n_trials: int, seed: int) -> None:
    """n_trials independent walks; increments ``counts`` per compact leaf slot."""
    seed &= _M64
    co = list(child_offset)
    ci = list(child_index)
    cp = list(cum_probs)
    ls = list(leaf_slot)
    for trial in range(n_trials):
        state = seed ^ trial
        v = 0
        while True:
            lo = co[v]
            hi = co[v + 1]
            if hi == lo:
                break
            if hi - lo == 1:
                v = ci[lo]
                continue
            state, u = _next_double(state)
            j = lo
            while j < hi - 1 and not (u < cp[j]):
                j += 1
            v = ci[j]
        counts[ls[v]] += 1
