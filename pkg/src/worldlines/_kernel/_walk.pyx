# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial-walk kernel; bit-identical twin of ``walk_py``."""

from libc.stdint cimport int64_t, uint64_t

cdef double _INV_2_53 = 1.0 / 9007199254740992.0
cdef uint64_t _GAMMA = 0x9E3779B97F4A7C15U


cdef inline double _next_double(uint64_t *state) nogil:
    cdef uint64_t z
    state[0] = state[0] + _GAMMA
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9U
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBU
    z = z ^ (z >> 31)
    return <double>(z >> 11) * _INV_2_53


cdef inline int64_t _walk(const int64_t[::1] child_offset,
                          const int64_t[::1] child_index,
                          const double[::1] cum_probs,
                          uint64_t state) nogil:
    cdef int64_t v = 0, lo, hi, j
    cdef double u
    while True:
        lo = child_offset[v]
        hi = child_offset[v + 1]
        if hi == lo:
            return v
        if hi - lo == 1:
            v = child_index[lo]
            continue
        u = _next_double(&state)
        j = lo
        while j < hi - 1 and not (u < cum_probs[j]):
            j += 1
        v = child_index[j]


def walk_one(const int64_t[::1] child_offset,
             const int64_t[::1] child_index,
             const double[::1] cum_probs,
             seed):
    """One root-to-leaf walk; returns the leaf's node id."""
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    return _walk(child_offset, child_index, cum_probs, s)


def run_trials(const int64_t[::1] child_offset,
               const int64_t[::1] child_index,
               const double[::1] cum_probs,
               const int64_t[::1] leaf_slot,
               int64_t[::1] counts,
               n_trials,
               seed):
    """n_trials independent walks; increments ``counts`` per compact leaf slot."""
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t trial
    cdef uint64_t n = <uint64_t>n_trials
    cdef int64_t leaf
    with nogil:
        for trial in range(n):
            leaf = _walk(child_offset, child_index, cum_probs, s ^ trial)
            counts[leaf_slot[leaf]] += 1
