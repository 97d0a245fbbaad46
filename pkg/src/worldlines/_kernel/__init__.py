"""Trial-walk kernel selection: compiled extension if built, else pure Python.

Set ``WORLDLINES_PURE_PYTHON=1`` to force the fallback (used by the parity
tests and the benchmark). The two implementations are bit-identical.
"""

import os

from .walk_py import mix64

if os.environ.get("WORLDLINES_PURE_PYTHON"):
    from .walk_py import run_trials, walk_one

    IMPL = "python"
else:
    try:
        from ._walk import run_trials, walk_one

        IMPL = "cython"
    except ImportError:
        from .walk_py import run_trials, walk_one

        IMPL = "python"

__all__ = ["run_trials", "walk_one", "mix64", "IMPL"]
