"""Workbench for observer-dependent collapse rules over branching worldlines.

Modules: core (shared vocabulary), rules (the rule engine and plausibility
checkers), dsl (the .mwr text format), multiverse (scenario trees, exact
enumeration and seeded Monte Carlo), optics (apparatus model and partner
calibration), stats (the exact binomial decision pipeline), session + api +
cli (the experiment harness).
"""

from .core import born_probability  # noqa: F401

__version__ = "0.1.0"
