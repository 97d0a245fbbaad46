"""Apparatus model: attenuated source, waveplate split, dark counts, 1 Hz
click selection, and the partner calibration procedure.

The coherent-state algebra is reduced to click rates: post-selecting the
single-photon component justifies Poisson statistics for photon and dark
clicks, and pair events are neglected (their weight is ~|alpha|^2 of the
single-photon one at the operating attenuation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import CalibrationFailed, NoClickInWindow


@dataclass(frozen=True)
class SourceConfig:
    """Detected photon rate (efficiency folded in) and the waveplate angle;
    the left arm receives cos^2(theta) of the photons."""

    detected_photon_rate: float = 1e5
    split_angle: float = math.pi / 4

    def __post_init__(self):
        if not self.detected_photon_rate > 0:
            raise ValueError("photon rate must be positive")
        if not 0.0 <= self.split_angle <= math.pi / 2:
            raise ValueError("split angle must lie in [0, pi/2]")


@dataclass(frozen=True)
class DetectorConfig:
    dark_rate: float = 100.0  # counts/second per detector

    def __post_init__(self):
        if self.dark_rate < 0:
            raise ValueError("dark rate must be non-negative")


@dataclass(frozen=True)
class SelectedClick:
    arm: str  # "L" | "R"
    is_dark: bool
    window_index: int


def split_probabilities(cfg: SourceConfig) -> Tuple[float, float]:
    """(pL, pR) with pL = cos^2(theta); always sums to 1."""
    p_l = math.cos(cfg.split_angle) ** 2
    return p_l, 1.0 - p_l


def simulate_windows(
    src: SourceConfig,
    det: DetectorConfig,
    n_windows: int,
    seed: int,
    window_seconds: float = 1.0,
):
    """Vectorized window simulation: per-window Poisson counts for photon and
    dark clicks in each arm, and one click selected uniformly per window.

    Returns (arm, is_dark, has_click) boolean/uint8 arrays of length
    n_windows; arm is 0 for L, 1 for R, -1 where the window was empty.
    """
    rng = np.random.default_rng(seed)
    p_l, p_r = split_probabilities(src)
    lam = src.detected_photon_rate * window_seconds
    lam_dark = det.dark_rate * window_seconds
    n_lp = rng.poisson(lam * p_l, n_windows)
    n_rp = rng.poisson(lam * p_r, n_windows)
    n_ld = rng.poisson(lam_dark, n_windows)
    n_rd = rng.poisson(lam_dark, n_windows)
    total = n_lp + n_rp + n_ld + n_rd
    has_click = total > 0
    # uniform selection among the window's clicks, by category cut points
    pick = rng.random(n_windows) * total
    arm = np.full(n_windows, -1, dtype=np.int8)
    is_dark = np.zeros(n_windows, dtype=bool)
    c1 = n_lp
    c2 = c1 + n_rp
    c3 = c2 + n_ld
    sel_lp = has_click & (pick < c1)
    sel_rp = has_click & ~sel_lp & (pick < c2)
    sel_ld = has_click & ~sel_lp & ~sel_rp & (pick < c3)
    sel_rd = has_click & ~sel_lp & ~sel_rp & ~sel_ld
    arm[sel_lp | sel_ld] = 0
    arm[sel_rp | sel_rd] = 1
    is_dark[sel_ld | sel_rd] = True
    return arm, is_dark, has_click


def select_window_click(
    src: SourceConfig, det: DetectorConfig, seed: int, window_index: int = 0
) -> SelectedClick:
    """Select one click from a single 1 s window (uniformly among clicks).

    Raises NoClickInWindow when the window is empty; the caller retries the
    next window with a fresh seed.
    """
    arm, is_dark, has_click = simulate_windows(src, det, 1, seed)
    if not has_click[0]:
        raise NoClickInWindow(f"window {window_index} contained no clicks")
    return SelectedClick(
        arm="L" if arm[0] == 0 else "R",
        is_dark=bool(is_dark[0]),
        window_index=window_index,
    )


def dark_selection_probability(src: SourceConfig, det: DetectorConfig) -> float:
    """Asymptotic chance the selected click is a dark count: both arms' darks
    against the full photon stream, 2*r_d / (r_p + 2*r_d)."""
    r_p = src.detected_photon_rate
    r_d = det.dark_rate
    return 2.0 * r_d / (r_p + 2.0 * r_d)


@dataclass(frozen=True)
class CalibrationReport:
    """What the partner writes down for the reader: final angle, the last
    count totals, their ratio, and how many measurement windows were used."""

    theta: float
    counts_l: int
    counts_r: int
    ratio: float
    windows: int
    iterations: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "theta": self.theta,
                "counts_L": self.counts_l,
                "counts_R": self.counts_r,
                "ratio": self.ratio,
                "windows": self.windows,
            },
            sort_keys=True,
        )

    def written_note(self) -> str:
        """The ratio as the partner would write it on paper."""
        return (
            f"calibration: counts L={self.counts_l} R={self.counts_r} "
            f"ratio={self.ratio:.6f} over {self.windows} windows"
        )


MAX_CALIBRATION_ITERATIONS = 100


def partner_calibrate(
    src: SourceConfig,
    det: Optional[DetectorConfig] = None,
    tolerance: float = 0.005,
    seed: int = 0,
    window_seconds: float = 5.0,
) -> Tuple[float, CalibrationReport]:
    """Tune the waveplate by bisection on simulated count ratios until the
    left-arm fraction is within ``tolerance`` of 1/2.

    The measurement window stretches until counting noise is small against
    the tolerance (3 sigma <= tolerance/2) and convergence is declared at
    the tightened threshold tolerance/2, so the *true* split — not just the
    measured ratio — ends up inside the band. Dark counts are included in
    the totals (the partner cannot tell them apart); at the default rates
    they bias the ratio by well under the tolerance.
    """
    if not 0.0 < tolerance <= 0.05:
        raise ValueError("tolerance must lie in (0, 0.05]")
    det = det or DetectorConfig()
    rng = np.random.default_rng(seed)
    window_seconds = max(window_seconds, 9.0 / (tolerance**2 * src.detected_photon_rate))
    lam_dark = det.dark_rate * window_seconds

    def measure(theta: float) -> Tuple[float, int, int]:
        p_l, p_r = split_probabilities(SourceConfig(src.detected_photon_rate, theta))
        lam = src.detected_photon_rate * window_seconds
        n_l = int(rng.poisson(lam * p_l) + rng.poisson(lam_dark))
        n_r = int(rng.poisson(lam * p_r) + rng.poisson(lam_dark))
        if n_l + n_r == 0:
            raise CalibrationFailed("no counts at all; check the source")
        return n_l / (n_l + n_r), n_l, n_r

    theta = src.split_angle
    lo, hi = 0.0, math.pi / 2  # p_l falls monotonically over this bracket
    windows = 0
    for iteration in range(MAX_CALIBRATION_ITERATIONS + 1):
        frac, n_l, n_r = measure(theta)
        windows += 1
        if abs(frac - 0.5) <= tolerance / 2.0:
            report = CalibrationReport(
                theta=theta,
                counts_l=n_l,
                counts_r=n_r,
                ratio=frac / (1.0 - frac) if frac < 1.0 else math.inf,
                windows=windows,
                iterations=iteration,
            )
            return theta, report
        if frac > 0.5:
            lo = theta
        else:
            hi = theta
        theta = (lo + hi) / 2.0
    raise CalibrationFailed(
        f"no convergence to |pL - 0.5| <= {tolerance} in {MAX_CALIBRATION_ITERATIONS} iterations"
    )
