"""Channel observables computed from traced multipath components."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

RSS_FLOOR_DB = -250.0
DEFAULT_RMSDS_CUT_DB = 25.0


@dataclass(frozen=True)
class Cir:
    """Delay-sorted multipath components at one tx/rx geometry.

    ``paths`` holds objects with ``amplitude``, ``phase`` and ``delay``
    attributes (normally :class:`uavmmw.raytrace.PathComponent`).
    """

    paths: tuple
    f_c: float
    tx: tuple = (0.0, 0.0, 0.0)
    rx: tuple = (0.0, 0.0, 0.0)
    los_blocked: bool = False

    def __post_init__(self):
        ordered = tuple(sorted(self.paths, key=lambda p: p.delay))
        object.__setattr__(self, "paths", ordered)
        bound = math.dist(self.tx, self.rx) / SPEED_OF_LIGHT
        for p in ordered:
            if not math.isfinite(p.delay) or p.delay < bound * (1 - 1e-12):
                raise ValueError("path delay below the line-of-sight bound")

    def __len__(self):
        return len(self.paths)

    @property
    def amplitudes(self):
        return np.array([p.amplitude for p in self.paths])

    @property
    def phases(self):
        return np.array([p.phase for p in self.paths])

    @property
    def delays(self):
        return np.array([p.delay for p in self.paths])


@dataclass(frozen=True)
class RssTrace:
    """Per-point results along a trajectory (``rss_dbm`` is nan without coverage)."""

    distance: np.ndarray
    rss_dbm: np.ndarray
    num_paths: np.ndarray
    rms_ds: np.ndarray
    los_blocked: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.distance) <= 0):
            raise ValueError("trace distances must be strictly increasing")

    def __len__(self):
        return len(self.distance)


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray
    probabilities: np.ndarray

    def __len__(self):
        return len(self.values)

    def to_text(self, header="value,probability") -> str:
        rows = [header] + [f"{v:.6g},{p:.6g}" for v, p in zip(self.values, self.probabilities)]
        return "\n".join(rows) + "\n"

    def quantile(self, q: float) -> float:
        i = int(np.searchsorted(self.probabilities, q - 1e-12))
        return float(self.values[min(i, len(self.values) - 1)])


def narrowband_rss(cir: Cir, p_t: float):
    """Coherent RSS ``p_t + 20 log10 |sum a_p exp(j theta_p)|`` in dBm.

    Returns ``None`` (no coverage) for an empty CIR; exact cancellation is
    clamped to ``p_t - 250`` dB.
    """
    if len(cir.paths) == 0:
        return None
    total = sum(p.amplitude * complex(math.cos(p.phase), math.sin(p.phase)) for p in cir.paths)
    mag = abs(total)
    floor = 10.0 ** (RSS_FLOOR_DB / 20.0)
    if mag < floor:
        return p_t + RSS_FLOOR_DB
    return p_t + 20.0 * math.log10(mag)


def rms_delay_spread(cir: Cir, cut_db: float = DEFAULT_RMSDS_CUT_DB) -> float:
    """Power-weighted RMS delay spread in seconds over paths within ``cut_db`` of the strongest."""
    if len(cir.paths) == 0:
        raise ValueError("RMS delay spread of an empty CIR is undefined")
    if cut_db <= 0:
        raise ValueError("cut_db must be positive")
    power = cir.amplitudes**2
    tau = cir.delays
    keep = power >= power.max() * 10.0 ** (-cut_db / 10.0)
    power, tau = power[keep], tau[keep]
    total = power.sum()
    if total <= 0:
        return 0.0
    # shift to the first arrival so the subtraction does not lose precision
    tau = tau - tau.min()
    mean = np.dot(power, tau) / total
    second = np.dot(power, tau**2) / total
    return float(math.sqrt(max(second - mean * mean, 0.0)))


def empirical_cdf(values) -> EmpiricalCdf:
    """Step CDF: each distinct value maps to the fraction of samples <= it."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empirical CDF needs at least one value")
    uniq, counts = np.unique(x, return_counts=True)
    return EmpiricalCdf(uniq, np.cumsum(counts) / x.size)
