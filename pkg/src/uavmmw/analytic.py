"""Closed-form propagation references: free space and the two-ray model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

DIPOLE_PEAK_DBI = 10.0 * math.log10(1.64)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 30.0
    f_c: float = 28e9
    h_t: float = 2.0
    h_r: float = 50.0
    gain_tx_dbi: float = DIPOLE_PEAK_DBI
    gain_rx_dbi: float = DIPOLE_PEAK_DBI

    def __post_init__(self):
        if self.h_t <= 0 or self.h_r <= 0:
            raise ValueError("antenna heights must be positive")
        if self.f_c <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def eirp_plus_rx_gain(self) -> float:
        return self.tx_power_dbm + self.gain_tx_dbi + self.gain_rx_dbi


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def fspl_db(d, f_c):
    """Free-space path loss ``20 log10(4 pi d f_c / c)`` in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return _scalar_or_array(20.0 * np.log10(4.0 * math.pi * d * f_c / SPEED_OF_LIGHT))


def two_ray_field(lb: LinkBudget, d, ground_gamma):
    """Complex two-ray sum ``(lam/4pi) (e^{-jk d1}/d1 + G e^{-jk d2}/d2)``."""
    d = np.asarray(d, dtype=float)
    lam = lb.wavelength
    k = 2.0 * math.pi / lam
    d1 = np.sqrt(d**2 + (lb.h_t - lb.h_r) ** 2)
    d2 = np.sqrt(d**2 + (lb.h_t + lb.h_r) ** 2)
    return lam / (4.0 * math.pi) * (np.exp(-1j * k * d1) / d1 + ground_gamma * np.exp(-1j * k * d2) / d2)


def two_ray_rss(lb: LinkBudget, d, ground_gamma=-1.0):
    """Received power in dBm for the direct ray plus one ground-reflected ray.

    ``ground_gamma`` may be a scalar or an array matching ``d`` (e.g. an
    angle-dependent Fresnel coefficient evaluated per distance).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    mag = np.abs(two_ray_field(lb, d, ground_gamma))
    with np.errstate(divide="ignore"):
        rss = lb.eirp_plus_rx_gain + 20.0 * np.log10(mag)
    return _scalar_or_array(rss)


def critical_distance(h_t: float, h_r: float, wavelength: float) -> float:
    """Break-point (first Fresnel zone) distance ``4 h_t h_r / lambda``."""
    if h_t <= 0 or h_r <= 0 or wavelength <= 0:
        raise ValueError("heights and wavelength must be positive")
    return 4.0 * h_t * h_r / wavelength


EXTREMA_GRID_STEP = 0.1


def extrema_count(lb: LinkBudget, d_start: float, d_end: float, ground_gamma=-1.0) -> int:
    """Number of strict local minima of :func:`two_ray_rss` on a 0.1 m grid.

    The grid is ``d_start + 0.1 * i`` for every ``i`` that stays within
    ``d_end``; interior grid points strictly below both neighbours count.
    """
    if not 0 < d_start < d_end:
        raise ValueError("need 0 < d_start < d_end")
    n = int(math.floor((d_end - d_start) / EXTREMA_GRID_STEP + 1e-9)) + 1
    d = d_start + EXTREMA_GRID_STEP * np.arange(n)
    p = two_ray_rss(lb, d, ground_gamma)
    mid = p[1:-1]
    return int(np.count_nonzero((mid < p[:-2]) & (mid < p[2:])))


def fit_slope_db_per_decade(d, rss_db) -> float:
    """Least-squares slope of ``rss_db`` against ``log10(d)``."""
    x = np.log10(np.asarray(d, dtype=float))
    slope, _ = np.polyfit(x, np.asarray(rss_db, dtype=float), 1)
    return float(slope)
