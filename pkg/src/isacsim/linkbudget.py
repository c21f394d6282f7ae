"""Radar-equation link-budget arithmetic, all in dB at the API surface.

The two-hop sensing path loss, its inversion to an RCS estimate, the
zero-slope RCS regression, and the concatenated-path power check used
to validate the concatenation model against measured path powers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import spreading_gain_db, wavelength_m


def radar_pathloss(pl1_db: float, pl2_db: float, wl: float, sigma_dbsm: float) -> float:
    """Two-hop target path loss: pl1 + pl2 + 10 log10(wl^2/4pi) - sigma."""
    return pl1_db + pl2_db + spreading_gain_db(wl) - sigma_dbsm


def estimate_rcs(pl1_db: float, pl2_db: float, pl_tar_db: float, wl: float) -> float:
    """Exact algebraic inverse of :func:`radar_pathloss`, solved for sigma."""
    return pl1_db + pl2_db - pl_tar_db + spreading_gain_db(wl)


def conv_path_power(p1_db: float, p2_db: float, sigma_dbsm: float, wl: float) -> float:
    """Theoretical concatenated path power from the two sub-link path powers."""
    return p1_db + p2_db + sigma_dbsm - spreading_gain_db(wl)


def delta_p(p_conv_db: float, p_measured_db: float) -> float:
    """Difference between modeled and measured concatenated path power."""
    return p_conv_db - p_measured_db


def fit_rcs_line(samples) -> tuple[float, float, float]:
    """Ordinary least squares of RCS estimates against the second-hop distance.

    Args:
        samples: iterable of (d2_m, sigma_dbsm) pairs, at least two
            distinct distances.

    Returns:
        (slope dB/m, intercept dBsm, rmse dB). A constant RCS should
        fit a zero-slope line.
    """
    pts = np.asarray(list(samples), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (distance, rcs) samples")
    d, sigma = pts[:, 0], pts[:, 1]
    if np.ptp(d) == 0.0:
        raise ValueError("all distances identical; slope is undefined")
    d_mean = d.mean()
    slope = float(np.sum((d - d_mean) * (sigma - sigma.mean())) / np.sum((d - d_mean) ** 2))
    intercept = float(sigma.mean() - slope * d_mean)
    resid = sigma - (slope * d + intercept)
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    return slope, intercept, rmse


# ---------------------------------------------------------------------------
# Distance-dependent path loss models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeSpacePathLoss:
    """PL(d) = 20 log10(4 pi d / lambda)."""

    frequency_hz: float

    def eval_db(self, d_m: float) -> float:
        if d_m <= 0.0:
            raise ValueError("distance must be positive")
        return 20.0 * math.log10(4.0 * math.pi * d_m / wavelength_m(self.frequency_hz))


@dataclass(frozen=True)
class AbgPathLoss:
    """Alpha-beta-gamma fit: 10 a log10(d) + b + 10 g log10(f_GHz)."""

    alpha: float
    beta: float
    gamma: float
    frequency_hz: float

    def eval_db(self, d_m: float) -> float:
        if d_m <= 0.0:
            raise ValueError("distance must be positive")
        return (10.0 * self.alpha * math.log10(d_m) + self.beta
                + 10.0 * self.gamma * math.log10(self.frequency_hz / 1e9))


@dataclass(frozen=True, eq=False)
class TablePathLoss:
    """Piecewise-linear interpolation of measured (distance, PL) pairs."""

    distances_m: np.ndarray
    pl_db: np.ndarray
    frequency_hz: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.distances_m, dtype=float)
        pl = np.asarray(self.pl_db, dtype=float)
        if d.ndim != 1 or d.shape != pl.shape or len(d) < 1:
            raise ValueError("need matching 1-D distance and path loss arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("distances must be strictly increasing")
        object.__setattr__(self, "distances_m", d)
        object.__setattr__(self, "pl_db", pl)

    def eval_db(self, d_m: float) -> float:
        if d_m <= 0.0:
            raise ValueError("distance must be positive")
        return float(np.interp(d_m, self.distances_m, self.pl_db))
