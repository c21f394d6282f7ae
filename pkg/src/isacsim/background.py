"""Background-channel generation and power-control-factor coupling.

The bi-static background reuses the stochastic cluster engine. The
mono-static background (co-located Tx and Rx) is built from explicit
geometric scatterers because no statistical standard covers that mode:
each scatterer contributes one retro-directed echo with a two-way
free-space loss. The power control factor couples the target's presence
to the background as a multiplicative factor on linear received power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    C_LIGHT,
    Cir,
    Origin,
    PathComponent,
    angle_from_vector,
)
from .gbsm import AntennaModel, GenerationProfile, sample_clusters, synthesize_cir

# Measured power control factors per position, (position, condition, value).
# Conditions refer to the (Tx-target, target-Rx) visibility combination.
PCF_MEASUREMENTS: tuple[tuple[int, str, float], ...] = (
    (1, "los_los", 0.89),
    (2, "los_los", 0.73),
    (3, "los_los", 0.67),
    (4, "los_los", 0.75),
    (5, "los_los", 0.84),
    (6, "los_los", 0.81),
    (7, "los_los", 0.86),
    (8, "los_los", 0.78),
    (9, "los_los", 0.91),
    (10, "los_los", 0.93),
    (11, "los_nlos", 0.89),
    (12, "los_nlos", 0.90),
    (13, "los_nlos", 0.92),
    (14, "los_nlos", 0.95),
)


def pcf_values(condition: str) -> np.ndarray:
    vals = np.array([v for _, c, v in PCF_MEASUREMENTS if c == condition])
    if len(vals) == 0:
        raise ValueError(f"unknown PCF condition {condition!r}")
    return vals


PCF_CLAMP = (0.0, 1.5)  # lower bound exclusive


@dataclass(frozen=True)
class PcfModel:
    """Normal model for the power control factor, clamped to (0, 1.5]."""

    condition: str
    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0.0:
            raise ValueError("std must be >= 0")
        if not (PCF_CLAMP[0] < self.mean <= PCF_CLAMP[1]):
            raise ValueError(f"mean {self.mean} outside {PCF_CLAMP}")


def default_pcf_model(condition: str) -> PcfModel:
    """PcfModel fitted to the measured per-position values (sample std)."""
    vals = pcf_values(condition)
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return PcfModel(condition=condition, mean=float(vals.mean()), std=std)


def sample_pcf(model: PcfModel, seed, size: int | None = None):
    """Draw power control factor(s), clamped into (0, 1.5]; seeded."""
    rng = np.random.default_rng(seed)
    draws = rng.normal(model.mean, model.std, size if size is not None else 1)
    tiny = np.finfo(float).tiny
    clamped = np.clip(draws, tiny, PCF_CLAMP[1])
    return float(clamped[0]) if size is None else clamped


def apply_pcf(background_power_linear, o_back: float):
    """Scale linear background received power by the power control factor."""
    if not (PCF_CLAMP[0] < o_back <= PCF_CLAMP[1]):
        raise ValueError(f"power control factor {o_back} outside (0, 1.5]")
    return o_back * background_power_linear


# ---------------------------------------------------------------------------
# Background channels
# ---------------------------------------------------------------------------

def background_bistatic(profile: GenerationProfile, tx_antenna: AntennaModel,
                        rx_antenna: AntennaModel, wl: float,
                        t: float = 0.0, s: int = 0, u: int = 0,
                        carrier_freq: float = 0.0) -> Cir:
    """Statistical background channel for separated Tx and Rx.

    Structurally identical to a conventional communication-channel
    realization; paths are tagged with the background origin.
    """
    clusters = sample_clusters(profile)
    return synthesize_cir(clusters, tx_antenna, rx_antenna, s=s, u=u, t=t,
                          wl=wl, origin=Origin.BACKGROUND,
                          carrier_freq=carrier_freq)


@dataclass(frozen=True, eq=False)
class GeometricScatterer:
    """A discrete environment scatterer for mono-static echoes."""

    position: np.ndarray
    reflection_gain_db: float = 0.0
    label: str = ""

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("scatterer position must be finite")
        object.__setattr__(self, "position", pos)


def background_monostatic(scatterers, txrx_position, wl: float,
                          carrier_freq: float = 0.0) -> Cir:
    """Geometric mono-static background: one retro-directed echo per scatterer.

    Delay is the two-way travel time 2 d / c, arrival and departure
    directions coincide (pointing from the co-located Tx/Rx toward the
    scatterer), and the power follows the two-way free-space loss plus
    the scatterer's reflection gain. An empty scatterer list gives an
    empty CIR.
    """
    if wl <= 0.0:
        raise ValueError("wavelength must be positive")
    p0 = np.asarray(txrx_position, dtype=float).reshape(3)
    paths = []
    for sc in scatterers:
        d_vec = sc.position - p0
        dist = float(np.linalg.norm(d_vec))
        if dist <= 0.0:
            raise ValueError(f"scatterer {sc.label!r} coincides with the Tx/Rx position")
        direction = angle_from_vector(d_vec)
        one_way_amp = wl / (4.0 * math.pi * dist)
        amp = (one_way_amp ** 2
               * math.sqrt(10.0 ** (sc.reflection_gain_db / 10.0))
               * complex(np.exp(-1j * 2.0 * math.pi * (2.0 * dist) / wl)))
        paths.append(PathComponent(
            delay=2.0 * dist / C_LIGHT,
            amp=amp,
            doppler=0.0,
            aod=direction,
            aoa=direction,
            bounce_order=1,
            origin=Origin.BACKGROUND,
        ))
    return Cir(tuple(paths), carrier_freq=carrier_freq)
