"""Shared domain types, unit conventions, and sparse-path algebra.

Conventions used throughout the package:

* All internal power bookkeeping is linear; dB appears only at API
  boundaries and in file output.
* Azimuth is measured counterclockwise from +x in the horizontal plane,
  elevation from the horizontal; both in radians.
* Delays are seconds, distances meters, frequencies Hz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

C_LIGHT = 2.99792458e8  # m/s, exact by SI definition

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# dB / linear conversions
# ---------------------------------------------------------------------------

def db_to_linear(x_db):
    """Convert a power quantity from dB to linear scale."""
    if np.ndim(x_db) == 0:
        return 10.0 ** (float(x_db) / 10.0)
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    """Convert a linear power quantity to dB. Raises on non-positive input."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError(f"linear_to_db requires positive input, got {x!r}")
    out = 10.0 * np.log10(arr)
    return float(out) if np.ndim(x) == 0 else out


def wavelength_m(carrier_freq_hz: float) -> float:
    """Carrier wavelength lambda = c / f."""
    if carrier_freq_hz <= 0.0:
        raise ValueError("carrier frequency must be positive")
    return C_LIGHT / carrier_freq_hz


def spreading_gain(wl_m: float) -> float:
    """Single-point-of-truth spreading factor lambda^2 / (4 pi), linear.

    This constant couples the two-hop link budget to the concatenated
    small-scale model; both the link-budget arithmetic and the target
    channel concatenation use this definition.
    """
    if wl_m <= 0.0:
        raise ValueError("wavelength must be positive")
    return wl_m * wl_m / (4.0 * math.pi)


def spreading_gain_db(wl_m: float) -> float:
    """10 log10(lambda^2 / 4 pi)."""
    return linear_to_db(spreading_gain(wl_m))


# ---------------------------------------------------------------------------
# Angles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Angle3D:
    """A 3-D direction: azimuth in [0, 2 pi), elevation in [-pi/2, pi/2]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = float(self.azimuth) % TWO_PI
        el = float(self.elevation)
        if not math.isfinite(az) or not math.isfinite(el):
            raise ValueError("angles must be finite")
        if not (-math.pi / 2 <= el <= math.pi / 2):
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def from_degrees(cls, az_deg: float, el_deg: float = 0.0) -> "Angle3D":
        return cls(math.radians(az_deg), math.radians(el_deg))


def unit_vector(angle: Angle3D) -> np.ndarray:
    """Unit direction vector (x, y, z) for an azimuth/elevation pair."""
    ce = math.cos(angle.elevation)
    return np.array([
        ce * math.cos(angle.azimuth),
        ce * math.sin(angle.azimuth),
        math.sin(angle.elevation),
    ])


def angle_from_vector(v: np.ndarray) -> Angle3D:
    """Inverse of :func:`unit_vector`; accepts any nonzero 3-vector."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("cannot extract angles from a zero or non-finite vector")
    el = math.asin(max(-1.0, min(1.0, v[2] / n)))
    az = math.atan2(v[1], v[0]) % TWO_PI
    return Angle3D(az, el)


def wrapped_angle_distance(a: float, b: float) -> float:
    """Shortest angular distance between two azimuths, radians in [0, pi]."""
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def angles_close(a: Angle3D, b: Angle3D, tol: float) -> bool:
    """True if both azimuth and elevation differ by at most tol radians."""
    return (wrapped_angle_distance(a.azimuth, b.azimuth) <= tol
            and abs(a.elevation - b.elevation) <= tol)


# ---------------------------------------------------------------------------
# Path components
# ---------------------------------------------------------------------------

class Origin(enum.Enum):
    TARGET = "target"
    BACKGROUND = "background"
    SHARED = "shared"


@dataclass(frozen=True)
class PathComponent:
    """One resolvable multipath component.

    ``amp`` is the complex field gain after antenna projection; ``power``
    is |amp|^2 (linear). ``bounce_order`` counts interactions with
    environment objects other than the sensing target (0 = direct).
    """

    delay: float
    amp: complex
    doppler: float = 0.0
    aod: Angle3D = Angle3D(0.0, 0.0)
    aoa: Angle3D = Angle3D(0.0, 0.0)
    bounce_order: int = 0
    origin: Origin = Origin.BACKGROUND

    def __post_init__(self):
        if not math.isfinite(self.delay) or self.delay < 0.0:
            raise ValueError(f"delay must be finite and >= 0, got {self.delay}")
        if not (math.isfinite(self.amp.real) and math.isfinite(self.amp.imag)):
            raise ValueError("amplitude must be finite")
        if self.bounce_order < 0:
            raise ValueError("bounce_order must be >= 0")

    @property
    def power(self) -> float:
        return abs(self.amp) ** 2


# ---------------------------------------------------------------------------
# RCS models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantRcs:
    """Angle-independent radar cross section."""

    sigma_dbsm: float

    def eval_dbsm(self, g_in: Angle3D, g_out: Angle3D) -> float:
        return self.sigma_dbsm


@dataclass(frozen=True)
class CosineLobeRcs:
    """Scattering lobe sigma0 * cos(theta)^exponent about a lobe axis.

    The angular argument is the mean off-axis angle of the incoming and
    outgoing directions. ``exponent = 0`` degenerates to a constant.
    The cosine is floored at 1e-30 so the dBsm value stays finite.
    """

    sigma0_dbsm: float
    exponent: float = 0.0
    axis: Angle3D = Angle3D(0.0, 0.0)

    def __post_init__(self):
        if self.exponent < 0.0:
            raise ValueError("cosine lobe exponent must be >= 0")

    def eval_dbsm(self, g_in: Angle3D, g_out: Angle3D) -> float:
        if self.exponent == 0.0:
            return self.sigma0_dbsm
        ax = unit_vector(self.axis)
        c_in = float(np.dot(unit_vector(g_in), ax))
        c_out = float(np.dot(unit_vector(g_out), ax))
        c = max(0.5 * (c_in + c_out), 1e-30)
        return self.sigma0_dbsm + 10.0 * self.exponent * math.log10(c)


@dataclass(frozen=True, eq=False)
class TableRcs:
    """Gridded RCS over (incoming, outgoing) angle pairs, dBsm values.

    Axes are radians; queries outside the grid clamp to the boundary
    (never extrapolate). Singleton axes are allowed and collapse.
    """

    az_in: np.ndarray
    el_in: np.ndarray
    az_out: np.ndarray
    el_out: np.ndarray
    values_dbsm: np.ndarray  # shape (az_in, el_in, az_out, el_out)

    def __post_init__(self):
        vals = np.asarray(self.values_dbsm, dtype=float)
        axes = tuple(np.atleast_1d(np.asarray(a, dtype=float))
                     for a in (self.az_in, self.el_in, self.az_out, self.el_out))
        expected = tuple(len(a) for a in axes)
        if vals.shape != expected:
            raise ValueError(f"values shape {vals.shape} != axes {expected}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("RCS table must be finite")
        for a in axes:
            if len(a) > 1 and np.any(np.diff(a) <= 0):
                raise ValueError("RCS table axes must be strictly increasing")
        object.__setattr__(self, "az_in", axes[0])
        object.__setattr__(self, "el_in", axes[1])
        object.__setattr__(self, "az_out", axes[2])
        object.__setattr__(self, "el_out", axes[3])
        object.__setattr__(self, "values_dbsm", vals)

    def eval_dbsm(self, g_in: Angle3D, g_out: Angle3D) -> float:
        query = [g_in.azimuth, g_in.elevation, g_out.azimuth, g_out.elevation]
        axes = [self.az_in, self.el_in, self.az_out, self.el_out]
        vals = self.values_dbsm
        # collapse singleton axes, clamp the rest
        pts, keep = [], []
        for i, ax in enumerate(axes):
            if len(ax) == 1:
                vals = np.take(vals, 0, axis=len(keep))
            else:
                pts.append(float(np.clip(query[i], ax[0], ax[-1])))
                keep.append(ax)
        if not keep:
            return float(vals)
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator(tuple(keep), vals, method="linear")
        return float(interp(np.array(pts))[0])


RcsModel = ConstantRcs | CosineLobeRcs | TableRcs


# ---------------------------------------------------------------------------
# Scattering points and CIRs
# ---------------------------------------------------------------------------

def identity_cpm() -> np.ndarray:
    """2x2 identity polarization matrix (no polarization twist)."""
    return np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class ScatteringPoint:
    """A sensing-target scattering center."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rcs_model: RcsModel = ConstantRcs(0.0)
    cpm_k: np.ndarray = field(default_factory=identity_cpm)

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        vel = np.asarray(self.velocity, dtype=float).reshape(3)
        cpm = np.asarray(self.cpm_k, dtype=complex)
        if cpm.shape != (2, 2) or not np.all(np.isfinite(cpm)):
            raise ValueError("cpm_k must be a finite 2x2 complex matrix")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(vel)):
            raise ValueError("position and velocity must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "cpm_k", cpm)


@dataclass(frozen=True)
class Cir:
    """Channel impulse response: delay-sorted sparse path components."""

    paths: tuple[PathComponent, ...]
    t0: float = 0.0
    carrier_freq: float = 0.0

    def __post_init__(self):
        ordered = tuple(sorted(self.paths, key=lambda p: p.delay))
        object.__setattr__(self, "paths", ordered)

    def __len__(self) -> int:
        return len(self.paths)

    def total_power(self) -> float:
        return float(sum(p.power for p in self.paths))

    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths])

    def amps(self) -> np.ndarray:
        return np.array([p.amp for p in self.paths], dtype=complex)

    def scaled(self, factor: complex) -> "Cir":
        """New Cir with every amplitude multiplied by ``factor``."""
        return Cir(tuple(replace(p, amp=p.amp * factor) for p in self.paths),
                   t0=self.t0, carrier_freq=self.carrier_freq)


# ---------------------------------------------------------------------------
# Path merging
# ---------------------------------------------------------------------------

def merge_paths(paths: Iterable[PathComponent], delay_tol: float,
                angle_tol: float) -> list[PathComponent]:
    """Coherently merge paths that coincide within the given tolerances.

    Paths whose delay differs by at most ``delay_tol`` and whose AoA and
    AoD both differ by at most ``angle_tol`` from a group anchor are
    summed as complex amplitudes. The anchor (earliest-delay member)
    supplies the merged delay, angles, Doppler, and bounce order, which
    makes the operation idempotent. Mixed-origin groups become SHARED.

    Args:
        paths: any iterable of PathComponent.
        delay_tol: seconds, >= 0.
        angle_tol: radians, >= 0.

    Returns:
        Delay-sorted list of merged components.
    """
    if delay_tol < 0.0:
        raise ValueError("delay_tol must be >= 0")
    ordered = sorted(paths, key=lambda p: p.delay)
    anchors: list[PathComponent] = []
    sums: list[complex] = []
    origins: list[set] = []
    for p in ordered:
        placed = False
        for gi in range(len(anchors) - 1, -1, -1):
            a = anchors[gi]
            if p.delay - a.delay > delay_tol:
                break  # anchors are delay-sorted; earlier ones are farther
            if angles_close(p.aoa, a.aoa, angle_tol) and angles_close(p.aod, a.aod, angle_tol):
                sums[gi] += p.amp
                origins[gi].add(p.origin)
                placed = True
                break
        if not placed:
            anchors.append(p)
            sums.append(p.amp)
            origins.append({p.origin})
    merged = []
    for a, s, og in zip(anchors, sums, origins):
        origin = a.origin if len(og) == 1 else Origin.SHARED
        merged.append(replace(a, amp=s, origin=origin))
    return merged


def default_delay_tol(bandwidth_hz: float) -> float:
    """Delay-resolution merge tolerance: one over the sounding bandwidth."""
    if bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    return 1.0 / bandwidth_hz


# half the 5-degree turntable step used by the directional scans
DEFAULT_ANGLE_TOL_RAD = math.radians(2.5)


# ---------------------------------------------------------------------------
# Link budget bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkBudget:
    """Large-scale bookkeeping for one sensing-channel realization."""

    pl_tar_db: tuple[float, ...]
    pl_back_db: float
    o_back: float
    wavelength: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in self.pl_tar_db):
            raise ValueError("per-point target path losses must be finite")
        if not math.isfinite(self.pl_back_db):
            raise ValueError("background path loss must be finite")
        if not (0.0 < self.o_back <= 1.5):
            raise ValueError(f"power control factor {self.o_back} outside (0, 1.5]")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")
