"""Target-channel construction by concatenating two sensing sub-links.

The transmitter-to-target and target-to-receiver links are generated as
ordinary stochastic channels; the target channel pairs every ray of one
with every ray of the other, routing the polarization through the
scattering point's angular RCS and polarization-twist matrix. Delays
add, Dopplers add, and the wavelength-dependent spreading factor enters
exactly once here (not in the link-budget module).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    Angle3D,
    Cir,
    Origin,
    PathComponent,
    ScatteringPoint,
    TableRcs,
    merge_paths,
    spreading_gain,
    unit_vector,
)
from .gbsm import OMNI, AntennaModel, ClusterSet, Ray, cross_polarization_matrix


class Side(enum.Enum):
    TX_TO_TARGET = "tx_to_target"
    TARGET_TO_RX = "target_to_rx"


@dataclass(frozen=True)
class SubLink:
    """One hop of the concatenated sensing link.

    For a TX_TO_TARGET link, each ray's AoD is at the transmitter and
    its AoA is the arrival direction at the target. For TARGET_TO_RX,
    the AoD is the departure direction from the target and the AoA is
    at the receiver. Every ray therefore carries a target-side angle.
    """

    side: Side
    clusters: ClusterSet

    def rays(self) -> list[Ray]:
        return self.clusters.all_rays()


def rcs_eval(model, g_in: Angle3D, g_out: Angle3D) -> float:
    """Radar cross section in linear square meters for an angle pair."""
    sigma_dbsm = model.eval_dbsm(g_in, g_out)
    if not math.isfinite(sigma_dbsm):
        raise ValueError(
            f"RCS model returned non-finite value for in={g_in} out={g_out}")
    return 10.0 ** (sigma_dbsm / 10.0)


def concatenate(a: SubLink, b: SubLink, sp: ScatteringPoint, wl: float,
                tx_antenna: AntennaModel = OMNI, rx_antenna: AntennaModel = OMNI,
                s: int = 0, u: int = 0, t: float = 0.0,
                carrier_freq: float = 0.0) -> Cir:
    """Pair every ray of ``a`` with every ray of ``b`` through the target.

    Produces |a| * |b| paths (no merging). Per pair, the delay is the
    sum of the sub-link delays, the Doppler is the sum of the sub-link
    Dopplers, and the amplitude is

        sqrt(p1 p2) * F_rx^T . CPM_2 . CPM_k . CPM_1 . F_tx
        * sqrt(sigma(out, in)) * sqrt(lambda^2 / 4 pi)

    with sigma evaluated at the target-side angle pair, plus the array
    and Doppler phase rotations. With identity polarization matrices
    and omni antennas the linear path power is p1 * p2 * sigma *
    lambda^2/(4 pi).
    """
    if a.side is not Side.TX_TO_TARGET or b.side is not Side.TARGET_TO_RX:
        raise ValueError("concatenate expects (tx_to_target, target_to_rx) sub-links")
    rays_a, rays_b = a.rays(), b.rays()
    if not rays_a or not rays_b:
        raise ValueError("both sub-links must be non-empty")
    if wl <= 0.0:
        raise ValueError("wavelength must be positive")

    sqrt_spread = math.sqrt(spreading_gain(wl))
    k = 2.0 * math.pi / wl
    d_sp = sp.position
    d_tx = tx_antenna.element_positions[s]
    d_rx = rx_antenna.element_positions[u]

    paths = []
    for r1 in rays_a:
        cpm1 = cross_polarization_matrix(r1.xpr, r1.phases)
        f_tx = tx_antenna.field(r1.aod)
        phase1 = k * (float(unit_vector(r1.aoa) @ d_sp) + float(unit_vector(r1.aod) @ d_tx))
        for r2 in rays_b:
            try:
                sigma = rcs_eval(sp.rcs_model, g_in=r1.aoa, g_out=r2.aod)
            except Exception as exc:
                raise ValueError(
                    f"RCS evaluation failed for in={r1.aoa} out={r2.aod}: {exc}") from exc
            cpm2 = cross_polarization_matrix(r2.xpr, r2.phases)
            f_rx = rx_antenna.field(r2.aoa)
            gain = complex(f_rx @ cpm2 @ sp.cpm_k @ cpm1 @ f_tx)
            phase2 = k * (float(unit_vector(r2.aoa) @ d_rx) + float(unit_vector(r2.aod) @ d_sp))
            doppler = r1.doppler + r2.doppler
            amp = (math.sqrt(r1.power * r2.power * sigma) * gain * sqrt_spread
                   * complex(np.exp(1j * (phase1 + phase2)))
                   * complex(np.exp(1j * 2.0 * math.pi * doppler * t)))
            paths.append(PathComponent(
                delay=r1.delay + r2.delay,
                amp=amp,
                doppler=doppler,
                aod=r1.aod,
                aoa=r2.aoa,
                bounce_order=r1.bounce_order + r2.bounce_order,
                origin=Origin.TARGET,
            ))
    return Cir(tuple(paths), t0=t, carrier_freq=carrier_freq)


def multi_point_target(points: Sequence[ScatteringPoint],
                       sublinks: Sequence[tuple[SubLink, SubLink]],
                       wl: float,
                       pl_tar_db: Sequence[float] | None = None,
                       tx_antenna: AntennaModel = OMNI,
                       rx_antenna: AntennaModel = OMNI,
                       s: int = 0, u: int = 0, t: float = 0.0,
                       carrier_freq: float = 0.0,
                       merge_delay_tol: float = 0.0,
                       merge_angle_tol: float = 0.0) -> Cir:
    """Coherent union of per-scattering-point concatenations.

    Each point's contribution is weighted in amplitude by
    10^(-pl_tar_db/20); exactly coincident paths merge coherently
    (so two identical points double the amplitude, +6.02 dB).
    """
    if len(points) == 0:
        raise ValueError("at least one scattering point is required")
    if len(sublinks) != len(points):
        raise ValueError("need one (tx_to_target, target_to_rx) pair per point")
    if pl_tar_db is not None and len(pl_tar_db) != len(points):
        raise ValueError("need one target path loss per point")

    all_paths: list[PathComponent] = []
    for i, (sp, (sub_a, sub_b)) in enumerate(zip(points, sublinks)):
        cir = concatenate(sub_a, sub_b, sp, wl, tx_antenna, rx_antenna,
                          s=s, u=u, t=t, carrier_freq=carrier_freq)
        weight = 1.0 if pl_tar_db is None else 10.0 ** (-pl_tar_db[i] / 20.0)
        all_paths.extend(replace(p, amp=p.amp * weight) for p in cir.paths)
    merged = merge_paths(all_paths, merge_delay_tol, merge_angle_tol)
    return Cir(tuple(merged), t0=t, carrier_freq=carrier_freq)


def load_rcs_table_csv(path) -> TableRcs:
    """Load a gridded RCS table from CSV.

    Expected columns: az_in_deg, el_in_deg, az_out_deg, el_out_deg,
    rcs_dbsm. The rows must cover a full regular grid (every
    combination of the axis values exactly once).
    """
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            rows.append((float(rec["az_in_deg"]), float(rec["el_in_deg"]),
                         float(rec["az_out_deg"]), float(rec["el_out_deg"]),
                         float(rec["rcs_dbsm"])))
    if not rows:
        raise ValueError(f"RCS table {path} is empty")
    data = np.array(rows)
    axes_deg = [np.unique(data[:, i]) for i in range(4)]
    shape = tuple(len(a) for a in axes_deg)
    if int(np.prod(shape)) != len(rows):
        raise ValueError("RCS table rows do not form a full regular grid")
    values = np.full(shape, np.nan)
    index = [{v: i for i, v in enumerate(a)} for a in axes_deg]
    for az_i, el_i, az_o, el_o, dbsm in rows:
        values[index[0][az_i], index[1][el_i], index[2][az_o], index[3][el_o]] = dbsm
    if np.any(np.isnan(values)):
        raise ValueError("RCS table has duplicate or missing grid rows")
    axes_rad = [np.radians(a) for a in axes_deg]
    return TableRcs(axes_rad[0], axes_rad[1], axes_rad[2], axes_rad[3], values)
