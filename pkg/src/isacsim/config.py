"""Scenario configuration: JSON schema, loading, and whole-file validation.

Field names carry explicit SI units (..._hz, ..._m, ..._deg) because the
sensing literature mixes GHz/ns/degrees freely and silent unit errors
are the most common failure mode. Validation collects every violation
before raising, not just the first.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .background import GeometricScatterer, PcfModel, default_pcf_model
from .core import ConstantRcs, CosineLobeRcs, ScatteringPoint
from .gbsm import AntennaModel, GenerationProfile
from .target import load_rcs_table_csv


class ConfigError(ValueError):
    """Carries the full list of validation violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario config:\n  - " + "\n  - ".join(self.violations))


@dataclass(frozen=True)
class SublinkSpec:
    """Statistical recipe for one target's Tx-target / target-Rx hops."""

    n_clusters: int = 4
    rays_per_cluster: int = 5
    delay_scale_ns: float = 20.0
    angle_spread_deg: float = 5.0
    xpr_mean_db: float = 9.0
    xpr_std_db: float = 3.0
    shadow_std_db: float = 3.0
    k_factor_db: float = 6.0


@dataclass(frozen=True, eq=False)
class TargetSpec:
    point: ScatteringPoint
    sublink: SublinkSpec


@dataclass(frozen=True, eq=False)
class EndpointSpec:
    position_m: np.ndarray
    antenna: AntennaModel


@dataclass(frozen=True)
class PcfSpec:
    model: PcfModel | None  # None means a fixed value
    fixed: float | None
    domain: str = "linear_power"  # or "db_pathloss"


@dataclass(frozen=True)
class BackgroundSpec:
    mode: str  # "statistical" | "geometric"
    profile: GenerationProfile | None = None
    scatterers: tuple[GeometricScatterer, ...] = ()


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    carrier_freq_hz: float
    bandwidth_hz: float
    sensing_mode: str  # "mono_static" | "bi_static"
    tx: EndpointSpec
    rx: EndpointSpec
    targets: tuple[TargetSpec, ...]
    background: BackgroundSpec
    pcf: PcfSpec
    scan_start_deg: float
    scan_stop_deg: float
    scan_step_deg: float
    seed: int
    outputs: str
    sounder_m: int = 11
    sounder_snr_db: float = 30.0
    raw: dict = field(default_factory=dict, repr=False)

    def scan_angles_deg(self) -> np.ndarray:
        return np.arange(self.scan_start_deg, self.scan_stop_deg, self.scan_step_deg)


def _parse_antenna(spec: dict, errors, where: str) -> AntennaModel:
    kind = spec.get("kind", "omni")
    if kind == "omni":
        return AntennaModel(kind="omni")
    if kind == "horn":
        hpbw = spec.get("hpbw_deg", 10.0)
        gain = spec.get("peak_gain_db", 0.0)
        if hpbw <= 0:
            errors.append(f"{where}: horn hpbw_deg must be > 0")
            hpbw = 10.0
        return AntennaModel(kind="horn", hpbw_deg=float(hpbw), peak_gain_db=float(gain))
    errors.append(f"{where}: unknown antenna kind {kind!r}")
    return AntennaModel(kind="omni")


def _parse_rcs(spec: dict, errors, where: str, base_dir: Path):
    variant = spec.get("variant", "constant")
    if variant == "constant":
        return ConstantRcs(float(spec.get("sigma_dbsm", 0.0)))
    if variant == "cosine_lobe":
        exponent = float(spec.get("exponent", 0.0))
        if exponent < 0:
            errors.append(f"{where}: cosine lobe exponent must be >= 0")
            exponent = 0.0
        return CosineLobeRcs(float(spec.get("sigma0_dbsm", 0.0)), exponent)
    if variant == "table":
        csv_rel = spec.get("csv")
        if not csv_rel:
            errors.append(f"{where}: table RCS needs a 'csv' path")
            return ConstantRcs(0.0)
        try:
            return load_rcs_table_csv(base_dir / csv_rel)
        except Exception as exc:
            errors.append(f"{where}: failed to load RCS table: {exc}")
            return ConstantRcs(0.0)
    errors.append(f"{where}: unknown RCS variant {variant!r}")
    return ConstantRcs(0.0)


def _parse_profile(spec: dict, seed: int) -> GenerationProfile:
    return GenerationProfile(
        n_clusters=int(spec.get("n_clusters", 8)),
        rays_per_cluster=int(spec.get("rays_per_cluster", 10)),
        delay_scale_s=float(spec.get("delay_scale_ns", 30.0)) * 1e-9,
        angle_spread_rad=math.radians(float(spec.get("angle_spread_deg", 5.0))),
        xpr_mean_db=float(spec.get("xpr_mean_db", 9.0)),
        xpr_std_db=float(spec.get("xpr_std_db", 3.0)),
        shadow_std_db=float(spec.get("shadow_std_db", 3.0)),
        doppler_max_hz=float(spec.get("doppler_max_hz", 0.0)),
        seed=seed,
    )


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON; raises ConfigError listing
    every violation found."""
    path = Path(path)
    with open(path) as f:
        raw = json.load(f)
    errors: list[str] = []

    name = raw.get("name") or path.stem
    carrier = float(raw.get("carrier_freq_hz", 0.0))
    if carrier <= 0:
        errors.append("carrier_freq_hz must be > 0")
    bandwidth = float(raw.get("bandwidth_hz", 0.0))
    if bandwidth <= 0:
        errors.append("bandwidth_hz must be > 0")

    mode = raw.get("sensing_mode", "")
    if mode not in ("mono_static", "bi_static"):
        errors.append(f"sensing_mode must be mono_static or bi_static, got {mode!r}")

    tx_raw = raw.get("tx", {})
    rx_raw = raw.get("rx", {})
    tx = EndpointSpec(np.asarray(tx_raw.get("position_m", [0, 0, 0]), dtype=float),
                      _parse_antenna(tx_raw.get("antenna", {}), errors, "tx.antenna"))
    rx = EndpointSpec(np.asarray(rx_raw.get("position_m", [0, 0, 0]), dtype=float),
                      _parse_antenna(rx_raw.get("antenna", {}), errors, "rx.antenna"))
    if mode == "mono_static" and not np.array_equal(tx.position_m, rx.position_m):
        errors.append("mono_static requires tx.position_m == rx.position_m")

    targets = []
    for i, t in enumerate(raw.get("targets", [])):
        where = f"targets[{i}]"
        rcs = _parse_rcs(t.get("rcs", {}), errors, where, path.parent)
        point = ScatteringPoint(
            position=np.asarray(t.get("position_m", [0, 0, 0]), dtype=float),
            velocity=np.asarray(t.get("velocity_mps", [0, 0, 0]), dtype=float),
            rcs_model=rcs,
        )
        sl = t.get("sublink", {})
        targets.append(TargetSpec(point=point, sublink=SublinkSpec(
            n_clusters=int(sl.get("n_clusters", 4)),
            rays_per_cluster=int(sl.get("rays_per_cluster", 5)),
            delay_scale_ns=float(sl.get("delay_scale_ns", 20.0)),
            angle_spread_deg=float(sl.get("angle_spread_deg", 5.0)),
            xpr_mean_db=float(sl.get("xpr_mean_db", 9.0)),
            xpr_std_db=float(sl.get("xpr_std_db", 3.0)),
            shadow_std_db=float(sl.get("shadow_std_db", 3.0)),
            k_factor_db=float(sl.get("k_factor_db", 6.0)),
        )))

    bg_raw = raw.get("background", {})
    bg_mode = bg_raw.get("mode", "")
    profile = None
    scatterers: tuple[GeometricScatterer, ...] = ()
    if bg_mode == "statistical":
        prof_raw = bg_raw.get("profile")
        if prof_raw is None:
            errors.append("statistical background needs a 'profile'")
        elif int(prof_raw.get("n_clusters", 8)) < 1:
            errors.append("background profile needs n_clusters >= 1")
        else:
            profile = _parse_profile(prof_raw, seed=0)  # reseeded by the runner
    elif bg_mode == "geometric":
        sc_raw = bg_raw.get("scatterers", [])
        try:
            scatterers = tuple(
                GeometricScatterer(
                    position=np.asarray(sc["position_m"], dtype=float),
                    reflection_gain_db=float(sc.get("reflection_gain_db", 0.0)),
                    label=sc.get("label", f"S{i}"))
                for i, sc in enumerate(sc_raw))
        except (KeyError, TypeError) as exc:
            errors.append(f"background.scatterers malformed: {exc}")
    else:
        errors.append(f"background.mode must be statistical or geometric, got {bg_mode!r}")
    # the statistical engine assumes separated endpoints; co-located
    # sensing needs the geometric echo model
    if mode == "mono_static" and bg_mode == "statistical":
        errors.append("mono_static sensing requires background.mode = geometric")
    if mode == "bi_static" and bg_mode == "geometric":
        errors.append("bi_static sensing requires background.mode = statistical")
    background = BackgroundSpec(mode=bg_mode, profile=profile, scatterers=scatterers)

    pcf_raw = raw.get("pcf", {"value": 1.0})
    pcf_domain = pcf_raw.get("domain", "linear_power")
    if pcf_domain not in ("linear_power", "db_pathloss"):
        errors.append(f"pcf.domain must be linear_power or db_pathloss, got {pcf_domain!r}")
    model = None
    fixed = None
    if "value" in pcf_raw:
        fixed = float(pcf_raw["value"])
        if not (0.0 < fixed <= 1.5):
            errors.append(f"pcf.value {fixed} outside (0, 1.5]")
    elif "mean" in pcf_raw:
        try:
            model = PcfModel(pcf_raw.get("condition", "custom"),
                             float(pcf_raw["mean"]), float(pcf_raw.get("std", 0.0)))
        except ValueError as exc:
            errors.append(f"pcf model invalid: {exc}")
    elif "condition" in pcf_raw:
        try:
            model = default_pcf_model(pcf_raw["condition"])
        except ValueError as exc:
            errors.append(str(exc))
    else:
        errors.append("pcf needs one of: value, mean, condition")
    pcf = PcfSpec(model=model, fixed=fixed, domain=pcf_domain)

    scan_raw = raw.get("scan", {})
    start = float(scan_raw.get("start_deg", 0.0))
    stop = float(scan_raw.get("stop_deg", 360.0))
    step = float(scan_raw.get("step_deg", 5.0))
    if step <= 0:
        errors.append("scan.step_deg must be > 0")
    elif stop <= start:
        errors.append("scan.stop_deg must exceed scan.start_deg")
    else:
        span = stop - start
        ratio = span / step
        if abs(ratio - round(ratio)) > 1e-9:
            errors.append(f"scan.step_deg {step} does not divide the range {span}")

    seed = raw.get("seed")
    if not isinstance(seed, int):
        errors.append("seed must be an integer")
        seed = 0

    sounder_raw = raw.get("sounder", {})
    sounder_m = int(sounder_raw.get("register_length", 11))
    sounder_snr = float(sounder_raw.get("snr_db", 30.0))

    if errors:
        raise ConfigError(errors)

    return ScenarioConfig(
        name=name, carrier_freq_hz=carrier, bandwidth_hz=bandwidth,
        sensing_mode=mode, tx=tx, rx=rx, targets=tuple(targets),
        background=background, pcf=pcf,
        scan_start_deg=start, scan_stop_deg=stop, scan_step_deg=step,
        seed=seed, outputs=raw.get("outputs", name),
        sounder_m=sounder_m, sounder_snr_db=sounder_snr, raw=raw,
    )
