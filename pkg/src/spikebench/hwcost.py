"""Per-channel power, energy, area and latency roll-up.

The model is parametric: component powers, areas and latencies come from a
calibration file, and the run supplies crossbar telemetry. Energy is always
``power * latency``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

STAGES = ("a", "b", "c", "d", "e")
STAGE_NAMES = {
    "a": "bandpass filtering",
    "b": "spike detection",
    "c": "alignment",
    "d": "feature extraction",
    "e": "classification",
}
TELEMETRY_FIELDS = ("tile_activations", "vmm_count", "mapped_tiles")


@dataclass
class StageCost:
    power_w: float = 0.0
    latency_s: float = 0.0
    area_m2: float = 0.0


@dataclass
class HwParams:
    tile_read_power_w: float = 0.0
    tile_area_m2: float = 0.0
    periph_power_w: float = 0.0
    periph_area_m2: float = 0.0
    vmm_latency_s: float = 0.0
    stage_overheads: dict = field(default_factory=lambda: {s: StageCost() for s in STAGES})

    def __post_init__(self):
        for name in ("tile_read_power_w", "tile_area_m2", "periph_power_w", "periph_area_m2", "vmm_latency_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for stage, cost in self.stage_overheads.items():
            if min(cost.power_w, cost.latency_s, cost.area_m2) < 0:
                raise ValueError(f"stage {stage} has a negative cost")

    @classmethod
    def from_dict(cls, d):
        try:
            stages = {s: StageCost(**v) for s, v in d.get("stage_overheads", {}).items()}
            return cls(
                tile_read_power_w=float(d["tile_read_power_w"]),
                tile_area_m2=float(d["tile_area_m2"]),
                periph_power_w=float(d["periph_power_w"]),
                periph_area_m2=float(d["periph_area_m2"]),
                vmm_latency_s=float(d["vmm_latency_s"]),
                stage_overheads=stages,
            )
        except KeyError as exc:
            raise ConfigError(f"hardware calibration lacks field {exc.args[0]!r}") from None

    def to_dict(self):
        return {
            "tile_read_power_w": self.tile_read_power_w,
            "tile_area_m2": self.tile_area_m2,
            "periph_power_w": self.periph_power_w,
            "periph_area_m2": self.periph_area_m2,
            "vmm_latency_s": self.vmm_latency_s,
            "stage_overheads": {
                s: {"power_w": c.power_w, "latency_s": c.latency_s, "area_m2": c.area_m2}
                for s, c in self.stage_overheads.items()
            },
        }


@dataclass
class HwReport:
    """Per-channel figures in SI units; ``None`` marks a value not reported."""

    power_w_per_ch: float | None
    energy_j_per_ch: float | None
    area_m2_per_ch: float | None
    latency_s_per_ch: float | None

    FIELDS = ("power_w_per_ch", "energy_j_per_ch", "area_m2_per_ch", "latency_s_per_ch")
    # serialized key, multiplier from SI, display label
    UNITS = {
        "power_w_per_ch": ("power_mw_per_ch", 1e3, "Power (mW/Ch)"),
        "energy_j_per_ch": ("energy_mj_per_ch", 1e3, "Energy (mJ/Ch)"),
        "area_m2_per_ch": ("area_mm2_per_ch", 1e6, "Area (mm²/Ch)"),
        "latency_s_per_ch": ("latency_ms_per_ch", 1e3, "Latency (ms/Ch)"),
    }

    def to_dict(self):
        out = {}
        for f in self.FIELDS:
            key, mult, _ = self.UNITS[f]
            v = getattr(self, f)
            # 10 significant digits keeps serialized values free of float dust
            out[key] = None if v is None else float(f"{v * mult:.10g}")
        return out

    @classmethod
    def from_dict(cls, d):
        kwargs = {}
        for f in cls.FIELDS:
            key, mult, _ = cls.UNITS[f]
            if key not in d:
                raise ConfigError(f"hardware report lacks field {key!r}")
            kwargs[f] = None if d[key] is None else d[key] / mult
        return cls(**kwargs)


def estimate(params: HwParams, telemetry: dict, workload: dict) -> HwReport:
    """Roll crossbar telemetry and component costs up to per-channel figures.

    * latency: stage latencies plus ``vmm_count * vmm_latency_s``
    * power: tile read power weighted by the mean number of tiles active per
      VMM, plus peripheral and stage powers
    * area: mapped tiles, periphery and stage areas
    """
    missing = [f for f in TELEMETRY_FIELDS if f not in telemetry]
    if missing:
        raise ConfigError(f"telemetry lacks field(s) {', '.join(missing)}")
    n_ch = int(workload.get("n_channels", 1))
    if n_ch < 1:
        raise ValueError("n_channels must be >= 1")
    vmm_count = telemetry["vmm_count"]
    active = telemetry["tile_activations"] / vmm_count if vmm_count else 0.0
    stages = params.stage_overheads.values()

    latency = sum(s.latency_s for s in stages) + vmm_count * params.vmm_latency_s
    power = active * params.tile_read_power_w + params.periph_power_w + sum(s.power_w for s in stages)
    area = telemetry["mapped_tiles"] * params.tile_area_m2 + params.periph_area_m2 + sum(s.area_m2 for s in stages)

    power /= n_ch
    latency /= n_ch
    area /= n_ch
    return HwReport(power_w_per_ch=power, energy_j_per_ch=power * latency, area_m2_per_ch=area, latency_s_per_ch=latency)


def compare(a: HwReport, b: HwReport) -> dict:
    """Elementwise ``a / b``. Absent inputs or a zero divisor give an absent ratio."""
    out = {}
    for f in HwReport.FIELDS:
        va, vb = getattr(a, f), getattr(b, f)
        if va is None or vb is None:
            out[f] = {"ratio": None, "reason": "not reported"}
        elif vb == 0:
            out[f] = {"ratio": None, "reason": "division by zero"}
        else:
            out[f] = {"ratio": va / vb, "reason": None}
    return out


def calibrate_latency(params: HwParams, telemetry: dict, workload: dict, target_latency_s: float, stage: str = "e"):
    """Set ``stage``'s latency so the reference workload hits ``target_latency_s`` per channel."""
    n_ch = int(workload.get("n_channels", 1))
    others = sum(c.latency_s for s, c in params.stage_overheads.items() if s != stage)
    needed = target_latency_s * n_ch - others - telemetry["vmm_count"] * params.vmm_latency_s
    if needed < 0:
        raise ValueError("target latency is below the fixed latency budget")
    params.stage_overheads[stage] = StageCost(
        power_w=params.stage_overheads[stage].power_w, latency_s=needed, area_m2=params.stage_overheads[stage].area_m2
    )
    return params


def _open_calibration(path_or_name):
    p = Path(path_or_name)
    if p.exists():
        return json.loads(p.read_text())
    name = p.name if p.suffix else f"{p.name}.json"
    try:
        return json.loads((resources.files("spikebench") / "data" / name).read_text())
    except FileNotFoundError:
        raise ConfigError(f"hardware calibration {path_or_name!r} not found") from None


def load_params(path_or_name="paper_table3") -> HwParams:
    """Load HwParams from a JSON file, or a bundled calibration by name."""
    return HwParams.from_dict(_open_calibration(path_or_name)["params"])


def load_report(path_or_name) -> HwReport:
    """Load a published per-channel report (e.g. ``do2018_cmos``)."""
    return HwReport.from_dict(_open_calibration(path_or_name)["report"])
