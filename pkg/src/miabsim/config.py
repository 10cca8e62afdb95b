"""Run configuration: loading, defaults and validation."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any


class ParseError(ValueError):
    """Config file is not well-formed JSON or not a flat object."""


class ValidationError(ValueError):
    """A config value violates an invariant. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ScenarioKind(str, enum.Enum):
    ONLY_MACROS = "only_macros"
    MACROS_PICOS = "macros_picos"
    MIAB = "miab"


class AdmissionPolicy(str, enum.Enum):
    NONE = "none"
    RSRP_DWELL = "rsrp_dwell"


_KIND_ALIASES = {
    "onlymacros": ScenarioKind.ONLY_MACROS,
    "only_macros": ScenarioKind.ONLY_MACROS,
    "macros": ScenarioKind.ONLY_MACROS,
    "macrospicos": ScenarioKind.MACROS_PICOS,
    "macros_picos": ScenarioKind.MACROS_PICOS,
    "picos": ScenarioKind.MACROS_PICOS,
    "miab": ScenarioKind.MIAB,
}


def parse_scenario_kind(value: Any) -> ScenarioKind:
    if isinstance(value, ScenarioKind):
        return value
    key = str(value).strip().lower().replace("-", "_")
    if key in _KIND_ALIASES:
        return _KIND_ALIASES[key]
    raise ValidationError("scenario_kind", f"unknown scenario {value!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_kind: ScenarioKind
    passenger_fraction: float
    cbr_packet_bits: int
    seed: int = 0
    duration_slots: int = 40_000
    num_buses: int = 6
    total_ues: int = 72
    cbr_interarrival_slots: int = 4
    carrier_hz: float = 28e9
    bandwidth_hz: float = 50e6
    scs_hz: float = 60e3
    num_rbs: int = 66
    slot_s: float = 0.25e-3
    handover_hysteresis_db: float = 0.0
    handover_eval_period_slots: int = 40
    pico_ring_radius_m: float = 180.0
    # extension knobs, same flat namespace
    warmup_slots: int = 20
    channel_refresh_slots: int = 10
    backhaul_coherence_slots: int = 10
    preemptive_bsr: bool = True
    admission_policy: AdmissionPolicy = AdmissionPolicy.NONE
    admission_min_rsrp_dbm: float = -90.0
    admission_min_dwell_s: float = 1.0
    admission_radius_m: float = 30.0
    migration_discard_dl: bool = False
    mcs_table: str | None = None

    @property
    def num_passengers(self) -> int:
        return int(round(self.passenger_fraction * self.total_ues))

    @property
    def num_pedestrians(self) -> int:
        return self.total_ues - self.num_passengers

    @property
    def passengers_per_bus(self) -> int:
        return self.num_passengers // self.num_buses

    @property
    def rb_bandwidth_hz(self) -> float:
        return 12 * self.scs_hz

    def validate(self) -> "ScenarioConfig":
        validate_config(self)
        return self

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        return out

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes).validate()


KNOWN_KEYS = tuple(f.name for f in fields(ScenarioConfig))
REQUIRED_KEYS = ("scenario_kind", "passenger_fraction", "cbr_packet_bits")
MAX_SEATS_PER_BUS = 20


def _positive(key: str, value, allow_zero: bool = False):
    if value < 0 or (value == 0 and not allow_zero):
        raise ValidationError(key, f"must be {'non-negative' if allow_zero else 'positive'}, got {value}")


def validate_config(cfg: ScenarioConfig) -> None:
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed", "must be a 64-bit unsigned integer")
    for key in ("num_buses", "total_ues", "cbr_packet_bits", "cbr_interarrival_slots",
                "num_rbs", "handover_eval_period_slots", "channel_refresh_slots",
                "backhaul_coherence_slots"):
        _positive(key, getattr(cfg, key))
    for key in ("carrier_hz", "bandwidth_hz", "scs_hz", "slot_s", "pico_ring_radius_m"):
        _positive(key, getattr(cfg, key))
    _positive("warmup_slots", cfg.warmup_slots, allow_zero=True)
    _positive("handover_hysteresis_db", cfg.handover_hysteresis_db, allow_zero=True)
    if cfg.duration_slots < 10:
        raise ValidationError("duration_slots", "must cover at least one 10-slot TDD frame")
    if cfg.warmup_slots >= cfg.duration_slots:
        raise ValidationError("warmup_slots", "must be shorter than duration_slots")
    if not 0.0 <= cfg.passenger_fraction <= 1.0:
        raise ValidationError("passenger_fraction", "must lie in [0, 1]")
    exact = cfg.passenger_fraction * cfg.total_ues
    if abs(exact - round(exact)) > 1e-9:
        raise ValidationError(
            "passenger_fraction",
            f"{cfg.passenger_fraction} x {cfg.total_ues} UEs = {exact:g} passengers is not an integer",
        )
    if cfg.num_passengers % cfg.num_buses:
        per_bus = exact / cfg.num_buses
        raise ValidationError(
            "passenger_fraction",
            f"{cfg.num_passengers} passengers do not split evenly over {cfg.num_buses} buses ({per_bus:g} per bus)",
        )
    if cfg.num_passengers and cfg.passengers_per_bus > MAX_SEATS_PER_BUS:
        raise ValidationError("passenger_fraction", f"more than {MAX_SEATS_PER_BUS} passengers per bus")
    if cfg.num_rbs * 12 * cfg.scs_hz > cfg.bandwidth_hz:
        raise ValidationError("num_rbs", "num_rbs x 12 x scs_hz exceeds bandwidth_hz")
    if not isinstance(cfg.scenario_kind, ScenarioKind):
        raise ValidationError("scenario_kind", f"unknown scenario {cfg.scenario_kind!r}")
    if not isinstance(cfg.admission_policy, AdmissionPolicy):
        raise ValidationError("admission_policy", f"unknown policy {cfg.admission_policy!r}")


_INT_KEYS = {f.name for f in fields(ScenarioConfig) if f.type in ("int", int)}
_FLOAT_KEYS = {f.name for f in fields(ScenarioConfig) if f.type in ("float", float)}
_BOOL_KEYS = {f.name for f in fields(ScenarioConfig) if f.type in ("bool", bool)}


def _coerce(key: str, value: Any) -> Any:
    if key == "scenario_kind":
        return parse_scenario_kind(value)
    if key == "admission_policy":
        try:
            return AdmissionPolicy(str(value).lower())
        except ValueError:
            raise ValidationError(key, f"unknown policy {value!r}") from None
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ValidationError(key, f"expected a boolean, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ValidationError(key, f"expected an integer, got {value!r}")
        return int(value)
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(key, f"expected a number, got {value!r}")
        return float(value)
    if key == "mcs_table":
        return None if value is None else str(value)
    return value


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build a validated config from a flat mapping; unknown keys are rejected."""
    unknown = sorted(set(data) - set(KNOWN_KEYS))
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    for key in REQUIRED_KEYS:
        if key not in data:
            raise ValidationError(key, "missing required key")
    kwargs = {k: _coerce(k, v) for k, v in data.items()}
    cfg = ScenarioConfig(**kwargs)
    validate_config(cfg)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            raise ParseError(f"{path}: key {key!r} must hold a scalar")
    return config_from_dict(data)
