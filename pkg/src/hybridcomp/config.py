"""System parameters, named presets and the YAML config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for invalid parameter values or malformed config files."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All physical and algorithmic parameters, in SI units."""

    horizon_T: float = 200.0
    num_slots_I: int = 200
    bandwidth_B: float = 5e6
    data_demand_Dk: float = 6e6
    cycles_per_bit_c0: float = 1e3
    max_cpu_f: float = 6e9
    capacitance_gamma: float = 1e-27
    noise_power_sigma0sq: float = dbm_to_watt(-120.0)
    rician_kappa: float = 15.0
    pathloss_ref_beta0: float = db_to_linear(-60.0)
    p_max_edge: float = 1.0
    p_max_aircomp: float = 1.0
    mse_threshold_zeta: float = 2.0
    area_side: float = 1000.0
    num_aircomp_J: int = 10
    num_edge_K: int = 10
    bcd_epsilon0: float = 1e-3
    bcd_max_iters: int = 50
    solver_feas_tol: float = 1e-8
    solver_opt_tol: float = 1e-6
    rng_seed: int = 0
    conjugate_phase: bool = False

    def __post_init__(self) -> None:
        positive = (
            "horizon_T", "bandwidth_B", "cycles_per_bit_c0", "max_cpu_f",
            "capacitance_gamma", "noise_power_sigma0sq", "pathloss_ref_beta0",
            "p_max_edge", "p_max_aircomp", "mse_threshold_zeta", "area_side",
            "bcd_epsilon0", "solver_feas_tol", "solver_opt_tol",
        )
        for name in positive:
            value = getattr(self, name)
            if not (value > 0):
                raise ConfigError(f"{name} must be strictly positive, got {value!r}")
        if self.data_demand_Dk < 0:
            raise ConfigError("data_demand_Dk must be non-negative")
        if self.rician_kappa < 0:
            raise ConfigError("rician_kappa must be non-negative")
        if self.num_slots_I < 1:
            raise ConfigError("num_slots_I must be >= 1")
        if self.num_edge_K < 1:
            raise ConfigError("num_edge_K must be >= 1")
        if self.num_aircomp_J < 0:
            raise ConfigError("num_aircomp_J must be >= 0")
        if self.bcd_max_iters < 1:
            raise ConfigError("bcd_max_iters must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must fit in an unsigned 64-bit integer")

    @property
    def slot_duration(self) -> float:
        return self.horizon_T / self.num_slots_I

    @property
    def num_users(self) -> int:
        return self.num_aircomp_J + self.num_edge_K

    @property
    def max_slot_bits(self) -> float:
        """Bits the BS can process in one slot at full CPU speed."""
        return self.slot_duration * self.max_cpu_f / self.cycles_per_bit_c0

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base: "SystemConfig | None" = None) -> "SystemConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = (base or cls()).to_dict()
        for key, raw in data.items():
            kind = known[key].type
            try:
                if kind == "int":
                    if isinstance(raw, float) and not raw.is_integer():
                        raise ValueError(raw)
                    values[key] = int(raw)
                elif kind == "bool":
                    if not isinstance(raw, bool):
                        raise ValueError(raw)
                    values[key] = raw
                else:
                    values[key] = float(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**values)


PAPER = SystemConfig()

# Table-I physics at a size that solves in about a second per run.
DESK = SystemConfig(
    horizon_T=20.0,
    num_slots_I=20,
    data_demand_Dk=0.6e6,
    num_aircomp_J=5,
    num_edge_K=5,
)

PRESETS = {"paper": PAPER, "desk": DESK}


def get_preset(name: str) -> SystemConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a YAML mapping of SystemConfig field names onto ``base``."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping of parameter names to values")
    return SystemConfig.from_dict(data, base=base)


def dump_config(config: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
