"""Seeded node placement and per-slot Rician channel generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SystemConfig

AIRCOMP = "aircomp"
EDGE = "edge"

# spawn-key prefixes separating independent random streams of one seed
_PLACEMENT_STREAM = 0
_CHANNEL_STREAM = 1
INIT_STREAM = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 generator for ``(seed, key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class Scenario:
    """Fixed topology plus channel gains ``channels[s, i]`` for UE ``s`` in slot ``i``.

    UEs ``0..J-1`` are AirComp users, ``J..J+K-1`` edge users.
    """

    config: SystemConfig
    bs_position: np.ndarray
    ue_positions: np.ndarray
    ue_role: tuple[str, ...]
    channels: np.ndarray

    def __post_init__(self) -> None:
        J, K = self.config.num_aircomp_J, self.config.num_edge_K
        S, I = J + K, self.config.num_slots_I
        if self.ue_positions.shape != (S, 2):
            raise ValueError(f"expected {S} UE positions, got {self.ue_positions.shape}")
        if self.ue_role != (AIRCOMP,) * J + (EDGE,) * K:
            raise ValueError("roles must list J AirComp users followed by K edge users")
        if self.channels.shape != (S, I):
            raise ValueError(f"channels must have shape {(S, I)}, got {self.channels.shape}")
        if np.any(self.distances <= 0):
            raise ValueError("every UE must be at positive distance from the BS")

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.ue_positions - self.bs_position, axis=1)

    @property
    def h_aircomp(self) -> np.ndarray:
        return self.channels[: self.config.num_aircomp_J]

    @property
    def h_edge(self) -> np.ndarray:
        return self.channels[self.config.num_aircomp_J:]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "bs_position": self.bs_position.tolist(),
            "ue_positions": self.ue_positions.tolist(),
            "ue_role": list(self.ue_role),
            "channels_re": self.channels.real.tolist(),
            "channels_im": self.channels.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            config=SystemConfig.from_dict(data["config"]),
            bs_position=np.asarray(data["bs_position"], dtype=float),
            ue_positions=np.asarray(data["ue_positions"], dtype=float).reshape(-1, 2),
            ue_role=tuple(data["ue_role"]),
            channels=np.asarray(data["channels_re"], dtype=float)
            + 1j * np.asarray(data["channels_im"], dtype=float),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_placement(config: SystemConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """BS at the square's center, UEs uniform over ``[0, area_side]^2``."""
    side = config.area_side
    bs = np.array([side / 2, side / 2])
    ues = rng.uniform(0.0, side, size=(config.num_users, 2))
    roles = (AIRCOMP,) * config.num_aircomp_J + (EDGE,) * config.num_edge_K
    return bs, ues, roles


def rician_channel(d, config: SystemConfig, rng: np.random.Generator, size=None):
    """Rician gain ``sqrt(beta0/d^2) (sqrt(k/(k+1)) h_los + sqrt(1/(k+1)) h_nlos)``.

    ``h_los`` is ``1+0j``; ``h_nlos`` is CN(0, 1). ``kappa = inf`` gives the pure LoS gain.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    kappa = config.rician_kappa
    shape = d.shape if size is None else np.broadcast_shapes(d.shape, tuple(np.atleast_1d(size)))
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if np.isinf(kappa):
        fading = np.ones(shape, dtype=complex)
    else:
        fading = np.sqrt(kappa / (kappa + 1.0)) + np.sqrt(1.0 / (kappa + 1.0)) * nlos
    gain = np.sqrt(config.pathloss_ref_beta0 / d**2) * fading
    return gain if gain.ndim else complex(gain)


def build_scenario(config: SystemConfig, seed: int | None = None) -> Scenario:
    """Placement plus independent per-slot channels, reproducible from ``seed``.

    UE ``s`` draws its ``I`` slot gains from its own stream, so a UE's channels do not
    depend on how many other UEs exist or which role it has.
    """
    seed = config.rng_seed if seed is None else seed
    bs, ues, roles = generate_placement(config, stream(seed, _PLACEMENT_STREAM))
    d = np.linalg.norm(ues - bs, axis=1)
    I = config.num_slots_I
    channels = np.empty((config.num_users, I), dtype=complex)
    for s in range(config.num_users):
        channels[s] = rician_channel(d[s], config, stream(seed, _CHANNEL_STREAM, s), size=I)
    return Scenario(config, bs, ues, roles, channels)
