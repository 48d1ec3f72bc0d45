"""Decision variables, AirComp MSE, edge rate, energy and constraint residuals."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .scenario import Scenario

FAMILIES = ("schedule", "edge_power", "aircomp_power", "mse", "data", "compute", "rate", "coupling")


@dataclass
class DecisionSet:
    """Full variable block for all slots.

    ``alpha``, ``l``, ``p`` are ``(K, I)``; ``b`` and ``psi`` are ``(J, I)``; ``eta`` is ``(I,)``.
    ``binary`` marks a schedule that is meant to be 0/1 rather than relaxed.
    """

    alpha: np.ndarray
    l: np.ndarray
    p: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    psi: np.ndarray | None = None
    binary: bool = True

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.l = np.asarray(self.l, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.b = np.asarray(self.b, dtype=complex)
        self.eta = np.asarray(self.eta, dtype=complex)
        if self.psi is not None:
            self.psi = np.asarray(self.psi, dtype=float)

    @classmethod
    def zeros(cls, J: int, K: int, I: int) -> "DecisionSet":
        return cls(
            alpha=np.zeros((K, I)), l=np.zeros((K, I)), p=np.zeros((K, I)),
            b=np.zeros((J, I), dtype=complex), eta=np.zeros(I, dtype=complex),
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(J, K, I)``."""
        return self.b.shape[0], self.alpha.shape[0], self.alpha.shape[1]

    def validate(self, J: int, K: int, I: int) -> None:
        expected = {
            "alpha": (K, I), "l": (K, I), "p": (K, I), "b": (J, I), "eta": (I,),
        }
        if self.psi is not None:
            expected["psi"] = (J, I)
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"decision field {name} has shape {got}, expected {shape}")

    def copy(self) -> "DecisionSet":
        return DecisionSet(
            self.alpha.copy(), self.l.copy(), self.p.copy(), self.b.copy(), self.eta.copy(),
            None if self.psi is None else self.psi.copy(), self.binary,
        )

    def schedule(self) -> np.ndarray:
        """Index of the scheduled edge UE per slot (argmax of ``alpha``)."""
        return np.argmax(self.alpha, axis=0)

    def to_dict(self) -> dict:
        out = {
            "alpha": self.alpha.tolist(), "l": self.l.tolist(), "p": self.p.tolist(),
            "b_re": self.b.real.tolist(), "b_im": self.b.imag.tolist(),
            "eta_re": self.eta.real.tolist(), "eta_im": self.eta.imag.tolist(),
            "binary": self.binary,
        }
        if self.psi is not None:
            out["psi"] = self.psi.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionSet":
        J = len(data["b_re"])
        I = len(data["eta_re"])
        K = len(data["alpha"])
        b = np.asarray(data["b_re"], dtype=float).reshape(J, I) + 1j * np.asarray(data["b_im"], dtype=float).reshape(J, I)
        return cls(
            alpha=np.asarray(data["alpha"], dtype=float).reshape(K, I),
            l=np.asarray(data["l"], dtype=float).reshape(K, I),
            p=np.asarray(data["p"], dtype=float).reshape(K, I),
            b=b,
            eta=np.asarray(data["eta_re"]) + 1j * np.asarray(data["eta_im"]),
            psi=None if data.get("psi") is None else np.asarray(data["psi"], dtype=float).reshape(J, I),
            binary=bool(data.get("binary", True)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "DecisionSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EnergyBreakdown:
    e_edge_tran: float
    e_aircomp_tran: float
    e_comp: float

    @property
    def total(self) -> float:
        return self.e_edge_tran + self.e_aircomp_tran + self.e_comp

    def to_dict(self) -> dict:
        return {**asdict(self), "total": self.total}


@dataclass
class FeasibilityReport:
    residuals: dict[str, float]
    tol: float
    feasible: bool = field(init=False)

    def __post_init__(self) -> None:
        self.feasible = all(r <= self.tol for r in self.residuals.values())

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.residuals, key=self.residuals.get)
        return name, self.residuals[name]

    def to_dict(self) -> dict:
        return {"residuals": dict(self.residuals), "tol": self.tol, "feasible": self.feasible}


def _channels(scenario: Scenario, d: DecisionSet):
    d.validate(scenario.config.num_aircomp_J, scenario.config.num_edge_K, scenario.config.num_slots_I)
    return scenario.h_aircomp, scenario.h_edge


def mse_all(scenario: Scenario, decisions: DecisionSet) -> np.ndarray:
    """Closed-form MSE of every slot, shape ``(I,)``."""
    h_a, h_e = _channels(scenario, decisions)
    eta = decisions.eta
    aggregation = np.sum(np.abs(eta * decisions.b * h_a - 1.0) ** 2, axis=0)
    noise = np.abs(eta) ** 2 * scenario.config.noise_power_sigma0sq
    interference = np.abs(eta) ** 2 * np.sum(decisions.alpha**2 * decisions.p * np.abs(h_e) ** 2, axis=0)
    return aggregation + noise + interference


def mse_analytic(scenario: Scenario, decisions: DecisionSet, i: int) -> float:
    return float(mse_all(scenario, decisions)[i])


def mse_monte_carlo(
    scenario: Scenario,
    decisions: DecisionSet,
    i: int,
    samples: int,
    rng: np.random.Generator,
    symbols: str = "gaussian",
    chunk: int = 200_000,
) -> float:
    """Empirical mean of ``|eta * y - sum_j s_j|^2`` over fresh signal and noise draws.

    Test oracle only. ``symbols`` is ``"gaussian"`` (unit-variance CN) or ``"bpsk"`` (+-1)
    for the user signals; receiver noise is always CN(0, sigma0^2).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    h_a, h_e = _channels(scenario, decisions)
    eta = decisions.eta[i]
    tx_a = h_a[:, i] * decisions.b[:, i]
    tx_e = decisions.alpha[:, i] * h_e[:, i] * np.sqrt(decisions.p[:, i])
    sigma = np.sqrt(scenario.config.noise_power_sigma0sq)
    n_users = tx_a.size + tx_e.size
    total, done = 0.0, 0
    while done < samples:
        n = min(chunk, samples - done)
        if symbols == "gaussian":
            sig = (rng.standard_normal((n, n_users)) + 1j * rng.standard_normal((n, n_users))) / np.sqrt(2)
        elif symbols == "bpsk":
            sig = rng.choice([-1.0, 1.0], size=(n, n_users)).astype(complex)
        else:
            raise ValueError(f"unknown symbol distribution {symbols!r}")
        noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        s_a, x_e = sig[:, : tx_a.size], sig[:, tx_a.size:]
        y = s_a @ tx_a + x_e @ tx_e + noise
        err = eta * y - s_a.sum(axis=1)
        total += float(np.sum(np.abs(err) ** 2))
        done += n
    return total / samples


def energy(config, decisions: DecisionSet) -> EnergyBreakdown:
    tau = config.slot_duration
    e_edge = float(np.sum(decisions.alpha * decisions.p) * tau)
    e_air = float(np.sum(np.abs(decisions.b) ** 2) * tau)
    cycles = config.cycles_per_bit_c0 * np.sum(decisions.alpha * decisions.l, axis=0)
    e_comp = float(np.sum(config.capacitance_gamma * cycles**3) / tau**2)
    return EnergyBreakdown(e_edge, e_air, e_comp)


def interference_plus_noise(scenario: Scenario, decisions: DecisionSet) -> np.ndarray:
    """AirComp interference seen by the edge link plus noise, per slot."""
    return (
        np.sum(np.abs(scenario.h_aircomp * decisions.b) ** 2, axis=0)
        + scenario.config.noise_power_sigma0sq
    )


def rate_capacity_all(scenario: Scenario, decisions: DecisionSet, p: np.ndarray | None = None) -> np.ndarray:
    """Bits each edge UE could push in each slot at power ``p`` (default: ``decisions.p``)."""
    cfg = scenario.config
    p = decisions.p if p is None else p
    sinr = p * np.abs(scenario.h_edge) ** 2 / interference_plus_noise(scenario, decisions)
    return cfg.slot_duration * cfg.bandwidth_B * np.log2(1.0 + sinr)


def rate_capacity_bits(scenario: Scenario, decisions: DecisionSet, k: int, i: int) -> float:
    return float(rate_capacity_all(scenario, decisions)[k, i])


def required_sinr(config, l: np.ndarray) -> np.ndarray:
    """SINR needed to carry ``l`` bits in one slot: ``2^(l I / (T B)) - 1``."""
    return np.expm1(np.log(2.0) * np.asarray(l) / (config.slot_duration * config.bandwidth_B))


def min_edge_power(scenario: Scenario, decisions: DecisionSet) -> np.ndarray:
    """Smallest edge power meeting the rate constraint with equality, shape ``(K, I)``."""
    need = required_sinr(scenario.config, decisions.l)
    return need * interference_plus_noise(scenario, decisions) / np.abs(scenario.h_edge) ** 2


def check_feasibility(config, scenario: Scenario, decisions: DecisionSet, tol: float = 1e-6) -> FeasibilityReport:
    """Worst normalized violation of every constraint family.

    Normalizations: powers by their budget, MSE by zeta, data by D_k, CPU load by
    ``(T/I) f_max``, rate by ``(T/I) B`` bits, scheduling coupling by the slot's bit cap.
    """
    J, K, I = config.num_aircomp_J, config.num_edge_K, config.num_slots_I
    decisions.validate(J, K, I)
    a, l, p = decisions.alpha, decisions.l, decisions.p
    tau = config.slot_duration

    col = a.sum(axis=0)
    binary_gap = np.minimum(np.abs(a), np.abs(a - 1.0))
    schedule = max(float(np.max(np.abs(col - 1.0))), float(np.max(binary_gap)))

    edge_power = float(np.max(np.maximum(0.0, np.maximum(p - config.p_max_edge, -p)))) / config.p_max_edge
    air_power = (
        float(np.max(np.maximum(0.0, np.abs(decisions.b) ** 2 - config.p_max_aircomp))) / config.p_max_aircomp
        if J else 0.0
    )
    mse = float(np.max(np.maximum(0.0, mse_all(scenario, decisions) - config.mse_threshold_zeta))) / config.mse_threshold_zeta

    d_scale = max(config.data_demand_Dk, 1.0)
    shortfall = np.maximum(0.0, config.data_demand_Dk - l.sum(axis=1))
    data = max(float(np.max(shortfall)), float(np.max(np.maximum(0.0, -l)))) / d_scale

    cap = tau * config.max_cpu_f
    compute = float(np.max(np.maximum(0.0, config.cycles_per_bit_c0 * np.sum(a * l, axis=0) - cap))) / cap

    rate = float(np.max(np.maximum(0.0, l - rate_capacity_all(scenario, decisions)))) / (tau * config.bandwidth_B)
    coupling = float(np.max(np.maximum(0.0, l - a * config.max_slot_bits))) / config.max_slot_bits

    residuals = {
        "schedule": schedule, "edge_power": edge_power, "aircomp_power": air_power, "mse": mse,
        "data": data, "compute": compute, "rate": rate, "coupling": coupling,
    }
    return FeasibilityReport(residuals, tol)
