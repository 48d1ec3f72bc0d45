"""Comparison schemes that freeze one decision block and optimize the rest.

* equal offloading: round-robin schedule and equal per-slot bits stay fixed; ``eta``,
  ``b`` and ``p`` are optimized.
* channel inversion: ``b`` is fixed by a channel-inversion rule; ``eta``, ``l``, ``alpha``
  and ``p`` are optimized.
"""

from __future__ import annotations

import numpy as np

from .bcd import InfeasibleInstanceError, bcd_loop, initialize_feasible
from .config import SystemConfig
from .model import DecisionSet, EnergyBreakdown, check_feasibility, energy, mse_all
from .scenario import INIT_STREAM, Scenario, stream
from .subsolvers import _min_power, eta_all

METHODS = ("bcd", "equal", "inversion")


def equal_offloading_traced(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None):
    d0 = initialize_feasible(config, scenario, rng)
    return bcd_loop(config, scenario, d0, freeze_l=True, freeze_alpha=True, method="equal")


def equal_offloading(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None):
    d, _ = equal_offloading_traced(config, scenario, rng)
    return d, energy(config, d)


def inversion_scaling(config: SystemConfig, h: np.ndarray) -> np.ndarray:
    """``b_j = sqrt(P_A) min_l|h_l| / sqrt(|h_j|^2 + sigma^2) * phase_j`` for every slot.

    ``phase_j`` is ``h_j/|h_j|`` as the rule is usually written, or its conjugate when
    ``config.conjugate_phase`` is set (which co-phases the received signals).
    """
    g = np.abs(h)
    if h.shape[0] == 0:
        return np.zeros_like(h, dtype=complex)
    amp = np.sqrt(config.p_max_aircomp) * g.min(axis=0)[None, :] / np.sqrt(g**2 + config.noise_power_sigma0sq)
    phase = h / g
    if config.conjugate_phase:
        phase = np.conj(phase)
    return amp * phase


def _inversion_start(config: SystemConfig, scenario: Scenario) -> DecisionSet:
    J, K, I = config.num_aircomp_J, config.num_edge_K, config.num_slots_I
    d = DecisionSet.zeros(J, K, I)
    d.alpha[np.arange(I) % K, np.arange(I)] = 1.0
    counts = d.alpha.sum(axis=1)
    if np.any(counts == 0):
        raise InfeasibleInstanceError("schedule", f"I={I} slots cannot cover K={K} edge users")
    d.l = d.alpha * (config.data_demand_Dk / counts)[:, None]
    d.b = inversion_scaling(config, scenario.h_aircomp)
    d.psi = np.abs(d.b) ** 2
    d.p = np.where(d.alpha > 0, _min_power(config, scenario, d), 0.0)
    d.eta = eta_all(scenario, d)
    rep = check_feasibility(config, scenario, d, tol=1e-6)
    if not rep.feasible:
        name, value = rep.worst
        if name == "mse":
            worst = int(np.argmax(mse_all(scenario, d)))
            raise InfeasibleInstanceError(
                "mse", f"fixed inversion scaling misses the MSE threshold (slot {worst}, excess {value:.3g} of zeta)")
        raise InfeasibleInstanceError(name, f"inversion start violates {name} by {value:.3g}")
    return d


def channel_inversion_traced(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None):
    # rng accepted for a uniform signature; the rule itself is deterministic
    d0 = _inversion_start(config, scenario)
    return bcd_loop(config, scenario, d0, freeze_b=True, method="inversion")


def channel_inversion(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None):
    d, _ = channel_inversion_traced(config, scenario, rng)
    return d, energy(config, d)


def run_method(method: str, config: SystemConfig, scenario: Scenario, seed: int | None = None):
    """``(DecisionSet, IterationTrace)`` for ``method`` in ``METHODS``; the init stream comes from ``seed``."""
    from .bcd import run_bcd

    seed = config.rng_seed if seed is None else seed
    rng = stream(seed, INIT_STREAM)
    if method == "bcd":
        d, trace = run_bcd(config, scenario, rng)
        trace.method = "bcd"
        return d, trace
    if method == "equal":
        return equal_offloading_traced(config, scenario, rng)
    if method == "inversion":
        return channel_inversion_traced(config, scenario, rng)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


__all__ = [
    "METHODS", "EnergyBreakdown", "channel_inversion", "channel_inversion_traced", "equal_offloading",
    "equal_offloading_traced", "inversion_scaling", "run_method",
]
