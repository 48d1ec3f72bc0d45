"""Feasible initialization and the Omega -> Theta -> Xi block coordinate descent loop."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SystemConfig
from .kernel import INFEASIBLE
from .model import DecisionSet, EnergyBreakdown, FeasibilityReport, check_feasibility, energy, mse_all
from .scenario import INIT_STREAM, Scenario, stream
from .subsolvers import (
    DegenerateSlotError, eta_all, round_schedule, solve_block_omega, solve_block_theta, solve_block_xi,
    _min_power,
)

CONVERGED = "converged"
MAX_ITERS = "max-iters"
ABORTED = "infeasible"

FEAS_TOL = 1e-6


class InfeasibleInstanceError(RuntimeError):
    """No feasible point could be constructed; ``family`` names the binding constraint."""

    def __init__(self, family: str, message: str):
        super().__init__(f"{family}: {message}")
        self.family = family


@dataclass
class IterationRecord:
    iteration: int
    energy: EnergyBreakdown
    statuses: dict[str, str]
    feasibility: FeasibilityReport
    wall_ms: float
    accepted: bool = True

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "energy": self.energy.to_dict(),
            "statuses": dict(self.statuses),
            "residuals": self.feasibility.to_dict()["residuals"],
            "feasible": self.feasibility.feasible,
            "accepted": self.accepted,
            "wall_ms": self.wall_ms,
        }


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = ""
    method: str = "bcd"

    @property
    def iterations(self) -> int:
        """Completed passes, not counting the initial point."""
        return max(0, len(self.records) - 1)

    def totals(self) -> np.ndarray:
        return np.array([r.energy.total for r in self.records])

    def to_jsonl(self, path: str | Path | None = None, timing: bool = True) -> str:
        lines = []
        for r in self.records:
            rec = {"method": self.method, **r.to_dict()}
            if not timing:
                rec["wall_ms"] = 0.0
            lines.append(json.dumps(rec, sort_keys=True))
        lines.append(json.dumps({"method": self.method, "termination": self.termination}, sort_keys=True))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _report(config, scenario, d) -> FeasibilityReport:
    return check_feasibility(config, scenario, d, tol=FEAS_TOL)


def initialize_feasible(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None,
                        max_halvings: int = 60) -> DecisionSet:
    """Round-robin schedule, equal data split, randomized channel-inversion ``b``.

    Per slot ``b_j = c u_j conj(h_j) / |h_j|^2`` with ``u_j ~ U(0.8, 1)``, so received
    amplitudes are ``c u_j``. ``c`` starts at the largest value the AirComp budget allows,
    is halved until the edge user's least rate-meeting power fits its budget, then keeps
    halving while the MSE at the optimal ``eta`` stays under ``zeta``.
    """
    rng = stream(config.rng_seed, INIT_STREAM) if rng is None else rng
    J, K, I = config.num_aircomp_J, config.num_edge_K, config.num_slots_I
    D = config.data_demand_Dk
    d = DecisionSet.zeros(J, K, I)
    d.alpha[np.arange(I) % K, np.arange(I)] = 1.0
    counts = d.alpha.sum(axis=1)
    if np.any(counts == 0):
        raise InfeasibleInstanceError("schedule", f"I={I} slots cannot cover K={K} edge users")
    d.l = d.alpha * (D / counts)[:, None]
    if np.any(config.cycles_per_bit_c0 * d.l.sum(axis=0) > config.slot_duration * config.max_cpu_f * (1 + 1e-12)):
        raise InfeasibleInstanceError("compute", "equal data split exceeds the BS CPU capacity per slot")

    h = scenario.h_aircomp
    zeta = config.mse_threshold_zeta
    k_of = np.argmax(d.alpha, axis=0)
    for i in range(I):
        sl = (slice(None), i)
        one = np.zeros(K)
        one[k_of[i]] = 1.0
        if J == 0:
            d.p[:, i] = one * _slot_power(config, scenario, d, i)
            if d.p[k_of[i], i] > config.p_max_edge:
                raise InfeasibleInstanceError("edge_power", f"slot {i} needs more than the edge power budget")
            continue
        u = rng.uniform(0.8, 1.0, size=J)
        g = np.abs(h[sl])
        direction = u * np.conj(h[sl]) / g**2
        c = float(np.sqrt(config.p_max_aircomp) * np.min(g / u))
        found, last_ok = False, None
        for _ in range(max_halvings):
            d.b[sl] = c * direction
            p = _slot_power(config, scenario, d, i)
            d.p[:, i] = one * p
            if p <= config.p_max_edge:
                d.eta = eta_all(scenario, d)
                if mse_all(scenario, d)[i] <= zeta:
                    found, last_ok = True, c
                elif found:
                    break
                else:
                    raise InfeasibleInstanceError(
                        "mse", f"slot {i}: MSE threshold unreachable within the power budgets")
            elif found:
                break
            c *= 0.5
        if last_ok is None:
            raise InfeasibleInstanceError("edge_power", f"slot {i}: rate needs more than the edge power budget")
        d.b[sl] = last_ok * direction
        d.p[:, i] = one * _slot_power(config, scenario, d, i)
    d.eta = eta_all(scenario, d)
    d.psi = np.abs(d.b) ** 2
    rep = _report(config, scenario, d)
    if not rep.feasible:
        name, value = rep.worst
        raise InfeasibleInstanceError(name, f"initial point violates {name} by {value:.3g}")
    return d


def _slot_power(config, scenario, d, i) -> float:
    k = int(np.argmax(d.alpha[:, i]))
    return float(_min_power(config, scenario, d)[k, i])


@dataclass
class _Pass:
    decisions: DecisionSet | None
    statuses: dict[str, str]


def _polish(config, scenario, d, freeze_b, freeze_l, statuses) -> DecisionSet | None:
    """Omega then Theta on a binary schedule; ``None`` if either step is infeasible."""
    om = solve_block_omega(config, scenario, d, update_l=not freeze_l)
    statuses["omega"] = om.status
    if om.status == INFEASIBLE:
        return None
    th = solve_block_theta(config, scenario, om.decisions, freeze_b=freeze_b)
    statuses["theta"] = th.status
    if th.status == INFEASIBLE:
        return None
    out = th.decisions
    try:
        out.eta = eta_all(scenario, out)
    except DegenerateSlotError:
        return None
    return out if _report(config, scenario, out).feasible else None


def _candidate_fill(config, scenario, d) -> DecisionSet:
    """Give every unscheduled (k, i) a plausible load and power so Xi can compare users."""
    c = d.copy()
    counts = np.maximum(np.count_nonzero(d.alpha > 0, axis=1), 1)
    mean_load = d.l.sum(axis=1) / counts
    empty = d.alpha <= 0
    c.l = np.where(empty, mean_load[:, None], d.l)
    c.p = np.where(empty, np.minimum(_min_power(config, scenario, c), config.p_max_edge), d.p)
    return c


def _xi_step(config, scenario, d, freeze_b, statuses) -> DecisionSet | None:
    xi = solve_block_xi(config, scenario, _candidate_fill(config, scenario, d))
    statuses["xi"] = xi.status
    if xi.status == INFEASIBLE:
        return None
    r = round_schedule(config, scenario, xi.decisions)
    if np.array_equal(r.alpha, d.alpha):
        return None
    if np.any(r.alpha.sum(axis=1) == 0) and config.data_demand_Dk > 0:
        statuses["round"] = "unrepairable"
        return None
    r.p = np.where(r.alpha > 0, r.p, 0.0)
    fixed = _polish(config, scenario, r, freeze_b, False, statuses)
    statuses["round"] = "repaired" if fixed is not None else "unrepairable"
    return fixed


def bcd_loop(
    config: SystemConfig,
    scenario: Scenario,
    d0: DecisionSet,
    *,
    freeze_b: bool = False,
    freeze_l: bool = False,
    freeze_alpha: bool = False,
    method: str = "bcd",
) -> tuple[DecisionSet, IterationTrace]:
    """Cyclic block passes from the feasible ``d0`` with some blocks optionally frozen.

    A pass runs Omega (``eta`` and ``l``), Theta (``b``, ``p``), then Xi plus rounding and a
    repair Omega/Theta whenever the rounded schedule differs. Every pass result is checked
    for feasibility and kept only if its total energy does not exceed the incumbent's, so
    the recorded energy sequence is non-increasing by construction.
    """
    trace = IterationTrace(method=method)
    t0 = time.perf_counter()
    best = d0.copy()
    e_best = energy(config, best)
    trace.records.append(IterationRecord(0, e_best, {}, _report(config, scenario, best), 0.0))
    reason = MAX_ITERS
    for t in range(1, config.bcd_max_iters + 1):
        statuses: dict[str, str] = {}
        accepted = False
        prev = e_best.total
        cand = _polish(config, scenario, best, freeze_b, freeze_l, statuses)
        if cand is not None and energy(config, cand).total <= e_best.total:
            best, e_best, accepted = cand, energy(config, cand), True
        if not freeze_alpha:
            cand = _xi_step(config, scenario, best, freeze_b, statuses)
            if cand is not None and energy(config, cand).total < e_best.total:
                best, e_best, accepted = cand, energy(config, cand), True
        trace.records.append(IterationRecord(
            t, e_best, statuses, _report(config, scenario, best),
            (time.perf_counter() - t0) * 1e3, accepted,
        ))
        if abs(prev - e_best.total) <= config.bcd_epsilon0 * abs(prev):
            reason = CONVERGED
            break
    trace.termination = reason
    best.binary = True
    return best, trace


def run_bcd(config: SystemConfig, scenario: Scenario, rng: np.random.Generator | None = None):
    """Full algorithm from a feasible random start. Raises ``InfeasibleInstanceError``."""
    d0 = initialize_feasible(config, scenario, rng)
    return bcd_loop(config, scenario, d0)


@dataclass(frozen=True)
class ComplexityReport:
    omega: float
    theta: float
    xi: float
    iterations: int

    @property
    def per_iteration(self) -> float:
        return self.omega + self.theta + self.xi

    @property
    def total(self) -> float:
        return self.iterations * self.per_iteration

    def to_dict(self) -> dict:
        return {"omega": self.omega, "theta": self.theta, "xi": self.xi, "iterations": self.iterations,
                "per_iteration": self.per_iteration, "total": self.total}


def complexity_estimate(config: SystemConfig, iterations: int = 1) -> ComplexityReport:
    """Interior-point operation counts ``n^3.5`` for the three block problem sizes."""
    I, J, K = config.num_slots_I, config.num_aircomp_J, config.num_edge_K
    return ComplexityReport(
        float(I * (1 + K)) ** 3.5, float(I * (2 * J + K)) ** 3.5, float(I * K) ** 3.5, iterations,
    )
