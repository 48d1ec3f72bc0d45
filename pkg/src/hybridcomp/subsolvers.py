"""Block solvers for the three variable groups and max-value schedule rounding.

* Omega: receive scaling ``eta`` (closed form) and offloaded bits ``l``.
* Theta: AirComp Tx scaling ``b`` (with slack ``psi``) and edge powers ``p``.
* Xi: relaxed edge scheduling ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .kernel import INFEASIBLE, OPTIMAL, SUBOPTIMAL, ConvexProgram, convex_kernel_minimize
from .model import (
    DecisionSet, energy, interference_plus_noise, mse_all, rate_capacity_all, required_sinr,
)
from .scenario import Scenario

_STATUS_RANK = {OPTIMAL: 0, SUBOPTIMAL: 1, INFEASIBLE: 2}


class DegenerateSlotError(ValueError):
    """The slot MSE does not depend on eta (no signal, no interference, no noise)."""


@dataclass
class SolveOutcome:
    decisions: DecisionSet
    objective: float
    status: str
    iterations: int = 0
    kkt_residual: float = 0.0
    family: str | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "objective": self.objective, "status": self.status, "iterations": self.iterations,
            "kkt_residual": self.kkt_residual, "family": self.family, "message": self.message,
        }


def _worst(statuses) -> str:
    return max(statuses, key=_STATUS_RANK.get, default=OPTIMAL)


def eta_all(scenario: Scenario, decisions: DecisionSet) -> np.ndarray:
    """MSE-minimizing receive scaling for every slot."""
    a = decisions.b * scenario.h_aircomp
    num = np.sum(np.conj(a), axis=0)
    den = (
        np.sum(np.abs(a) ** 2, axis=0)
        + np.sum(decisions.alpha**2 * decisions.p * np.abs(scenario.h_edge) ** 2, axis=0)
        + scenario.config.noise_power_sigma0sq
    )
    if np.any(den <= 0):
        raise DegenerateSlotError(f"zero MSE curvature in slots {np.flatnonzero(den <= 0).tolist()}")
    return num / den


def eta_closed_form(scenario: Scenario, decisions: DecisionSet, i: int) -> complex:
    return complex(eta_all(scenario, decisions)[i])


# ---------------------------------------------------------------- Omega block

def waterfill_offload(
    price: np.ndarray, cubic, caps: np.ndarray, demand: float, width: float,
) -> np.ndarray:
    """Exact minimizer of ``sum_i price_i (2^(x_i/width) - 1) + cubic_i x_i^3``
    s.t. ``sum x_i = demand``, ``0 <= x_i <= caps_i``.

    Each term is convex and increasing, so the optimum equalizes marginal costs
    ``nu`` over unclipped entries. The outer search on ``nu`` is a bracketed
    Newton/bisection; the inner inverse derivative is a monotone Newton from the right.
    """
    price = np.asarray(price, float)
    cubic = np.broadcast_to(np.asarray(cubic, float), price.shape)
    caps = np.maximum(np.asarray(caps, float), 0.0)
    if demand <= 0:
        return np.zeros_like(caps)
    if caps.sum() <= demand:
        return caps.copy()
    ln2w = np.log(2.0) / width

    def d1(x):
        return price * ln2w * np.exp2(x / width) + 3.0 * cubic * x**2

    def d2(x, m=slice(None)):
        return price[m] * ln2w**2 * np.exp2(x / width) + 6.0 * cubic[m] * x

    def inverse(nu):
        x = caps.copy()
        below = d1(x) > nu
        for _ in range(100):
            g = d1(x) - nu
            step = np.where(below & (g > 0), g / np.maximum(d2(x), 1e-300), 0.0)
            x = np.maximum(x - step, 0.0)
            if np.all(step <= 1e-14 * np.maximum(x, 1.0)):
                break
        return np.where(below, x, caps)

    lo, hi = float(np.min(d1(np.zeros_like(caps)))), float(np.max(d1(caps)))
    nu = 0.5 * (lo + hi)
    for _ in range(200):
        x = inverse(nu)
        gap = x.sum() - demand
        if abs(gap) <= 1e-12 * demand or hi - lo <= 1e-15 * hi:
            break
        if gap > 0:
            hi = nu
        else:
            lo = nu
        free = (x > 0) & (x < caps)
        slope = float(np.sum(1.0 / d2(x[free], free))) if np.any(free) else 0.0
        trial = nu - gap / slope if slope > 0 else np.nan
        nu = trial if lo < trial < hi else 0.5 * (lo + hi)
    x = inverse(nu)
    # remove the last sliver of mismatch on the free entries
    free = (x > 0) & (x < caps)
    if np.any(free):
        x[free] += (demand - x.sum()) / free.sum()
        x = np.clip(x, 0.0, caps)
    return x


def _load_program(config: SystemConfig, alpha: np.ndarray, upper: np.ndarray, demand: float):
    """Coupled convex program in ``l`` for a relaxed schedule, in units of ``scale`` bits."""
    K, I = alpha.shape
    mask = alpha > 0
    idx = np.argwhere(mask)
    n = len(idx)
    scale = demand if demand > 0 else config.max_slot_bits
    coef = alpha[mask]
    slot_of = idx[:, 1]
    ue_of = idx[:, 0]

    def objective(x):
        load = np.bincount(slot_of, weights=coef * x, minlength=I)
        f = float(np.sum(load**3))
        g = 3.0 * load[slot_of] ** 2 * coef
        H = np.zeros((n, n))
        same = slot_of[:, None] == slot_of[None, :]
        H[same] = (6.0 * load[slot_of][:, None] * coef[:, None] * coef[None, :])[same]
        return f, g, H

    G_rows, h_rows = [], []
    for k in range(K):
        row = np.zeros(n)
        row[ue_of == k] = -1.0
        if np.any(ue_of == k):
            G_rows.append(row)
            h_rows.append(-demand / scale)
    for i in range(I):
        row = np.where(slot_of == i, coef, 0.0)
        if np.any(row):
            G_rows.append(row)
            h_rows.append(config.max_slot_bits / scale)
    prog = ConvexProgram(
        objective, n, lb=np.zeros(n), ub=upper[mask] / scale,
        G=np.array(G_rows), h=np.array(h_rows),
    )
    return prog, mask, scale


def solve_block_omega(
    config: SystemConfig,
    scenario: Scenario,
    decisions: DecisionSet,
    cap_power: np.ndarray | None = None,
    update_l: bool = True,
    check_mse: bool = True,
) -> SolveOutcome:
    """Set ``eta`` in closed form, then re-split the offloaded bits ``l``.

    For a schedule with at most one user per slot the edge power is eliminated
    (``p`` = least power carrying ``l``) and ``l`` minimizes computation plus edge
    transmission energy exactly, with per-slot caps from the power budget, the MSE
    threshold at the new ``eta`` and the CPU capacity. Otherwise ``l`` minimizes
    computation energy under the rate reachable at ``cap_power`` (default: current powers).
    """
    d = decisions.copy()
    d.eta = eta_all(scenario, d)
    e_comp = lambda dd: energy(config, dd).e_comp  # noqa: E731
    mse = mse_all(scenario, d)
    zeta = config.mse_threshold_zeta
    if check_mse and np.any(mse > zeta * (1 + config.solver_feas_tol)):
        bad = np.flatnonzero(mse > zeta * (1 + config.solver_feas_tol)).tolist()
        return SolveOutcome(d, e_comp(d), INFEASIBLE, family="mse", message=f"MSE above threshold in slots {bad}")
    if not update_l:
        return SolveOutcome(d, e_comp(d), OPTIMAL)

    D = config.data_demand_Dk
    separable = np.all(np.count_nonzero(d.alpha > 0, axis=0) <= 1)
    if separable:
        return _omega_joint(config, scenario, d)

    upper = np.minimum(rate_capacity_all(scenario, d, cap_power), d.alpha * config.max_slot_bits)
    upper = np.maximum(upper, 0.0)
    short = np.flatnonzero(upper.sum(axis=1) < D * (1 - config.solver_feas_tol))
    if short.size:
        return SolveOutcome(
            d, e_comp(d), INFEASIBLE, family="data",
            message=f"slot caps cannot carry D_k for edge UEs {short.tolist()}",
        )

    if np.all(upper.sum(axis=1) <= D * (1 + 1e-9)):
        d.l = upper
        return SolveOutcome(d, e_comp(d), OPTIMAL, message="caps bind exactly")
    prog, mask, scale = _load_program(config, d.alpha, upper, D)
    x0 = (np.minimum(upper, D / max(1, d.alpha.shape[1])) / scale)[mask]
    res = convex_kernel_minimize(prog, x0, feas_tol=config.solver_feas_tol)
    if res.status == INFEASIBLE:
        return SolveOutcome(d, e_comp(d), INFEASIBLE, res.iterations, family="data", message=res.message)
    l = np.zeros_like(d.l)
    l[mask] = np.clip(res.x, 0.0, None) * scale
    d.l = np.minimum(l, upper)
    return SolveOutcome(d, e_comp(d), res.status, res.iterations, res.kkt_residual)


def _omega_joint(config: SystemConfig, scenario: Scenario, d: DecisionSet) -> SolveOutcome:
    tau, W = config.slot_duration, config.slot_duration * config.bandwidth_B
    D = config.data_demand_Dk
    gk = np.abs(scenario.h_edge) ** 2
    noise = interference_plus_noise(scenario, d)
    e2 = np.abs(d.eta) ** 2
    base = (
        np.sum(np.abs(d.eta * d.b * scenario.h_aircomp - 1.0) ** 2, axis=0)
        + e2 * config.noise_power_sigma0sq
    )
    room = np.maximum(config.mse_threshold_zeta - base, 0.0)
    on = d.alpha > 0
    weight = np.where(on, e2[None, :] * d.alpha**2 * gk, 1.0)
    p_mse = np.where(weight > 0, room[None, :] / np.where(weight > 0, weight, 1.0), np.inf)
    p_cap = np.where(on, np.minimum(config.p_max_edge, p_mse), 0.0)
    caps = W * np.log2(1.0 + p_cap * gk / noise)
    caps = np.where(on, np.minimum(caps, config.max_slot_bits), 0.0)
    short = np.flatnonzero(caps.sum(axis=1) < D * (1 - config.solver_feas_tol))
    if short.size:
        return SolveOutcome(
            d, _omega_objective(config, d), INFEASIBLE, family="data",
            message=f"slot caps cannot carry D_k for edge UEs {short.tolist()}",
        )
    l = np.zeros_like(d.l)
    for k in range(d.alpha.shape[0]):
        slots = np.flatnonzero(d.alpha[k] > 0)
        if slots.size == 0:
            continue
        a = d.alpha[k, slots]
        price = tau * a * noise[slots] / gk[k, slots]
        cubic = config.capacitance_gamma * config.cycles_per_bit_c0**3 / tau**2
        l[k, slots] = waterfill_offload(price, cubic * a**3, caps[k, slots], D, W)
    d.l = np.minimum(l, caps)
    d.p = np.where(d.alpha > 0, np.minimum(_min_power(config, scenario, d), p_cap), 0.0)
    return SolveOutcome(d, _omega_objective(config, d), OPTIMAL)


def _omega_objective(config: SystemConfig, d: DecisionSet) -> float:
    e = energy(config, d)
    return e.e_edge_tran + e.e_comp


# ---------------------------------------------------------------- Theta block

def _aligned(eta: complex, h: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Tx scaling with magnitude ``beta`` whose received phase cancels ``eta h``."""
    g = eta * h
    unit = np.where(np.abs(g) > 0, np.conj(g) / np.where(np.abs(g) > 0, np.abs(g), 1.0), np.conj(h) / np.abs(h))
    return beta * unit


def _theta_slot(config: SystemConfig, scenario: Scenario, d: DecisionSet, i: int):
    J = config.num_aircomp_J
    tau = config.slot_duration
    PA, PE = config.p_max_aircomp, config.p_max_edge
    sig = config.noise_power_sigma0sq
    zeta = config.mse_threshold_zeta
    e = abs(d.eta[i])
    ga = np.abs(scenario.h_aircomp[:, i])
    active = np.flatnonzero((d.alpha[:, i] > 0) | (d.l[:, i] > 0))
    na = active.size
    alpha = d.alpha[active, i]
    gk = np.abs(scenario.h_edge[active, i]) ** 2
    s = required_sinr(config, d.l[active, i])
    n = J + na
    if n == 0:
        return np.zeros(0), np.zeros(0), OPTIMAL, 0, 0.0

    beta0 = np.abs(d.b[:, i])
    p0 = d.p[active, i]
    e_in = tau * (np.sum(beta0**2) + np.sum(alpha * p0))
    e_scale = max(e_in, 1e-12 * tau * (PA * J + PE))
    # each variable is measured in units of its incoming value
    bs = np.where(beta0 > 1e-6 * np.sqrt(PA), beta0, 1e-3 * np.sqrt(PA))
    ps = np.where(p0 > 1e-9 * PE, p0, np.maximum(s * (np.sum(ga**2 * beta0**2) + sig) / gk, 1e-6 * PE))
    wb = tau * bs**2 / e_scale
    wp = tau * alpha * ps / e_scale

    def objective(x):
        bh = x[:J]
        g = np.zeros(n)
        g[:J] = 2 * wb * bh
        g[J:] = wp
        H = np.zeros((n, n))
        H[np.arange(J), np.arange(J)] = 2 * wb
        return float(wb @ bh**2) + float(wp @ x[J:]), g, H

    quad = []
    c = e * ga * bs
    P = np.zeros((n, n))
    P[np.arange(J), np.arange(J)] = 2 * c**2 / zeta
    q = np.zeros(n)
    q[:J] = -2 * c / zeta
    q[J:] = e**2 * alpha**2 * ps * gk / zeta
    quad.append((P, q, (J + e**2 * sig - zeta) / zeta))
    # rate: p g_k >= s (sum_j g_j beta_j^2 + sigma^2), normalized by g_k ps
    for r in range(na):
        norm = ps[r] * gk[r]
        P = np.zeros((n, n))
        P[np.arange(J), np.arange(J)] = 2 * s[r] * ga**2 * bs**2 / norm
        q = np.zeros(n)
        q[J + r] = -1.0
        quad.append((P, q, s[r] * sig / norm))

    ub = np.concatenate([np.sqrt(PA) / bs, PE / ps])
    prog = ConvexProgram(objective, n, lb=np.zeros(n), ub=ub, quadratic=quad)
    x0 = np.minimum(np.concatenate([beta0 / bs, p0 / ps]), ub)
    res = convex_kernel_minimize(prog, x0, feas_tol=config.solver_feas_tol)
    beta = np.clip(res.x[:J] * bs, 0.0, np.sqrt(PA))
    p_min = s * (np.sum(ga**2 * beta**2) + sig) / gk
    return beta, p_min, res.status, res.iterations, res.kkt_residual


def solve_block_theta(
    config: SystemConfig, scenario: Scenario, decisions: DecisionSet, freeze_b: bool = False,
) -> SolveOutcome:
    """Minimize transmission energy over ``(b, p)`` with ``eta``, ``l``, ``alpha`` fixed.

    ``b`` is parametrized by real amplitudes phase-aligned against ``eta h``. The rate
    constraint ``p g_k >= (2^(l/(tau B)) - 1)(sum_j g_j beta_j^2 + sigma^2)`` is a convex
    quadratic row in ``(beta, p)``. After the solve every edge power is lowered to the
    smallest value meeting its rate, which can only lower energy and MSE, and ``psi``
    (the slack standing for ``|b|^2``) is reported tight.

    With ``freeze_b`` only the edge powers move; their optimum is that minimum power.
    """
    d = decisions.copy()
    J, K, I = d.shape
    statuses, iters, kkt = [], 0, 0.0
    if freeze_b:
        p = np.where((d.alpha > 0) | (d.l > 0), _min_power(config, scenario, d), 0.0)
        d.p = p
        d.psi = np.abs(d.b) ** 2
        over = np.flatnonzero(np.any(p > config.p_max_edge * (1 + config.solver_feas_tol), axis=0))
        if over.size:
            return SolveOutcome(d, _tran(config, d), INFEASIBLE, family="edge_power",
                                message=f"required power above budget in slots {over.tolist()}")
        mse = mse_all(scenario, d)
        bad = np.flatnonzero(mse > config.mse_threshold_zeta * (1 + config.solver_feas_tol))
        if bad.size:
            return SolveOutcome(d, _tran(config, d), INFEASIBLE, family="mse",
                                message=f"MSE above threshold in slots {bad.tolist()}")
        return SolveOutcome(d, _tran(config, d), OPTIMAL)

    new_b = d.b.copy()
    new_p = d.p.copy()
    for i in range(I):
        beta, p_min, status, it, res = _theta_slot(config, scenario, d, i)
        statuses.append(status)
        iters += it
        kkt = max(kkt, res if np.isfinite(res) else 0.0)
        if status == INFEASIBLE:
            return SolveOutcome(d, _tran(config, d), INFEASIBLE, iters, family="mse",
                                message=f"no feasible transmit scaling in slot {i}")
        active = np.flatnonzero((d.alpha[:, i] > 0) | (d.l[:, i] > 0))
        new_b[:, i] = _aligned(d.eta[i], scenario.h_aircomp[:, i], beta)
        new_p[:, i] = 0.0
        new_p[active, i] = p_min
    cand = d.copy()
    cand.b, cand.p, cand.psi = new_b, new_p, np.abs(new_b) ** 2
    # an inexact solve must never undo a feasible incoming slot
    keep = slot_feasible(config, scenario, d) & (
        _slot_tran(config, cand) > _slot_tran(config, d) * (1 + 1e-12)
    )
    cand.b[:, keep], cand.p[:, keep] = d.b[:, keep], d.p[:, keep]
    cand.psi = np.abs(cand.b) ** 2
    return SolveOutcome(cand, _tran(config, cand), _worst(statuses), iters, kkt)


def slot_feasible(config: SystemConfig, scenario: Scenario, d: DecisionSet, tol: float = 1e-9) -> np.ndarray:
    """Per-slot check of the power, MSE and rate constraints (boolean ``(I,)``)."""
    ok = np.all(d.p <= config.p_max_edge * (1 + tol), axis=0) & np.all(d.p >= 0, axis=0)
    if d.b.shape[0]:
        ok &= np.all(np.abs(d.b) ** 2 <= config.p_max_aircomp * (1 + tol), axis=0)
    ok &= mse_all(scenario, d) <= config.mse_threshold_zeta * (1 + tol)
    slack = rate_capacity_all(scenario, d) - d.l
    ok &= np.all(slack >= -tol * config.slot_duration * config.bandwidth_B, axis=0)
    return ok


def _slot_tran(config: SystemConfig, d: DecisionSet) -> np.ndarray:
    return config.slot_duration * (np.sum(np.abs(d.b) ** 2, axis=0) + np.sum(d.alpha * d.p, axis=0))


def _tran(config: SystemConfig, d: DecisionSet) -> float:
    e = energy(config, d)
    return e.e_edge_tran + e.e_aircomp_tran


def _min_power(config: SystemConfig, scenario: Scenario, d: DecisionSet) -> np.ndarray:
    return required_sinr(config, d.l) * interference_plus_noise(scenario, d) / np.abs(scenario.h_edge) ** 2


# ---------------------------------------------------------------- Xi block

def _xi_slot(config: SystemConfig, scenario: Scenario, d: DecisionSet, i: int):
    K = d.alpha.shape[0]
    tau = config.slot_duration
    zeta = config.mse_threshold_zeta
    c0, gamma = config.cycles_per_bit_c0, config.capacitance_gamma
    p, l = d.p[:, i], d.l[:, i]
    e2 = abs(d.eta[i]) ** 2
    base = float(np.sum(np.abs(d.eta[i] * d.b[:, i] * scenario.h_aircomp[:, i] - 1.0) ** 2)
                 + e2 * config.noise_power_sigma0sq)
    interf = e2 * p * np.abs(scenario.h_edge[:, i]) ** 2

    def cost(a):
        return tau * float(a @ p) + gamma * (c0 * float(a @ l)) ** 3 / tau**2

    if base > zeta * (1 + config.solver_feas_tol):
        return None, INFEASIBLE, 0, 0.0
    if K == 1:
        a = np.ones(1)
        ok = base + interf[0] <= zeta * (1 + config.solver_feas_tol) and c0 * l[0] <= tau * config.max_cpu_f
        return a, OPTIMAL if ok else INFEASIBLE, 0, 0.0

    scale = max(cost(row) for row in np.eye(K)) or 1.0
    wp = tau * p / scale
    kl = c0 * l

    def objective(a):
        load = float(a @ kl)
        f = float(wp @ a) + gamma * load**3 / tau**2 / scale
        g = wp + 3 * gamma * load**2 / tau**2 / scale * kl
        H = 6 * gamma * load / tau**2 / scale * np.outer(kl, kl)
        return f, g, H

    quad = [(np.diag(2 * interf / zeta), np.zeros(K), (base - zeta) / zeta)]
    G = (kl / (tau * config.max_cpu_f))[None, :]
    prog = ConvexProgram(
        objective, K, lb=np.zeros(K), ub=np.ones(K), G=G, h=np.ones(1),
        A=np.ones((1, K)), b=np.ones(1), quadratic=quad,
    )
    res = convex_kernel_minimize(prog, np.full(K, 1.0 / K), feas_tol=config.solver_feas_tol)
    a = np.clip(res.x, 0.0, 1.0)
    return a / a.sum(), res.status, res.iterations, res.kkt_residual


def solve_block_xi(config: SystemConfig, scenario: Scenario, decisions: DecisionSet) -> SolveOutcome:
    """Relaxed scheduling: per slot, minimize edge transmission plus computation energy
    over the simplex subject to the MSE threshold and the BS CPU capacity."""
    d = decisions.copy()
    I = d.alpha.shape[1]
    statuses, iters, kkt = [], 0, 0.0
    alpha = d.alpha.copy()
    for i in range(I):
        a, status, it, res = _xi_slot(config, scenario, d, i)
        statuses.append(status)
        iters += it
        kkt = max(kkt, res)
        if status == INFEASIBLE:
            return SolveOutcome(d, _xi_objective(config, d), INFEASIBLE, iters, family="mse",
                                message=f"no feasible schedule weights in slot {i}")
        alpha[:, i] = a
    d.alpha = alpha
    d.binary = False
    return SolveOutcome(d, _xi_objective(config, d), _worst(statuses), iters, kkt)


def _xi_objective(config: SystemConfig, d: DecisionSet) -> float:
    e = energy(config, d)
    return e.e_edge_tran + e.e_comp


def round_schedule(config: SystemConfig, scenario: Scenario, decisions_relaxed: DecisionSet) -> DecisionSet:
    """Max-value rounding: the largest weight per slot wins (lowest index on ties).

    Offloaded bits of users that lose their slot are zeroed; any resulting data or rate
    shortfall is left for the following Omega/Theta solves to repair.
    """
    d = decisions_relaxed.copy()
    K, I = d.alpha.shape
    winner = np.argmax(d.alpha, axis=0)
    alpha = np.zeros((K, I))
    alpha[winner, np.arange(I)] = 1.0
    d.alpha = alpha
    d.l = np.where(alpha > 0, d.l, 0.0)
    d.binary = True
    return d
