"""Independent reference computations used by the test suite and the ``oracle`` command.

None of these call into the solvers they are used to check.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import DecisionSet
from .scenario import Scenario


def qp_active_set(P, q, G, h, A=None, b=None, tol=1e-9):
    """Exact minimizer of ``0.5 x'Px + q'x`` s.t. ``Gx <= h``, ``Ax = b`` for positive definite ``P``.

    Enumerates every candidate active set, solves its KKT system, and keeps the
    primal-feasible, dual-feasible one. Exponential in the number of inequalities.
    """
    P, q, G, h = (np.asarray(v, float) for v in (P, q, G, h))
    n = q.size
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, float))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, float))
    m = G.shape[0]
    best = None
    for r in range(min(m, n - A.shape[0]) + 1):
        for active in itertools.combinations(range(m), r):
            E = np.vstack([A, G[list(active)]])
            e = np.concatenate([b, h[list(active)]])
            k = E.shape[0]
            kkt = np.block([[P, E.T], [E, np.zeros((k, k))]])
            try:
                sol = np.linalg.solve(kkt, np.concatenate([-q, e]))
            except np.linalg.LinAlgError:
                continue
            x, mult = sol[:n], sol[n:]
            if np.any(G @ x - h > tol) or np.any(mult[A.shape[0]:] < -tol):
                continue
            val = 0.5 * x @ P @ x + q @ x
            if best is None or val < best[1]:
                best = (x, val)
    if best is None:
        raise ValueError("QP is infeasible")
    return best


def random_qp(rng: np.random.Generator, n: int):
    """Strictly convex QP with box bounds and two random half-spaces containing the origin."""
    M = rng.standard_normal((n, n))
    P = M.T @ M + 0.1 * np.eye(n)
    q = rng.standard_normal(n) * 3
    G_extra = rng.standard_normal((2, n))
    h_extra = rng.uniform(0.2, 1.0, 2)
    G = np.vstack([np.eye(n), -np.eye(n), G_extra])
    h = np.concatenate([np.ones(n), np.ones(n), h_extra])
    return P, q, G, h


def eta_grid_search(scenario: Scenario, decisions: DecisionSet, i: int, eta_star: complex, points: int = 200):
    """Smallest slot MSE over a ``points x points`` complex grid bracketing ``eta_star``."""
    half = 2.0 * max(abs(eta_star), 1e-300)
    axis = np.linspace(-half, half, points)
    grid = axis[:, None] + 1j * axis[None, :]
    d = decisions
    J = d.b.shape[0]
    h_a, h_e = scenario.h_aircomp[:, i], scenario.h_edge[:, i]
    a = d.b[:, i] * h_a
    interf = float(np.sum(d.alpha[:, i] ** 2 * d.p[:, i] * np.abs(h_e) ** 2))
    sig = scenario.config.noise_power_sigma0sq
    g = grid.ravel()
    mse = np.zeros(g.size)
    for j in range(J):
        mse += np.abs(g * a[j] - 1.0) ** 2
    mse += np.abs(g) ** 2 * (sig + interf)
    k = int(np.argmin(mse))
    return g[k], float(mse[k])


def golden_section(f, lo, hi, tol=1e-12, max_iter=400):
    """Minimizer of a unimodal ``f`` on ``[lo, hi]``."""
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def brute_force_energy(config, scenario: Scenario, points: int = 20) -> tuple[float, np.ndarray | None]:
    """Grid-search optimum of the full problem for tiny instances.

    Every binary schedule is enumerated. Per scheduled slot the offloaded bits, edge
    power and each AirComp amplitude take ``points`` grid values; ``eta`` is set to the
    MSE-minimizing value of each grid point and infeasible points are discarded.
    Returns ``(energy, schedule)`` with ``inf`` if nothing is feasible.
    """
    J, K, I = config.num_aircomp_J, config.num_edge_K, config.num_slots_I
    tau = config.slot_duration
    sig = config.noise_power_sigma0sq
    D = config.data_demand_Dk
    h_a, h_e = scenario.h_aircomp, scenario.h_edge

    l_grid = np.linspace(0.0, D, points)
    p_grid = np.concatenate([[0.0], np.geomspace(1e-7 * config.p_max_edge, config.p_max_edge, points - 1)])
    amp_max = np.sqrt(config.p_max_aircomp)
    beta_grid = np.concatenate([[0.0], np.geomspace(1e-6 * amp_max, amp_max, points - 1)])

    mesh = np.meshgrid(*([beta_grid] * J), indexing="ij")
    betas = np.stack([m.ravel() for m in mesh], axis=1) if J else np.zeros((1, 0))

    # cost[i][k][li]: cheapest slot-i energy with UE k scheduled carrying l_grid[li]
    cost = np.full((I, K, points), np.inf)
    for i in range(I):
        ga = np.abs(h_a[:, i])
        received = betas * ga  # aligned received amplitudes |b_j h_j|
        interference = np.sum(received**2, axis=1) + sig
        air_energy = np.sum(betas**2, axis=1) * tau
        S = received.sum(axis=1)
        Q = np.sum(received**2, axis=1)
        for k in range(K):
            gk = np.abs(h_e[k, i]) ** 2
            rate = tau * config.bandwidth_B * np.log2(1.0 + p_grid[:, None] * gk / interference[None, :])
            denom = Q[None, :] + sig + p_grid[:, None] * gk
            mse = J - S[None, :] ** 2 / denom
            mse_ok = mse <= config.mse_threshold_zeta
            tran = p_grid[:, None] * tau + air_energy[None, :]
            for li, l in enumerate(l_grid):
                if config.cycles_per_bit_c0 * l > tau * config.max_cpu_f:
                    continue
                ok = mse_ok & (rate >= l)
                if np.any(ok):
                    comp = config.capacitance_gamma * (config.cycles_per_bit_c0 * l) ** 3 / tau**2
                    cost[i, k, li] = float(np.min(tran[ok])) + comp

    best, best_sched = np.inf, None
    for sched in itertools.product(range(K), repeat=I):
        sched = np.array(sched)
        total = 0.0
        for k in range(K):
            slots = np.flatnonzero(sched == k)
            if slots.size == 0:
                if D > 0:
                    total = np.inf
                    break
                continue
            # cheapest combination of per-slot grid loads covering D
            tables = [cost[i, k] for i in slots]
            best_k = np.inf
            for combo in itertools.product(range(points), repeat=slots.size):
                if l_grid[list(combo)].sum() < D * (1 - 1e-12):
                    continue
                val = sum(t[c] for t, c in zip(tables, combo))
                best_k = min(best_k, val)
            total += best_k
        if total < best:
            best, best_sched = total, sched
    return best, best_sched

