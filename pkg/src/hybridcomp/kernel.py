"""Dense log-barrier interior-point method for small smooth convex programs.

Handles a twice-differentiable convex objective with box bounds, linear
inequalities ``G x <= h``, convex quadratic inequalities
``0.5 x'Px + q'x + r <= 0`` and linear equalities ``A x = b``.  Problems
without a strictly feasible start go through a phase-I solve first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

OPTIMAL = "optimal"
SUBOPTIMAL = "feasible-suboptimal"
INFEASIBLE = "infeasible"

_MARGIN = 1e-6

Objective = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


@dataclass
class ConvexProgram:
    objective: Objective
    n: int
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    quadratic: Sequence[tuple[np.ndarray, np.ndarray, float]] = field(default_factory=list)


@dataclass
class KernelResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int
    kkt_residual: float
    primal_residual: float
    message: str = ""


class _Constraints:
    """All inequalities stacked as ``f(x) <= 0`` with Jacobian and curvature.

    Curvature is ``(first quadratic row, stacked Hessians)`` or ``None``.
    """

    def __init__(self, prog: ConvexProgram):
        n = prog.n
        rows, rhs = [], []
        if prog.lb is not None:
            lb = np.broadcast_to(np.asarray(prog.lb, float), (n,))
            idx = np.flatnonzero(np.isfinite(lb))
            rows.append(-np.eye(n)[idx])
            rhs.append(-lb[idx])
        if prog.ub is not None:
            ub = np.broadcast_to(np.asarray(prog.ub, float), (n,))
            idx = np.flatnonzero(np.isfinite(ub))
            rows.append(np.eye(n)[idx])
            rhs.append(ub[idx])
        if prog.G is not None and len(prog.G):
            rows.append(np.atleast_2d(np.asarray(prog.G, float)))
            rhs.append(np.atleast_1d(np.asarray(prog.h, float)))
        self.G = np.vstack(rows) if rows else np.zeros((0, n))
        self.h = np.concatenate(rhs) if rhs else np.zeros(0)
        quad = list(prog.quadratic)
        self.nq = len(quad)
        self.P = np.array([np.asarray(P, float) for P, _, _ in quad]).reshape(self.nq, n, n)
        self.q = np.array([np.asarray(q, float) for _, q, _ in quad]).reshape(self.nq, n)
        self.r = np.array([float(r) for _, _, r in quad])
        self.m = self.G.shape[0] + self.nq

    def values(self, x: np.ndarray) -> np.ndarray:
        lin = self.G @ x - self.h
        if not self.nq:
            return lin
        Px = self.P @ x
        return np.concatenate([lin, 0.5 * (Px @ x) + self.q @ x + self.r])

    def evaluate(self, x: np.ndarray):
        vals = self.values(x)
        jac = self.G
        hess = None
        if self.nq:
            jac = np.vstack([self.G, self.P @ x + self.q])
            hess = (self.G.shape[0], self.P)
        return vals, jac, hess


class _PhaseOne:
    """min s  s.t.  f_i(x) <= s,  s >= -1,  A x = b   over z = (x, s)."""

    def __init__(self, cons: _Constraints, n: int):
        self.inner, self.n = cons, n
        self.m = cons.m + 1

    def values(self, z):
        return np.append(self.inner.values(z[:-1]) - z[-1], -1.0 - z[-1])

    def evaluate(self, z):
        vals, jac, hess = self.inner.evaluate(z[:-1])
        m_in = vals.size
        jz = np.zeros((m_in + 1, self.n + 1))
        jz[:m_in, :-1] = jac
        jz[:m_in, -1] = -1.0
        jz[m_in, -1] = -1.0
        hz = None
        if hess is not None:
            start, P = hess
            big = np.zeros((P.shape[0], self.n + 1, self.n + 1))
            big[:, :-1, :-1] = P
            hz = (start, big)
        return np.append(vals - z[-1], -1.0 - z[-1]), jz, hz


def _kkt_solve(H, g, A):
    n = g.size
    if A is None or A.shape[0] == 0:
        try:
            return np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(H, -g, rcond=None)[0]
    p = A.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-g, np.zeros(p)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n]


def _primal_dual(fun, cons, x, A, b, gap_tol, res_tol, max_iter, mu=10.0, stop_early=None):
    """Primal-dual interior-point iterations from a strictly feasible ``x``.

    Returns ``(x, lam, gap, residual, iterations, converged, stopped_early)``.
    """
    m = cons.m
    n = x.size
    p = 0 if A is None else A.shape[0]
    nu = np.zeros(p)
    vals = cons.values(x)
    lam = -1.0 / vals if m else np.zeros(0)

    def residuals(xx, ll, nn, tt):
        _, g0, _ = fun(xx)
        vv, jj, _ = cons.evaluate(xx)
        r_dual = g0 + jj.T @ ll
        if p:
            r_dual = r_dual + A.T @ nn
        r_cent = -ll * vv - 1.0 / tt
        r_pri = A @ xx - b if p else np.zeros(0)
        return r_dual, r_cent, r_pri

    for it in range(1, max_iter + 1):
        f0, g0, H0 = fun(x)
        vals, jac, hess = cons.evaluate(x)
        gap = float(-vals @ lam) if m else 0.0
        t = mu * m / gap if m and gap > 0 else 1.0
        r_dual = g0 + jac.T @ lam + (A.T @ nu if p else 0.0)
        r_cent = -lam * vals - 1.0 / t
        r_pri = A @ x - b if p else np.zeros(0)
        res = max(float(np.max(np.abs(r_dual), initial=0.0)), float(np.max(np.abs(r_pri), initial=0.0)))
        if gap <= gap_tol and res <= res_tol:
            return x, lam, gap, res, it - 1, True, False

        w = -lam / vals
        H = H0 + (jac.T * w) @ jac
        if hess is not None:
            start, P = hess
            H = H + np.tensordot(lam[start:start + P.shape[0]], P, axes=1)
        rhs = -r_dual - jac.T @ (r_cent / vals)
        if p:
            KKT = np.zeros((n + p, n + p))
            KKT[:n, :n] = H
            KKT[:n, n:] = A.T
            KKT[n:, :n] = A
            full_rhs = np.concatenate([rhs, -r_pri])
            try:
                sol = np.linalg.solve(KKT, full_rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(KKT, full_rhs, rcond=None)[0]
            dx, dnu = sol[:n], sol[n:]
        else:
            try:
                dx = np.linalg.solve(H, rhs)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(H, rhs, rcond=None)[0]
            dnu = np.zeros(0)
        dlam = w * (jac @ dx) + r_cent / vals

        neg = dlam < 0
        step = min(1.0, float(np.min(-lam[neg] / dlam[neg]))) if np.any(neg) else 1.0
        step *= 0.99
        while step > 1e-14 and np.any(cons.values(x + step * dx) >= 0):
            step *= 0.5
        norm0 = np.sqrt(r_dual @ r_dual + r_cent @ r_cent + r_pri @ r_pri)
        while step > 1e-14:
            rd, rc, rp = residuals(x + step * dx, lam + step * dlam, nu + step * dnu, t)
            if np.sqrt(rd @ rd + rc @ rc + rp @ rp) <= (1 - 0.01 * step) * norm0:
                break
            step *= 0.5
        if step <= 1e-14:
            return x, lam, gap, res, it, False, False
        x = x + step * dx
        lam = lam + step * dlam
        nu = nu + step * dnu
        if stop_early is not None and stop_early(x):
            return x, lam, gap, res, it, False, True
    return x, lam, gap, res, max_iter, False, False


def convex_kernel_minimize(
    prog: ConvexProgram,
    x0: np.ndarray,
    gap_tol: float = 1e-10,
    feas_tol: float = 1e-8,
    max_iter: int = 200,
) -> KernelResult:
    """Minimize ``prog`` from ``x0``.

    ``gap_tol`` bounds the surrogate duality gap and the dual residual; the returned
    ``kkt_residual`` is the larger of the two at exit.
    """
    cons = _Constraints(prog)
    n = prog.n
    A = None if prog.A is None else np.atleast_2d(np.asarray(prog.A, float))
    if A is not None and A.shape[0] == 0:
        A = None
    b = None if A is None else np.atleast_1d(np.asarray(prog.b, float))
    x = np.asarray(x0, float).copy()
    if A is not None:
        x = x - np.linalg.lstsq(A, A @ x - b, rcond=None)[0]
    used = 0

    # points hugging the boundary start with huge duals; re-center them through phase I
    if cons.m and np.any(cons.values(x) >= -_MARGIN):
        phase = _PhaseOne(cons, n)
        z = np.append(x, float(np.max(cons.values(x))) + 1.0)
        Az = None if A is None else np.hstack([A, np.zeros((A.shape[0], 1))])
        e_s = np.eye(n + 1)[-1]
        zero = np.zeros((n + 1, n + 1))
        z, _, _, _, it, _, _ = _primal_dual(
            lambda zz: (zz[-1], e_s, zero), phase, z, Az, b, feas_tol * 1e-2, feas_tol, max_iter,
            stop_early=lambda zz: zz[-1] < -1e-4,
        )
        used += it
        x = z[:-1]
        worst = float(np.max(cons.values(x)))
        if worst >= 0:
            status = INFEASIBLE if worst > feas_tol else SUBOPTIMAL
            msg = "no strictly feasible point" if status == INFEASIBLE else "feasible set has empty interior"
            return KernelResult(x, float(prog.objective(x)[0]), status, used, np.inf, worst, msg)

    x, lam, gap, res, it, converged, _ = _primal_dual(prog.objective, cons, x, A, b, gap_tol, gap_tol, max_iter)
    used += it
    primal = max(float(np.max(cons.values(x), initial=0.0)), 0.0)
    if A is not None:
        primal = max(primal, float(np.max(np.abs(A @ x - b))))
    status = OPTIMAL if converged and primal <= feas_tol else SUBOPTIMAL
    return KernelResult(x, float(prog.objective(x)[0]), status, used, max(gap, res), primal)
