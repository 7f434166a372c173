"""Log-barrier interior-point core for smooth convex programs.

Minimizes f(x) subject to G x <= h and A x = b, where f is smooth and
convex on an open domain (reported through +inf values outside it).
Newton steps solve the KKT system of each centering problem; a Levenberg
regularization kicks in when the system is singular.  Problem sizes here
are tiny (at most a few hundred variables), so everything is dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

INF = float("inf")

STATUS_OPTIMAL = "optimal"
STATUS_UNBOUNDED = "unbounded"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITER = "max-iter"


@dataclass(frozen=True)
class BarrierOptions:
    tol_gap: float = 1e-11        # stop when m / t falls below this
    tol_newton: float = 1e-13     # half squared Newton decrement
    max_newton: int = 200         # Newton iterations per centering step
    t_init: float = 1.0
    t_factor: float = 20.0
    unbounded_ceiling: float = 1e12


@dataclass
class BarrierResult:
    x: np.ndarray
    status: str
    value: float
    gap_bound: float
    ineq_multipliers: np.ndarray
    eq_multipliers: np.ndarray
    newton_decrement: float
    iterations: int


Objective = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


def _newton_solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = H.shape[0]
    reg = 0.0
    for _ in range(8):
        Hr = H if reg == 0.0 else H + reg * np.eye(n)
        try:
            dx = np.linalg.solve(Hr, -g)
            if np.all(np.isfinite(dx)):
                return dx
        except np.linalg.LinAlgError:
            pass
        reg = max(1e-10, reg * 100.0) * max(1.0, float(np.max(np.abs(np.diag(H)))))
    raise np.linalg.LinAlgError("Newton system unsolvable even with regularization")


def minimize_barrier(
    f: Objective,
    x0: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    A: np.ndarray | None = None,
    b: np.ndarray | None = None,
    options: BarrierOptions = BarrierOptions(),
) -> BarrierResult:
    """Barrier path following from a strictly feasible start point.

    ``x0`` must satisfy G x0 < h strictly, A x0 = b, and lie in the
    domain of f.
    """
    x = np.asarray(x0, dtype=float).copy()
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    m = G.shape[0]
    s0 = h - G @ x if m else np.zeros(0)
    if m and np.min(s0) <= 0:
        raise ValueError(f"start point not strictly feasible (min slack {np.min(s0):.3e})")
    val0, _, _ = f(x)
    if not np.isfinite(val0):
        raise ValueError("start point outside the objective domain")
    if A is not None and b is not None and A.shape[0]:
        if np.max(np.abs(A @ x - b)) > 1e-9:
            raise ValueError("start point violates the equality constraints")
        # eliminate the equalities: steps live in the null space of A,
        # which keeps the Newton systems well conditioned at large t
        from scipy.linalg import null_space

        N = null_space(np.asarray(A, dtype=float))
        n_eq = A.shape[0]
    else:
        N = None
        n_eq = 0

    t = options.t_init
    total_iters = 0
    decrement = INF
    w = np.zeros(n_eq)
    # certified duality gap from the last stage whose endpoint was close
    # enough to the central path for the barrier bound to apply, together
    # with the point it certifies
    cert_gap = INF if m else 0.0
    x_cert = x.copy()
    val_cert = val0
    while True:
        # centering: minimize t*f(x) - sum(log(h - Gx)) subject to Ax = b
        no_progress = 0
        best_dec = INF
        exhausted = True
        for _ in range(options.max_newton):
            val, grad, hess = f(x)
            if val <= -options.unbounded_ceiling:
                return BarrierResult(
                    x, STATUS_UNBOUNDED, val, INF, np.zeros(m), np.zeros(0), INF, total_iters
                )
            s = h - G @ x if m else np.zeros(0)
            g_tot = t * grad
            H_tot = t * hess
            if m:
                inv_s = 1.0 / s
                g_tot = g_tot + G.T @ inv_s
                H_tot = H_tot + (G.T * inv_s**2) @ G
            try:
                if N is None:
                    dx = _newton_solve(H_tot, g_tot)
                elif N.size == 0:
                    dx = np.zeros_like(x)  # equalities pin the point entirely
                else:
                    dy = _newton_solve(N.T @ H_tot @ N, N.T @ g_tot)
                    dx = N @ dy
            except np.linalg.LinAlgError:
                return BarrierResult(
                    x, STATUS_MAX_ITER, val, cert_gap, _mults(t, s), w, INF, total_iters
                )
            decrement = float(-g_tot @ dx) / 2.0
            if decrement <= 0.0:
                # regularized Newton produced an ascent direction; retreat
                # to (projected) steepest descent for this iteration
                dx = -g_tot if N is None else N @ (N.T @ -g_tot)
                decrement = float(-g_tot @ dx) / 2.0
            total_iters += 1
            if decrement <= options.tol_newton:
                exhausted = False
                break
            # backtracking line search keeping strict feasibility and domain
            alpha = 1.0
            if m:
                gd = G @ dx
                pos = gd > 0
                if np.any(pos):
                    alpha = min(alpha, 0.99 * float(np.min(s[pos] / gd[pos])))
            phi0 = t * val - (float(np.sum(np.log(s))) if m else 0.0)
            slope = float(g_tot @ dx)
            accepted = False
            for _bt in range(60):
                xn = x + alpha * dx
                valn, _, _ = f(xn)
                if np.isfinite(valn):
                    sn = h - G @ xn if m else np.zeros(0)
                    if not m or np.min(sn) > 0:
                        phin = t * valn - (float(np.sum(np.log(sn))) if m else 0.0)
                        if phin <= phi0 + 1e-4 * alpha * slope + 1e-12 * abs(phi0):
                            x = xn
                            accepted = True
                            break
                alpha *= 0.5
            if not accepted:
                exhausted = False
                break
            # accepted steps that neither lower the barrier objective nor
            # shrink the decrement mean the stage has hit its floating-point
            # floor; whether the endpoint certifies anything is decided below
            if decrement <= 0.9 * best_dec:
                best_dec = decrement
                no_progress = 0
            elif phi0 - phin <= 1e-10 * (abs(phi0) + 1.0):
                no_progress += 1
                if no_progress >= 5:
                    exhausted = False
                    break
            else:
                no_progress = 0
        # a stage certifies the classical barrier gap only when its endpoint
        # is near the central path: for self-concordant barriers a Newton
        # decrement lambda^2 / 2 with lambda < 1 bounds the stage gap by
        # (m + sqrt(m) * lambda / (1 - lambda)) / t
        val, _, _ = f(x)
        s = h - G @ x if m else np.zeros(0)
        lam_sc = float(np.sqrt(2.0 * decrement)) if np.isfinite(decrement) and decrement > 0 else 0.0
        certified = lam_sc < 0.5
        if certified and m:
            stage_gap = (m + np.sqrt(m) * lam_sc / (1.0 - lam_sc)) / t
            if stage_gap < cert_gap:
                cert_gap = stage_gap
                x_cert = x.copy()
                val_cert = val
        # a later uncertified iterate with a lower objective still sits
        # within the certified distance of the optimum
        if val > val_cert and np.isfinite(cert_gap):
            x, val = x_cert.copy(), val_cert
            s = h - G @ x if m else np.zeros(0)
        if cert_gap <= options.tol_gap and (m or certified):
            return BarrierResult(
                x, STATUS_OPTIMAL, val, cert_gap, _mults(t, s), w, decrement, total_iters
            )
        # an uncertified stage is not fatal: a later stage at larger t often
        # recenters, so keep going until t is far past the point where the
        # target gap could still be certified
        past_target = m and m / t <= options.tol_gap * 1e-3
        if exhausted or past_target or (not m and not certified):
            # out of budget or out of room; report the best certified bound
            # instead of pretending convergence
            return BarrierResult(
                x, STATUS_MAX_ITER, val, cert_gap, _mults(t, s), w, decrement, total_iters
            )
        t *= options.t_factor


def _mults(t: float, s: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 1.0 / (t * s) if s.size else np.zeros(0)
