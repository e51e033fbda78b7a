"""Small dense convex QP solver (primal active set, inequality constrained).

Sized for the per-tick MPC problems: a handful of decision variables, tens of
rows. Requires a feasible starting point; active constraints are satisfied to
machine precision at the returned optimum.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverFailure

_FEAS_TOL = 1e-9
_LAMBDA_TOL = 1e-9


def solve_qp(H, g, G, d, u0, max_iter: int = 300, warm_set=None):
    """Minimize 0.5 u'Hu + g'u subject to G u <= d, starting from feasible u0.

    Returns (u, lam) where lam holds the multipliers of the rows active at the
    solution (zeros elsewhere). `warm_set` seeds the working set with rows
    known to be active at u0.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    G = np.asarray(G, dtype=float)
    d = np.asarray(d, dtype=float)
    u = np.array(u0, dtype=float)
    m, n = G.shape

    resid = G @ u - d
    if np.any(resid > 1e-7):
        raise SolverFailure(f"infeasible start (violation {resid.max():.2e})")

    work: list[int] = list(warm_set) if warm_set else []
    lam_full = np.zeros(m)
    for _ in range(max_iter):
        nw = len(work)
        if nw:
            Gw = G[work]
            kkt = np.zeros((n + nw, n + nw))
            kkt[:n, :n] = H
            kkt[:n, n:] = Gw.T
            kkt[n:, :n] = Gw
            rhs = np.concatenate([-(H @ u + g), np.zeros(nw)])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            p = sol[:n]
            lam = sol[n:]
        else:
            try:
                p = np.linalg.solve(H, -(H @ u + g))
            except np.linalg.LinAlgError:
                p = np.linalg.lstsq(H, -(H @ u + g), rcond=None)[0]
            lam = np.zeros(0)

        scale = 1.0 + float(np.max(np.abs(u)))
        if np.max(np.abs(p)) < 1e-11 * scale:
            if nw == 0 or np.all(lam >= -_LAMBDA_TOL):
                lam_full[:] = 0.0
                lam_full[work] = lam
                return u, lam_full
            work.pop(int(np.argmin(lam)))
            continue

        # largest feasible step toward u + p
        alpha = 1.0
        blocking = -1
        gp = G @ p
        slack_now = d - G @ u
        for i in range(m):
            if i in work or gp[i] <= _FEAS_TOL:
                continue
            a = slack_now[i] / gp[i]
            if a < alpha - 1e-14:
                alpha = max(a, 0.0)
                blocking = i
        u = u + alpha * p
        if blocking >= 0:
            work.append(blocking)
        elif alpha == 1.0:
            # full step reached the working-set optimum; lam from this KKT
            # already holds its multipliers
            if nw == 0 or np.all(lam >= -_LAMBDA_TOL):
                lam_full[:] = 0.0
                lam_full[work] = lam
                return u, lam_full
            work.pop(int(np.argmin(lam)))
    raise SolverFailure(f"active-set iteration limit ({max_iter}) exceeded")
