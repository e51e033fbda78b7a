"""Independent reference computations used to check the main implementations.

The conflict oracle classifies trajectory pairs from dense polyline samples
and brute-force segment crossing tests; the MPC oracle scans a discretized
input grid. Neither shares code paths with the package internals.
"""

from __future__ import annotations

import math

import numpy as np

from crossway.geometry import IntersectionModel, TrajectoryPath


def sample_polyline(traj: TrajectoryPath, step: float = 0.5):
    # +2 keeps the effective spacing incommensurate with the lane grid so
    # crossings never land exactly on a sample vertex
    n = max(3, int(math.ceil(traj.total_length / step)) + 2)
    svals = np.linspace(0.0, traj.total_length, n)
    pts = np.array([traj.position_heading_at(s)[:2] for s in svals])
    return svals, pts


def _segment_crossings(sa, pa, sb, pb):
    """Proper crossings between two polylines -> list of (s_a, s_b, xy)."""
    a0 = pa[:-1][:, None, :]
    a1 = pa[1:][:, None, :]
    b0 = pb[None, :-1, :]
    b1 = pb[None, 1:, :]
    da = a1 - a0
    db = b1 - b0
    r = b0 - a0

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    denom = cross(da, db)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(r, db) / denom
        u = cross(r, da) / denom
    mask = (np.abs(denom) > 1e-12) & (t > 1e-9) & (t < 1 - 1e-9) & (u > 1e-9) & (u < 1 - 1e-9)
    out = []
    for i, j in zip(*np.nonzero(mask)):
        ti, uj = t[i, j], u[i, j]
        s_a = sa[i] + ti * (sa[i + 1] - sa[i])
        s_b = sb[j] + uj * (sb[j + 1] - sb[j])
        p = pa[i] + ti * (pa[i + 1] - pa[i])
        out.append((float(s_a), float(s_b), (float(p[0]), float(p[1]))))
    return out


def conflict_oracle(model: IntersectionModel, step: float = 0.2503):
    # non-round step keeps sample vertices off the exact crossing coordinates
    """Reference pair classification: merges by shared final heading, crossing
    edges by odd transversal-crossing parity, double pairs by even parity."""
    trajs = model.trajectories
    samples = {t.traj_id: sample_polyline(t, step) for t in trajs}
    crossing, double, merging = {}, {}, {}
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            a, b = trajs[i], trajs[j]
            if a.approach == b.approach:
                continue
            ha = a.position_heading_at(a.total_length)[2]
            hb = b.position_heading_at(b.total_length)[2]
            if abs(math.remainder(ha - hb, 2.0 * math.pi)) < 1e-6:
                merging[(a.traj_id, b.traj_id)] = None
                continue
            sa, pa = samples[a.traj_id]
            sb, pb = samples[b.traj_id]
            hits = _segment_crossings(sa, pa, sb, pb)
            if not hits:
                continue
            hits.sort()
            if len(hits) % 2 == 1:
                crossing[(a.traj_id, b.traj_id)] = hits
            else:
                double[(a.traj_id, b.traj_id)] = hits
    return crossing, double, merging


def mpc_grid_search(xi, psi1, psi2, theta, phi_w, n_p, n_c, x0, omega, prev_tau,
                    tau_min, tau_max, dtau_min, dtau_max, x_min, x_max,
                    coarse=29, refine_rounds=3):
    """Exhaustive discretized-input search for small MPC instances (n_c <= 2).

    Returns (best_cost, best_u) over inputs satisfying Eqs. (21)-(22) and the
    state box (20), progressively refined around the incumbent.
    """
    assert n_c in (1, 2)

    def rollout_cost(u_grid):
        # u_grid: (m, n_c)
        m = u_grid.shape[0]
        x = np.broadcast_to(np.asarray(x0, dtype=float), (m, 2)).copy()
        cost = phi_w * np.sum(u_grid**2, axis=1)
        feasible = np.ones(m, dtype=bool)
        for k in range(n_p):
            tau = u_grid[:, min(k, n_c - 1)]
            x = x @ xi.T + np.outer(tau, psi1) + np.outer(np.full(m, omega[k]), psi2)
            feasible &= (x[:, 0] >= x_min[0] - 1e-9) & (x[:, 0] <= x_max[0] + 1e-9)
            feasible &= (x[:, 1] >= x_min[1] - 1e-9) & (x[:, 1] <= x_max[1] + 1e-9)
            cost += theta[0, 0] * x[:, 0] ** 2 + 2.0 * theta[0, 1] * x[:, 0] * x[:, 1] + theta[1, 1] * x[:, 1] ** 2
        cost[~feasible] = np.inf
        return cost

    def admissible(u_grid):
        ok = np.ones(u_grid.shape[0], dtype=bool)
        prev = np.full(u_grid.shape[0], prev_tau)
        for k in range(n_c):
            d = u_grid[:, k] - prev
            ok &= (d >= dtau_min - 1e-9) & (d <= dtau_max + 1e-9)
            ok &= (u_grid[:, k] >= tau_min - 1e-9) & (u_grid[:, k] <= tau_max + 1e-9)
            prev = u_grid[:, k]
        return ok

    lo = np.full(n_c, tau_min)
    hi = np.full(n_c, tau_max)
    best_cost, best_u = np.inf, None
    for _ in range(refine_rounds):
        axes = [np.linspace(lo[k], hi[k], coarse) for k in range(n_c)]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        mesh = mesh[admissible(mesh)]
        if mesh.shape[0] == 0:
            break
        costs = rollout_cost(mesh)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost, best_u = float(costs[k]), mesh[k].copy()
        if best_u is None or not np.isfinite(best_cost):
            break
        span = (hi - lo) / (coarse - 1)
        lo = np.maximum(best_u - 2.0 * span, tau_min)
        hi = np.minimum(best_u + 2.0 * span, tau_max)
    return best_cost, best_u


def random_mpc_instance(rng):
    """Random small MPC instance (n_c <= 2) with a feasible input box start."""
    from crossway.control import MpcSetup

    n_p = int(rng.integers(2, 5))
    n_c = int(rng.integers(1, min(n_p, 2) + 1))
    setup = MpcSetup(
        period=float(rng.choice([0.1, 0.2])),
        headway=float(rng.choice([0.0, 1.5])),
        n_p=n_p,
        n_c=n_c,
        state_weight=(float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0))),
        input_weight=float(rng.uniform(0.5, 2.0)),
        x_min=(-float(rng.uniform(5.0, 50.0)), -float(rng.uniform(5.0, 20.0))),
        x_max=(float(rng.uniform(5.0, 50.0)), float(rng.uniform(5.0, 20.0))),
        tau_min=-float(rng.uniform(1.0, 4.0)),
        tau_max=float(rng.uniform(1.0, 4.0)),
        dtau_min=-float(rng.uniform(0.5, 2.5)),
        dtau_max=float(rng.uniform(0.5, 2.5)),
    )
    x0 = np.array(
        [
            rng.uniform(0.4 * setup.x_min[0], 0.4 * setup.x_max[0]),
            rng.uniform(0.4 * setup.x_min[1], 0.4 * setup.x_max[1]),
        ]
    )
    omega = float(rng.uniform(-1.0, 1.0))
    prev_tau = float(rng.uniform(0.6 * setup.tau_min, 0.6 * setup.tau_max))
    return setup, x0, omega, prev_tau


def mpc_oracle_for(setup, x0, omega, prev_tau, coarse=33, refine_rounds=4):
    w = np.full(setup.n_p, omega)
    return mpc_grid_search(
        setup.xi, setup.psi1, setup.psi2, setup.theta, setup.input_weight,
        setup.n_p, setup.n_c, x0, w, prev_tau,
        setup.tau_min, setup.tau_max, setup.dtau_min, setup.dtau_max,
        np.asarray(setup.x_min), np.asarray(setup.x_max),
        coarse=coarse, refine_rounds=refine_rounds,
    )
