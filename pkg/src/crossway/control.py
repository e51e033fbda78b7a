"""Vehicle-level actuation: Stanley lateral steering and longitudinal MPC.

The MPC regulates the error state x = [s_ref - s, v_ref - v] under the
discrete model x(k+1) = Xi x + Psi1 tau + Psi2 omega, minimizing a quadratic
tracking cost over N_p steps with the input held constant beyond N_c, subject
to box limits on state, input, and input increment. The QP is solved in
condensed form by a dense active-set method; state limits soften through an
exact L1 penalty only when the input-constrained optimum violates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonpositivePeriod, SolverFailure
from .geometry import TrajectoryPath
from .qp import solve_qp


def discretize(period: float, headway: float):
    """Discrete state/input/disturbance matrices for control period `period`."""
    if period <= 0.0:
        raise NonpositivePeriod(f"control period must be positive, got {period}")
    xi = np.array([[1.0, period], [0.0, 1.0]])
    psi1 = np.array([-headway * period - 0.5 * period * period, -period])
    psi2 = np.array([0.5 * period * period, period])
    return xi, psi1, psi2


@dataclass
class MpcSetup:
    """Horizons, weights, and limits of the longitudinal tracking problem."""

    period: float = 0.1
    headway: float = 0.0            # h in car-following, H in conflict-solving, else 0
    n_p: int = 20
    n_c: int = 5
    state_weight: tuple = (0.5, 1.0)   # diagonal of Theta
    input_weight: float = 1.0
    x_min: tuple = (-100.0, -13.8)
    x_max: tuple = (100.0, 13.8)
    tau_min: float = -4.0
    tau_max: float = 3.0
    dtau_min: float = -2.0
    dtau_max: float = 2.0

    def __post_init__(self):
        if not (0 < self.n_c <= self.n_p):
            raise ValueError(f"need 0 < n_c <= n_p, got {self.n_c}, {self.n_p}")
        self.xi, self.psi1, self.psi2 = discretize(self.period, self.headway)
        self.theta = np.diag(self.state_weight)
        self._build_condensed()

    def _build_condensed(self):
        n_p, n_c = self.n_p, self.n_c
        pows = [np.eye(2)]
        for _ in range(n_p):
            pows.append(self.xi @ pows[-1])
        F = np.zeros((2 * n_p, 2))
        Su = np.zeros((2 * n_p, n_c))
        Sw = np.zeros((2 * n_p, n_p))
        for eta in range(1, n_p + 1):
            F[2 * eta - 2:2 * eta] = pows[eta]
            for m in range(eta):
                j = min(m, n_c - 1)
                blk = pows[eta - 1 - m]
                Su[2 * eta - 2:2 * eta, j] += blk @ self.psi1
                Sw[2 * eta - 2:2 * eta, m] = blk @ self.psi2
        theta_bar = np.kron(np.eye(n_p), self.theta)
        self.F, self.Su, self.Sw = F, Su, Sw
        self.H = 2.0 * (Su.T @ theta_bar @ Su + self.input_weight * np.eye(n_c))
        self.H = 0.5 * (self.H + self.H.T)
        self._g_x0 = 2.0 * Su.T @ theta_bar @ F          # (n_c, 2)
        self._g_w = 2.0 * Su.T @ theta_bar @ Sw          # (n_c, n_p)
        self._H_inv = np.linalg.inv(self.H)
        self._theta_bar = theta_bar
        # input box and increment rows (increment RHS depends on prev_tau)
        eye = np.eye(n_c)
        diff = np.eye(n_c) - np.eye(n_c, k=-1)
        self._G_fix = np.vstack([eye, -eye, diff, -diff])
        self._x_lo = np.tile(np.asarray(self.x_min, dtype=float), n_p)
        self._x_hi = np.tile(np.asarray(self.x_max, dtype=float), n_p)
        self.soft_weight = 1e6 * float(np.linalg.norm(self.theta))

    def fixed_rhs(self, prev_tau: float) -> np.ndarray:
        n_c = self.n_c
        d = np.empty(4 * n_c)
        d[:n_c] = self.tau_max
        d[n_c:2 * n_c] = -self.tau_min
        d[2 * n_c:3 * n_c] = self.dtau_max
        d[2 * n_c] += prev_tau
        d[3 * n_c:] = -self.dtau_min
        d[3 * n_c] -= prev_tau
        return d


@dataclass
class MpcResult:
    taus: np.ndarray          # optimal input sequence, first element applied
    predicted: np.ndarray     # predicted states, shape (n_p, 2)
    cost: float
    status: str               # unconstrained | active_set | soft | fallback
    state_slack: float = 0.0

    @property
    def applied(self) -> float:
        return float(self.taus[0])


def _predict(setup: MpcSetup, x0, u, w):
    c = setup.F @ x0 + setup.Sw @ w
    flat = c + setup.Su @ u
    return flat.reshape(setup.n_p, 2)


def _cost(setup: MpcSetup, x0, u, w) -> float:
    states = _predict(setup, x0, u, w)
    j = float(np.einsum("ki,ij,kj->", states, setup.theta, states))
    return j + setup.input_weight * float(u @ u)


def mpc_solve(x0, setup: MpcSetup, omega_forecast=0.0, prev_tau: float = 0.0) -> MpcResult:
    """Solve one receding-horizon step; falls back to max braking on failure."""
    x0 = np.asarray(x0, dtype=float)
    w = np.asarray(omega_forecast, dtype=float)
    if w.ndim == 0:
        w = np.full(setup.n_p, float(w))
    w = w[: setup.n_p]
    n_c, n_p = setup.n_c, setup.n_p

    g = setup._g_x0 @ x0 + setup._g_w @ w
    G_fix = setup._G_fix
    d_fix = setup.fixed_rhs(prev_tau)
    c = setup.F @ x0 + setup.Sw @ w
    d_hi = setup._x_hi - c
    d_lo = c - setup._x_lo

    def states_ok(u):
        flat = setup.Su @ u
        return np.all(flat <= d_hi + 1e-9) and np.all(-flat <= d_lo + 1e-9)

    u = -(setup._H_inv @ g)
    if np.all(G_fix @ u <= d_fix + 1e-12) and states_ok(u):
        return MpcResult(u, _predict(setup, x0, u, w), _cost(setup, x0, u, w), "unconstrained")

    u0 = np.full(n_c, min(max(prev_tau, setup.tau_min), setup.tau_max))
    try:
        u, _ = solve_qp(setup.H, g, G_fix, d_fix, u0)
        if states_ok(u):
            return MpcResult(u, _predict(setup, x0, u, w), _cost(setup, x0, u, w), "active_set")
        u, slack = _solve_with_state_box(setup, g, G_fix, d_fix, d_hi, d_lo, u)
        status = "active_set" if slack < 1e-7 else "soft"
        return MpcResult(u, _predict(setup, x0, u, w), _cost(setup, x0, u, w), status, max(slack, 0.0))
    except SolverFailure:
        u = np.full(n_c, setup.tau_min)
        return MpcResult(u, _predict(setup, x0, u, w), _cost(setup, x0, u, w), "fallback")


def _solve_with_state_box(setup: MpcSetup, g, G_fix, d_fix, d_hi, d_lo, u_relaxed):
    """Re-solve with state rows, slack-softened by an exact L1 penalty.

    Only rows violated so far get a slack variable; the set expands until the
    solution respects every remaining row (a handful of passes in practice).
    Zero slack at the optimum certifies the hard-constrained solution.
    """
    n_c = setup.n_c
    G_state = np.vstack([setup.Su, -setup.Su])
    d_state = np.concatenate([d_hi, d_lo])
    n_rows = G_state.shape[0]
    active = [int(i) for i in np.nonzero(G_state @ u_relaxed - d_state > 1e-9)[0]]
    u = u_relaxed
    for _ in range(6):
        k = len(active)
        Hz = np.zeros((n_c + k, n_c + k))
        Hz[:n_c, :n_c] = setup.H
        Hz[n_c:, n_c:] = np.eye(k)
        gz = np.concatenate([g, setup.soft_weight * np.ones(k)])
        Gs = G_state[active]
        rows = np.vstack(
            [
                np.hstack([G_fix, np.zeros((G_fix.shape[0], k))]),
                np.hstack([Gs, -np.eye(k)]),
                np.hstack([np.zeros((k, n_c)), -np.eye(k)]),
            ]
        )
        rhs = np.concatenate([d_fix, d_state[active], np.zeros(k)])
        viol0 = Gs @ u - d_state[active]
        z0 = np.concatenate([u, np.maximum(viol0, 0.0)])
        base = G_fix.shape[0]
        warm = [base + i for i in range(k) if viol0[i] > 1e-12]
        z, _ = solve_qp(Hz, gz, rows, rhs, z0, max_iter=600, warm_set=warm)
        u = z[:n_c]
        slack = float(np.max(z[n_c:], initial=0.0))
        new = [int(i) for i in np.nonzero(G_state @ u - d_state > 1e-9)[0] if i not in active]
        if not new:
            return u, slack
        active.extend(new)
        if len(active) >= n_rows:
            break
    resid = float(np.max(G_state @ u - d_state, initial=0.0))
    return u, max(resid, 0.0)


# ---- lateral control -------------------------------------------------------


@dataclass
class LateralState:
    """Front-axle pose and the Stanley controller parameters."""

    x: float
    y: float
    heading: float        # [rad]
    speed: float          # [m/s]
    gain: float = 2.5     # cross-track gain [1/s]
    max_steer: float = 0.6
    v_floor: float = 0.5


@dataclass
class SteerResult:
    delta: float
    saturated: bool
    cross_track: float    # signed offset, positive = path left of heading
    path_heading: float


def stanley_steer(state: LateralState, traj: TrajectoryPath) -> SteerResult:
    """Front-wheel angle steering toward the trajectory centerline.

    Heading feedback uses the stabilizing orientation (path tangent minus
    vehicle heading); cross-track feedback is arctan(gain * e / v) with the
    speed floored to keep the term bounded at crawl speeds.
    """
    _, path_heading, (px, py) = traj.nearest_on_path(state.x, state.y)
    rx = px - state.x
    ry = py - state.y
    e = math.cos(state.heading) * ry - math.sin(state.heading) * rx
    heading_err = math.remainder(path_heading - state.heading, 2.0 * math.pi)
    delta = heading_err + math.atan2(state.gain * e, max(state.speed, state.v_floor))
    if delta > state.max_steer:
        return SteerResult(state.max_steer, True, e, path_heading)
    if delta < -state.max_steer:
        return SteerResult(-state.max_steer, True, e, path_heading)
    return SteerResult(delta, False, e, path_heading)
