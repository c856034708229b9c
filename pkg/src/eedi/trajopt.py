"""First-order ergodic trajectory optimization over a fixed horizon."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import Trajectory, trapezoid_weights
from .dynamics import DynamicsModel, rk4_step_jacobians, rollout
from .ergodic import BasisIndexSet, _ergodicity_gradient, _trajectory_coeffs, ergodicity


@dataclass
class ErgodicObjective:
    """``gamma * E + sum 1/2 u'Ru dt + barrier_weight * sum dist(x, X)^2``."""

    phi: np.ndarray
    basis: BasisIndexSet
    gamma: float = 20.0
    R: np.ndarray = None
    barrier_weight: float = 1e3

    def __post_init__(self):
        if self.R is None:
            self.R = 0.01 * np.eye(self.basis.domain.ndim)
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not np.allclose(self.R, self.R.T) or np.any(np.linalg.eigvalsh(self.R) <= 0):
            raise ValueError("R must be symmetric positive definite")
        if self.barrier_weight < 0:
            raise ValueError("barrier_weight must be nonnegative")
        self.phi = np.asarray(self.phi, dtype=float)


@dataclass
class OptimizerSettings:
    horizon: float = 10.0
    dt: float = 0.1
    max_iters: int = 100
    descent_tolerance: float = 1e-3
    armijo_c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    initial_policy: str = "forward"
    initial_fraction: float = 0.25
    jitter: float = 0.01

    def __post_init__(self):
        if not 0 < self.armijo_c1 < 1 or not 0 < self.shrink < 1:
            raise ValueError("need 0 < c1 < 1 and 0 < shrink < 1")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError("horizon must be an integer multiple of dt")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


def _barrier(points, lengths):
    outside = points - np.clip(points, 0.0, lengths)
    return outside


def _evaluate(model: DynamicsModel, x0, U, dt, obj: ErgodicObjective, with_grad: bool):
    states = rollout(model, x0, U, dt)
    pts = model.project(states)
    n_pts = len(pts)
    tw = trapezoid_weights(n_pts, dt) / (dt * (n_pts - 1))
    lengths = np.asarray(obj.basis.domain.lengths)
    out = _barrier(pts, lengths)
    effort = 0.5 * dt * np.einsum("ji,ik,jk->", U, obj.R, U)
    barrier = float(np.sum(out * out))
    if not with_grad:
        E = ergodicity(_trajectory_coeffs(pts, tw, obj.basis), obj.phi, obj.basis)
        return obj.gamma * E + effort + obj.barrier_weight * barrier, states, E, barrier, None
    E, dE = _ergodicity_gradient(pts, tw, obj.phi, obj.basis)
    J = obj.gamma * E + effort + obj.barrier_weight * barrier
    lx_ws = obj.gamma * dE + 2.0 * obj.barrier_weight * out
    n_ws = pts.shape[1]
    grad = np.empty_like(U)
    lam = np.zeros(model.state_dim)
    lam[:n_ws] = lx_ws[-1]
    Fx, Fu = rk4_step_jacobians(model, states[:-1], U, dt)
    effort_grad = dt * U @ obj.R.T
    for j in range(len(U) - 1, -1, -1):
        grad[j] = effort_grad[j] + Fu[j].T @ lam
        lam = Fx[j].T @ lam
        lam[:n_ws] += lx_ws[j]
    return J, states, E, barrier, grad


def _trajectory(model, states, U, dt, t0=0.0, meta=None) -> Trajectory:
    times = t0 + dt * np.arange(len(states))
    return Trajectory(times, states, U, model.project(states), meta=meta or {})


def objective(traj: Trajectory, obj: ErgodicObjective) -> float:
    pts = traj.workspace_projection
    U = traj.controls
    tw = trapezoid_weights(len(pts), traj.dt) / traj.duration
    E = ergodicity(_trajectory_coeffs(pts, tw, obj.basis), obj.phi, obj.basis)
    out = _barrier(pts, np.asarray(obj.basis.domain.lengths))
    effort = 0.5 * traj.dt * np.einsum("ji,ik,jk->", U, obj.R, U)
    return float(obj.gamma * E + effort + obj.barrier_weight * np.sum(out * out))


def gradient(traj: Trajectory, model: DynamicsModel, obj: ErgodicObjective) -> np.ndarray:
    """Derivative of the discretized objective w.r.t. every held control."""
    return _evaluate(model, traj.states[0], traj.controls, traj.dt, obj, True)[4]


def descent_direction(traj: Trajectory, model: DynamicsModel, obj: ErgodicObjective) -> np.ndarray:
    """Steepest-descent perturbation of the control sequence (costate recursion)."""
    return -gradient(traj, model, obj)


def initial_controls(model: DynamicsModel, settings: OptimizerSettings, rng) -> np.ndarray:
    span = model.upper - model.lower
    u = np.zeros(model.control_dim)
    u[0] = settings.initial_fraction * model.upper[0]
    U = np.tile(u, (settings.steps, 1))
    if rng is not None and settings.jitter > 0:
        U = U + settings.jitter * span * rng.uniform(-0.5, 0.5, size=U.shape)
    return model.clip_controls(U)


def _stationarity(U, grad, model, dt):
    projected = model.clip_controls(U - grad / dt) - U
    return float(np.max(np.abs(projected))) if projected.size else 0.0


def optimize(x0, model: DynamicsModel, obj: ErgodicObjective, settings: OptimizerSettings,
             rng=None, init_controls=None, t0: float = 0.0) -> Trajectory:
    """Projected steepest descent with Armijo backtracking over the controls.

    Returns the best rolled-out trajectory; ``meta`` records the accepted
    objective history, the iteration count and the final barrier value.
    """
    dt = settings.dt
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    if init_controls is None or len(init_controls) != settings.steps:
        U = initial_controls(model, settings, rng)
    else:
        U = model.clip_controls(np.asarray(init_controls, dtype=float).reshape(settings.steps, -1))
    J, states, E, barrier, grad = _evaluate(model, x0, U, dt, obj, True)
    history = [J]
    span = float(np.max(model.upper - model.lower))
    alpha = None
    reason = "max_iters"
    it = 0
    for it in range(1, settings.max_iters + 1):
        if _stationarity(U, grad, model, dt) <= settings.descent_tolerance:
            reason = "stationary"
            it -= 1
            break
        gmax = float(np.max(np.abs(grad)))
        if alpha is None:
            alpha = 0.5 * span / gmax
        else:
            alpha = min(alpha * 2.0, 10.0 * span / gmax)
        accepted = False
        for _ in range(settings.max_backtracks):
            U_new = model.clip_controls(U - alpha * grad)
            step = U_new - U
            decrease = float(np.sum(grad * step))
            if decrease >= 0:
                alpha *= settings.shrink
                continue
            J_new, states_new, E_new, b_new, _ = _evaluate(model, x0, U_new, dt, obj, False)
            if J_new <= J + settings.armijo_c1 * decrease:
                accepted = True
                break
            alpha *= settings.shrink
        if not accepted:
            reason = "line_search"
            it -= 1
            break
        U = U_new
        J, states, E, barrier, grad = _evaluate(model, x0, U, dt, obj, True)
        history.append(J)
    meta = {"J_history": history, "iterations": it, "ergodicity": E, "barrier": barrier,
            "barrier_flag": obj.barrier_weight * barrier > 1e-6, "stop": reason}
    return _trajectory(model, states, U, dt, t0, meta)
