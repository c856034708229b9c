"""Motion models, fixed-step RK4 rollouts and their linearizations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import IntegrationDiverged, Trajectory

INTEGRATOR = "Integrator"
UNICYCLE_KIN = "UnicycleKin"
UNICYCLE_DYN = "UnicycleDyn"
KINDS = (INTEGRATOR, UNICYCLE_KIN, UNICYCLE_DYN)


@dataclass(frozen=True)
class DynamicsModel:
    kind: str
    control_bounds: tuple
    workspace_dim: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.kind != INTEGRATOR and self.workspace_dim != 2:
            raise ValueError("unicycle models move in a 2-D workspace")
        bounds = tuple(tuple(float(v) for v in b) for b in self.control_bounds)
        if len(bounds) != self.control_dim or any(lo >= hi for lo, hi in bounds):
            raise ValueError(f"need {self.control_dim} (min, max) control bounds, got {bounds}")
        object.__setattr__(self, "control_bounds", bounds)

    @property
    def state_dim(self) -> int:
        return {INTEGRATOR: self.workspace_dim, UNICYCLE_KIN: 3, UNICYCLE_DYN: 5}[self.kind]

    @property
    def control_dim(self) -> int:
        return self.workspace_dim if self.kind == INTEGRATOR else 2

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.control_bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.control_bounds])

    def project(self, state) -> np.ndarray:
        """Workspace coordinates of a state (or stacked states)."""
        return np.asarray(state)[..., : self.workspace_dim]

    def clip_controls(self, u) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)


def default_model(kind: str, workspace_dim: int = 2, speed: float = 0.1) -> DynamicsModel:
    if kind == INTEGRATOR:
        bounds = ((-speed, speed),) * workspace_dim
    elif kind == UNICYCLE_KIN:
        bounds = ((-speed, speed), (-1.0, 1.0))
    else:
        bounds = ((-2 * speed, 2 * speed), (-1.0, 1.0))
    return DynamicsModel(kind, bounds, workspace_dim)


def flow(model: DynamicsModel, state, control) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    if x.shape[-1] != model.state_dim or u.shape[-1] != model.control_dim:
        raise ValueError(f"{model.kind}: expected state {model.state_dim}, control {model.control_dim}; "
                         f"got {x.shape}, {u.shape}")
    return _f(model.kind, x, u)


def _f(kind, x, u):
    """Right-hand side without argument checks (inner loops)."""
    if kind == INTEGRATOR:
        return u.copy()
    th = x[..., 2]
    if kind == UNICYCLE_KIN:
        v, w = u[..., 0], u[..., 1]
        return np.stack([v * np.cos(th), v * np.sin(th), w], axis=-1)
    v, w = x[..., 3], x[..., 4]
    return np.stack([v * np.cos(th), v * np.sin(th), w, 0.5 * u[..., 0], u[..., 1]], axis=-1)


def linearize(model: DynamicsModel, state, control):
    """Jacobians ``(df/dx, df/du)``; leading axes of ``state``/``control`` broadcast."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    nx, nu = model.state_dim, model.control_dim
    lead = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    A = np.zeros(lead + (nx, nx))
    B = np.zeros(lead + (nx, nu))
    if model.kind == INTEGRATOR:
        B[:] = np.eye(nx)
        return A, B
    th = x[..., 2]
    c, s = np.cos(th), np.sin(th)
    if model.kind == UNICYCLE_KIN:
        v = u[..., 0]
        A[..., 0, 2] = -v * s
        A[..., 1, 2] = v * c
        B[..., 0, 0] = c
        B[..., 1, 0] = s
        B[..., 2, 1] = 1.0
        return A, B
    v = x[..., 3]
    A[..., 0, 2] = -v * s
    A[..., 1, 2] = v * c
    A[..., 0, 3] = c
    A[..., 1, 3] = s
    A[..., 2, 4] = 1.0
    B[..., 3, 0] = 0.5
    B[..., 4, 1] = 1.0
    return A, B


def rk4_step(model, x, u, h) -> np.ndarray:
    flow(model, x, u)  # shape check
    return _rk4(model.kind, np.asarray(x, dtype=float), np.asarray(u, dtype=float), h)


def _rk4(kind, x, u, h):
    k1 = _f(kind, x, u)
    k2 = _f(kind, x + 0.5 * h * k1, u)
    k3 = _f(kind, x + 0.5 * h * k2, u)
    k4 = _f(kind, x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step_jacobians(model, x, u, h):
    """Exact derivatives of one RK4 step w.r.t. the state and the held control.

    ``x``/``u`` may carry a leading batch axis (one step per row).
    """
    k1 = flow(model, x, u)
    x2 = x + 0.5 * h * k1
    k2 = flow(model, x2, u)
    x3 = x + 0.5 * h * k2
    k3 = flow(model, x3, u)
    x4 = x + h * k3
    A1, B1 = linearize(model, x, u)
    A2, B2 = linearize(model, x2, u)
    A3, B3 = linearize(model, x3, u)
    A4, B4 = linearize(model, x4, u)
    eye = np.eye(model.state_dim)
    dk1x, dk1u = A1, B1
    dk2x = A2 @ (eye + 0.5 * h * dk1x)  # batched matmul when x is (N, nx)
    dk2u = A2 @ (0.5 * h * dk1u) + B2
    dk3x = A3 @ (eye + 0.5 * h * dk2x)
    dk3u = A3 @ (0.5 * h * dk2u) + B3
    dk4x = A4 @ (eye + h * dk3x)
    dk4u = A4 @ (h * dk3u) + B4
    Fx = eye + (h / 6.0) * (dk1x + 2 * dk2x + 2 * dk3x + dk4x)
    Fu = (h / 6.0) * (dk1u + 2 * dk2u + 2 * dk3u + dk4u)
    return Fx, Fu


def rollout(model: DynamicsModel, x0, controls, dt: float) -> np.ndarray:
    controls = np.asarray(controls, dtype=float).reshape(-1, model.control_dim)
    states = np.empty((len(controls) + 1, model.state_dim))
    states[0] = x0
    x = states[0]
    if len(controls):
        flow(model, x, controls[0])
    kind = model.kind
    with np.errstate(over="ignore", invalid="ignore"):
        for j, u in enumerate(controls):
            x = _rk4(kind, x, u, dt)
            states[j + 1] = x
    if not np.all(np.isfinite(states)):
        raise IntegrationDiverged(f"{model.kind} rollout produced non-finite states")
    return states


def integrate(model: DynamicsModel, x0, controls, dt: float, t0: float = 0.0) -> Trajectory:
    """Zero-order-hold RK4 rollout of ``controls`` from ``x0``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.state_dim,):
        raise ValueError(f"{model.kind}: initial state must have {model.state_dim} entries")
    controls = np.asarray(controls, dtype=float).reshape(-1, model.control_dim)
    states = rollout(model, x0, controls, dt)
    times = t0 + dt * np.arange(len(states))
    return Trajectory(times, states, controls, model.project(states))
