"""Closed-loop EEDI search and the four baseline controllers.

Every controller shares one loop: plan a horizon, execute it in full while
sampling the sensor, update the belief, then test for termination. Belief
and EID stay frozen while a horizon executes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .config import ScenarioConfig
from .domain import Axis, BeliefGrid, DegenerateBelief, Trajectory, moments
from .dynamics import INTEGRATOR, DynamicsModel, default_model, integrate
from .ergodic import BasisIndexSet, density_coeffs
from .estimation import (ElectrosenseSurrogate, EidMap, MeasurementModel, entropy, eid_map,
                         multi_target_eid, multi_target_update, simulate_measurements)
from .records import (CONVERGED, DEGENERATE, DUPLICATE, INVALID, MAX_RUNTIME, TerminationReport,
                      TrialRecord, evaluate_success)
from .trajopt import ErgodicObjective, OptimizerSettings, optimize


class Context:
    """Objects derived once per scenario: models, basis, belief axes."""

    def __init__(self, scenario: ScenarioConfig, model: Optional[MeasurementModel] = None):
        self.scenario = scenario
        self.domain = scenario.domain
        self.model = model or ElectrosenseSurrogate(noise_sigma=scenario.noise_sigma,
                                                    standoff=scenario.plane_offset,
                                                    radius=scenario.target_radius)
        n = scenario.ndim
        if scenario.control_bounds is not None:
            self.dynamics = DynamicsModel(scenario.dynamics, tuple(map(tuple, scenario.control_bounds)), n)
        else:
            self.dynamics = default_model(scenario.dynamics, n, scenario.max_speed)
        self.basis = BasisIndexSet(self.domain, scenario.basis_K)
        m = scenario.belief_margin
        names = ("x", "y")[:n]
        axes = [Axis(nm, -m, L + m, int(c))
                for nm, L, c in zip(names, self.domain.lengths, scenario.belief_resolution)]
        if scenario.estimate_radius:
            lo, hi = scenario.radius_band
            axes.append(Axis("r", lo, hi, scenario.radius_count))
        self.axes = axes
        self.settings = OptimizerSettings(horizon=scenario.horizon_T, dt=scenario.dt,
                                          max_iters=scenario.max_iters,
                                          descent_tolerance=scenario.descent_tolerance)

    @property
    def n_loc(self) -> int:
        return self.domain.ndim

    def uniform_belief(self) -> BeliefGrid:
        return BeliefGrid.uniform(self.axes)


@dataclass
class LoopState:
    sensor_state: np.ndarray
    grids: list
    frozen: int = 0
    elapsed: float = 0.0
    history: list = field(default_factory=list)
    prev_controls: Optional[np.ndarray] = None
    invalid_streak: int = 0
    eid: Optional[EidMap] = None

    @property
    def active_target_index(self) -> int:
        return len(self.grids) - 1

    @property
    def active(self) -> BeliefGrid:
        return self.grids[-1]


def _ctx(scenario, ctx):
    return ctx if ctx is not None else Context(scenario)


def current_eid(state: LoopState, ctx: Context) -> EidMap:
    """EID of the current beliefs; cached until the beliefs change."""
    if state.eid is None:
        if len(state.grids) == 1:
            state.eid = eid_map(state.grids[0], ctx.model, ctx.domain)
        else:
            state.eid = multi_target_eid(state.grids, ctx.model, ctx.domain)
    return state.eid


def _position(state: LoopState, ctx: Context) -> np.ndarray:
    return np.asarray(state.sensor_state[: ctx.n_loc], dtype=float)


def _require_integrator(ctx, name):
    if ctx.dynamics.kind != INTEGRATOR:
        raise ValueError(f"{name} is defined for the kinematic (integrator) sensor only")


def _path_trajectory(points, dt, t0) -> Trajectory:
    points = np.asarray(points, dtype=float)
    controls = np.diff(points, axis=0) / dt
    times = t0 + dt * np.arange(len(points))
    return Trajectory(times, points, controls, points)


def _steps(scenario) -> int:
    return int(round(scenario.horizon_T / scenario.dt))


def plan_eedi(state: LoopState, scenario: ScenarioConfig, rng=None, ctx: Context = None) -> Trajectory:
    ctx = _ctx(scenario, ctx)
    eid = current_eid(state, ctx)
    phi = density_coeffs(eid, ctx.basis)
    obj = ErgodicObjective(phi, ctx.basis, gamma=scenario.gamma, R=np.asarray(scenario.R),
                           barrier_weight=scenario.barrier_weight)
    return optimize(state.sensor_state, ctx.dynamics, obj, ctx.settings, rng,
                    init_controls=state.prev_controls, t0=state.elapsed)


def plan_iga(state: LoopState, scenario: ScenarioConfig, rng=None, ctx: Context = None) -> Trajectory:
    """Follow the interpolated EID gradient at a fixed speed."""
    ctx = _ctx(scenario, ctx)
    _require_integrator(ctx, "IGA")
    eid = current_eid(state, ctx)
    axes = ctx.domain.axes()
    grads = np.gradient(eid.density, *axes, edge_order=1)
    if ctx.n_loc == 1:
        grads = [grads]
    interps = [RegularGridInterpolator(axes, g, method="linear") for g in grads]
    scale = max(float(np.max(np.abs(g))) for g in grads)
    eps = 1e-12 * scale
    speed, dt = scenario.baseline_speed, scenario.dt
    p = _position(state, ctx)
    path = [p]
    for _ in range(_steps(scenario)):
        q = ctx.domain.clip(p)
        g = np.array([float(f(q[None, :])[0]) for f in interps])
        norm = float(np.linalg.norm(g))
        if norm > eps:
            p = ctx.domain.clip(p + speed * dt * g / norm)
        path.append(p)
    return _path_trajectory(path, dt, state.elapsed)


def _line(p, q, speed, n, dt):
    """Constant-speed straight path from ``p`` toward ``q``, stopping on arrival."""
    d = q - p
    dist = float(np.linalg.norm(d))
    s = np.minimum(speed * dt * np.arange(n + 1), dist)
    if dist == 0:
        return np.repeat(p[None, :], n + 1, axis=0)
    return p[None, :] + (s / dist)[:, None] * d[None, :]


def plan_im(state: LoopState, scenario: ScenarioConfig, rng=None, ctx: Context = None) -> Trajectory:
    """Drive straight to the EID maximum (lowest flat index on ties)."""
    ctx = _ctx(scenario, ctx)
    _require_integrator(ctx, "IM")
    eid = current_eid(state, ctx)
    goal = ctx.domain.points()[int(np.argmax(eid.density.ravel()))]
    path = _line(_position(state, ctx), goal, scenario.baseline_speed, _steps(scenario), scenario.dt)
    return _path_trajectory(path, scenario.dt, state.elapsed)


def geer_candidates(p, radius, n, domain, rng) -> np.ndarray:
    if domain.ndim == 1:
        offsets = rng.uniform(-radius, radius, size=(n, 1))
    else:
        ang = rng.uniform(0.0, 2 * np.pi, size=n)
        rad = radius * np.sqrt(rng.uniform(0.0, 1.0, size=n))
        offsets = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    return domain.clip(p[None, :] + offsets)


def expected_entropy_reduction(grid: BeliefGrid, path, model: MeasurementModel, n_samples: int,
                               rng, weight: float = 1.0) -> float:
    """Monte Carlo ``H(theta) - E[H(theta) | V+]`` for noiseless data along ``path``.

    ``weight`` scales the log-likelihood when ``path`` subsamples the sensor rate.
    """
    p = grid.probabilities()
    keep = p > 0
    theta = grid.points()[keep]
    prob = p[keep] / p[keep].sum()
    w = grid.weights()[keep]
    h0 = entropy(grid)
    idx = rng.choice(len(theta), size=n_samples, p=prob)
    U = model.predict(theta, path)  # (C, J)
    V = U[idx]
    sq = np.sum(V * V, axis=1)[:, None] - 2.0 * V @ U.T + np.sum(U * U, axis=1)[None, :]
    logpost = np.log(prob)[None, :] - (weight / (2.0 * model.noise_sigma ** 2)) * sq
    logpost -= logpost.max(axis=1, keepdims=True)
    post = np.exp(logpost)
    post /= post.sum(axis=1, keepdims=True)
    dens = post / w[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(post > 0, post * np.log(dens), 0.0)
    h_post = -np.sum(terms, axis=1)
    return float(h0 - np.mean(h_post))


def plan_geer(state: LoopState, scenario: ScenarioConfig, rng=None, ctx: Context = None) -> Trajectory:
    """Greedy pick among random straight-line candidates by expected entropy reduction."""
    ctx = _ctx(scenario, ctx)
    _require_integrator(ctx, "gEER")
    rng = rng if rng is not None else np.random.default_rng(scenario.rng_seed)
    p = _position(state, ctx)
    n, dt, T = _steps(scenario), scenario.dt, scenario.horizon_T
    radius = scenario.max_speed * T
    ends = geer_candidates(p, radius, scenario.geer_candidates, ctx.domain, rng)
    gains = []
    paths = []
    for e in ends:
        speed = float(np.linalg.norm(e - p)) / T
        path = _line(p, e, speed, n, dt)
        paths.append(path)
        gains.append(expected_entropy_reduction(state.active, path[1:], ctx.model,
                                                scenario.geer_samples, rng, weight=scenario.substeps))
    best = int(np.argmax(gains))
    traj = _path_trajectory(paths[best], dt, state.elapsed)
    traj.meta["gains"] = gains
    traj.meta["candidates"] = ends
    return traj


def _fold(y, L):
    y = np.mod(y, 2 * L)
    return np.where(y > L, 2 * L - y, y)


def plan_rw(state: LoopState, scenario: ScenarioConfig, rng=None, ctx: Context = None) -> Trajectory:
    """Random heading at constant speed, reflecting off the walls."""
    ctx = _ctx(scenario, ctx)
    _require_integrator(ctx, "RW")
    rng = rng if rng is not None else np.random.default_rng(scenario.rng_seed)
    p = _position(state, ctx)
    if ctx.n_loc == 1:
        d = np.array([rng.choice([-1.0, 1.0])])
    else:
        a = rng.uniform(0.0, 2 * np.pi)
        d = np.array([np.cos(a), np.sin(a)])
    n, dt = _steps(scenario), scenario.dt
    t = dt * np.arange(n + 1)
    raw = p[None, :] + scenario.baseline_speed * t[:, None] * d[None, :]
    L = np.asarray(ctx.domain.lengths)
    return _path_trajectory(_fold(raw, L[None, :]), dt, state.elapsed)


PLANNERS = {"EEDI": plan_eedi, "IGA": plan_iga, "IM": plan_im, "GEER": plan_geer, "RW": plan_rw}


def _summary(grid: BeliefGrid):
    mean, cov = moments(grid)
    return mean, cov


def _converged(cov, scenario) -> bool:
    return float(np.sqrt(max(np.trace(cov), 0.0))) < scenario.termination_std


def _location_invalid(grid: BeliefGrid, mean, ctx: Context) -> bool:
    """Mean within one cell of the grid edge, or (with a margin) mass mostly outside."""
    for i, a in enumerate(grid.axes[: ctx.n_loc]):
        if mean[i] <= a.min + a.spacing or mean[i] >= a.max - a.spacing:
            return True
    sc = ctx.scenario
    if sc.belief_margin > 0:
        return outside_mass(grid, ctx) >= sc.invalid_mass
    return False


def outside_mass(grid: BeliefGrid, ctx: Context) -> float:
    pts = grid.points()[:, : ctx.n_loc]
    inside = ctx.domain.contains(pts, tol=1e-12)
    return float(np.sum(grid.probabilities()[~inside]))


def _estimate(grid):
    mean, cov = moments(grid)
    return {"mean": mean.tolist(), "cov": cov.tolist()}


def _frozen_estimates(state):
    return [_estimate(g) for g in state.grids[: state.frozen]]


def _duplicate(mean, state, ctx) -> bool:
    n = ctx.n_loc
    for g in state.grids[: state.frozen]:
        m, _ = moments(g)
        if np.linalg.norm(m[:n] - mean[:n]) < ctx.scenario.success_tolerance:
            return True
    return False


def check_termination(state: LoopState, scenario: ScenarioConfig,
                      ctx: Context = None) -> Optional[TerminationReport]:
    """Termination report, or ``None`` to keep searching."""
    ctx = _ctx(scenario, ctx)
    grid = state.active
    mean, cov = moments(grid)
    converged = _converged(cov, scenario)
    invalid_now = _location_invalid(grid, mean, ctx)
    if not scenario.multi_target:
        if converged and not invalid_now:
            return TerminationReport(CONVERGED, [_estimate(grid)], state.elapsed)
        if (converged and invalid_now) or state.invalid_streak >= scenario.invalid_streak:
            return TerminationReport(INVALID, [], state.elapsed)
    else:
        if converged and invalid_now or state.invalid_streak >= scenario.invalid_streak:
            return TerminationReport(INVALID, _frozen_estimates(state), state.elapsed)
        if converged and _duplicate(mean, state, ctx):
            return TerminationReport(DUPLICATE, _frozen_estimates(state), state.elapsed)
        if converged and len(state.grids) >= scenario.max_grids:
            return TerminationReport(CONVERGED, [_estimate(g) for g in state.grids], state.elapsed)
    if state.elapsed >= scenario.max_runtime - 1e-9:
        est = _frozen_estimates(state) if scenario.multi_target else []
        return TerminationReport(MAX_RUNTIME, est, state.elapsed)
    return None


def _maybe_freeze(state: LoopState, scenario, ctx) -> bool:
    """Multi-target: lock a converged, valid, new estimate and open a fresh grid."""
    if not scenario.multi_target or len(state.grids) >= scenario.max_grids:
        return False
    mean, cov = moments(state.active)
    if not _converged(cov, scenario) or _location_invalid(state.active, mean, ctx):
        return False
    if _duplicate(mean, state, ctx):
        return False
    state.frozen = len(state.grids)
    state.grids.append(ctx.uniform_belief())
    state.invalid_streak = 0
    state.eid = None
    return True


def initial_state(scenario: ScenarioConfig, ctx: Context = None) -> LoopState:
    ctx = _ctx(scenario, ctx)
    x0 = np.asarray(scenario.start_state, dtype=float)
    if x0.shape != (ctx.dynamics.state_dim,):
        raise ValueError(f"start_state needs {ctx.dynamics.state_dim} entries for {scenario.dynamics}")
    return LoopState(sensor_state=x0, grids=[ctx.uniform_belief()])


def execute(plan: Trajectory, state: LoopState, scenario: ScenarioConfig, ctx: Context) -> Trajectory:
    """Run the planned controls at the sensor rate from the current state."""
    sub = scenario.substeps
    controls = np.repeat(plan.controls, sub, axis=0)
    return integrate(ctx.dynamics, state.sensor_state, controls, scenario.dt / sub, t0=state.elapsed)


def run_closed_loop(scenario: ScenarioConfig, model: Optional[MeasurementModel] = None,
                    trial_index: int = 0) -> TrialRecord:
    """Run one trial to termination; the record is a pure function of ``scenario``."""
    start = time.perf_counter()
    ctx = Context(scenario, model)
    seeds = np.random.SeedSequence(scenario.rng_seed).spawn(2)
    noise_rng, plan_rng = (np.random.default_rng(s) for s in seeds)
    planner = PLANNERS[scenario.controller]
    truth = list(scenario.true_targets) + list(scenario.distractors)
    state = initial_state(scenario, ctx)
    horizons = []
    report = None
    while report is None:
        try:
            _maybe_freeze(state, scenario, ctx)
            report = check_termination(state, scenario, ctx)
            if report is not None:
                break
            plan = planner(state, scenario, plan_rng, ctx)
            eid = state.eid
            run = execute(plan, state, scenario, ctx)
            positions = run.workspace_projection[1:]
            volts = simulate_measurements(truth, positions, ctx.model, noise_rng)
            active = len(state.grids) - 1
            state.grids = multi_target_update(state.grids, positions, volts, ctx.model, update=[active])
        except DegenerateBelief:
            est = _frozen_estimates(state) if scenario.multi_target else []
            report = TerminationReport(DEGENERATE, est, state.elapsed)
            break
        state.eid = None
        state.sensor_state = run.states[-1]
        state.elapsed += scenario.horizon_T
        if scenario.controller == "EEDI":
            state.prev_controls = plan.controls
        mean, cov = moments(state.active)
        state.invalid_streak = state.invalid_streak + 1 if _location_invalid(state.active, mean, ctx) else 0
        entry = {"index": len(horizons), "t_start": float(plan.times[0]), "active": active,
                 "trajectory": plan.workspace_projection.tolist(),
                 "measurements": volts.tolist(),
                 "mean": mean.tolist(), "cov": cov.tolist(), "entropy": entropy(state.active),
                 "barrier_flag": bool(plan.meta.get("barrier_flag", False))}
        if scenario.dump_eid and eid is not None:
            entry["eid"] = eid.density.ravel().tolist()
        horizons.append(entry)
        state.history.append((plan, volts))
    truth_locs = [t.location for t in scenario.true_targets]
    success = evaluate_success(report, truth_locs, scenario.success_tolerance, scenario.multi_target)
    return TrialRecord(scenario=scenario.to_dict(), controller=scenario.controller, horizons=horizons,
                       termination=report, success=success, trial_index=trial_index,
                       wall_time=time.perf_counter() - start)
