"""Measurement models, grid Bayes filtering, Fisher information and EID maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import (BeliefGrid, DegenerateBelief, SearchDomain, TargetParams, Trajectory,
                     normalize)

# caps the (cells x samples) block held in memory at once
_BLOCK = 2_000_000


class MeasurementModel:
    """Expected sensor voltage for a target hypothesis at a sensor position.

    ``theta`` rows hold the estimated parameters of one hypothesis: the target
    location (one entry per workspace axis) optionally followed by its radius.
    Subclasses implement :meth:`predict`; :meth:`theta_gradient` falls back to
    central differences.
    """

    noise_sigma: float = 1e-4
    fd_step: float = 1e-7

    def predict(self, theta, x) -> np.ndarray:
        raise NotImplementedError

    def theta_gradient(self, theta, x) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((theta.shape[0], x.shape[0], theta.shape[1]))
        for i in range(theta.shape[1]):
            step = np.zeros(theta.shape[1])
            step[i] = self.fd_step
            out[:, :, i] = (self.predict(theta + step, x) - self.predict(theta - step, x)) / (2 * self.fd_step)
        return out

    def target_signal(self, target: TargetParams, x) -> np.ndarray:
        return self.predict(np.asarray(target.location)[None, :], x)[0]


@dataclass
class ElectrosenseSurrogate(MeasurementModel):
    """Odd dipole-like response of a sphere below the sensor plane.

    ``V = A r^3 d1 / (d1^2 + d2^2 + z0^2)^(5/2)`` with ``d = x - location``.
    The peak grows as ``r^3`` and decays as the fourth power of distance.
    ``amplitude`` defaults to the value putting the peak of an
    ``r = calibration_radius`` sphere at ``standoff`` equal to one noise std.
    """

    noise_sigma: float = 1e-4
    standoff: float = 0.1
    radius: float = 0.0125
    amplitude: float = None
    calibration_radius: float = 0.009

    def __post_init__(self):
        if self.standoff <= 0:
            raise ValueError("standoff must be positive")
        if self.amplitude is None:
            self.amplitude = calibrated_amplitude(self.noise_sigma, self.standoff, self.calibration_radius)

    def _split(self, theta, x):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[1]
        if theta.shape[1] == n:
            r = np.full(theta.shape[0], self.radius)
        elif theta.shape[1] == n + 1:
            r = theta[:, n]
        else:
            raise ValueError(f"theta must have {n} or {n + 1} columns, got {theta.shape[1]}")
        delta = x[None, :, :] - theta[:, None, :n]
        return delta, r

    def _response(self, delta, r, z0):
        S = np.sum(delta * delta, axis=-1) + z0 * z0
        g = self.amplitude * r ** 3
        return g, S

    def predict(self, theta, x) -> np.ndarray:
        delta, r = self._split(theta, x)
        g, S = self._response(delta, r, self.standoff)
        return g[:, None] * delta[..., 0] * S ** -2.5

    def theta_gradient(self, theta, x) -> np.ndarray:
        delta, r = self._split(theta, x)
        n = delta.shape[-1]
        g, S = self._response(delta, r, self.standoff)
        S72 = S ** -3.5
        d1 = delta[..., 0]
        m = np.atleast_2d(theta).shape[1]
        out = np.empty(delta.shape[:2] + (m,))
        # d/dtheta = -d/d(delta)
        out[..., 0] = -g[:, None] * S72 * (S - 5.0 * d1 * d1)
        for i in range(1, n):
            out[..., i] = 5.0 * g[:, None] * d1 * delta[..., i] * S72
        if m == n + 1:
            out[..., n] = 3.0 * g[:, None] / r[:, None] * d1 * S ** -2.5
        return out

    def target_signal(self, target: TargetParams, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        loc = np.asarray(target.location)[: x.shape[1]]
        delta = x - loc[None, :]
        r = self.radius if target.radius is None else target.radius
        S = np.sum(delta * delta, axis=-1) + target.plane_offset ** 2
        return self.amplitude * r ** 3 * delta[:, 0] * S ** -2.5


def calibrated_amplitude(sigma: float, standoff: float, radius: float) -> float:
    # peak of d1 / (d1^2 + z^2)^(5/2) sits at d1 = z/2
    return 2.0 * 1.25 ** 2.5 * standoff ** 4 * sigma / radius ** 3


@dataclass
class GaussianBump(MeasurementModel):
    """Isotropic bump ``exp(-|x - location|^2 / 2 l^2)``; a smooth test model."""

    length_scale: float = 0.1
    noise_sigma: float = 1.0

    def predict(self, theta, x) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x[None, :, :] - theta[:, None, : x.shape[1]]
        return np.exp(-np.sum(d * d, axis=-1) / (2 * self.length_scale ** 2))

    def theta_gradient(self, theta, x) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x[None, :, :] - theta[:, None, : x.shape[1]]
        v = np.exp(-np.sum(d * d, axis=-1) / (2 * self.length_scale ** 2))
        return v[..., None] * d / self.length_scale ** 2


class FunctionModel(MeasurementModel):
    """Wraps ``fn(theta_rows, x_rows) -> (C, P)``; gradients by central differences."""

    def __init__(self, fn, noise_sigma=1.0, fd_step=1e-6):
        self.fn = fn
        self.noise_sigma = noise_sigma
        self.fd_step = fd_step

    def predict(self, theta, x):
        return np.asarray(self.fn(np.atleast_2d(theta), np.atleast_2d(x)), dtype=float)


@dataclass
class EidMap:
    """EID sampled on a domain grid: raw ``det`` values and the normalized density."""

    domain: SearchDomain
    raw: np.ndarray
    density: np.ndarray

    @classmethod
    def from_raw(cls, domain: SearchDomain, raw) -> "EidMap":
        raw = np.clip(np.asarray(raw, dtype=float).reshape(domain.shape), 0.0, None)
        total = float(raw.ravel() @ domain.weights())
        if not np.isfinite(total) or total <= 0.0:
            raise DegenerateBelief("expected information vanishes everywhere on the workspace")
        return cls(domain, raw, raw / total)


def _positions(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.workspace_projection
    return np.atleast_2d(np.asarray(traj, dtype=float))


def forward_model(model: MeasurementModel, theta: TargetParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = model.target_signal(theta, np.atleast_2d(x))
    return float(out[0]) if x.ndim == 1 else out


def simulate_measurements(truth: Sequence[TargetParams], traj, model: MeasurementModel, rng,
                          noise_sigma=None) -> np.ndarray:
    """Noisy voltages at every sample of ``traj`` from all objects in ``truth``."""
    x = _positions(traj)
    v = np.zeros(len(x))
    for obj in truth:
        v += model.target_signal(obj, x)
    sigma = model.noise_sigma if noise_sigma is None else noise_sigma
    return v + rng.normal(0.0, 1.0, size=len(x)) * sigma


def log_likelihood(grid: BeliefGrid, x, measurements, model: MeasurementModel,
                   weight: float = 1.0) -> np.ndarray:
    """Gaussian log-likelihood of the data for every grid node (up to a constant)."""
    theta = grid.points()
    v = np.asarray(measurements, dtype=float)
    out = np.zeros(len(theta))
    step = max(1, _BLOCK // max(1, len(theta)))
    for start in range(0, len(v), step):
        U = model.predict(theta, x[start:start + step])
        r = U - v[None, start:start + step]
        out -= np.sum(r * r, axis=1)
    return out * (weight / (2.0 * model.noise_sigma ** 2))


def _posterior(grid: BeliefGrid, loglik) -> BeliefGrid:
    prior = grid.mass.ravel()
    with np.errstate(divide="ignore"):
        logpost = np.log(prior) + loglik
    top = np.max(logpost)
    if not np.isfinite(top):
        raise DegenerateBelief("posterior underflows everywhere")
    return normalize(grid.with_mass(np.exp(logpost - top)))


def bayes_update(grid: BeliefGrid, traj, measurements, model: MeasurementModel,
                 weight: float = 1.0) -> BeliefGrid:
    """Posterior after independent Gaussian measurements along ``traj``.

    ``weight`` scales the log-likelihood, letting a subsampled track stand in
    for a denser one.
    """
    x = _positions(traj)
    v = np.asarray(measurements, dtype=float)
    if len(v) != len(x):
        raise ValueError(f"{len(v)} measurements for {len(x)} trajectory samples")
    if len(v) == 0:
        return grid
    return _posterior(grid, log_likelihood(grid, x, v, model, weight))


def expected_signal(grid: BeliefGrid, x, model: MeasurementModel) -> np.ndarray:
    """Belief-averaged expected measurement at each sensor position."""
    p = grid.probabilities()
    keep = p > 0
    theta = grid.points()[keep]
    p = p[keep]
    x = np.atleast_2d(x)
    out = np.zeros(len(x))
    step = max(1, _BLOCK // max(1, len(theta)))
    for start in range(0, len(x), step):
        out[start:start + step] = p @ model.predict(theta, x[start:start + step])
    return out


def multi_target_update(grids: Sequence[BeliefGrid], traj, measurements, model: MeasurementModel,
                        update=None) -> list:
    """Per-target updates with the other targets' expected signals subtracted.

    ``update`` lists the grid indices to update (default: all); the others
    are returned unchanged but still contribute to the marginalization.
    """
    x = _positions(traj)
    v = np.asarray(measurements, dtype=float)
    idx = range(len(grids)) if update is None else update
    expected = [expected_signal(g, x, model) if len(grids) > 1 else None for g in grids]
    out = list(grids)
    for i in idx:
        others = sum((expected[j] for j in range(len(grids)) if j != i), np.zeros(len(x)))
        out[i] = bayes_update(grids[i], x, v - others, model)
    return out


def _psd_guard(M) -> np.ndarray:
    """Add two ulps of the trace to the diagonal of each ``(m, m)`` block.

    Rounding a sum of outer products can leave eigenvalues of order
    ``eps * trace`` on either side of zero; the shift keeps stored matrices
    positive semidefinite and is shared by the single- and belief-averaged
    forms so that a delta belief reproduces the Fisher matrix bit for bit.
    """
    tr = np.einsum("...ii->...", M)
    idx = np.arange(M.shape[-1])
    M[..., idx, idx] += (2.0 * np.finfo(float).eps * tr)[..., None]
    return M


def fisher_matrix(model: MeasurementModel, theta, x) -> np.ndarray:
    """Single-measurement Fisher information ``g g' / sigma^2``."""
    theta = np.atleast_1d(np.asarray(getattr(theta, "location", theta), dtype=float))
    g = model.theta_gradient(theta[None, :], np.atleast_2d(x)) / model.noise_sigma
    return _psd_guard(np.einsum("cpi,cpj,c->pij", g, g, np.ones(1))[0])


def expected_information(grid: BeliefGrid, model: MeasurementModel, x) -> np.ndarray:
    """Belief-averaged Fisher information matrix at each point, ``(P, m, m)``."""
    p = grid.probabilities()
    keep = p > 0
    theta = grid.points()[keep]
    p = p[keep]
    x = np.atleast_2d(x)
    m = theta.shape[1]
    out = np.empty((len(x), m, m))
    step = max(1, _BLOCK // max(1, len(theta) * m))
    for start in range(0, len(x), step):
        G = model.theta_gradient(theta, x[start:start + step]) / model.noise_sigma  # (C, P, m)
        out[start:start + step] = np.einsum("cpi,cpj,c->pij", G, G, p)
    return _psd_guard(out)


def _det(phi) -> np.ndarray:
    m = phi.shape[-1]
    if m == 1:
        return phi[:, 0, 0]
    if m == 2:
        return phi[:, 0, 0] * phi[:, 1, 1] - phi[:, 0, 1] * phi[:, 1, 0]
    return np.linalg.det(phi)


def information_density(grid: BeliefGrid, model: MeasurementModel, domain: SearchDomain) -> np.ndarray:
    """Unnormalized ``det`` of the expected information at each domain node."""
    return np.clip(_det(expected_information(grid, model, domain.points())), 0.0, None)


def eid_map(grid: BeliefGrid, model: MeasurementModel, domain: SearchDomain) -> EidMap:
    return EidMap.from_raw(domain, information_density(grid, model, domain))


def multi_target_eid(grids: Sequence[BeliefGrid], model: MeasurementModel,
                     domain: SearchDomain) -> EidMap:
    raw = sum(information_density(g, model, domain) for g in grids)
    return EidMap.from_raw(domain, raw)


def entropy(grid: BeliefGrid) -> float:
    p = grid.mass.ravel()
    w = grid.weights()
    nz = p > 0
    return float(-np.sum(w[nz] * p[nz] * np.log(p[nz])))
