"""Cosine basis on box domains and the Sobolev-weighted distance from ergodicity."""

from __future__ import annotations

import itertools

import numpy as np

from .domain import SearchDomain, Trajectory, trapezoid_weights


class BasisIndexSet:
    """All multi-indices ``0 <= k_i <= K`` on a domain, with their weights.

    Basis functions are ``F_k(x) = prod_i cos(k_i pi x_i / L_i) / h_k`` with
    ``h_k`` making each function unit-norm on the box. Indices are ordered
    row-major (first axis slowest), the same order as ``itertools.product``.
    """

    def __init__(self, domain: SearchDomain, K: int):
        if K < 0:
            raise ValueError("K must be nonnegative")
        self.domain = domain
        self.K = int(K)
        n = domain.ndim
        self.indices = np.array(list(itertools.product(range(self.K + 1), repeat=n)), dtype=int)
        self.s = (n + 1) / 2.0
        self.weights = (1.0 + np.sum(self.indices ** 2, axis=1)) ** (-self.s)
        L = np.asarray(domain.lengths)
        half = np.where(self.indices > 0, 0.5, 1.0)
        self.h = np.sqrt(np.prod(L) * np.prod(half, axis=1))
        self._omega = np.pi * np.arange(self.K + 1)[None, :] / L[:, None]  # (n, K+1)
        self._grid_values = None

    def __len__(self):
        return len(self.indices)

    def values(self, x) -> np.ndarray:
        """``F_k(x)`` for points ``x`` of shape ``(P, n)``; returns ``(P, |k|)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tables = [np.cos(x[:, i:i + 1] * self._omega[i][None, :]) for i in range(x.shape[1])]
        out = _outer_rows(tables)
        return out / self.h

    def gradients(self, x) -> np.ndarray:
        """Spatial gradient of every basis function, shape ``(P, |k|, n)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[1]
        cos = [np.cos(x[:, i:i + 1] * self._omega[i][None, :]) for i in range(n)]
        dcos = [-np.sin(x[:, i:i + 1] * self._omega[i][None, :]) * self._omega[i][None, :]
                for i in range(n)]
        grads = []
        for i in range(n):
            tables = [dcos[j] if j == i else cos[j] for j in range(n)]
            grads.append(_outer_rows(tables))
        return np.stack(grads, axis=-1) / self.h[None, :, None]

    def grid_values(self) -> np.ndarray:
        if self._grid_values is None:
            self._grid_values = self.values(self.domain.points())
        return self._grid_values


def _outer_rows(tables):
    out = tables[0]
    for t in tables[1:]:
        out = (out[:, :, None] * t[:, None, :]).reshape(out.shape[0], -1)
    return out


def basis_eval(k, x, domain: SearchDomain) -> float:
    k = np.atleast_1d(np.asarray(k, dtype=int))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    domain.check(x)
    L = np.asarray(domain.lengths)
    h = np.sqrt(np.prod(L) * np.prod(np.where(k > 0, 0.5, 1.0)))
    return float(np.prod(np.cos(k * np.pi * x / L)) / h)


def density_coeffs(field, basis: BasisIndexSet, tol: float = 1e-6) -> np.ndarray:
    """Project a density sampled on the domain grid onto the basis.

    ``field`` is an :class:`~eedi.estimation.EidMap` or an array shaped like the
    domain grid. The density must integrate to one under trapezoid quadrature.
    """
    values = getattr(field, "density", field)
    values = np.asarray(values, dtype=float).ravel()
    w = basis.domain.weights()
    if values.shape != w.shape:
        raise ValueError(f"field has {values.size} samples, domain grid has {w.size}")
    if np.any(values < 0):
        raise ValueError("density must be nonnegative")
    total = float(values @ w)
    if abs(total - 1.0) > tol:
        raise ValueError(f"density is not normalized (integral {total:.6g})")
    return (values * w) @ basis.grid_values()


def time_weights(traj: Trajectory) -> np.ndarray:
    """Trapezoid weights over the trajectory samples divided by the horizon."""
    return trapezoid_weights(len(traj), traj.dt) / traj.duration


def trajectory_coeffs(traj: Trajectory, basis: BasisIndexSet) -> np.ndarray:
    basis.domain.check(traj.workspace_projection)
    return _trajectory_coeffs(traj.workspace_projection, time_weights(traj), basis)


def _trajectory_coeffs(points, tw, basis):
    return tw @ basis.values(points)


def ergodicity(c, phi, basis: BasisIndexSet) -> float:
    c = np.asarray(c, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if c.shape != phi.shape or c.shape != (len(basis),):
        raise ValueError(f"coefficient lengths {c.shape}, {phi.shape} do not match basis {len(basis)}")
    d = c - phi
    return float(np.sum(basis.weights * d * d))


def ergodicity_gradient(traj: Trajectory, phi, basis: BasisIndexSet) -> np.ndarray:
    """Derivative of the ergodic metric w.r.t. each workspace sample, ``(N+1, n)``."""
    basis.domain.check(traj.workspace_projection)
    return _ergodicity_gradient(traj.workspace_projection, time_weights(traj), phi, basis)[1]


def _ergodicity_gradient(points, tw, phi, basis):
    F = basis.values(points)
    c = tw @ F
    coef = 2.0 * basis.weights * (c - phi)
    dF = basis.gradients(points)
    grad = np.einsum("pkn,k->pn", dF, coef) * tw[:, None]
    d = c - phi
    return float(np.sum(basis.weights * d * d)), grad
