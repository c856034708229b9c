"""scikit-learn style wrappers around the filter and the ergodic planner.

These are conveniences for interactive use; the closed loop works with the
functional API directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .domain import Axis, BeliefGrid, SearchDomain, moments
from .dynamics import default_model
from .ergodic import BasisIndexSet, density_coeffs
from .estimation import (ElectrosenseSurrogate, bayes_update, eid_map, entropy, expected_information,
                         expected_signal, _det)
from .trajopt import ErgodicObjective, OptimizerSettings, optimize


class GridBayesFilter(BaseEstimator):
    """Grid posterior over a target's location from (position, voltage) pairs.

    ``fit(X, y)`` starts from a uniform prior; ``partial_fit`` keeps updating.
    ``predict(X)`` gives the belief-averaged expected voltage at positions ``X``
    and ``transform(X)`` the expected information (``det``) there.
    """

    def __init__(self, lengths=(1.0, 1.0), resolution=51, noise_sigma=1e-4, standoff=0.1,
                 radius=0.0125, model=None):
        self.lengths = lengths
        self.resolution = resolution
        self.noise_sigma = noise_sigma
        self.standoff = standoff
        self.radius = radius
        self.model = model

    def _axes(self):
        lengths = np.atleast_1d(self.lengths)
        res = np.broadcast_to(np.atleast_1d(self.resolution), lengths.shape)
        names = ("x", "y")
        return [Axis(names[i], 0.0, float(L), int(c)) for i, (L, c) in enumerate(zip(lengths, res))]

    def _model(self):
        if self.model is not None:
            return self.model
        return ElectrosenseSurrogate(noise_sigma=self.noise_sigma, standoff=self.standoff, radius=self.radius)

    def fit(self, X, y):
        self.belief_ = BeliefGrid.uniform(self._axes())
        self.model_ = self._model()
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        if not hasattr(self, "belief_"):
            self.belief_ = BeliefGrid.uniform(self._axes())
            self.model_ = self._model()
        X = check_array(X, ensure_min_samples=0)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != len(self.belief_.axes):
            raise ValueError(f"X has {X.shape[1]} columns, expected {len(self.belief_.axes)}")
        if len(y) != len(X):
            raise ValueError("X and y have different lengths")
        self.belief_ = bayes_update(self.belief_, X, y, self.model_)
        self.mean_, self.cov_ = moments(self.belief_)
        self.entropy_ = entropy(self.belief_)
        return self

    def predict(self, X):
        check_is_fitted(self, "belief_")
        return expected_signal(self.belief_, check_array(X), self.model_)

    def transform(self, X):
        check_is_fitted(self, "belief_")
        return np.clip(_det(expected_information(self.belief_, self.model_, check_array(X))), 0.0, None)

    def eid(self, grid_resolution=41):
        """Normalized EID map over the workspace box."""
        check_is_fitted(self, "belief_")
        return eid_map(self.belief_, self.model_, SearchDomain(self.lengths, grid_resolution))


class ErgodicPlanner(BaseEstimator):
    """Fits Fourier coefficients of a density, then plans ergodic paths from a start state."""

    def __init__(self, lengths=(1.0, 1.0), grid_resolution=41, K=15, gamma=20.0, R=None,
                 horizon=10.0, dt=0.1, dynamics="Integrator", max_speed=0.1, max_iters=100,
                 random_state=None):
        self.lengths = lengths
        self.grid_resolution = grid_resolution
        self.K = K
        self.gamma = gamma
        self.R = R
        self.horizon = horizon
        self.dt = dt
        self.dynamics = dynamics
        self.max_speed = max_speed
        self.max_iters = max_iters
        self.random_state = random_state

    def fit(self, density, y=None):
        """``density`` is an EidMap or an array sampled on the domain node grid."""
        self.domain_ = SearchDomain(self.lengths, self.grid_resolution)
        self.basis_ = BasisIndexSet(self.domain_, self.K)
        if not hasattr(density, "density"):
            density = np.asarray(density, dtype=float).reshape(self.domain_.shape)
            density = density / float(density.ravel() @ self.domain_.weights())
        self.phi_ = density_coeffs(density, self.basis_)
        return self

    def predict(self, x0):
        """Workspace path ``(N + 1, n)`` of the optimized trajectory from state ``x0``."""
        check_is_fitted(self, "phi_")
        model = default_model(self.dynamics, self.domain_.ndim, self.max_speed)
        obj = ErgodicObjective(self.phi_, self.basis_, gamma=self.gamma, R=self.R)
        settings = OptimizerSettings(horizon=self.horizon, dt=self.dt, max_iters=self.max_iters)
        rng = np.random.default_rng(self.random_state)
        self.trajectory_ = optimize(np.asarray(x0, dtype=float), model, obj, settings, rng)
        return self.trajectory_.workspace_projection
