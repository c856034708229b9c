"""Shared value types: workspaces, trajectories, target parameters and belief grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DegenerateBelief(ValueError):
    """Raised when a belief or information map has no usable mass."""


class DomainViolation(ValueError):
    """Raised when a workspace point lies outside the search domain."""


class IntegrationDiverged(RuntimeError):
    """Raised when a rollout produces non-finite states."""


def trapezoid_weights(count: int, spacing: float) -> np.ndarray:
    w = np.full(count, spacing, dtype=float)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class SearchDomain:
    """Axis-aligned box ``[0, L_1] x ... x [0, L_n]`` with a regular node grid.

    The node grid (endpoints included) is shared by every field quantity on the
    workspace: EID maps, Fourier projections and interpolation for the baselines.
    """

    lengths: tuple
    grid_resolution: tuple

    def __init__(self, lengths, grid_resolution=101):
        lengths = tuple(float(v) for v in np.atleast_1d(lengths))
        if isinstance(grid_resolution, (int, np.integer)):
            grid_resolution = (int(grid_resolution),) * len(lengths)
        grid_resolution = tuple(int(v) for v in grid_resolution)
        if len(lengths) not in (1, 2):
            raise ValueError("search domain must have 1 or 2 axes")
        if len(grid_resolution) != len(lengths):
            raise ValueError("grid_resolution must give one count per axis")
        if any(v <= 0 for v in lengths):
            raise ValueError(f"domain lengths must be positive, got {lengths}")
        if any(v < 2 for v in grid_resolution):
            raise ValueError("grid_resolution must be >= 2 per axis")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "grid_resolution", grid_resolution)

    @property
    def ndim(self) -> int:
        return len(self.lengths)

    @property
    def shape(self) -> tuple:
        return self.grid_resolution

    def axes(self) -> list:
        return [np.linspace(0.0, L, n) for L, n in zip(self.lengths, self.grid_resolution)]

    def spacing(self) -> np.ndarray:
        return np.array([L / (n - 1) for L, n in zip(self.lengths, self.grid_resolution)])

    def points(self) -> np.ndarray:
        """Grid nodes as a ``(P, n)`` array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weight of each node, C order."""
        per_axis = [trapezoid_weights(n, h) for n, h in zip(self.grid_resolution, self.spacing())]
        w = per_axis[0]
        for wa in per_axis[1:]:
            w = np.multiply.outer(w, wa)
        return np.ravel(w)

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        L = np.asarray(self.lengths)
        return np.all((x >= -tol) & (x <= L + tol), axis=-1)

    def clip(self, x) -> np.ndarray:
        return np.clip(x, 0.0, np.asarray(self.lengths))

    def check(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        if pts.shape[-1] != self.ndim:
            raise ValueError(f"expected {self.ndim}-D workspace points, got shape {x.shape}")
        if not np.all(self.contains(pts, tol)):
            bad = pts[~self.contains(pts, tol)][0]
            raise DomainViolation(f"point {bad.tolist()} outside domain {list(self.lengths)}")
        return x


@dataclass
class Trajectory:
    """Time-stamped states and zero-order-hold controls over one horizon."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    workspace_projection: np.ndarray
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.controls = np.asarray(self.controls, dtype=float).reshape(len(self.times) - 1, -1) \
            if len(self.times) > 1 else np.zeros((0, 0))
        self.workspace_projection = np.atleast_2d(np.asarray(self.workspace_projection, dtype=float))
        n = len(self.times)
        if n < 2:
            raise ValueError("trajectory needs at least two time samples")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("trajectory times must be uniformly spaced")
        if len(self.states) != n or len(self.workspace_projection) != n:
            raise ValueError("states/workspace_projection length must match times")
        if len(self.controls) != n - 1:
            raise ValueError("controls must have one entry per interval")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class TargetParams:
    """A spherical object below the sensor plane."""

    location: tuple
    radius: Optional[float] = None
    plane_offset: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(float(v) for v in np.atleast_1d(self.location)))
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.plane_offset <= 0:
            raise ValueError("plane_offset must be positive")

    def to_dict(self) -> dict:
        return {"location": list(self.location), "radius": self.radius,
                "plane_offset": self.plane_offset}

    @classmethod
    def from_dict(cls, d) -> "TargetParams":
        return cls(location=tuple(d["location"]), radius=d.get("radius"),
                   plane_offset=d.get("plane_offset", 0.1))


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 2 or not self.max > self.min:
            raise ValueError(f"malformed axis {self}")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.count - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


class BeliefGrid:
    """Dense density over target parameters sampled at regular nodes.

    ``mass`` holds density values (not cell probabilities). Integrals use
    trapezoid weights, so an interior node carries exactly ``cell_volume``.
    """

    def __init__(self, axes: Sequence[Axis], mass=None):
        self.axes = tuple(axes)
        if not self.axes:
            raise ValueError("belief grid needs at least one axis")
        shape = tuple(a.count for a in self.axes)
        if mass is None:
            mass = np.ones(shape)
        mass = np.asarray(mass, dtype=float)
        if mass.shape != shape:
            mass = mass.reshape(shape)
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("belief mass must be finite and nonnegative")
        self.mass = mass
        self.mass.setflags(write=False)

    @classmethod
    def uniform(cls, axes) -> "BeliefGrid":
        return normalize(cls(axes))

    @property
    def shape(self) -> tuple:
        return self.mass.shape

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def names(self) -> tuple:
        return tuple(a.name for a in self.axes)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[a.nodes() for a in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def weights(self) -> np.ndarray:
        w = trapezoid_weights(self.axes[0].count, self.axes[0].spacing)
        for a in self.axes[1:]:
            w = np.multiply.outer(w, trapezoid_weights(a.count, a.spacing))
        return np.ravel(w)

    def probabilities(self) -> np.ndarray:
        """Probability carried by each node (sums to one when normalized)."""
        return self.mass.ravel() * self.weights()

    def total(self) -> float:
        return float(np.sum(self.probabilities()))

    def with_mass(self, mass) -> "BeliefGrid":
        return BeliefGrid(self.axes, mass)

    def to_dict(self) -> dict:
        return {"axes": [[a.name, a.min, a.max, a.count] for a in self.axes],
                "mass": self.mass.ravel().tolist()}

    def __repr__(self):
        dims = "x".join(str(a.count) for a in self.axes)
        return f"BeliefGrid({', '.join(self.names)}; {dims})"


def cell_volume(grid: BeliefGrid) -> float:
    if not grid.axes:
        raise ValueError("belief grid has no axes")
    return float(np.prod([a.spacing for a in grid.axes]))


def normalize(grid: BeliefGrid) -> BeliefGrid:
    total = grid.total()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateBelief("belief has no mass to normalize")
    return grid.with_mass(grid.mass / total)


def _require_normalized(grid: BeliefGrid, tol: float = 1e-6):
    total = grid.total()
    if abs(total - 1.0) > tol:
        raise ValueError(f"belief is not normalized (integral {total:.6g})")


def moments(grid: BeliefGrid):
    """Mean vector and covariance matrix of a normalized belief."""
    _require_normalized(grid)
    p = grid.probabilities()
    pts = grid.points()
    mean = p @ pts
    centered = pts - mean
    cov = (centered * p[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T)
    return mean, cov
