"""Scenario configuration and its YAML form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .domain import SearchDomain, TargetParams
from .dynamics import KINDS

CONTROLLERS = ("EEDI", "IGA", "IM", "GEER", "RW")


@dataclass
class Placement:
    """Rules for randomizing objects per trial (``None`` keeps the fixed list).

    Targets are drawn uniformly inside the domain inset by ``inset`` with at
    least ``min_target_separation`` between them; distractors keep at least
    ``min_distractor_gap`` from every target.
    """

    n_targets: Optional[int] = None
    n_distractors: Optional[int] = None
    target_radius: Optional[float] = None
    radius_choices: Optional[list] = None
    target_plane_offset: float = 0.1
    distractor_radius: Optional[float] = None
    distractor_plane_offset: float = 0.1
    inset: float = 0.05
    min_target_separation: float = 0.12
    min_distractor_gap: float = 0.25


@dataclass
class ScenarioConfig:
    domain: SearchDomain
    true_targets: list = field(default_factory=list)
    distractors: list = field(default_factory=list)
    noise_sigma: float = 1e-4
    horizon_T: float = 10.0
    dt: float = 0.1
    gamma: float = 20.0
    R: list = field(default_factory=lambda: [[0.01, 0.0], [0.0, 0.01]])
    rng_seed: int = 0
    controller: str = "EEDI"
    dynamics: str = "Integrator"
    max_runtime: float = 1000.0
    success_tolerance: float = 0.02
    termination_std: float = 0.01
    # plumbing beyond the core fields
    name: str = "scenario"
    start_state: list = field(default_factory=lambda: [0.1, 0.1])
    control_bounds: Optional[list] = None
    max_speed: float = 0.1
    baseline_speed: float = 0.04
    plane_offset: float = 0.1
    target_radius: float = 0.0125
    estimate_radius: bool = False
    radius_band: list = field(default_factory=lambda: [0.005, 0.015])
    radius_count: int = 15
    belief_resolution: list = field(default_factory=lambda: [51, 51])
    belief_margin: float = 0.0
    basis_K: int = 15
    measurement_rate: float = 100.0
    barrier_weight: float = 1e3
    max_iters: int = 100
    descent_tolerance: float = 1e-3
    multi_target: bool = False
    max_grids: int = 5
    invalid_streak: int = 3
    invalid_mass: float = 0.9
    geer_candidates: int = 50
    geer_samples: int = 20
    dump_eid: bool = False
    placement: Placement = field(default_factory=Placement)

    def __post_init__(self):
        self.validate()

    def validate(self):
        errors = []
        steps = self.horizon_T / self.dt
        if self.dt <= 0 or abs(steps - round(steps)) > 1e-9:
            errors.append("horizon_T: must be a positive integer multiple of dt")
        if self.noise_sigma <= 0:
            errors.append("noise_sigma: must be > 0")
        if self.max_runtime < self.horizon_T:
            errors.append("max_runtime: must be >= horizon_T")
        if self.controller not in CONTROLLERS:
            errors.append(f"controller: must be one of {CONTROLLERS}")
        if self.dynamics not in KINDS:
            errors.append(f"dynamics: must be one of {KINDS}")
        sub = self.dt * self.measurement_rate
        if abs(sub - round(sub)) > 1e-9 or round(sub) < 1:
            errors.append("measurement_rate: dt * rate must be a positive integer")
        if len(self.belief_resolution) != self.domain.ndim:
            errors.append("belief_resolution: one count per workspace axis")
        if self.success_tolerance <= 0 or self.termination_std <= 0:
            errors.append("success_tolerance/termination_std: must be > 0")
        for t in list(self.true_targets) + list(self.distractors):
            if len(t.location) != self.domain.ndim:
                errors.append(f"targets: location {t.location} has wrong dimension")
            elif not np.all(self.domain.contains(t.location)):
                errors.append(f"targets: location {t.location} outside domain")
        if errors:
            raise ValueError("invalid scenario: " + "; ".join(errors))

    @property
    def ndim(self) -> int:
        return self.domain.ndim

    @property
    def substeps(self) -> int:
        return int(round(self.dt * self.measurement_rate))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "domain":
                v = {"lengths": list(v.lengths), "grid_resolution": list(v.grid_resolution)}
            elif f.name in ("true_targets", "distractors"):
                v = [t.to_dict() for t in v]
            elif f.name == "placement":
                v = dataclasses.asdict(v)
            elif isinstance(v, np.ndarray):
                v = v.tolist()
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"invalid scenario: unknown fields {sorted(unknown)}")
        dom = d.pop("domain")
        d["domain"] = SearchDomain(dom["lengths"], dom.get("grid_resolution", 101))
        for key in ("true_targets", "distractors"):
            d[key] = [TargetParams.from_dict(t) for t in d.get(key, [])]
        if "placement" in d:
            d["placement"] = Placement(**(d["placement"] or {}))
        return cls(**d)


def dumps(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def loads(text: str) -> ScenarioConfig:
    return ScenarioConfig.from_dict(yaml.safe_load(text))


def load(path) -> ScenarioConfig:
    with open(path) as fh:
        return loads(fh.read())


def save(cfg: ScenarioConfig, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
