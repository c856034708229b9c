"""Built-in scenarios for the controller comparisons.

The surrogate sensor is calibrated at each preset's reference standoff
(``plane_offset``), so that a 0.9 cm sphere at that depth peaks at one noise
standard deviation.
"""

from __future__ import annotations

import numpy as np

from .config import Placement, ScenarioConfig
from .domain import SearchDomain, TargetParams

RADII_CM = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
LINE_POSITIONS = tuple(float(v) for v in np.round(np.linspace(0.05, 0.95, 11), 3))


def _line(**kw) -> ScenarioConfig:
    base = dict(
        domain=SearchDomain([1.0], 101),
        true_targets=[TargetParams((0.5,), 0.0125, 0.1)],
        horizon_T=1.0, dt=0.01, R=[[0.01]], max_runtime=100.0,
        success_tolerance=0.01, termination_std=0.005,
        start_state=[0.0], max_speed=1.0, baseline_speed=0.25,
        plane_offset=0.1, belief_resolution=[401], basis_K=50,
        placement=Placement(n_distractors=1, distractor_radius=0.0125, distractor_plane_offset=0.125,
                            min_distractor_gap=0.25),
    )
    base.update(kw)
    return ScenarioConfig(**base)


def _box(**kw) -> ScenarioConfig:
    base = dict(
        domain=SearchDomain([1.2, 1.2], 41),
        horizon_T=10.0, dt=0.1, max_runtime=1000.0,
        success_tolerance=0.02, termination_std=0.01,
        start_state=[0.1, 0.1], max_speed=0.1, baseline_speed=0.04,
        plane_offset=0.1, belief_resolution=[61, 61], basis_K=15,
        placement=Placement(n_targets=1, target_radius=0.0125, target_plane_offset=0.1, inset=0.1),
    )
    base.update(kw)
    return ScenarioConfig(**base)


def line_distractor() -> ScenarioConfig:
    """1D line, fixed target and one randomized unmodeled distractor."""
    return _line(name="line_distractor")


def box_single() -> ScenarioConfig:
    """2D box with one randomly placed target."""
    return _box(name="box_single")


def box_multi(n_targets: int) -> ScenarioConfig:
    """2D box with ``n_targets`` randomly placed objects and an unknown count."""
    return _box(name=f"box_multi_{n_targets}", multi_target=True, belief_margin=0.1,
                belief_resolution=[71, 71],
                placement=Placement(n_targets=n_targets, target_radius=0.0125, target_plane_offset=0.1,
                                    inset=0.1, min_target_separation=0.12))


def radius_sweep(radius_cm: float) -> ScenarioConfig:
    """Joint location and radius estimation for one target of the given radius."""
    r = radius_cm / 100.0
    return _box(name=f"radius_sweep_{radius_cm:g}", domain=SearchDomain([0.6, 0.6], 31),
                estimate_radius=True, radius_band=[0.005, 0.015], radius_count=15,
                belief_resolution=[31, 31],
                placement=Placement(n_targets=1, target_radius=r, target_plane_offset=0.1, inset=0.1))


def line_position(index: int) -> ScenarioConfig:
    """1D line with the target at one of eleven positions and a randomized distractor."""
    pos = LINE_POSITIONS[index]
    return _line(name=f"line_pos_{index}", true_targets=[TargetParams((pos,), 0.0125, 0.1)])


def dynamics_check(kind: str) -> ScenarioConfig:
    """Same 2D estimation task with a fixed target for each motion model."""
    starts = {"Integrator": [0.1, 0.1], "UnicycleKin": [0.1, 0.1, 0.0],
              "UnicycleDyn": [0.1, 0.1, 0.0, 0.0, 0.0]}
    return _box(name=f"dynamics_{kind.lower()}", dynamics=kind, start_state=starts[kind],
                true_targets=[TargetParams((0.7, 0.8), 0.0125, 0.1)], placement=Placement())


def _registry() -> dict:
    out = {"line_distractor": line_distractor, "box_single": box_single}
    for n in range(4):
        out[f"box_multi_{n}"] = lambda n=n: box_multi(n)
    for r in RADII_CM:
        out[f"radius_sweep_{r:g}"] = lambda r=r: radius_sweep(r)
    for i in range(len(LINE_POSITIONS)):
        out[f"line_pos_{i}"] = lambda i=i: line_position(i)
    for kind in ("Integrator", "UnicycleKin", "UnicycleDyn"):
        out[f"dynamics_{kind.lower()}"] = lambda k=kind: dynamics_check(k)
    return out


PRESETS = _registry()


def names() -> list:
    return list(PRESETS)


def get(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
