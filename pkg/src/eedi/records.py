"""Trial outcome types shared by the closed loop and the benchmark harness."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

CONVERGED = "Converged"
MAX_RUNTIME = "MaxRuntime"
INVALID = "InvalidParameters"
DUPLICATE = "DuplicateTarget"
DEGENERATE = "Degenerate"
CAUSES = (CONVERGED, MAX_RUNTIME, INVALID, DUPLICATE, DEGENERATE)


@dataclass
class TerminationReport:
    cause: str
    estimates: list = field(default_factory=list)  # [{"mean": [...], "cov": [[...]]}]
    elapsed: float = 0.0

    def __post_init__(self):
        if self.cause not in CAUSES:
            raise ValueError(f"unknown termination cause {self.cause!r}")

    @property
    def means(self) -> list:
        return [np.asarray(e["mean"]) for e in self.estimates]

    def to_dict(self) -> dict:
        return {"cause": self.cause, "estimates": self.estimates, "elapsed": self.elapsed}

    @classmethod
    def from_dict(cls, d) -> "TerminationReport":
        return cls(d["cause"], d.get("estimates", []), d.get("elapsed", 0.0))


@dataclass
class TrialRecord:
    scenario: dict
    controller: str
    horizons: list
    termination: TerminationReport
    success: bool
    trial_index: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def completion_time(self) -> float:
        return self.termination.elapsed

    @property
    def n_found(self) -> int:
        return len(self.termination.estimates)

    def to_dict(self) -> dict:
        # wall_time is left out so that files are reproducible byte for byte
        return {"trial_index": self.trial_index, "controller": self.controller,
                "success": self.success, "termination": self.termination.to_dict(),
                "scenario": self.scenario, "horizons": self.horizons}

    @classmethod
    def from_dict(cls, d) -> "TrialRecord":
        return cls(scenario=d["scenario"], controller=d["controller"], horizons=d["horizons"],
                   termination=TerminationReport.from_dict(d["termination"]),
                   success=bool(d["success"]), trial_index=d.get("trial_index", 0))


def completion_causes(multi_target: bool) -> tuple:
    if multi_target:
        return (DUPLICATE, INVALID, CONVERGED)
    return (CONVERGED,)


def evaluate_success(report: TerminationReport, true_locations, tolerance: float,
                     multi_target: bool = False) -> bool:
    """Search completed, right number of targets, each matched within tolerance."""
    if report.cause not in completion_causes(multi_target):
        return False
    means = [np.asarray(m, dtype=float) for m in report.means]
    truth = [np.asarray(t, dtype=float) for t in true_locations]
    if len(means) != len(truth):
        return False
    if not truth:
        return True
    dim = len(truth[0])
    for perm in itertools.permutations(range(len(truth))):
        if all(np.linalg.norm(means[i][:dim] - truth[j]) < tolerance for i, j in enumerate(perm)):
            return True
    return False
