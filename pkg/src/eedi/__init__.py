"""Ergodic exploration of distributed information for active target localization."""

__version__ = "0.1.0"

from .config import Placement, ScenarioConfig
from .controllers import (check_termination, plan_eedi, plan_geer, plan_iga, plan_im, plan_rw,
                          run_closed_loop)
from .domain import (BeliefGrid, Axis, DegenerateBelief, DomainViolation, IntegrationDiverged,
                     SearchDomain, TargetParams, Trajectory)
from .dynamics import DynamicsModel, default_model, integrate
from .ergodic import BasisIndexSet, density_coeffs, ergodicity, trajectory_coeffs
from .estimation import (ElectrosenseSurrogate, EidMap, bayes_update, eid_map, multi_target_eid,
                         multi_target_update, simulate_measurements)
from .harness import BatchSummary, emit, parse_records, run_batch, summarize
from .records import TerminationReport, TrialRecord
from .trajopt import ErgodicObjective, OptimizerSettings, optimize
