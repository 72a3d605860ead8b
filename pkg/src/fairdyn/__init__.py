"""Deterministic simulation and audit engine for fairness interventions."""

from .metrics import MetricReport, OutcomeModel, metric_report
from .policy import InstitutionModel, Policy, RandomizedThresholdPolicy
from .population import GroupState, Population, ScoreGrid, validate_population
from .scenarios import ScenarioConfig, load_scenario, run_scenario

__all__ = [
    "GroupState",
    "InstitutionModel",
    "MetricReport",
    "OutcomeModel",
    "Policy",
    "Population",
    "RandomizedThresholdPolicy",
    "ScenarioConfig",
    "ScoreGrid",
    "load_scenario",
    "metric_report",
    "run_scenario",
    "validate_population",
]

__version__ = "0.1.0"
