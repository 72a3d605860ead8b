"""Scenario configuration and intervention machinery.

A scenario bundles the three declarations every run must make: an ethical
goal with its chosen metric and tolerance, the formal model (population,
outcomes, institution, decision rule), and the downstream horizon. On top
of the bare dynamics it supports three stylized interventions:

* quota - a minimum accepted share for a protected group, enforced per step
  by lowering that group's randomized threshold, with a sunset rule that
  retires the quota once the share sits at the target for a run of steps;
* pipeline_investment - a fraction of each non-top bin's mass moves up one
  bin in the group's pmf before every step;
* role_model_feedback - the group's applicant proportion is scaled by
  (1 + strength * previous accepted share), then proportions renormalize.

The intervention parameters are illustrative, not empirically calibrated.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import yaml

from .dynamics import Trajectory, simulate
from .errors import ConfigError, InfeasibilityError
from .metrics import OutcomeModel
from .optimize import (
    Constraint,
    constrained_policy,
    max_utility_policy,
    outcome_optimal_policy,
)
from .policy import (
    InstitutionModel,
    Policy,
    acceptance_rate,
    threshold_policy_for_rate,
)
from .population import GroupState, Population, ScoreGrid, validate_population

BUILTIN_NAMES = ("lending_liu", "boards_quota")

GOAL_METRICS = ("dp_gap", "eo_gap", "eodds_gap", "delta_mu")
POLICY_KINDS = ("fixed", "max_utility", "constrained", "outcome_optimal")
INTERVENTION_KINDS = ("quota", "pipeline_investment", "role_model_feedback")


@dataclass(frozen=True)
class DeclaredGoal:
    label: str
    metric: str
    tolerance: float
    target_group: Optional[str] = None


@dataclass(frozen=True)
class PolicyRuleSpec:
    kind: str
    tau: Optional[Mapping[str, tuple[float, ...]]] = None
    constraint: Optional[str] = None
    target_group: Optional[str] = None
    utility_floor: float = float("-inf")


@dataclass(frozen=True)
class SunsetRule:
    eps: float
    window: int


@dataclass(frozen=True)
class InterventionRule:
    kind: str
    group: str
    active_from: int = 0
    target_share: Optional[float] = None  # quota
    sunset: Optional[SunsetRule] = None  # quota
    shift_fraction: Optional[float] = None  # pipeline_investment
    strength: Optional[float] = None  # role_model_feedback


@dataclass(frozen=True)
class Tolerances:
    regime: float = 1e-6
    stationarity_eps: float = 1e-9
    stationarity_window: int = 5


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    declared_goal: DeclaredGoal
    population: Population
    outcome: OutcomeModel
    institution: InstitutionModel
    policy_rule: PolicyRuleSpec
    interventions: tuple[InterventionRule, ...]
    horizon: int
    tolerances: Tolerances
    seed: int
    resolution: float
    metric_groups: tuple[str, str]
    variants: Mapping[str, tuple[InterventionRule, ...]] = field(
        default_factory=dict
    )


def _req(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing field {path}.{key}")
    return mapping[key]


def _parse_intervention(raw, path) -> InterventionRule:
    kind = str(_req(raw, "kind", path))
    if kind not in INTERVENTION_KINDS:
        raise ConfigError(f"{path}.kind: unknown intervention kind {kind!r}")
    group = str(_req(raw, "group", path))
    active_from = int(raw.get("active_from", 0))
    if active_from < 0:
        raise ConfigError(f"{path}.active_from must be >= 0")
    rule = InterventionRule(kind=kind, group=group, active_from=active_from)
    if kind == "quota":
        q = float(_req(raw, "target_share", path))
        if not 0.0 <= q <= 1.0:
            raise ConfigError(f"{path}.target_share: q out of [0,1], got {q}")
        s = _req(raw, "sunset", path)
        sunset = SunsetRule(
            eps=float(_req(s, "eps", path + ".sunset")),
            window=int(_req(s, "window", path + ".sunset")),
        )
        if sunset.eps < 0 or sunset.window < 1:
            raise ConfigError(f"{path}.sunset: eps must be >= 0 and window >= 1")
        rule = replace(rule, target_share=q, sunset=sunset)
    elif kind == "pipeline_investment":
        s = float(_req(raw, "shift_fraction", path))
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"{path}.shift_fraction out of [0,1], got {s}")
        rule = replace(rule, shift_fraction=s)
    else:
        a = float(_req(raw, "strength", path))
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"{path}.strength out of [0,1], got {a}")
        rule = replace(rule, strength=a)
    return rule


def _parse_config(raw: dict, name_hint: str) -> ScenarioConfig:
    goal_raw = _req(raw, "declared_goal", "scenario")
    goal = DeclaredGoal(
        label=str(_req(goal_raw, "label", "declared_goal")),
        metric=str(_req(goal_raw, "metric", "declared_goal")),
        tolerance=float(_req(goal_raw, "tolerance", "declared_goal")),
        target_group=(
            str(goal_raw["target_group"]) if "target_group" in goal_raw else None
        ),
    )
    if goal.metric not in GOAL_METRICS:
        raise ConfigError(
            f"declared_goal.metric must be one of {GOAL_METRICS}, "
            f"got {goal.metric!r}"
        )
    if goal.metric == "delta_mu" and goal.target_group is None:
        raise ConfigError("declared_goal.target_group required for delta_mu goal")

    pop_raw = _req(raw, "population", "scenario")
    grid = ScoreGrid(
        bin_scores=tuple(
            float(v) for v in _req(pop_raw, "bin_scores", "population")
        ),
        bin_width=float(_req(pop_raw, "bin_width", "population")),
    )
    groups = []
    for i, g in enumerate(_req(pop_raw, "groups", "population")):
        path = f"population.groups[{i}]"
        groups.append(
            GroupState(
                group_id=str(_req(g, "group_id", path)),
                proportion=float(_req(g, "proportion", path)),
                pmf=tuple(float(v) for v in _req(g, "pmf", path)),
            )
        )
    population = Population(grid, tuple(groups))
    report = validate_population(population)
    if not report.ok:
        raise ConfigError(
            "population invalid: " + "; ".join(report.violations)
        )

    out_raw = _req(raw, "outcome", "scenario")
    rho_raw = _req(out_raw, "rho", "outcome")
    if isinstance(rho_raw, dict):
        rho = {str(k): tuple(float(v) for v in vs) for k, vs in rho_raw.items()}
    else:
        shared = tuple(float(v) for v in rho_raw)
        rho = {g.group_id: shared for g in groups}
    outcome = OutcomeModel(
        rho=rho,
        steps_up=int(_req(out_raw, "steps_up", "outcome")),
        steps_down=int(_req(out_raw, "steps_down", "outcome")),
    )
    for g in groups:
        if g.group_id not in rho:
            raise ConfigError(f"outcome.rho missing group {g.group_id!r}")
        if len(rho[g.group_id]) != len(grid.bin_scores):
            raise ConfigError(
                f"outcome.rho[{g.group_id!r}] length != grid length"
            )

    inst_raw = _req(raw, "institution", "scenario")
    institution = InstitutionModel(
        u_plus=float(_req(inst_raw, "u_plus", "institution")),
        u_minus=float(_req(inst_raw, "u_minus", "institution")),
    )

    rule_raw = _req(raw, "policy_rule", "scenario")
    kind = str(_req(rule_raw, "kind", "policy_rule"))
    if kind not in POLICY_KINDS:
        raise ConfigError(
            f"policy_rule.kind must be one of {POLICY_KINDS}, got {kind!r}"
        )
    tau = None
    if kind == "fixed":
        tau_raw = _req(rule_raw, "tau", "policy_rule")
        tau = {
            str(k): tuple(float(v) for v in vs) for k, vs in tau_raw.items()
        }
    rule = PolicyRuleSpec(
        kind=kind,
        tau=tau,
        constraint=(
            str(rule_raw["constraint"]) if "constraint" in rule_raw else None
        ),
        target_group=(
            str(rule_raw["target_group"])
            if "target_group" in rule_raw
            else None
        ),
        utility_floor=float(rule_raw.get("utility_floor", float("-inf"))),
    )
    if kind == "constrained" and rule.constraint not in ("dp", "eo"):
        raise ConfigError("policy_rule.constraint must be 'dp' or 'eo'")
    if kind == "outcome_optimal" and rule.target_group is None:
        raise ConfigError("policy_rule.target_group required for outcome_optimal")

    interventions = tuple(
        _parse_intervention(iv, f"interventions[{i}]")
        for i, iv in enumerate(raw.get("interventions", []))
    )

    horizon = int(_req(raw, "horizon", "scenario"))
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    tol_raw = raw.get("tolerances", {})
    tolerances = Tolerances(
        regime=float(tol_raw.get("regime", 1e-6)),
        stationarity_eps=float(tol_raw.get("stationarity_eps", 1e-9)),
        stationarity_window=int(tol_raw.get("stationarity_window", 5)),
    )
    metric_groups_raw = raw.get(
        "metric_groups", [g.group_id for g in groups[:2]]
    )
    if len(metric_groups_raw) != 2:
        raise ConfigError("metric_groups must name exactly two groups")
    metric_groups = (str(metric_groups_raw[0]), str(metric_groups_raw[1]))

    known = {g.group_id for g in groups}
    for label, where in [
        (goal.target_group, "declared_goal.target_group"),
        (rule.target_group, "policy_rule.target_group"),
        *[(iv.group, f"interventions[{i}].group") for i, iv in enumerate(interventions)],
        (metric_groups[0], "metric_groups[0]"),
        (metric_groups[1], "metric_groups[1]"),
    ]:
        if label is not None and label not in known:
            raise ConfigError(f"{where}: unknown group label {label!r}")

    variants = {}
    for vname, v in (raw.get("variants") or {}).items():
        variants[str(vname)] = tuple(
            _parse_intervention(iv, f"variants.{vname}.interventions[{i}]")
            for i, iv in enumerate(_req(v, "interventions", f"variants.{vname}"))
        )
        for iv in variants[str(vname)]:
            if iv.group not in known:
                raise ConfigError(
                    f"variants.{vname}: unknown group label {iv.group!r}"
                )

    return ScenarioConfig(
        name=str(raw.get("name", name_hint)),
        declared_goal=goal,
        population=population,
        outcome=outcome,
        institution=institution,
        policy_rule=rule,
        interventions=interventions,
        horizon=horizon,
        tolerances=tolerances,
        seed=int(raw.get("seed", 0)),
        resolution=float(raw.get("resolution", 0.01)),
        metric_groups=metric_groups,
        variants=variants,
    )


def load_scenario(path_or_name: str) -> ScenarioConfig:
    """Load a scenario from a YAML file path or a built-in name."""
    if path_or_name in BUILTIN_NAMES:
        text = (
            importlib.resources.files("fairdyn.data")
            .joinpath(f"{path_or_name}.yaml")
            .read_text(encoding="utf-8")
        )
        raw = yaml.safe_load(text)
        return _parse_config(raw, path_or_name)
    try:
        with open(path_or_name, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path_or_name}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"scenario file {path_or_name} is not a mapping")
    try:
        return _parse_config(raw, path_or_name)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario file {path_or_name}: {exc}") from exc


class _ScenarioEngine:
    """Stateful hooks plugged into the dynamics loop to apply interventions."""

    def __init__(self, cfg: ScenarioConfig, interventions):
        self.cfg = cfg
        self.interventions = interventions
        self.quota_active = [iv.kind == "quota" for iv in interventions]
        self.quota_streak = [0] * len(interventions)
        self.last_share: dict[str, float] = {}
        self.flags: dict[int, tuple[bool, ...]] = {}

    def base_policy(self, pop: Population) -> Policy:
        cfg = self.cfg
        rule = cfg.policy_rule
        if rule.kind == "fixed":
            missing = set(pop.group_ids) - set(rule.tau)
            if missing:
                raise ConfigError(
                    f"fixed policy missing groups {sorted(missing)}"
                )
            return Policy.from_arrays(
                {gid: np.asarray(rule.tau[gid]) for gid in pop.group_ids}
            )
        if rule.kind == "max_utility":
            return max_utility_policy(pop, cfg.outcome, cfg.institution)
        if rule.kind == "constrained":
            constraint = (
                Constraint.DEMOGRAPHIC_PARITY
                if rule.constraint == "dp"
                else Constraint.EQUAL_OPPORTUNITY
            )
            return constrained_policy(
                pop, cfg.outcome, cfg.institution, constraint, cfg.resolution
            ).policy
        return outcome_optimal_policy(
            pop,
            cfg.outcome,
            cfg.institution,
            rule.target_group,
            rule.utility_floor,
            cfg.resolution,
        )

    def pre_step(self, t: int, pop: Population) -> Population:
        groups = list(pop.groups)
        index = {g.group_id: i for i, g in enumerate(groups)}
        for iv in self.interventions:
            if t < iv.active_from:
                continue
            if iv.kind == "pipeline_investment":
                i = index[iv.group]
                pmf = groups[i].pmf_array.copy()
                moved = pmf[:-1] * iv.shift_fraction
                pmf[:-1] -= moved
                pmf[1:] += moved
                groups[i] = groups[i].with_pmf(pmf)
            elif iv.kind == "role_model_feedback":
                share = self.last_share.get(iv.group)
                if share is None:
                    continue
                i = index[iv.group]
                scaled = groups[i].proportion * (1.0 + iv.strength * share)
                groups[i] = groups[i].with_proportion(scaled)
                total = sum(g.proportion for g in groups)
                groups = [
                    g.with_proportion(g.proportion / total) for g in groups
                ]
        return pop.with_groups(groups)

    def _accepted_shares(self, pop: Population, pol: Policy) -> dict[str, float]:
        mass = {
            g.group_id: g.proportion * acceptance_rate(pol, g)
            for g in pop.groups
        }
        total = sum(mass.values())
        if total <= 0:
            return {gid: 0.0 for gid in mass}
        return {gid: m / total for gid, m in mass.items()}

    def policy(self, t: int, pop: Population) -> Policy:
        pol = self.base_policy(pop)
        flags = []
        for i, iv in enumerate(self.interventions):
            if iv.kind != "quota":
                flags.append(t >= iv.active_from)
                continue
            active = self.quota_active[i] and t >= iv.active_from
            flags.append(active)
            if not active:
                continue
            pol = self._enforce_quota(pop, pol, iv)
            share = self._accepted_shares(pop, pol)[iv.group]
            if abs(share - iv.target_share) <= iv.sunset.eps:
                self.quota_streak[i] += 1
            else:
                self.quota_streak[i] = 0
            if self.quota_streak[i] >= iv.sunset.window:
                self.quota_active[i] = False  # permanent
        self.last_share = self._accepted_shares(pop, pol)
        self.flags[t] = tuple(flags)
        return pol

    def _enforce_quota(
        self, pop: Population, pol: Policy, iv: InterventionRule
    ) -> Policy:
        group = pop.group(iv.group)
        if group.proportion <= 0:
            raise InfeasibilityError(
                f"quota on group {iv.group!r} infeasible: zero population mass"
            )
        q = iv.target_share
        shares = self._accepted_shares(pop, pol)
        other_mass = sum(
            g.proportion * acceptance_rate(pol, g)
            for g in pop.groups
            if g.group_id != iv.group
        )
        if shares[iv.group] >= q:
            return pol
        if q >= 1.0:
            if other_mass > 0:
                raise InfeasibilityError(
                    f"quota share {q} infeasible while other groups are accepted"
                )
            return pol
        needed_rate = q * other_mass / (group.proportion * (1.0 - q))
        if needed_rate > 1.0:
            raise InfeasibilityError(
                f"quota share {q} for group {iv.group!r} needs acceptance rate "
                f"{needed_rate:.6g} > 1"
            )
        enforced = threshold_policy_for_rate(group, needed_rate).expand(pop.grid)
        arrays = {gid: pol.tau(gid) for gid in pop.group_ids}
        arrays[iv.group] = enforced.tau(iv.group)
        return Policy.from_arrays(arrays)

    def flags_fn(self, t: int) -> tuple[bool, ...]:
        return self.flags.get(t, ())


def run_scenario(
    cfg: ScenarioConfig,
    interventions: Optional[Sequence[InterventionRule]] = None,
) -> Trajectory:
    """Simulate the scenario with its interventions applied.

    ``interventions`` overrides the config's list (used by variants). With an
    empty list the run reduces to the bare dynamics loop.
    """
    ivs = tuple(cfg.interventions if interventions is None else interventions)
    engine = _ScenarioEngine(cfg, ivs)
    return simulate(
        cfg.population,
        engine.policy,
        cfg.outcome,
        cfg.institution,
        cfg.horizon,
        regime_tol=cfg.tolerances.regime,
        metric_pair=cfg.metric_groups,
        pre_step=engine.pre_step if ivs else None,
        flags_fn=engine.flags_fn if ivs else None,
    )


def goal_value(cfg: ScenarioConfig, step) -> float:
    goal = cfg.declared_goal
    if goal.metric == "delta_mu":
        return step.delta_mu[goal.target_group]
    return getattr(step.metrics, goal.metric)


def goal_met(cfg: ScenarioConfig, value: float) -> bool:
    # Gap goals are met below tolerance; the score-change goal is met in the
    # improvement regime (strictly above tolerance).
    if cfg.declared_goal.metric == "delta_mu":
        return value > cfg.declared_goal.tolerance
    return value <= cfg.declared_goal.tolerance


@dataclass(frozen=True)
class ComparisonRow:
    variant: str
    final_goal_value: float
    steps_to_goal: Optional[int]
    persists_after_sunset: bool
    final_delta_mu: Mapping[str, float]
    trajectory: Trajectory


def _sunset_occurred(traj: Trajectory, interventions) -> bool:
    for i, iv in enumerate(interventions):
        if iv.kind != "quota":
            continue
        seen_active = False
        for rec in traj.steps:
            if i < len(rec.intervention_active):
                if rec.intervention_active[i]:
                    seen_active = True
                elif seen_active:
                    return True
    return False


def compare_interventions(
    cfg: ScenarioConfig, variants: Sequence[tuple[str, Sequence[InterventionRule]]]
) -> list[ComparisonRow]:
    """Run each variant from the same initial state and summarize outcomes."""
    if len(variants) < 2:
        raise ConfigError("comparison needs at least two variants")
    rows = []
    for name, ivs in variants:
        traj = run_scenario(cfg, ivs)
        values = [goal_value(cfg, rec) for rec in traj.steps]
        steps_to_goal = next(
            (rec.step for rec, v in zip(traj.steps, values) if goal_met(cfg, v)),
            None,
        )
        persists = _sunset_occurred(traj, ivs) and goal_met(cfg, values[-1])
        rows.append(
            ComparisonRow(
                variant=name,
                final_goal_value=values[-1],
                steps_to_goal=steps_to_goal,
                persists_after_sunset=persists,
                final_delta_mu=dict(traj.final().delta_mu),
                trajectory=traj,
            )
        )
    return rows


def named_variants(cfg: ScenarioConfig, names: Sequence[str]):
    out = []
    for name in names:
        if name not in cfg.variants:
            raise ConfigError(
                f"scenario {cfg.name!r} defines no variant {name!r}; "
                f"available: {sorted(cfg.variants)}"
            )
        out.append((name, cfg.variants[name]))
    return out


@dataclass(frozen=True)
class SweepReport:
    values: tuple[float, ...]
    minimum: float
    maximum: float
    spread: float
    unreliable: bool


def sensitivity_sweep(
    cfg: ScenarioConfig, eps_p: float, n_draws: int, seed: int
) -> SweepReport:
    """Test-retest style reliability probe.

    Reruns the scenario with each initial pmf perturbed by zero-sum noise of
    total variation eps_p (then clipped and renormalized) and reports the
    spread of the final goal metric. Runs whose spread exceeds ten times
    eps_p are flagged unreliable.
    """
    if eps_p < 0:
        raise ConfigError(f"perturbation size must be >= 0, got {eps_p}")
    if n_draws < 1:
        raise ConfigError(f"need at least one draw, got {n_draws}")
    values = []
    for draw in range(n_draws):
        rng = np.random.default_rng([seed, draw])
        groups = []
        for g in cfg.population.groups:
            pmf = g.pmf_array
            noise = rng.standard_normal(len(pmf))
            noise -= noise.mean()
            norm = np.abs(noise).sum()
            if eps_p > 0 and norm > 0:
                noise *= 2.0 * eps_p / norm
            else:
                noise[:] = 0.0
            perturbed = np.clip(pmf + noise, 0.0, None)
            perturbed /= perturbed.sum()
            groups.append(g.with_pmf(perturbed))
        perturbed_cfg = replace(
            cfg, population=cfg.population.with_groups(groups)
        )
        traj = run_scenario(perturbed_cfg)
        values.append(goal_value(cfg, traj.final()))
    lo, hi = min(values), max(values)
    spread = hi - lo
    return SweepReport(
        values=tuple(values),
        minimum=lo,
        maximum=hi,
        spread=spread,
        unreliable=spread > 10.0 * eps_p,
    )
