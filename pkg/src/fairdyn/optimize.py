"""Policy construction: unconstrained, fairness-constrained, outcome-optimal.

Constrained search is restricted to per-group randomized thresholds, which
are within-group utility-optimal whenever the success probability is
nondecreasing in score. That makes the search one-dimensional (a common
rate or true-positive rate on a uniform grid) and exactly auditable by
brute force.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibilityError
from .metrics import OutcomeModel
from .policy import (
    InstitutionModel,
    Policy,
    institution_utility,
    threshold_policy_for_rate,
)
from .population import GroupState, Population

DEFAULT_RESOLUTION = 0.01


class Constraint(enum.Enum):
    DEMOGRAPHIC_PARITY = "dp"
    EQUAL_OPPORTUNITY = "eo"


def max_utility_policy(
    pop: Population, outcome: OutcomeModel, inst: InstitutionModel
) -> Policy:
    """Accept exactly the bins with strictly positive expected utility.

    The objective separates over bins, so the bin-wise rule is globally
    optimal. Zero-utility bins are rejected (strict-improvement rule).
    """
    arrays = {}
    for g in pop.groups:
        rho = outcome.rho_for(g.group_id)
        u = inst.u_plus * rho + inst.u_minus * (1.0 - rho)
        arrays[g.group_id] = (u > 0).astype(float)
    return Policy.from_arrays(arrays)


def rate_grid(resolution: float) -> np.ndarray:
    if not 0.0 < resolution <= 1.0:
        raise DomainError(f"resolution {resolution} outside (0, 1]")
    n = int(round(1.0 / resolution))
    return np.linspace(0.0, 1.0, n + 1)


def _rate_for_tpr(group: GroupState, rho: np.ndarray, target_tpr: float) -> float:
    """Acceptance rate of the top-down threshold policy whose true-positive
    rate equals ``target_tpr``."""
    pmf = group.pmf_array
    qualified = float(pmf @ rho)
    if qualified <= 0:
        raise DomainError(
            f"group {group.group_id!r} has zero qualified mass"
        )
    need = target_tpr * qualified
    got = 0.0
    rate = 0.0
    for i in range(len(pmf) - 1, -1, -1):
        contrib = pmf[i] * rho[i]
        if got + contrib >= need and contrib > 0:
            frac = (need - got) / contrib
            rate += frac * pmf[i]
            return min(rate, 1.0)
        got += contrib
        rate += pmf[i]
    return min(rate, 1.0)


def threshold_policy_for_tpr(
    group: GroupState, rho: np.ndarray, target_tpr: float
):
    return threshold_policy_for_rate(group, _rate_for_tpr(group, rho, target_tpr))


@dataclass(frozen=True)
class ConstrainedResult:
    policy: Policy
    level: float
    utility: float


def constrained_policy(
    pop: Population,
    outcome: OutcomeModel,
    inst: InstitutionModel,
    constraint: Constraint,
    resolution: float = DEFAULT_RESOLUTION,
) -> ConstrainedResult:
    """Best common level on the rate grid under the given fairness constraint.

    For demographic parity both groups share an acceptance rate; for equal
    opportunity both share a true-positive rate. Each candidate level is
    realized exactly per group by a randomized threshold; the level with the
    highest institution utility wins, ties broken toward the larger level.
    """
    if len(pop.groups) != 2:
        raise DomainError("constrained optimization needs exactly two groups")
    if constraint is Constraint.EQUAL_OPPORTUNITY:
        for g in pop.groups:
            rho = outcome.rho_for(g.group_id)
            if np.any(np.diff(rho) < 0):
                raise DomainError(
                    f"group {g.group_id!r}: rho must be nondecreasing in score "
                    "for equal-opportunity search"
                )
            if float(g.pmf_array @ rho) <= 0:
                raise DomainError(
                    f"group {g.group_id!r} has zero qualified mass"
                )
    best = None
    for level in rate_grid(resolution):
        arrays = {}
        for g in pop.groups:
            if constraint is Constraint.DEMOGRAPHIC_PARITY:
                thp = threshold_policy_for_rate(g, float(level))
            else:
                thp = threshold_policy_for_tpr(
                    g, outcome.rho_for(g.group_id), float(level)
                )
            arrays[g.group_id] = thp.expand(pop.grid).tau(g.group_id)
        pol = Policy.from_arrays(arrays)
        util = institution_utility(pol, pop, outcome, inst)
        if best is None or util >= best.utility:
            best = ConstrainedResult(pol, float(level), util)
    if best is None:
        raise InfeasibilityError("no feasible level on the rate grid")
    return best


def outcome_optimal_policy(
    pop: Population,
    outcome: OutcomeModel,
    inst: InstitutionModel,
    target_group: str,
    utility_floor: float = float("-inf"),
    resolution: float = DEFAULT_RESOLUTION,
) -> Policy:
    """Maximize the target group's expected score change directly.

    Searches per-group acceptance rates over the grid of randomized
    thresholds, keeps combinations with institution utility at or above the
    floor, and among those maximizes the target group's expected change.
    Ties break toward higher utility, then lower target acceptance rate.
    """
    from .dynamics import group_delta_mu

    pop.group(target_group)  # raises KeyError if unknown
    levels = rate_grid(resolution)
    others = [g for g in pop.groups if g.group_id != target_group]
    target = pop.group(target_group)

    # Per group the utility of a threshold policy at each rate is independent
    # of other groups, so evaluate each axis once.
    def axis(group: GroupState):
        taus = []
        utils = []
        dmus = []
        for level in levels:
            tau = (
                threshold_policy_for_rate(group, float(level))
                .expand(pop.grid)
                .tau(group.group_id)
            )
            pol = Policy.from_arrays({group.group_id: tau})
            rho = outcome.rho_for(group.group_id)
            per_bin = inst.u_plus * rho + inst.u_minus * (1.0 - rho)
            utils.append(group.proportion * float(group.pmf_array @ (tau * per_bin)))
            dmus.append(group_delta_mu(group, pol, outcome, pop.grid))
            taus.append(tau)
        return taus, np.array(utils), np.array(dmus)

    target_taus, target_utils, target_dmus = axis(target)
    # Other groups do not affect the objective: give each its utility-best
    # rate so the floor is as easy to satisfy as possible.
    other_choice = {}
    other_util = 0.0
    for g in others:
        taus, utils, _ = axis(g)
        k = int(np.argmax(utils))
        other_choice[g.group_id] = taus[k]
        other_util += float(utils[k])

    best = None  # (dmu, utility, -rate, index)
    for i, level in enumerate(levels):
        util = other_util + float(target_utils[i])
        if util < utility_floor:
            continue
        key = (float(target_dmus[i]), util, -float(level))
        if best is None or key > best[0]:
            best = (key, i)
    if best is None:
        max_util = other_util + float(target_utils.max())
        raise InfeasibilityError(
            f"utility floor {utility_floor} infeasible; maximum achievable "
            f"utility is {max_util:.12g}"
        )
    arrays = dict(other_choice)
    arrays[target_group] = target_taus[best[1]]
    return Policy.from_arrays(arrays)
