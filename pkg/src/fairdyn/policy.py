"""Selection policies: per-group acceptance probabilities per score bin.

Policies are probability vectors rather than hard thresholds so that any
acceptance rate is exactly realizable on a discrete grid. The randomized
threshold form accepts every bin above a threshold, the threshold bin with
a fractional probability, and nothing below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .errors import DimensionError, DomainError
from .population import GroupState, Population, ScoreGrid

if TYPE_CHECKING:
    from .metrics import OutcomeModel


@dataclass(frozen=True)
class Policy:
    """Acceptance probability per bin, keyed by group label."""

    acceptance: Mapping[str, tuple[float, ...]]

    def tau(self, group_id: str) -> np.ndarray:
        if group_id not in self.acceptance:
            raise KeyError(f"policy has no acceptance vector for group {group_id!r}")
        return np.asarray(self.acceptance[group_id], dtype=float)

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(self.acceptance)

    @staticmethod
    def from_arrays(arrays: Mapping[str, np.ndarray]) -> "Policy":
        acc = {}
        for gid, tau in arrays.items():
            tau = np.asarray(tau, dtype=float)
            if np.any(tau < 0) or np.any(tau > 1):
                raise DomainError(f"group {gid!r}: acceptance entries outside [0,1]")
            acc[gid] = tuple(float(v) for v in tau)
        return Policy(acc)

    @staticmethod
    def uniform(group_ids, n_bins: int, value: float) -> "Policy":
        return Policy.from_arrays({g: np.full(n_bins, float(value)) for g in group_ids})


@dataclass(frozen=True)
class GroupThreshold:
    threshold_bin: int
    boundary_acceptance: float


@dataclass(frozen=True)
class RandomizedThresholdPolicy:
    """Accept above the threshold bin, fractionally at it, never below."""

    thresholds: Mapping[str, GroupThreshold]

    def expand(self, grid: ScoreGrid) -> Policy:
        n = len(grid.bin_scores)
        arrays = {}
        for gid, th in self.thresholds.items():
            if not 0 <= th.threshold_bin < n:
                raise DomainError(
                    f"group {gid!r}: threshold bin {th.threshold_bin} outside grid"
                )
            if not 0.0 <= th.boundary_acceptance <= 1.0:
                raise DomainError(
                    f"group {gid!r}: boundary acceptance {th.boundary_acceptance} "
                    "outside [0,1]"
                )
            tau = np.zeros(n)
            tau[th.threshold_bin + 1 :] = 1.0
            tau[th.threshold_bin] = th.boundary_acceptance
            arrays[gid] = tau
        return Policy.from_arrays(arrays)


@dataclass(frozen=True)
class InstitutionModel:
    """Utility of an accepted success (u_plus) and an accepted failure (u_minus)."""

    u_plus: float
    u_minus: float

    def __post_init__(self):
        if not (np.isfinite(self.u_plus) and np.isfinite(self.u_minus)):
            raise DomainError("institution utilities must be finite")


def acceptance_rate(policy: Policy, group: GroupState) -> float:
    """Probability that a random member of the group is accepted."""
    tau = policy.tau(group.group_id)
    pmf = group.pmf_array
    if len(tau) != len(pmf):
        raise DimensionError(
            f"policy length {len(tau)} != pmf length {len(pmf)} "
            f"for group {group.group_id!r}"
        )
    return float(pmf @ tau)


def threshold_policy_for_rate(
    group: GroupState, target_rate: float
) -> RandomizedThresholdPolicy:
    """Randomized threshold whose acceptance rate equals ``target_rate`` exactly.

    Acceptance mass is allocated from the highest score bin downward, so the
    expanded policy is monotone nondecreasing in score.
    """
    if not 0.0 <= target_rate <= 1.0:
        raise DomainError(f"target rate {target_rate} outside [0,1]")
    pmf = group.pmf_array
    n = len(pmf)
    cum_above = 0.0  # mass strictly above the current candidate threshold
    for i in range(n - 1, -1, -1):
        if cum_above + pmf[i] >= target_rate or i == 0:
            b = 0.0
            if pmf[i] > 0:
                b = (target_rate - cum_above) / pmf[i]
            b = min(max(b, 0.0), 1.0)
            return RandomizedThresholdPolicy(
                {group.group_id: GroupThreshold(i, float(b))}
            )
        cum_above += pmf[i]
    raise AssertionError("unreachable")


def institution_utility(
    policy: Policy,
    pop: Population,
    outcome: "OutcomeModel",
    inst: InstitutionModel,
) -> float:
    """Expected utility per applicant across the whole population."""
    total = 0.0
    for g in pop.groups:
        tau = policy.tau(g.group_id)
        rho = outcome.rho_for(g.group_id)
        pmf = g.pmf_array
        if not len(tau) == len(rho) == len(pmf):
            raise DimensionError(
                f"group {g.group_id!r}: inconsistent lengths tau={len(tau)} "
                f"rho={len(rho)} pmf={len(pmf)}"
            )
        per_bin = inst.u_plus * rho + inst.u_minus * (1.0 - rho)
        total += g.proportion * float(pmf @ (tau * per_bin))
    return total
