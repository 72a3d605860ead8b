"""Finite discrete score distributions per demographic group.

A population is a uniform grid of score bins together with one probability
mass function per group and the group proportions. All values are plain
floats; validation tolerances are fixed at 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError

PROB_TOL = 1e-9


@dataclass(frozen=True)
class ScoreGrid:
    """Ascending, uniformly spaced score bins.

    Uniform spacing is required so that score updates can be expressed as
    integer bin moves.
    """

    bin_scores: tuple[float, ...]
    bin_width: float

    def __len__(self) -> int:
        return len(self.bin_scores)

    @property
    def scores(self) -> np.ndarray:
        return np.asarray(self.bin_scores, dtype=float)

    def violations(self) -> list[str]:
        out = []
        if len(self.bin_scores) < 2:
            out.append(f"grid has {len(self.bin_scores)} bins, need at least 2")
            return out
        if self.bin_width <= 0:
            out.append(f"bin_width {self.bin_width} is not positive")
        diffs = np.diff(self.scores)
        if np.any(diffs <= 0):
            out.append("bin scores are not strictly ascending")
        bad = np.abs(diffs - self.bin_width)
        if np.any(bad > PROB_TOL):
            out.append(
                f"bin spacing deviates from bin_width by up to {bad.max():.3g}"
            )
        return out


@dataclass(frozen=True)
class GroupState:
    """One demographic group: its label, population share and score pmf."""

    group_id: str
    proportion: float
    pmf: tuple[float, ...]

    @property
    def pmf_array(self) -> np.ndarray:
        return np.asarray(self.pmf, dtype=float)

    def with_pmf(self, pmf: Sequence[float]) -> "GroupState":
        return GroupState(self.group_id, self.proportion, tuple(float(v) for v in pmf))

    def with_proportion(self, proportion: float) -> "GroupState":
        return GroupState(self.group_id, float(proportion), self.pmf)


@dataclass(frozen=True)
class Population:
    """A score grid plus one ``GroupState`` per demographic group."""

    grid: ScoreGrid
    groups: tuple[GroupState, ...]

    def group(self, group_id: str) -> GroupState:
        for g in self.groups:
            if g.group_id == group_id:
                return g
        raise KeyError(f"unknown group label {group_id!r}")

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(g.group_id for g in self.groups)

    def with_groups(self, groups: Sequence[GroupState]) -> "Population":
        return Population(self.grid, tuple(groups))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_population(p: Population) -> ValidationReport:
    """Check every probabilistic invariant of a population.

    Diagnostic only: returns the full list of violations (with group labels
    and numeric slack) instead of raising.
    """
    out = list(p.grid.violations())
    n = len(p.grid.bin_scores)
    if len(p.groups) < 1:
        out.append("population has no groups")
    labels = [g.group_id for g in p.groups]
    if len(set(labels)) != len(labels):
        out.append(f"group labels are not distinct: {labels}")
    for g in p.groups:
        pmf = g.pmf_array
        if len(pmf) != n:
            out.append(
                f"group {g.group_id!r}: pmf length {len(pmf)} != grid length {n}"
            )
            continue
        if np.any(pmf < 0):
            out.append(
                f"group {g.group_id!r}: negative pmf entry {pmf.min():.3g}"
            )
        s = float(pmf.sum())
        if abs(s - 1.0) > PROB_TOL:
            out.append(f"group {g.group_id!r}: pmf sum {s:.12g} != 1")
        if not 0.0 <= g.proportion <= 1.0:
            out.append(
                f"group {g.group_id!r}: proportion {g.proportion} outside [0,1]"
            )
    total = sum(g.proportion for g in p.groups)
    if p.groups and abs(total - 1.0) > PROB_TOL:
        out.append(f"proportions sum {total:.12g} != 1")
    return ValidationReport(tuple(out))


def group_mean(g: GroupState, grid: ScoreGrid) -> float:
    """Mean score of a group, sum over bins of pmf(x) * x."""
    pmf = g.pmf_array
    if len(pmf) != len(grid.bin_scores):
        raise DimensionError(
            f"pmf length {len(pmf)} does not match grid length {len(grid.bin_scores)}"
        )
    return float(pmf @ grid.scores)
