"""Finite structural models with do-interventions.

Models are Bayesian networks over finite domains: a DAG plus one conditional
probability table per node. Interventions are graph surgery (drop incoming
edges, replace the CPT by a point mass). All interventional quantities are
computed by exact enumeration of the joint, capped at one million states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping

import networkx as nx
import yaml

from .errors import CapacityError, ConfigError, DomainError, StructureError

JOINT_STATE_CAP = 10**6
CPT_TOL = 1e-9

Value = Hashable
Assignment = tuple[Value, ...]
# CPT: parent assignment (values in sorted-parent-name order) -> distribution
# over the node's domain, in domain order.
Cpt = Mapping[Assignment, tuple[float, ...]]


@dataclass(frozen=True)
class CausalModel:
    domains: Mapping[str, tuple[Value, ...]]
    edges: tuple[tuple[str, str], ...]
    cpts: Mapping[str, Cpt]
    protected: str
    outcome: str

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.domains)
        g.add_edges_from(self.edges)
        return g

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(u for u, v in self.edges if v == node))

    def validate(self) -> None:
        g = self.graph()
        for u, v in self.edges:
            if u not in self.domains or v not in self.domains:
                raise StructureError(f"edge ({u!r}, {v!r}) references unknown node")
        if not nx.is_directed_acyclic_graph(g):
            raise StructureError("edge set contains a directed cycle")
        for special, name in ((self.protected, "protected"), (self.outcome, "outcome")):
            if special not in self.domains:
                raise StructureError(f"{name} node {special!r} not in model")
        for node, dom in self.domains.items():
            if len(dom) < 1:
                raise StructureError(f"node {node!r} has empty domain")
            cpt = self.cpts.get(node)
            if cpt is None:
                raise StructureError(f"node {node!r} has no CPT")
            parents = self.parents(node)
            expected = set(
                itertools.product(*(self.domains[p] for p in parents))
            )
            if set(cpt) != expected:
                raise StructureError(
                    f"node {node!r}: CPT rows do not match parent assignments"
                )
            for key, row in cpt.items():
                if len(row) != len(dom):
                    raise StructureError(
                        f"node {node!r}: CPT row {key} has wrong length"
                    )
                if any(p < 0 for p in row):
                    raise StructureError(f"node {node!r}: negative CPT entry")
                if abs(sum(row) - 1.0) > CPT_TOL:
                    raise StructureError(
                        f"node {node!r}: CPT row {key} sums to {sum(row):.12g}"
                    )


@dataclass(frozen=True)
class InterventionSpec:
    target: str
    value: Value


def joint_distribution(m: CausalModel) -> dict[Assignment, float]:
    """Exact joint pmf over full assignments, keys in sorted node order."""
    m.validate()
    nodes = sorted(m.domains)
    n_states = 1
    for node in nodes:
        n_states *= len(m.domains[node])
        if n_states > JOINT_STATE_CAP:
            raise CapacityError(
                f"joint state space exceeds cap of {JOINT_STATE_CAP}"
            )
    parent_lists = {node: m.parents(node) for node in nodes}
    dom_index = {
        node: {v: i for i, v in enumerate(m.domains[node])} for node in nodes
    }
    pos = {node: i for i, node in enumerate(nodes)}
    joint = {}
    for assignment in itertools.product(*(m.domains[n] for n in nodes)):
        p = 1.0
        for node in nodes:
            key = tuple(assignment[pos[par]] for par in parent_lists[node])
            row = m.cpts[node][key]
            p *= row[dom_index[node][assignment[pos[node]]]]
            if p == 0.0:
                break
        joint[assignment] = p
    return joint


def intervene(m: CausalModel, spec: InterventionSpec) -> CausalModel:
    """Graph surgery: cut incoming edges and pin the target to a constant."""
    if spec.target not in m.domains:
        raise DomainError(f"unknown node {spec.target!r}")
    dom = m.domains[spec.target]
    if spec.value not in dom:
        raise DomainError(
            f"value {spec.value!r} not in domain of {spec.target!r}"
        )
    edges = tuple((u, v) for u, v in m.edges if v != spec.target)
    point = tuple(1.0 if v == spec.value else 0.0 for v in dom)
    cpts = dict(m.cpts)
    cpts[spec.target] = {(): point}
    return CausalModel(m.domains, edges, cpts, m.protected, m.outcome)


def marginal(m: CausalModel, node: str) -> dict[Value, float]:
    joint = joint_distribution(m)
    nodes = sorted(m.domains)
    idx = nodes.index(node)
    out = {v: 0.0 for v in m.domains[node]}
    for assignment, p in joint.items():
        out[assignment[idx]] += p
    return out


def _tv(p: Mapping[Value, float], q: Mapping[Value, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _interventional_gap(m: CausalModel, target: str) -> float:
    dom = m.domains[target]
    if len(dom) != 2:
        raise DomainError(
            f"node {target!r} must be binary, has domain of size {len(dom)}"
        )
    f0 = marginal(intervene(m, InterventionSpec(target, dom[0])), m.outcome)
    f1 = marginal(intervene(m, InterventionSpec(target, dom[1])), m.outcome)
    return _tv(f0, f1)


def counterfactual_fairness_gap(m: CausalModel) -> float:
    """Total variation between the outcome marginals under the two
    interventions on the protected attribute."""
    return _interventional_gap(m, m.protected)


def proxy_discrimination_gap(m: CausalModel, proxy: str) -> float:
    """Same interventional contrast, applied to a proxy variable."""
    if proxy not in m.domains:
        raise DomainError(f"unknown node {proxy!r}")
    return _interventional_gap(m, proxy)


def d_separated(
    m: CausalModel, sources: set[str], targets: set[str], given: set[str]
) -> bool:
    """Standard d-separation via reachability with collider opening rules."""
    for name, s in (("sources", sources), ("targets", targets), ("given", given)):
        for node in s:
            if node not in m.domains:
                raise DomainError(f"unknown node {node!r} in {name}")
    if sources & targets or sources & given or targets & given:
        raise DomainError("sources, targets and given must be disjoint")
    g = m.graph()
    if not nx.is_directed_acyclic_graph(g):
        raise StructureError("edge set contains a directed cycle")
    ancestors_of_given = set(given)
    for z in given:
        ancestors_of_given |= nx.ancestors(g, z)
    # Bayes-ball: states are (node, direction), direction is the edge
    # orientation by which the node was entered ('up' = from a child).
    frontier = [(s, "up") for s in sources]
    visited = set()
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in given and node in targets:
            return False
        if direction == "up" and node not in given:
            for parent in g.predecessors(node):
                frontier.append((parent, "up"))
            for child in g.successors(node):
                frontier.append((child, "down"))
        elif direction == "down":
            if node not in given:
                for child in g.successors(node):
                    frontier.append((child, "down"))
            if node in ancestors_of_given:
                for parent in g.predecessors(node):
                    frontier.append((parent, "up"))
    return True


def unresolved_discrimination(m: CausalModel, resolving: set[str]) -> bool:
    """True iff some directed path from the protected node to the outcome
    avoids the resolving set entirely (endpoints excepted)."""
    for node in resolving:
        if node not in m.domains:
            raise StructureError(f"unknown resolving node {node!r}")
    g = m.graph()
    if m.protected not in g or m.outcome not in g:
        raise StructureError("protected or outcome node missing")
    blocked = resolving - {m.protected, m.outcome}
    stack = [m.protected]
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if node == m.outcome:
            return True
        if node != m.protected and node in blocked:
            continue
        stack.extend(g.successors(node))
    return False


def load_causal_model(path) -> CausalModel:
    """Read a model from a YAML file.

    Schema: ``nodes`` maps node name to domain list; ``edges`` is a list of
    [parent, child] pairs; ``protected`` and ``outcome`` name nodes; ``cpts``
    maps node name to rows keyed by a parent assignment string such as
    ``"A=0,B=1"`` (parents in sorted name order; ``""`` for root nodes), with
    probabilities given as decimal strings.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    try:
        domains = {
            str(k): tuple(str(v) for v in vs) for k, vs in raw["nodes"].items()
        }
        edges = tuple((str(u), str(v)) for u, v in raw.get("edges", []))
        protected = str(raw["protected"])
        outcome = str(raw["outcome"])
        cpts = {}
        for node, rows in raw["cpts"].items():
            node = str(node)
            parents = tuple(sorted(u for u, v in edges if v == node))
            table = {}
            for key, row in rows.items():
                key = "" if key is None else str(key)
                if key == "":
                    pk: Assignment = ()
                else:
                    parts = dict(
                        item.split("=", 1) for item in key.split(",")
                    )
                    if set(parts) != set(parents):
                        raise ConfigError(
                            f"cpts.{node}: row key {key!r} does not name "
                            f"parents {sorted(parents)}"
                        )
                    pk = tuple(parts[p] for p in parents)
                table[pk] = tuple(float(x) for x in row)
            cpts[node] = table
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed causal model file {path}: {exc}") from exc
    model = CausalModel(domains, edges, cpts, protected, outcome)
    try:
        model.validate()
    except StructureError as exc:
        raise ConfigError(f"invalid causal model in {path}: {exc}") from exc
    return model
