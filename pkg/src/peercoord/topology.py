"""Peer-to-peer communication graph: neighborhoods, hop distances, partitions.

Agents exchange messages only along edges. Every topology is validated to be
connected, self-loop free, and positively weighted at construction time.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DisconnectedGraph,
    NonPositiveWeight,
    SchemeInapplicable,
    SelfLoop,
    UnknownAgent,
    ValidationError,
)

AgentId = int

Edge = tuple[AgentId, AgentId]

PC_NODE_ROLES = (
    "Home", "Office", "School", "Hospital", "Retail", "Restaurant", "Government",
)


def _norm_edge(a: AgentId, b: AgentId) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Topology:
    """Undirected weighted peer graph over agents 0..agent_count-1.

    Direct links carry weight 1.0 by default (inverse hop distance of a
    one-hop link); construction rejects disconnected graphs.
    """

    agent_count: int
    edges: frozenset
    edge_weights: Mapping[Edge, float]
    _adjacency: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[AgentId, list[AgentId]] = {n: [] for n in range(self.agent_count)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for n in adj:
            adj[n].sort()
        object.__setattr__(self, "_adjacency", adj)

    def check_agent(self, n: AgentId) -> None:
        if not (0 <= n < self.agent_count):
            raise UnknownAgent(f"agent {n} not in [0, {self.agent_count})")

    def neighbors(self, n: AgentId) -> list[AgentId]:
        self.check_agent(n)
        return list(self._adjacency[n])

    def weight(self, a: AgentId, b: AgentId) -> float:
        return self.edge_weights[_norm_edge(a, b)]

    def hop_distances(self, n: AgentId) -> dict[AgentId, int]:
        """Breadth-first hop distance from n to every agent; hop(n, n) = 0."""
        self.check_agent(n)
        dist = {n: 0}
        queue = deque([n])
        while queue:
            cur = queue.popleft()
            for nb in self._adjacency[cur]:
                if nb not in dist:
                    dist[nb] = dist[cur] + 1
                    queue.append(nb)
        return dist

    def diameter(self) -> int:
        return max(max(self.hop_distances(n).values()) for n in range(self.agent_count))

    def is_path_chain(self) -> bool:
        """True when edges are exactly {(i, i+1)}: a consecutively labeled chain."""
        expected = {(i, i + 1) for i in range(self.agent_count - 1)}
        return set(self.edges) == expected


@dataclass(frozen=True)
class SubgroupPartition:
    """Disjoint neighbor subgroups whose union is the owner's neighborhood."""

    owner: AgentId
    groups: tuple

    def __post_init__(self):
        seen: set[AgentId] = set()
        for g in self.groups:
            if not g:
                raise ValueError("empty subgroup")
            if seen & set(g):
                raise ValueError("subgroups overlap")
            seen |= set(g)


def build_topology(
    agent_count: int,
    edges: Iterable[Sequence[AgentId]],
    weights: Mapping[Edge, float] | None = None,
) -> Topology:
    """Validate and construct a Topology.

    Raises SelfLoop, NonPositiveWeight, or DisconnectedGraph on bad input.
    """
    if agent_count < 2:
        raise ValueError(f"need at least 2 agents, got {agent_count}")
    norm: set[Edge] = set()
    for a, b in edges:
        if a == b:
            raise SelfLoop(f"self loop at agent {a}")
        if not (0 <= a < agent_count and 0 <= b < agent_count):
            raise UnknownAgent(f"edge ({a},{b}) references an unknown agent")
        norm.add(_norm_edge(a, b))
    edge_weights: dict[Edge, float] = {}
    for e in sorted(norm):
        w = 1.0 if weights is None else float(weights.get(e, weights.get((e[1], e[0]), 1.0)))
        if w <= 0:
            raise NonPositiveWeight(f"edge {e} has weight {w}")
        edge_weights[e] = w
    topo = Topology(agent_count, frozenset(norm), edge_weights)
    reached = topo.hop_distances(0)
    if len(reached) != agent_count:
        missing = sorted(set(range(agent_count)) - set(reached))
        raise DisconnectedGraph(f"agents unreachable from 0: {missing}")
    return topo


def chain_topology(agent_count: int) -> Topology:
    return build_topology(agent_count, [(i, i + 1) for i in range(agent_count - 1)])


def neighbors_and_hops(t: Topology, n: AgentId) -> tuple[set, dict]:
    """Return (neighbor set of n, hop distance n -> every agent)."""
    t.check_agent(n)
    return set(t.neighbors(n)), t.hop_distances(n)


def _components_without(t: Topology, removed: AgentId) -> dict[AgentId, int]:
    """Connected-component id for every agent of G minus `removed`."""
    comp: dict[AgentId, int] = {}
    cid = 0
    for start in range(t.agent_count):
        if start == removed or start in comp:
            continue
        comp[start] = cid
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nb in t._adjacency[cur]:
                if nb != removed and nb not in comp:
                    comp[nb] = cid
                    queue.append(nb)
        cid += 1
    return comp


def partition_neighborhood(t: Topology, n: AgentId, scheme: str = "none") -> SubgroupPartition:
    """Split N_n into disjoint subgroups.

    Schemes: `none` keeps the whole neighborhood as one group; `directional`
    (consecutively labeled chains only) splits into predecessor/follower
    sides; `components-after-removal` groups neighbors by the connected
    component they fall into once n is removed, i.e. the cut-vertex split.
    """
    t.check_agent(n)
    nbrs = t.neighbors(n)
    if scheme == "none":
        return SubgroupPartition(n, (frozenset(nbrs),))
    if scheme == "directional":
        if not t.is_path_chain():
            raise SchemeInapplicable("directional partitioning requires a chain topology")
        groups = []
        if n - 1 in nbrs:
            groups.append(frozenset({n - 1}))
        if n + 1 in nbrs:
            groups.append(frozenset({n + 1}))
        return SubgroupPartition(n, tuple(groups))
    if scheme == "components-after-removal":
        comp = _components_without(t, n)
        by_comp: dict[int, set[AgentId]] = {}
        for m in nbrs:
            by_comp.setdefault(comp[m], set()).add(m)
        groups = tuple(frozenset(by_comp[c]) for c in sorted(by_comp))
        return SubgroupPartition(n, groups)
    raise SchemeInapplicable(f"unknown scheme {scheme!r}")


def load_topology_config(path: str | Path) -> tuple[Topology, dict[AgentId, str]]:
    """Load a topology from a JSON file of node roles and edge pairs.

    Files declaring ``"max_diameter"`` (the shipped city reconstructions do)
    are rejected when the actual diameter exceeds it.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(str(path), f"invalid JSON: {exc}") from exc
    try:
        nodes = data["nodes"]
        edges = [tuple(e) for e in data["edges"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(str(path), f"missing field: {exc}") from exc
    roles = {int(node["id"]): str(node["role"]) for node in nodes}
    topo = build_topology(len(nodes), edges)
    limit = data.get("max_diameter")
    if limit is not None and topo.diameter() > limit:
        raise ValidationError(
            str(path), f"diameter {topo.diameter()} exceeds declared bound {limit}"
        )
    return topo, roles
