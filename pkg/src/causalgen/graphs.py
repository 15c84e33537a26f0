"""Directed and partially directed graphs over named nodes.

Holds the DAG and CPDAG value types, d-separation, background knowledge
(forbidden/required edges and causal tiers), and the extension of a CPDAG to
a member DAG of its equivalence class.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping

__all__ = [
    "GraphError",
    "CycleError",
    "ExtensionError",
    "Dag",
    "Cpdag",
    "SeparationSets",
    "BackgroundKnowledge",
    "d_separated",
    "cpdag_to_dag",
    "graph_to_text",
    "graph_from_text",
    "graph_to_dot",
    "graph_fingerprint",
]


class GraphError(ValueError):
    """Raised for malformed graphs and invalid queries."""


class CycleError(GraphError):
    """Raised when an operation requires acyclicity and the graph has none."""


class ExtensionError(GraphError):
    """No consistent DAG extension exists; carries the blocking edges."""

    def __init__(self, message: str, blocking: frozenset[tuple[str, str]]):
        super().__init__(message)
        self.blocking = blocking


def _check_nodes_edges(nodes: tuple[str, ...], edges: Iterable[tuple[str, str]]):
    if len(set(nodes)) != len(nodes):
        raise GraphError("duplicate node names")
    node_set = set(nodes)
    for a, b in edges:
        if a == b:
            raise GraphError(f"self loop on {a!r}")
        if a not in node_set or b not in node_set:
            raise GraphError(f"edge ({a!r}, {b!r}) references unknown node")


@dataclass(frozen=True)
class Dag:
    """Directed graph over named nodes.

    Self loops and duplicate edges are rejected at construction; acyclicity
    is a separate query (is_acyclic) so that cycle detection itself remains
    expressible.  Operations that require a DAG raise CycleError otherwise.
    """

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        nodes = tuple(nodes)
        edges = frozenset((a, b) for a, b in edges)
        _check_nodes_edges(nodes, edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @cached_property
    def _parents(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.edges:
            out[b].add(a)
        return {v: frozenset(s) for v, s in out.items()}

    @cached_property
    def _children(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.edges:
            out[a].add(b)
        return {v: frozenset(s) for v, s in out.items()}

    def _require(self, v: str) -> None:
        if v not in self._parents:
            raise GraphError(f"unknown node {v!r}")

    def parents(self, v: str) -> frozenset[str]:
        self._require(v)
        return self._parents[v]

    def children(self, v: str) -> frozenset[str]:
        self._require(v)
        return self._children[v]

    def _reach(self, v: str, step: Mapping[str, frozenset[str]]) -> frozenset[str]:
        self._require(v)
        seen: set[str] = set()
        stack = list(step[v])
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(step[u])
        return frozenset(seen)

    def ancestors(self, v: str) -> frozenset[str]:
        """All strict ancestors of v."""
        return self._reach(v, self._parents)

    def descendants(self, v: str) -> frozenset[str]:
        """All strict descendants of v."""
        return self._reach(v, self._children)

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
        except CycleError:
            return False
        return True

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm; ties broken by node declaration order."""
        indeg = {v: len(self._parents[v]) for v in self.nodes}
        order: list[str] = []
        ready = [v for v in self.nodes if indeg[v] == 0]
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in sorted(self._children[v], key=self.nodes.index):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.nodes):
            stuck = sorted(v for v in self.nodes if indeg[v] > 0)
            raise CycleError(f"graph has a directed cycle among {stuck}")
        return tuple(order)

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def __repr__(self) -> str:
        return f"Dag({len(self.nodes)} nodes, {len(self.edges)} edges)"


@dataclass(frozen=True)
class Cpdag:
    """Mixed graph with directed and undirected marks.

    A pair of nodes carries at most one mark, and the directed part is
    acyclic.  Undirected pairs are stored with endpoints sorted.
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]]
    undirected: frozenset[tuple[str, str]]

    def __init__(
        self,
        nodes: Iterable[str],
        directed: Iterable[tuple[str, str]] = (),
        undirected: Iterable[tuple[str, str]] = (),
    ):
        nodes = tuple(nodes)
        directed = frozenset((a, b) for a, b in directed)
        undirected = frozenset(tuple(sorted((a, b))) for a, b in undirected)
        _check_nodes_edges(nodes, directed)
        _check_nodes_edges(nodes, undirected)
        for a, b in directed:
            if (b, a) in directed:
                raise GraphError(f"pair ({a!r}, {b!r}) directed both ways")
            if tuple(sorted((a, b))) in undirected:
                raise GraphError(f"pair ({a!r}, {b!r}) both directed and undirected")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        if not Dag(nodes, directed).is_acyclic():
            raise GraphError("directed part of a Cpdag must be acyclic")

    @cached_property
    def _adjacency(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.directed:
            out[a].add(b)
            out[b].add(a)
        for a, b in self.undirected:
            out[a].add(b)
            out[b].add(a)
        return {v: frozenset(s) for v, s in out.items()}

    def adjacent(self, a: str, b: str) -> bool:
        return b in self._adjacency[a]

    def neighbors(self, v: str) -> frozenset[str]:
        if v not in self._adjacency:
            raise GraphError(f"unknown node {v!r}")
        return self._adjacency[v]

    def undirected_neighbors(self, v: str) -> frozenset[str]:
        return frozenset(
            b if a == v else a for a, b in self.undirected if v in (a, b)
        )

    def has_undirected(self, a: str, b: str) -> bool:
        return tuple(sorted((a, b))) in self.undirected

    def __repr__(self) -> str:
        return (
            f"Cpdag({len(self.nodes)} nodes, {len(self.directed)} directed, "
            f"{len(self.undirected)} undirected)"
        )


class SeparationSets:
    """Symmetric map from unordered variable pairs to their separating set."""

    def __init__(self):
        self._sets: dict[frozenset[str], frozenset[str]] = {}

    def record(self, a: str, b: str, z: Iterable[str]) -> None:
        z = frozenset(z)
        if a == b or a in z or b in z:
            raise GraphError("separating set may not contain its endpoints")
        self._sets[frozenset((a, b))] = z

    def get(self, a: str, b: str) -> frozenset[str] | None:
        return self._sets.get(frozenset((a, b)))

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return frozenset(pair) in self._sets

    def __len__(self) -> int:
        return len(self._sets)

    def items(self):
        return self._sets.items()


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Orientation constraints: forbidden edges, required edges, causal tiers.

    An edge from a higher tier into a lower tier is forbidden; variables
    without a tier are unconstrained.  Required edges must not be forbidden
    and must be acyclic among themselves.
    """

    forbidden: frozenset[tuple[str, str]] = frozenset()
    required: frozenset[tuple[str, str]] = frozenset()
    tiers: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))
        object.__setattr__(self, "required", frozenset(self.required))
        object.__setattr__(self, "tiers", dict(self.tiers))
        for a, b in self.required:
            if self.forbids(a, b):
                raise GraphError(f"edge ({a!r}, {b!r}) both required and forbidden")
        nodes = {v for e in self.required for v in e}
        if nodes and not Dag(tuple(sorted(nodes)), self.required).is_acyclic():
            raise GraphError("required edges form a directed cycle")

    def forbids(self, a: str, b: str) -> bool:
        """True when an edge a -> b must not appear."""
        if (a, b) in self.forbidden:
            return True
        ta, tb = self.tiers.get(a), self.tiers.get(b)
        return ta is not None and tb is not None and ta > tb

    def requires(self, a: str, b: str) -> bool:
        return (a, b) in self.required

    def pair_forbidden(self, a: str, b: str) -> bool:
        """True when no adjacency between a and b is allowed in any direction."""
        return self.forbids(a, b) and self.forbids(b, a)

    def pair_required(self, a: str, b: str) -> bool:
        return self.requires(a, b) or self.requires(b, a)

    @classmethod
    def output_sink(cls, input_names: Iterable[str], output_name: str) -> "BackgroundKnowledge":
        """Inputs in tier 0, the output variable alone in the last tier."""
        tiers = {name: 0 for name in input_names}
        tiers[output_name] = 1
        return cls(tiers=tiers)


def d_separated(g: Dag, a: str, b: str, z: Iterable[str] = ()) -> bool:
    """True when every path between a and b is blocked given conditioning set z.

    Linear-time reachability: walk (node, direction) states, where collider
    nodes pass the trail only when they have a descendant in z.
    """
    z = frozenset(z)
    g._require(a)
    g._require(b)
    for v in z:
        g._require(v)
    if a == b:
        raise GraphError("endpoints must differ")
    if a in z or b in z:
        raise GraphError("endpoints may not be conditioned on")
    if not g.is_acyclic():
        raise CycleError("d-separation requires an acyclic graph")

    # nodes that are in z or have a descendant in z
    anc_z: set[str] = set(z)
    stack = [p for v in z for p in g.parents(v)]
    while stack:
        u = stack.pop()
        if u not in anc_z:
            anc_z.add(u)
            stack.extend(g.parents(u))

    UP, DOWN = 0, 1  # UP: trail leaves via parents or children; DOWN: entered from a parent
    visited: set[tuple[str, int]] = set()
    frontier: list[tuple[str, int]] = [(a, UP)]
    while frontier:
        v, direction = frontier.pop()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v == b:
            return False
        if direction == UP and v not in z:
            for p in g.parents(v):
                frontier.append((p, UP))
            for c in g.children(v):
                frontier.append((c, DOWN))
        elif direction == DOWN:
            if v not in z:
                for c in g.children(v):
                    frontier.append((c, DOWN))
            if v in anc_z:
                for p in g.parents(v):
                    frontier.append((p, UP))
    return True


def _forced_direction(
    a: str, b: str, knowledge: BackgroundKnowledge
) -> tuple[str, str] | None:
    """Direction an undirected pair must take under knowledge, if any."""
    ab_ok = not knowledge.forbids(a, b)
    ba_ok = not knowledge.forbids(b, a)
    if knowledge.requires(a, b) or (ab_ok and not ba_ok):
        return (a, b)
    if knowledge.requires(b, a) or (ba_ok and not ab_ok):
        return (b, a)
    if not ab_ok and not ba_ok:
        raise ExtensionError(
            f"pair ({a!r}, {b!r}) is adjacent but forbidden in both directions",
            frozenset({(a, b)}),
        )
    return None


def cpdag_to_dag(c: Cpdag, knowledge: BackgroundKnowledge | None = None) -> Dag:
    """Orient every undirected edge to obtain one consistent DAG extension.

    The result keeps all directed marks, is acyclic, and introduces no new
    v-structure relative to the input.  Knowledge-forced orientations are
    applied first; remaining choices use the sink-elimination method with
    lexicographic tie-breaking, so the output is deterministic.  Raises
    ExtensionError naming the blocking edges when no extension exists.
    """
    knowledge = knowledge or BackgroundKnowledge()
    directed: set[tuple[str, str]] = set(c.directed)
    undirected: set[tuple[str, str]] = set(c.undirected)

    for a, b in sorted(undirected):
        forced = _forced_direction(a, b, knowledge)
        if forced is not None:
            undirected.discard((a, b))
            directed.add(forced)

    # sink elimination: pick a node with no outgoing directed edge whose
    # undirected neighbors are adjacent to all its other neighbors, orient
    # its undirected edges inward, remove it, repeat
    active = set(c.nodes)
    adj: dict[str, set[str]] = {v: set() for v in c.nodes}
    und: dict[str, set[str]] = {v: set() for v in c.nodes}
    out: dict[str, set[str]] = {v: set() for v in c.nodes}
    for a, b in directed:
        adj[a].add(b)
        adj[b].add(a)
        out[a].add(b)
    for a, b in undirected:
        adj[a].add(b)
        adj[b].add(a)
        und[a].add(b)
        und[b].add(a)

    result = set(directed)
    while active:
        sink = None
        for x in sorted(active):
            if out[x] & active:
                continue
            nbrs = adj[x] & active
            ok = True
            for y in und[x] & active:
                if not (nbrs - {y}) <= (adj[y] | {y}):
                    ok = False
                    break
            if ok:
                sink = x
                break
        if sink is None:
            blocking = frozenset(
                (a, b) for a, b in undirected if a in active and b in active
            )
            raise ExtensionError(
                f"no consistent extension; blocked among nodes {sorted(active)}",
                blocking,
            )
        for y in und[sink] & active:
            result.add((y, sink))
        active.discard(sink)

    dag = Dag(c.nodes, result)
    if not dag.is_acyclic():
        raise ExtensionError(
            "extension produced a cycle", frozenset(c.undirected)
        )
    return dag


def graph_to_text(g: Dag | Cpdag) -> str:
    """One-line node header plus one edge per line; stable ordering."""
    lines = ["nodes: " + " ".join(g.nodes)]
    if isinstance(g, Dag):
        directed, undirected = g.edges, frozenset()
    else:
        directed, undirected = g.directed, g.undirected
    for a, b in sorted(directed):
        lines.append(f"{a} -> {b}")
    for a, b in sorted(undirected):
        lines.append(f"{a} -- {b}")
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> Cpdag:
    """Parse the exchange format; a fully directed result still parses as Cpdag."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("nodes:"):
        raise GraphError("graph text must start with a 'nodes:' header")
    nodes = tuple(lines[0][len("nodes:"):].split())
    directed, undirected = [], []
    for ln in lines[1:]:
        if " -> " in ln:
            a, b = ln.split(" -> ")
            directed.append((a.strip(), b.strip()))
        elif " -- " in ln:
            a, b = ln.split(" -- ")
            undirected.append((a.strip(), b.strip()))
        else:
            raise GraphError(f"unparseable edge line: {ln!r}")
    return Cpdag(nodes, directed, undirected)


def graph_to_dot(g: Dag | Cpdag, name: str = "g") -> str:
    lines = [f"digraph {name} {{"]
    for v in g.nodes:
        lines.append(f'  "{v}";')
    if isinstance(g, Dag):
        directed, undirected = g.edges, frozenset()
    else:
        directed, undirected = g.directed, g.undirected
    for a, b in sorted(directed):
        lines.append(f'  "{a}" -> "{b}";')
    for a, b in sorted(undirected):
        lines.append(f'  "{a}" -> "{b}" [dir=none];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_fingerprint(g: Dag | Cpdag) -> str:
    """Short stable hash of the graph structure (node-order independent)."""
    if isinstance(g, Dag):
        directed, undirected = g.edges, frozenset()
    else:
        directed, undirected = g.directed, g.undirected
    canon = "|".join(
        [" ".join(sorted(g.nodes))]
        + [f"{a}>{b}" for a, b in sorted(directed)]
        + [f"{a}-{b}" for a, b in sorted(undirected)]
    )
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
