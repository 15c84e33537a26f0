"""Constraint-based causal structure discovery.

The skeleton phase is the stable variant of the PC algorithm: within each
conditioning-set size, tests consult adjacency sets frozen at the start of
the sweep, so the result does not depend on variable ordering.  Unshielded
colliders are then oriented from the recorded separating sets, orientation
conflicts stay undirected, and the Meek rules propagate orientations to a
fixpoint under optional background knowledge.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable

from .citest import CITestResult, ci_test
from .data import Dataset
from .graphs import (
    BackgroundKnowledge,
    Cpdag,
    Dag,
    SeparationSets,
    cpdag_to_dag,
)

__all__ = [
    "DiscoveryConfig",
    "TraceEntry",
    "SkeletonResult",
    "pc_skeleton",
    "orient_v_structures",
    "meek_orient",
    "discover_cpdag",
    "discover_dag",
    "write_trace_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs for the discovery pipeline."""

    alpha: float = 0.01
    max_cond_set_size: int | None = 3
    test_method: str = "g2"
    knowledge: BackgroundKnowledge = field(default_factory=BackgroundKnowledge)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_cond_set_size is not None and self.max_cond_set_size < 0:
            raise ValueError("max_cond_set_size must be >= 0")


@dataclass(frozen=True)
class TraceEntry:
    """One edge removal: the tested pair, the separating set, and the test."""

    x: str
    y: str
    level: int
    sepset: tuple[str, ...]
    statistic: float
    dof: int
    p_value: float


@dataclass(frozen=True)
class SkeletonResult:
    """Undirected skeleton with separating sets and the removal trace."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]  # endpoint-sorted pairs
    sepsets: SeparationSets
    trace: tuple[TraceEntry, ...]

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def pc_skeleton(data: Dataset, config: DiscoveryConfig | None = None) -> SkeletonResult:
    """Stable skeleton search.

    Starts from the complete graph (pairs forbidden in both directions are
    never present, required pairs are never tested), then removes an edge as
    soon as some conditioning set of the current size separates it.  A test
    whose every conditioning configuration failed the minimum-count guard
    carries no evidence and never removes an edge.
    """
    config = config or DiscoveryConfig()
    if data.n_vars < 2:
        raise ValueError("skeleton search needs at least 2 variables")
    knowledge = config.knowledge
    nodes = tuple(sorted(data.names))
    adj: dict[str, set[str]] = {v: set() for v in nodes}
    for a, b in combinations(nodes, 2):
        if knowledge.pair_forbidden(a, b):
            continue
        adj[a].add(b)
        adj[b].add(a)

    seps = SeparationSets()
    trace: list[TraceEntry] = []
    level = 0
    while True:
        if config.max_cond_set_size is not None and level > config.max_cond_set_size:
            break
        frozen = {v: frozenset(adj[v]) for v in nodes}
        pairs = sorted(
            (a, b) for a, b in combinations(nodes, 2) if b in frozen[a]
        )
        any_candidate = False
        for a, b in pairs:
            if knowledge.pair_required(a, b):
                continue
            if b not in adj[a]:
                continue
            if max(len(frozen[a]) - 1, len(frozen[b]) - 1) >= level:
                any_candidate = True
            seen: set[frozenset[str]] = set()
            removed = False
            for side, other in ((a, b), (b, a)):
                if removed:
                    break
                candidates = sorted(frozen[side] - {other})
                if len(candidates) < level:
                    continue
                for z in combinations(candidates, level):
                    zset = frozenset(z)
                    if zset in seen:
                        continue
                    seen.add(zset)
                    result = ci_test(
                        data, a, b, z, alpha=config.alpha, method=config.test_method
                    )
                    if result.independent and result.configs_used > 0:
                        adj[a].discard(b)
                        adj[b].discard(a)
                        seps.record(a, b, z)
                        trace.append(
                            TraceEntry(
                                x=a, y=b, level=level, sepset=z,
                                statistic=result.statistic, dof=result.dof,
                                p_value=result.p_value,
                            )
                        )
                        removed = True
                        break
        if not any_candidate:
            break
        level += 1

    edges = frozenset(
        (a, b) for a, b in combinations(nodes, 2) if b in adj[a]
    )
    return SkeletonResult(nodes=nodes, edges=edges, sepsets=seps, trace=tuple(trace))


def orient_v_structures(
    skeleton: SkeletonResult,
    sepsets: SeparationSets | None = None,
    knowledge: BackgroundKnowledge | None = None,
) -> Cpdag:
    """Orient unshielded colliders a -> c <- b when c is outside sepset(a, b).

    Arrows demanded in both directions, forbidden by knowledge, or closing a
    directed cycle are dropped and the pair stays undirected (logged).
    """
    sepsets = sepsets if sepsets is not None else skeleton.sepsets
    knowledge = knowledge or BackgroundKnowledge()
    adj = skeleton.adjacency()
    demanded: set[tuple[str, str]] = set()
    for c in skeleton.nodes:
        for a, b in combinations(sorted(adj[c]), 2):
            if b in adj[a]:
                continue  # shielded
            sep = sepsets.get(a, b)
            if sep is None:
                continue  # pair never separated by a test; no evidence
            if c in sep:
                continue
            for tail in (a, b):
                if knowledge.forbids(tail, c):
                    log.info(
                        "v-structure arrow %s -> %s dropped (forbidden by knowledge)",
                        tail, c,
                    )
                else:
                    demanded.add((tail, c))

    conflicted = {
        tuple(sorted((a, b))) for a, b in demanded if (b, a) in demanded
    }
    for a, b in sorted(conflicted):
        log.info("conflicting v-structure orientations on %s -- %s; left undirected", a, b)

    directed: set[tuple[str, str]] = set()
    for a, b in sorted(demanded):
        if tuple(sorted((a, b))) in conflicted:
            continue
        candidate = Dag(skeleton.nodes, directed | {(a, b)})
        if not candidate.is_acyclic():
            log.info("v-structure arrow %s -> %s dropped (would close a cycle)", a, b)
            continue
        directed.add((a, b))

    oriented_pairs = {tuple(sorted(e)) for e in directed}
    undirected = {e for e in skeleton.edges if e not in oriented_pairs}
    return Cpdag(skeleton.nodes, directed, undirected)


def _meek_pass(
    nodes: tuple[str, ...],
    directed: set[tuple[str, str]],
    undirected: set[tuple[str, str]],
    knowledge: BackgroundKnowledge,
) -> bool:
    """Apply knowledge forcing plus rules R1 to R4 once; True when changed."""
    adj: dict[str, set[str]] = {v: set() for v in nodes}
    und_nbrs: dict[str, set[str]] = {v: set() for v in nodes}
    children: dict[str, set[str]] = {v: set() for v in nodes}
    parents: dict[str, set[str]] = {v: set() for v in nodes}
    for a, b in directed:
        adj[a].add(b)
        adj[b].add(a)
        children[a].add(b)
        parents[b].add(a)
    for a, b in undirected:
        adj[a].add(b)
        adj[b].add(a)
        und_nbrs[a].add(b)
        und_nbrs[b].add(a)

    def orient(a: str, b: str, rule: str) -> bool:
        pair = tuple(sorted((a, b)))
        if pair not in undirected:
            return False
        if knowledge.forbids(a, b):
            return False
        if not Dag(nodes, directed | {(a, b)}).is_acyclic():
            log.info("%s: orientation %s -> %s skipped (cycle)", rule, a, b)
            return False
        undirected.discard(pair)
        directed.add((a, b))
        return True

    changed = False

    # background knowledge: forced directions on undirected pairs
    for a, b in sorted(undirected):
        if knowledge.requires(a, b) or (knowledge.forbids(b, a) and not knowledge.forbids(a, b)):
            changed |= orient(a, b, "knowledge")
        elif knowledge.requires(b, a) or (knowledge.forbids(a, b) and not knowledge.forbids(b, a)):
            changed |= orient(b, a, "knowledge")
    if changed:
        return True

    # R1: a -> b, b -- c, a and c nonadjacent  =>  b -> c
    for a, b in sorted(directed):
        for c in sorted(und_nbrs[b]):
            if c != a and c not in adj[a]:
                if orient(b, c, "R1"):
                    return True

    # R2: a -> b -> c with a -- c  =>  a -> c
    for pair in sorted(undirected):
        for a, c in (pair, pair[::-1]):
            if children[a] & parents[c]:
                if orient(a, c, "R2"):
                    return True

    # R3: a -- b with a -- c -> b, a -- d -> b, c and d nonadjacent  =>  a -> b
    for pair in sorted(undirected):
        for a, b in (pair, pair[::-1]):
            mids = sorted(und_nbrs[a] & parents[b])
            for c, d in combinations(mids, 2):
                if c not in adj[d]:
                    if orient(a, b, "R3"):
                        return True

    # R4: a -- b with a -- c, c -> d, d -> b, b and c nonadjacent  =>  a -> b
    for pair in sorted(undirected):
        for a, b in (pair, pair[::-1]):
            for c in sorted(und_nbrs[a]):
                if c == b or b in adj[c]:
                    continue
                if children[c] & parents[b]:
                    if orient(a, b, "R4"):
                        return True

    return changed


def meek_orient(c: Cpdag, knowledge: BackgroundKnowledge | None = None) -> Cpdag:
    """Close the graph under the Meek orientation rules (and knowledge)."""
    knowledge = knowledge or BackgroundKnowledge()
    directed = set(c.directed)
    undirected = set(c.undirected)
    while _meek_pass(c.nodes, directed, undirected, knowledge):
        pass
    return Cpdag(c.nodes, directed, undirected)


def discover_cpdag(data: Dataset, config: DiscoveryConfig | None = None) -> Cpdag:
    """Skeleton, collider orientation, and Meek closure in sequence."""
    config = config or DiscoveryConfig()
    skeleton = pc_skeleton(data, config)
    cpdag = orient_v_structures(skeleton, skeleton.sepsets, config.knowledge)
    return meek_orient(cpdag, config.knowledge)


def discover_dag(data: Dataset, config: DiscoveryConfig | None = None) -> Dag:
    """Full pipeline ending in one consistent DAG extension.

    A single-variable dataset short-circuits to the single-node DAG.
    """
    config = config or DiscoveryConfig()
    if data.n_vars == 1:
        return Dag(data.names, ())
    cpdag = discover_cpdag(data, config)
    return cpdag_to_dag(cpdag, config.knowledge)


def discover_trace(data: Dataset, config: DiscoveryConfig | None = None) -> tuple[TraceEntry, ...]:
    """Removal trace of the skeleton phase (for audit output)."""
    return pc_skeleton(data, config or DiscoveryConfig()).trace


def write_trace_csv(trace: Iterable[TraceEntry], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "level", "sepset", "statistic", "dof", "p_value"])
        for t in trace:
            writer.writerow(
                [t.x, t.y, t.level, " ".join(t.sepset), repr(t.statistic), t.dof, repr(t.p_value)]
            )
