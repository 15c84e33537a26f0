"""Structural causal models over categorical variables.

A model couples a DAG with one conditional probability table per node.  CPT
rows are indexed by a mixed-radix code over the node's parents (parents in
schema order, first parent most significant).  Sampling is ancestral and
draws every node from its own named uniform stream, so a fixed seed pins the
whole sample and model edits never perturb unrelated nodes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, VariableSchema
from .graphs import CycleError, Dag
from .seeding import node_uniforms

__all__ = ["ScmError", "Scm", "fit"]


class ScmError(ValueError):
    """Raised for structural or fitting problems."""


@dataclass(frozen=True)
class Scm:
    """Immutable categorical SCM: variables, graph, and per-node CPTs."""

    variables: tuple[VariableSchema, ...]
    graph: Dag
    cpts: Mapping[str, np.ndarray]
    smoothing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ScmError("duplicate variable names")
        if set(self.graph.nodes) != set(names):
            raise ScmError("graph nodes must match the variable set")
        if not self.graph.is_acyclic():
            raise CycleError("SCM graph must be acyclic")
        if self.smoothing < 0:
            raise ScmError("smoothing must be >= 0")
        cpts = {}
        by_name = {v.name: v for v in self.variables}
        for name in names:
            if name not in self.cpts:
                raise ScmError(f"missing CPT for {name!r}")
            cpt = np.asarray(self.cpts[name], dtype=float)
            n_cfg = 1
            for p in self.parent_order(name):
                n_cfg *= by_name[p].cardinality
            card = by_name[name].cardinality
            if cpt.shape != (n_cfg, card):
                raise ScmError(
                    f"CPT for {name!r} has shape {cpt.shape}, expected {(n_cfg, card)}"
                )
            if cpt.size and (cpt.min() < 0 or np.abs(cpt.sum(axis=1) - 1.0).max() > 1e-9):
                raise ScmError(f"CPT rows for {name!r} must be distributions")
            cpt.setflags(write=False)
            cpts[name] = cpt
        object.__setattr__(self, "cpts", cpts)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> VariableSchema:
        for v in self.variables:
            if v.name == name:
                return v
        raise ScmError(f"unknown variable {name!r}")

    def cardinality(self, name: str) -> int:
        return self.variable(name).cardinality

    def parent_order(self, name: str) -> tuple[str, ...]:
        """Parents of a node in schema order; fixes CPT row indexing."""
        order = {v.name: i for i, v in enumerate(self.variables)}
        return tuple(sorted(self.graph.parents(name), key=order.__getitem__))

    def config_index(
        self, name: str, codes: Mapping[str, np.ndarray], n_rows: int
    ) -> np.ndarray:
        """Mixed-radix CPT row index for each row of the given parent codes."""
        parents = self.parent_order(name)
        idx = np.zeros(n_rows, dtype=np.int64)
        for p in parents:
            idx = idx * self.cardinality(p) + np.asarray(codes[p], dtype=np.int64)
        return idx

    def joint_size(self) -> int:
        size = 1
        for v in self.variables:
            size *= v.cardinality
        return size

    def sample(self, n: int, seed: int = 0) -> Dataset:
        """Ancestral sample of n rows; deterministic given (model, n, seed)."""
        if n < 0:
            raise ScmError("n must be >= 0")
        columns: dict[str, np.ndarray] = {}
        for name in self.graph.topological_order():
            cpt = self.cpts[name]
            cfg = self.config_index(name, columns, n)
            u = node_uniforms(seed, name, n)
            cdf = np.cumsum(cpt, axis=1)[cfg]
            codes = (cdf < u[:, None]).sum(axis=1)
            columns[name] = np.minimum(codes, cpt.shape[1] - 1).astype(np.int64)
        arr = np.column_stack([columns[v.name] for v in self.variables]) if n else []
        return Dataset(self.variables, arr)

    def log_likelihood(self, data: Dataset) -> float:
        """Sum of log probabilities of every row; -inf on impossible rows."""
        for v in self.variables:
            if data.variable(v.name).levels != v.levels:
                raise ScmError(f"dataset levels for {v.name!r} do not match model")
        total = 0.0
        columns = {name: data.column(name) for name in self.names}
        for name in self.names:
            cfg = self.config_index(name, columns, data.n_rows)
            probs = self.cpts[name][cfg, columns[name]]
            if (probs <= 0).any():
                return -math.inf
            total += float(np.log(probs).sum())
        return total

    def to_json(self) -> str:
        payload = {
            "variables": [
                {"name": v.name, "levels": list(v.levels), "role": v.role}
                for v in self.variables
            ],
            "edges": sorted([list(e) for e in self.graph.edges]),
            "smoothing": self.smoothing,
            "cpts": {name: self.cpts[name].tolist() for name in self.names},
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scm":
        payload = json.loads(text)
        variables = tuple(
            VariableSchema(v["name"], tuple(v["levels"]), v.get("role", "input"))
            for v in payload["variables"]
        )
        graph = Dag(
            tuple(v.name for v in variables),
            [tuple(e) for e in payload["edges"]],
        )
        cpts = {name: np.asarray(rows, dtype=float) for name, rows in payload["cpts"].items()}
        return cls(variables, graph, cpts, payload.get("smoothing", 1.0))

    @classmethod
    def load(cls, path: str | Path) -> "Scm":
        return cls.from_json(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def fit(graph: Dag, data: Dataset, smoothing: float = 1.0) -> Scm:
    """Maximum-likelihood CPTs with Laplace smoothing from complete data.

    With smoothing zero, a parent configuration that never occurs has no
    defined distribution and fitting fails, naming the node and the
    configuration.
    """
    if smoothing < 0:
        raise ScmError("smoothing must be >= 0")
    names = set(data.names)
    for node in graph.nodes:
        if node not in names:
            raise ScmError(f"graph node {node!r} missing from dataset")
    variables = tuple(v for v in data.schema if v.name in set(graph.nodes))
    columns = {v.name: data.column(v.name) for v in variables}
    by_name = {v.name: v for v in variables}

    order = {v.name: i for i, v in enumerate(variables)}
    cpts: dict[str, np.ndarray] = {}
    for v in variables:
        parents = tuple(sorted(graph.parents(v.name), key=order.__getitem__))
        n_cfg = 1
        for p in parents:
            n_cfg *= by_name[p].cardinality
        card = v.cardinality
        idx = np.zeros(data.n_rows, dtype=np.int64)
        for p in parents:
            idx = idx * by_name[p].cardinality + columns[p]
        counts = (
            np.bincount(idx * card + columns[v.name], minlength=n_cfg * card)
            .reshape(n_cfg, card)
            .astype(float)
        )
        totals = counts.sum(axis=1)
        if smoothing == 0 and (totals == 0).any():
            cfg = int(np.flatnonzero(totals == 0)[0])
            labels = _decode_config(cfg, parents, by_name)
            raise ScmError(
                f"no observations for node {v.name!r} under parent "
                f"configuration {labels}; use smoothing > 0"
            )
        cpt = (counts + smoothing) / (totals + smoothing * card)[:, None]
        cpts[v.name] = cpt
    return Scm(variables, graph, cpts, smoothing)


def _decode_config(
    cfg: int, parents: tuple[str, ...], by_name: Mapping[str, VariableSchema]
) -> dict[str, str]:
    labels: dict[str, str] = {}
    for p in reversed(parents):
        card = by_name[p].cardinality
        labels[p] = by_name[p].levels[cfg % card]
        cfg //= card
    return {p: labels[p] for p in parents}
