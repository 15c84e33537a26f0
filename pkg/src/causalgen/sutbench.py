"""Synthetic systems under test with known causal ground truth.

A bench spec is a JSON document declaring categorical input variables, a
ground-truth graph of internal response nodes, and one real-valued output.
Each non-input node responds through a probability table or through an
arithmetic expression over its parents' level codes (plus an optional noise
term); the output node additionally maps its level to a real value, adds
optional (possibly heteroscedastic) value noise, and clamps at zero.  A test
violates when the output does not exceed the threshold.

Because the generator is itself a categorical SCM, every bench can hand out
its true model and exact or Monte-Carlo ground-truth interventional effects.
"""
from __future__ import annotations

import ast
import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import truncnorm

from .data import ROLE_INPUT, ROLE_OUTPUT, VariableSchema
from .graphs import CycleError, Dag
from .intervention import (
    DEFAULT_ENUMERATION_BOUND,
    InterventionSpec,
    exact_interventional_dist,
)
from .scm import Scm
from .seeding import derive_seed, node_uniforms

__all__ = [
    "SutError",
    "NoiseSpec",
    "ResponseNode",
    "ExecutionRecord",
    "SyntheticSut",
    "load_sut",
    "load_bench",
    "available_benches",
    "ground_truth_effect",
]


class SutError(ValueError):
    """Raised for malformed bench specs and invalid executions."""


_ALLOWED_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
    ast.Mod: np.mod,
}
_ALLOWED_UNARY = {ast.USub: np.negative, ast.UAdd: np.positive}
_ALLOWED_FUNCS = {"min": np.minimum, "max": np.maximum, "abs": np.abs}


def _parse_expr(text: str, allowed_names: set[str]) -> ast.Expression:
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise SutError(f"unparseable expression {text!r}: {exc}") from exc
    func_names = {
        id(node.func) for node in ast.walk(tree) if isinstance(node, ast.Call)
    }
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            if id(node) in func_names:
                continue
            if node.id not in allowed_names:
                raise SutError(f"expression {text!r} references unknown name {node.id!r}")
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise SutError(f"expression {text!r} calls a disallowed function")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise SutError(f"expression {text!r} uses a non-numeric constant")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _ALLOWED_BINOPS:
                raise SutError(f"expression {text!r} uses a disallowed operator")
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _ALLOWED_UNARY:
                raise SutError(f"expression {text!r} uses a disallowed operator")
        elif not isinstance(node, (ast.Expression, ast.Load, ast.operator, ast.unaryop)):
            raise SutError(f"expression {text!r} uses disallowed syntax ({type(node).__name__})")
    return tree


def _eval_expr(tree: ast.Expression, env: Mapping[str, np.ndarray]):
    def go(node):
        if isinstance(node, ast.Expression):
            return go(node.body)
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _ALLOWED_BINOPS[type(node.op)](go(node.left), go(node.right))
        if isinstance(node, ast.UnaryOp):
            return _ALLOWED_UNARY[type(node.op)](go(node.operand))
        if isinstance(node, ast.Call):
            return _ALLOWED_FUNCS[node.func.id](*[go(a) for a in node.args])
        raise SutError(f"disallowed syntax ({type(node).__name__})")

    return go(tree)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise term: none, discrete-uniform jitter, or truncated normal.

    sigma may be a per-level sequence on an output's value noise, giving
    heteroscedastic spread keyed by the output level.
    """

    family: str = "none"
    offsets: tuple[float, ...] = ()
    sigma: float | tuple[float, ...] = 0.0
    low: float = 0.0
    high: float = 0.0

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "NoiseSpec":
        if raw is None:
            return cls()
        family = raw.get("family", "none")
        if family == "none":
            return cls()
        if family == "duniform":
            offsets = tuple(float(v) for v in raw.get("offsets", ()))
            if not offsets:
                raise SutError("duniform noise needs a non-empty offsets list")
            return cls(family="duniform", offsets=offsets)
        if family == "truncnormal":
            sigma = raw.get("sigma")
            if sigma is None:
                raise SutError("truncnormal noise needs sigma")
            if isinstance(sigma, (list, tuple)):
                sigma = tuple(float(s) for s in sigma)
                if any(s < 0 for s in sigma):
                    raise SutError("sigma must be >= 0")
            else:
                sigma = float(sigma)
                if sigma < 0:
                    raise SutError("sigma must be >= 0")
            low = float(raw.get("low", -3.0))
            high = float(raw.get("high", 3.0))
            if not low < high:
                raise SutError("truncnormal noise needs low < high")
            return cls(family="truncnormal", sigma=sigma, low=low, high=high)
        raise SutError(f"unknown noise family {family!r}")

    @property
    def is_none(self) -> bool:
        return self.family == "none"

    def sigma_for_level(self, level: np.ndarray) -> np.ndarray:
        if isinstance(self.sigma, tuple):
            return np.asarray(self.sigma, dtype=float)[level]
        return np.full(np.shape(level), float(self.sigma))

    def draw(self, u: np.ndarray, level: np.ndarray | None = None) -> np.ndarray:
        """Noise values from uniform draws (deterministic given u)."""
        if self.family == "none":
            return np.zeros_like(u)
        if self.family == "duniform":
            idx = np.minimum((u * len(self.offsets)).astype(int), len(self.offsets) - 1)
            return np.asarray(self.offsets, dtype=float)[idx]
        sigma = (
            self.sigma_for_level(level)
            if level is not None
            else np.full_like(u, float(self.sigma))
        )
        out = np.zeros_like(u)
        pos = sigma > 0
        if pos.any():
            s = sigma[pos]
            out[pos] = truncnorm.ppf(u[pos], self.low / s, self.high / s, loc=0.0, scale=s)
        return out

    def level_shift_probs(self, value: float, card: int) -> np.ndarray:
        """Distribution of clip(round(value + noise)) over 0..card-1."""
        if self.family == "none":
            probs = np.zeros(card)
            probs[int(np.clip(round(value), 0, card - 1))] = 1.0
            return probs
        if self.family == "duniform":
            probs = np.zeros(card)
            for off in self.offsets:
                probs[int(np.clip(round(value + off), 0, card - 1))] += 1.0 / len(self.offsets)
            return probs
        if isinstance(self.sigma, tuple):
            raise SutError("per-level sigma is only valid for output value noise")
        sigma = float(self.sigma)
        if sigma == 0:
            probs = np.zeros(card)
            probs[int(np.clip(round(value), 0, card - 1))] = 1.0
            return probs
        a, b = self.low / sigma, self.high / sigma
        cuts = np.array([k + 0.5 - value for k in range(card - 1)])
        cdf = truncnorm.cdf(cuts, a, b, loc=0.0, scale=sigma)
        probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        return np.maximum(probs, 0.0)


@dataclass(frozen=True)
class ResponseNode:
    """A non-input node: categorical response via table or expression."""

    name: str
    levels: tuple[str, ...]
    parents: tuple[str, ...]
    table: np.ndarray | None = None
    expr: str | None = None
    noise: NoiseSpec = NoiseSpec()

    @property
    def cardinality(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class ExecutionRecord:
    """One test execution: the assignment, the raw output, and timings."""

    inputs: dict[str, str]
    codes: tuple[int, ...]
    raw_output: float
    violation: bool
    t_exec: float


class SyntheticSut:
    """Executable synthetic system under test with categorical inputs."""

    def __init__(
        self,
        name: str,
        inputs: Sequence[VariableSchema],
        internal: Sequence[ResponseNode],
        output: ResponseNode,
        values: Sequence[float],
        value_noise: NoiseSpec,
        threshold: float = 0.0,
        exec_time: float = 0.0,
    ):
        self.name = name
        self.inputs = tuple(inputs)
        self.internal = tuple(internal)
        self.output = output
        self.values = tuple(float(v) for v in values)
        self.value_noise = value_noise
        self.threshold = float(threshold)
        self.exec_time = float(exec_time)
        self._validate()
        self._cards = {v.name: v.cardinality for v in self.inputs}
        self._cards.update({n.name: n.cardinality for n in self.internal})
        self._cards[output.name] = output.cardinality
        self._exprs = {
            n.name: _parse_expr(n.expr, set(n.parents))
            for n in (*self.internal, self.output)
            if n.expr is not None
        }

    def _validate(self) -> None:
        names = [v.name for v in self.inputs] + [n.name for n in self.internal] + [self.output.name]
        if len(set(names)) != len(names):
            raise SutError("duplicate node names")
        defined = set(names)
        non_input_nodes = (*self.internal, self.output)
        for node in non_input_nodes:
            if len(node.levels) < 2:
                raise SutError(f"node {node.name!r} needs at least 2 levels")
            for p in node.parents:
                if p not in defined:
                    raise SutError(f"node {node.name!r} has unknown parent {p!r}")
                if p == self.output.name:
                    raise SutError("the output node must be a sink")
            if (node.table is None) == (node.expr is None):
                raise SutError(f"node {node.name!r} needs exactly one of table or expr")
            if node.table is not None:
                if not node.noise.is_none:
                    raise SutError(f"table node {node.name!r} cannot carry a noise term")
                n_cfg = 1
                for p in node.parents:
                    n_cfg *= self._card_of(p)
                tbl = np.asarray(node.table, dtype=float)
                if tbl.shape != (n_cfg, node.cardinality):
                    raise SutError(
                        f"table for {node.name!r} has shape {tbl.shape}, "
                        f"expected {(n_cfg, node.cardinality)}"
                    )
                if tbl.min() < 0 or np.abs(tbl.sum(axis=1) - 1.0).max() > 1e-9:
                    raise SutError(f"table rows for {node.name!r} must be distributions")
        if len(self.values) != self.output.cardinality:
            raise SutError("output values length must match output cardinality")
        if isinstance(self.value_noise.sigma, tuple) and len(
            self.value_noise.sigma
        ) != self.output.cardinality:
            raise SutError("per-level sigma length must match output cardinality")
        # acyclicity over the ground-truth graph
        nodes = tuple(v.name for v in self.inputs) + tuple(n.name for n in self.internal) + (
            self.output.name,
        )
        edges = [
            (p, n.name) for n in (*self.internal, self.output) for p in n.parents
        ]
        try:
            Dag(nodes, edges).topological_order()
        except CycleError as exc:
            raise SutError(f"ground-truth graph has a cycle: {exc}") from exc

    def _card_of(self, name: str) -> int:
        for v in self.inputs:
            if v.name == name:
                return v.cardinality
        for n in self.internal:
            if n.name == name:
                return n.cardinality
        if name == self.output.name:
            return self.output.cardinality
        raise SutError(f"unknown node {name!r}")

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    def input_schema(self) -> tuple[VariableSchema, ...]:
        return self.inputs

    def input_space_size(self) -> int:
        size = 1
        for v in self.inputs:
            size *= v.cardinality
        return size

    # ------------------------------------------------------------------ #
    # execution

    def _response_order(self) -> tuple[ResponseNode, ...]:
        by_name = {n.name: n for n in (*self.internal, self.output)}
        nodes = tuple(v.name for v in self.inputs) + tuple(by_name)
        edges = [(p, n.name) for n in by_name.values() for p in n.parents]
        order = Dag(nodes, edges).topological_order()
        return tuple(by_name[v] for v in order if v in by_name)

    def _simulate(
        self,
        n: int,
        seed: int,
        overrides: Mapping[str, int] | None = None,
    ) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Draw n end-to-end evaluations; overrides pin node levels (do-style)."""
        overrides = dict(overrides or {})
        columns: dict[str, np.ndarray] = {}
        for v in self.inputs:
            if v.name in overrides:
                columns[v.name] = np.full(n, overrides[v.name], dtype=np.int64)
            else:
                u = node_uniforms(seed, v.name, n)
                columns[v.name] = np.minimum(
                    (u * v.cardinality).astype(np.int64), v.cardinality - 1
                )
        for node in self._response_order():
            if node.name in overrides:
                columns[node.name] = np.full(n, overrides[node.name], dtype=np.int64)
                continue
            columns[node.name] = self._draw_node(node, columns, n, seed)
        out_level = columns[self.output.name]
        u_val = node_uniforms(seed, self.output.name + ":value", n)
        noise = self.value_noise.draw(u_val, out_level)
        raw = np.asarray(self.values, dtype=float)[out_level] + noise
        raw = np.maximum(raw, 0.0)
        return columns, raw

    def _draw_node(
        self,
        node: ResponseNode,
        columns: Mapping[str, np.ndarray],
        n: int,
        seed: int,
    ) -> np.ndarray:
        if node.table is not None:
            cfg = np.zeros(n, dtype=np.int64)
            for p in node.parents:
                cfg = cfg * self._cards[p] + columns[p]
            cdf = np.cumsum(np.asarray(node.table, dtype=float), axis=1)[cfg]
            u = node_uniforms(seed, node.name, n)
            codes = (cdf < u[:, None]).sum(axis=1)
            return np.minimum(codes, node.cardinality - 1).astype(np.int64)
        env = {p: columns[p].astype(float) for p in node.parents}
        value = np.asarray(_eval_expr(self._exprs[node.name], env), dtype=float)
        if value.shape == ():
            value = np.full(n, float(value))
        if not node.noise.is_none:
            u = node_uniforms(seed, node.name + ":noise", n)
            value = value + node.noise.draw(u)
        return np.clip(np.rint(value), 0, node.cardinality - 1).astype(np.int64)

    def _coerce_inputs(self, assignment: Mapping[str, str | int]) -> tuple[int, ...]:
        codes = []
        missing = [v.name for v in self.inputs if v.name not in assignment]
        if missing:
            raise SutError(f"incomplete assignment; missing {missing}")
        extra = set(assignment) - set(self.input_names)
        if extra:
            raise SutError(f"assignment names unknown inputs {sorted(extra)}")
        for v in self.inputs:
            raw = assignment[v.name]
            if isinstance(raw, str):
                codes.append(v.index(raw))
            else:
                code = int(raw)
                if not 0 <= code < v.cardinality:
                    raise SutError(f"level {code} out of range for input {v.name!r}")
                codes.append(code)
        return tuple(codes)

    def execute(self, assignment: Mapping[str, str | int], seed: int = 0) -> ExecutionRecord:
        """Run one test; pure in (assignment, seed)."""
        codes = self._coerce_inputs(assignment)
        overrides = dict(zip(self.input_names, codes))
        start = time.perf_counter()
        _, raw = self._simulate(1, seed, overrides)
        elapsed = time.perf_counter() - start
        value = float(raw[0])
        return ExecutionRecord(
            inputs={v.name: v.levels[c] for v, c in zip(self.inputs, codes)},
            codes=codes,
            raw_output=value,
            violation=bool(value <= self.threshold),
            t_exec=self.exec_time if self.exec_time > 0 else elapsed,
        )

    def execute_batch(self, codes: np.ndarray, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Run many tests at once with row-wise independent draws.

        Returns (raw outputs, violation flags).  The batch draws its own
        streams; row i does not reproduce execute(row_i, seed).
        """
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(self.inputs):
            raise SutError("codes must have one column per input")
        n = codes.shape[0]
        columns = {v.name: codes[:, j] for j, v in enumerate(self.inputs)}
        for node in self._response_order():
            columns[node.name] = self._draw_node(node, columns, n, seed)
        out_level = columns[self.output.name]
        u_val = node_uniforms(seed, self.output.name + ":value", n)
        noise = self.value_noise.draw(u_val, out_level)
        raw = np.maximum(np.asarray(self.values, dtype=float)[out_level] + noise, 0.0)
        return raw, raw <= self.threshold

    # ------------------------------------------------------------------ #
    # ground truth

    def variables(self) -> tuple[VariableSchema, ...]:
        """Schemas of all categorical nodes (output last, role output)."""
        out = [VariableSchema(v.name, v.levels, ROLE_INPUT) for v in self.inputs]
        out.extend(
            VariableSchema(n.name, n.levels, ROLE_INPUT) for n in self.internal
        )
        out.append(VariableSchema(self.output.name, self.output.levels, ROLE_OUTPUT))
        return tuple(out)

    def _node_cpt(self, node: ResponseNode, parent_cards: list[int]) -> np.ndarray:
        """Exact CPT of a response node under its declared parent order."""
        n_cfg = int(np.prod(parent_cards)) if parent_cards else 1
        if node.table is not None:
            return np.asarray(node.table, dtype=float)
        rows = np.zeros((n_cfg, node.cardinality))
        for cfg in range(n_cfg):
            codes = _decode_config(cfg, parent_cards)
            env = {p: np.asarray(float(c)) for p, c in zip(node.parents, codes)}
            value = float(_eval_expr(self._exprs[node.name], env))
            rows[cfg] = node.noise.level_shift_probs(value, node.cardinality)
        return rows

    def true_scm(self) -> Scm:
        """The generator itself as a categorical SCM (inputs uniform)."""
        variables = self.variables()
        order = {v.name: i for i, v in enumerate(variables)}
        nodes = tuple(v.name for v in variables)
        edges = [(p, n.name) for n in (*self.internal, self.output) for p in n.parents]
        graph = Dag(nodes, edges)
        cpts: dict[str, np.ndarray] = {}
        for v in self.inputs:
            cpts[v.name] = np.full((1, v.cardinality), 1.0 / v.cardinality)
        for node in (*self.internal, self.output):
            declared = list(node.parents)
            schema_order = sorted(declared, key=order.__getitem__)
            cards = [self._cards[p] for p in declared]
            cpt_declared = self._node_cpt(node, cards)
            if declared == schema_order:
                cpts[node.name] = cpt_declared
                continue
            # reindex rows from declared parent order to schema parent order
            schema_cards = [self._cards[p] for p in schema_order]
            n_cfg = cpt_declared.shape[0]
            reindexed = np.zeros_like(cpt_declared)
            for cfg in range(n_cfg):
                codes = dict(zip(schema_order, _decode_config(cfg, schema_cards)))
                decl_idx = 0
                for p in declared:
                    decl_idx = decl_idx * self._cards[p] + codes[p]
                reindexed[cfg] = cpt_declared[decl_idx]
            cpts[node.name] = reindexed
        return Scm(variables, graph, cpts, smoothing=0.0)

    def output_encoding(self) -> np.ndarray:
        """Level code to clamped real value (noise-free part)."""
        return np.maximum(np.asarray(self.values, dtype=float), 0.0)


def _decode_config(cfg: int, cards: Sequence[int]) -> tuple[int, ...]:
    codes = []
    for card in reversed(cards):
        codes.append(cfg % card)
        cfg //= card
    return tuple(reversed(codes))


def ground_truth_effect(
    sut: SyntheticSut,
    spec: InterventionSpec | Mapping[str, int],
    n: int = 10**6,
    seed: int = 0,
) -> float:
    """True E[output | do(spec)] on the generator, inputs uniform otherwise.

    Exact through the generator's own SCM when the output carries no value
    noise and the joint fits the enumeration bound; a seeded Monte-Carlo
    estimate with n samples otherwise.
    """
    if not isinstance(spec, InterventionSpec):
        spec = InterventionSpec(spec)
    model = sut.true_scm()
    spec.validate(model)
    if sut.value_noise.is_none and model.joint_size() <= DEFAULT_ENUMERATION_BOUND:
        dist = exact_interventional_dist(model, spec, sut.output.name)
        return float(dist @ sut.output_encoding())
    overrides = spec.as_dict()
    _, raw = sut._simulate(n, derive_seed(seed, "ground-truth"), overrides)
    return float(raw.mean())


def load_sut(source: str | Path | Mapping) -> SyntheticSut:
    """Build a SUT from a JSON file path or an already-parsed mapping."""
    if isinstance(source, Mapping):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            raise SutError(f"bench spec not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SutError(f"bench spec {path} is not valid JSON: {exc}") from exc
    try:
        inputs = tuple(
            VariableSchema(v["name"], tuple(v["levels"]), ROLE_INPUT)
            for v in raw["inputs"]
        )
        internal = tuple(
            ResponseNode(
                name=nd["name"],
                levels=tuple(nd["levels"]),
                parents=tuple(nd.get("parents", ())),
                table=np.asarray(nd["table"], dtype=float) if "table" in nd else None,
                expr=nd.get("expr"),
                noise=NoiseSpec.from_dict(nd.get("noise")),
            )
            for nd in raw.get("internal", ())
        )
        out_raw = raw["output"]
        output = ResponseNode(
            name=out_raw["name"],
            levels=tuple(out_raw["levels"]),
            parents=tuple(out_raw.get("parents", ())),
            table=np.asarray(out_raw["table"], dtype=float) if "table" in out_raw else None,
            expr=out_raw.get("expr"),
            noise=NoiseSpec.from_dict(out_raw.get("noise")),
        )
        return SyntheticSut(
            name=raw.get("name", "sut"),
            inputs=inputs,
            internal=internal,
            output=output,
            values=tuple(float(v) for v in out_raw["values"]),
            value_noise=NoiseSpec.from_dict(out_raw.get("value_noise")),
            threshold=float(raw.get("threshold", 0.0)),
            exec_time=float(raw.get("exec_time", 0.0)),
        )
    except KeyError as exc:
        raise SutError(f"bench spec is missing field {exc}") from exc


def available_benches() -> tuple[str, ...]:
    root = resources.files("causalgen") / "bench"
    if not root.is_dir():
        return ()
    return tuple(sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json")))


def load_bench(name: str) -> SyntheticSut:
    """Load one of the packaged bench SUTs by name."""
    root = resources.files("causalgen") / "bench"
    candidate = root / f"{name}.json"
    if not candidate.is_file():
        raise SutError(
            f"unknown bench {name!r}; available: {', '.join(available_benches())}"
        )
    return load_sut(json.loads(candidate.read_text()))
