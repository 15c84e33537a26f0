"""Interventions on structural causal models.

Graph surgery deletes the arrows into each intervened variable and replaces
its mechanism with a point mass.  Effects on an outcome are then computed
either exactly through variable elimination or by simulating the surged
model, with an automatic choice gated on the model's joint state count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, ROLE_OUTPUT
from .graphs import Dag
from .scm import Scm, fit as fit_scm
from .seeding import derive_rng, derive_seed

__all__ = [
    "InterventionError",
    "EnumerationBoundError",
    "InterventionSpec",
    "EffectEstimate",
    "RefutationReport",
    "do_surgery",
    "exact_interventional_dist",
    "exact_interventional_mean",
    "interventional_mean",
    "estimate_effect",
    "ate",
    "refute_placebo",
]

log = logging.getLogger(__name__)

DEFAULT_ENUMERATION_BOUND = 10**7
DEFAULT_SIMULATION_SAMPLES = 1000
Z_95 = 1.959963984540054


class InterventionError(ValueError):
    """Raised for invalid intervention targets or malformed requests."""


class EnumerationBoundError(InterventionError):
    """Exact computation refused: joint state count exceeds the bound."""


@dataclass(frozen=True)
class InterventionSpec:
    """Assignment of fixed levels (as level codes) to a set of variables."""

    assignments: tuple[tuple[str, int], ...]

    def __init__(self, assignments: Mapping[str, int] | Sequence[tuple[str, int]]):
        items = (
            tuple(assignments.items())
            if isinstance(assignments, Mapping)
            else tuple(assignments)
        )
        items = tuple((str(k), int(v)) for k, v in items)
        if not items:
            raise InterventionError("intervention needs at least one assignment")
        names = [k for k, _ in items]
        if len(set(names)) != len(names):
            raise InterventionError("intervention assigns a variable twice")
        object.__setattr__(self, "assignments", tuple(sorted(items)))

    @classmethod
    def from_labels(cls, model: Scm, labels: Mapping[str, str]) -> "InterventionSpec":
        return cls({name: model.variable(name).index(label) for name, label in labels.items()})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.assignments)

    def as_dict(self) -> dict[str, int]:
        return dict(self.assignments)

    def validate(self, model: Scm) -> None:
        for name, level in self.assignments:
            var = model.variable(name)  # raises on unknown name
            if var.role == ROLE_OUTPUT:
                raise InterventionError(f"the output variable {name!r} cannot be assigned")
            if not 0 <= level < var.cardinality:
                raise InterventionError(f"level {level} out of range for variable {name!r}")


@dataclass(frozen=True)
class EffectEstimate:
    """An interventional mean (or a difference of two) with its uncertainty."""

    value: float
    std_error: float
    ci_low: float
    ci_high: float
    n_samples: int
    method: str

    def __post_init__(self):
        if self.method not in ("exact", "simulation"):
            raise InterventionError(f"unknown estimation method {self.method!r}")
        if not self.ci_low <= self.value <= self.ci_high:
            raise InterventionError("confidence interval must bracket the value")

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_samples": self.n_samples,
            "method": self.method,
        }


def do_surgery(model: Scm, spec: InterventionSpec) -> Scm:
    """Return the surged model: arrows into each assigned variable deleted and
    its CPT replaced with a point mass on the assigned level."""
    spec.validate(model)
    assigned = spec.as_dict()
    new_edges = [(a, b) for a, b in model.graph.edges if b not in assigned]
    new_graph = Dag(model.graph.nodes, new_edges)
    new_cpts = dict(model.cpts)
    for name, level in assigned.items():
        row = np.zeros((1, model.cardinality(name)))
        row[0, level] = 1.0
        new_cpts[name] = row
    return Scm(model.variables, new_graph, new_cpts, model.smoothing)


def _multiply_factor(
    table: np.ndarray,
    axes: list[str],
    factor: np.ndarray,
    factor_axes: list[str],
    card: Mapping[str, int],
) -> tuple[np.ndarray, list[str]]:
    """Pointwise product of two named-axis factors."""
    out_axes = axes + [a for a in factor_axes if a not in axes]
    expanded = table.reshape(table.shape + (1,) * (len(out_axes) - len(axes)))
    perm = [factor_axes.index(a) for a in out_axes if a in factor_axes]
    aligned = np.transpose(factor, perm)
    shape = tuple(card[a] if a in factor_axes else 1 for a in out_axes)
    return expanded * aligned.reshape(shape), out_axes


def _eliminate(model: Scm, outcome: str) -> np.ndarray:
    """Exact outcome marginal via variable elimination in topological order,
    restricted to the outcome's ancestors (other nodes cannot affect it)."""
    keep = set(model.graph.ancestors(outcome)) | {outcome}
    order = [v for v in model.graph.topological_order() if v in keep]
    card = {v.name: v.cardinality for v in model.variables}
    unprocessed_children = {
        v: {c for c in model.graph.children(v) if c in keep} for v in order
    }

    table = np.ones(())
    axes: list[str] = []
    for v in order:
        parents = list(model.parent_order(v))
        cpt = model.cpts[v].reshape(tuple(card[p] for p in parents) + (card[v],))
        table, axes = _multiply_factor(table, axes, cpt, parents + [v], card)
        for p in parents:
            unprocessed_children[p].discard(v)
        # sum out any live variable no future factor will mention
        for a in list(axes):
            if a != outcome and not unprocessed_children[a]:
                i = axes.index(a)
                table = table.sum(axis=i)
                axes.pop(i)
    # everything except the outcome has been summed out
    if axes != [outcome]:
        for a in list(axes):
            if a != outcome:
                i = axes.index(a)
                table = table.sum(axis=i)
                axes.pop(i)
    return np.asarray(table, dtype=float)


def exact_interventional_dist(
    model: Scm,
    spec: InterventionSpec,
    outcome: str,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> np.ndarray:
    """Exact distribution of the outcome under the intervention.

    Refuses (EnumerationBoundError) when the surged model's joint state count
    exceeds the bound; use simulation in that regime.
    """
    model.variable(outcome)
    if outcome in spec.names:
        raise InterventionError("outcome cannot be part of the intervention")
    surged = do_surgery(model, spec)
    size = surged.joint_size()
    if size > enumeration_bound:
        raise EnumerationBoundError(
            f"joint state count {size} exceeds enumeration bound "
            f"{enumeration_bound}; use simulation"
        )
    return _eliminate(surged, outcome)


def _encoding_array(model: Scm, outcome: str, encoding: Sequence[float] | None) -> np.ndarray:
    card = model.cardinality(outcome)
    if encoding is None:
        return np.arange(card, dtype=float)
    arr = np.asarray(encoding, dtype=float)
    if arr.shape != (card,):
        raise InterventionError(
            f"encoding length {arr.shape} does not match cardinality {card} of {outcome!r}"
        )
    return arr


def exact_interventional_mean(
    model: Scm,
    spec: InterventionSpec,
    outcome: str,
    encoding: Sequence[float] | None = None,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> EffectEstimate:
    """Mean of the encoded outcome under the exact interventional distribution."""
    dist = exact_interventional_dist(model, spec, outcome, enumeration_bound)
    enc = _encoding_array(model, outcome, encoding)
    value = float(dist @ enc)
    return EffectEstimate(
        value=value, std_error=0.0, ci_low=value, ci_high=value,
        n_samples=0, method="exact",
    )


def interventional_mean(
    model: Scm,
    spec: InterventionSpec,
    outcome: str,
    encoding: Sequence[float] | None = None,
    n: int = DEFAULT_SIMULATION_SAMPLES,
    seed: int = 0,
) -> EffectEstimate:
    """Simulated mean of the encoded outcome under the intervention, with a
    normal-approximation 95 percent confidence interval."""
    if n < 1:
        raise InterventionError("n must be >= 1")
    model.variable(outcome)
    if outcome in spec.names:
        raise InterventionError("outcome cannot be part of the intervention")
    surged = do_surgery(model, spec)
    sample = surged.sample(n, seed=seed)
    enc = _encoding_array(model, outcome, encoding)
    values = enc[sample.column(outcome)]
    value = float(values.mean())
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    se = sd / math.sqrt(n)
    return EffectEstimate(
        value=value, std_error=se,
        ci_low=value - Z_95 * se, ci_high=value + Z_95 * se,
        n_samples=n, method="simulation",
    )


def estimate_effect(
    model: Scm,
    spec: InterventionSpec,
    outcome: str,
    encoding: Sequence[float] | None = None,
    method: str = "auto",
    n: int = DEFAULT_SIMULATION_SAMPLES,
    seed: int = 0,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> EffectEstimate:
    """One entry point over both estimation routes.

    auto picks the exact route whenever the surged joint state count fits the
    enumeration bound and falls back to simulation otherwise.
    """
    if method == "exact":
        return exact_interventional_mean(model, spec, outcome, encoding, enumeration_bound)
    if method == "simulation":
        return interventional_mean(model, spec, outcome, encoding, n, seed)
    if method != "auto":
        raise InterventionError(f"unknown estimation method {method!r}")
    if model.joint_size() <= enumeration_bound:
        return exact_interventional_mean(model, spec, outcome, encoding, enumeration_bound)
    return interventional_mean(model, spec, outcome, encoding, n, seed)


def ate(
    model: Scm,
    treatment: str,
    w1: int,
    w0: int,
    outcome: str,
    encoding: Sequence[float] | None = None,
    method: str = "auto",
    n: int = DEFAULT_SIMULATION_SAMPLES,
    seed: int = 0,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> EffectEstimate:
    """Average treatment effect: E[outcome | do(w1)] - E[outcome | do(w0)].

    Standard errors of the two arms combine in quadrature; the exact route
    yields a zero-width interval.
    """
    e1 = estimate_effect(
        model, InterventionSpec({treatment: w1}), outcome, encoding,
        method=method, n=n, seed=derive_seed(seed, "ate-arm", 1), enumeration_bound=enumeration_bound,
    )
    e0 = estimate_effect(
        model, InterventionSpec({treatment: w0}), outcome, encoding,
        method=method, n=n, seed=derive_seed(seed, "ate-arm", 0), enumeration_bound=enumeration_bound,
    )
    value = e1.value - e0.value
    se = math.hypot(e1.std_error, e0.std_error)
    out_method = "exact" if (e1.method == "exact" and e0.method == "exact") else "simulation"
    return EffectEstimate(
        value=value, std_error=se,
        ci_low=value - Z_95 * se, ci_high=value + Z_95 * se,
        n_samples=max(e1.n_samples, e0.n_samples), method=out_method,
    )


@dataclass(frozen=True)
class RefutationReport:
    """Placebo refutation: the original estimate against permuted treatments."""

    original: EffectEstimate
    placebo_values: tuple[float, ...]
    placebo_mean: float
    placebo_std: float
    suspicious: bool

    def as_dict(self) -> dict:
        return {
            "original": self.original.as_dict(),
            "placebo_values": list(self.placebo_values),
            "placebo_mean": self.placebo_mean,
            "placebo_std": self.placebo_std,
            "suspicious": self.suspicious,
        }


def refute_placebo(
    model: Scm,
    spec: InterventionSpec,
    outcome: str,
    data: Dataset,
    encoding: Sequence[float] | None = None,
    method: str = "auto",
    n: int = DEFAULT_SIMULATION_SAMPLES,
    seed: int = 0,
    k_placebos: int = 20,
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND,
) -> RefutationReport:
    """Re-estimate the effect after permuting the treatment columns.

    Each placebo permutes every intervened column independently, refits the
    CPTs on the same graph, and re-estimates.  The original estimate is
    suspicious when it lies within one placebo standard deviation of the
    placebo mean (with a single placebo: within twice its own standard
    error), meaning the claimed effect is indistinguishable from noise.
    """
    if k_placebos < 1:
        raise InterventionError("k_placebos must be >= 1")
    original = estimate_effect(
        model, spec, outcome, encoding,
        method=method, n=n, seed=derive_seed(seed, "original"),
        enumeration_bound=enumeration_bound,
    )
    treatment_cols = [data.column_index(name) for name in spec.names]
    placebo_values = []
    for i in range(k_placebos):
        rng = derive_rng(seed, "placebo", i)
        codes = np.array(data.codes)
        for col in treatment_cols:
            codes[:, col] = codes[rng.permutation(data.n_rows), col]
        permuted = Dataset(data.schema, codes, data.raw_output)
        refitted = fit_scm(model.graph, permuted, model.smoothing)
        est = estimate_effect(
            refitted, spec, outcome, encoding,
            method=method, n=n, seed=derive_seed(seed, "placebo-est", i),
            enumeration_bound=enumeration_bound,
        )
        placebo_values.append(est.value)
    values = np.asarray(placebo_values)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if k_placebos > 1 else 0.0
    if k_placebos == 1:
        suspicious = abs(original.value - mean) <= 2.0 * original.std_error
    else:
        suspicious = abs(original.value - mean) <= std
    return RefutationReport(
        original=original,
        placebo_values=tuple(placebo_values),
        placebo_mean=mean,
        placebo_std=std,
        suspicious=suspicious,
    )
