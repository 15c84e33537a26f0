"""Closed-loop causal test generation.

The session bootstraps a database with uniform random tests, discovers a
causal model of the system under test, and then repeats: propose
hypothetical tests as interventions on the model, estimate their effect on
the output, execute only the most promising ones, and update the model with
the observed results.  Execution budget is spent only on searched tests; the
bootstrap is exempt unless configured otherwise.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import (
    Dataset,
    Discretization,
    ROLE_OUTPUT,
    VariableSchema,
    discretize,
)
from .discovery import DiscoveryConfig, discover_dag
from .graphs import BackgroundKnowledge, Dag, GraphError, graph_fingerprint
from .intervention import (
    EffectEstimate,
    InterventionSpec,
    RefutationReport,
    do_surgery,
    estimate_effect,
    refute_placebo,
)
from .scm import Scm, fit
from .seeding import derive_rng, derive_seed
from .sutbench import ExecutionRecord, SyntheticSut

__all__ = [
    "EngineError",
    "EngineConfig",
    "HypotheticalTest",
    "SessionRecord",
    "IterationInfo",
    "SessionReport",
    "SessionState",
    "bootstrap",
    "propose",
    "select",
    "update",
    "run_session",
]

log = logging.getLogger(__name__)

VARIABLE_STRATEGIES = ("random", "objective", "uncertainty")
VALUE_STRATEGIES = ("exhaustive", "sampling")
ESTIMATION_METHODS = ("auto", "exact", "simulation")
OBJECTIVES = ("minimize", "maximize")


class EngineError(ValueError):
    """Raised for invalid session configuration or degenerate data."""


@dataclass(frozen=True)
class EngineConfig:
    """Session parameters; defaults mirror the reference instantiation."""

    budget: int = 100
    initial_random_tests: int = 100
    variable_strategy: str = "random"
    value_strategy: str = "exhaustive"
    value_sample_k: int = 3
    estimation: str = "auto"
    estimation_samples: int = 1000
    tests_per_iteration: int = 1
    rediscover_every: int | None = 10
    objective: str = "minimize"
    seed: int = 0
    output_bins: int = 5
    smoothing: float = 1.0
    alpha: float = 0.01
    max_cond_set_size: int = 3
    enumeration_bound: int = 10**7
    refute: bool = False
    refute_placebos: int = 5
    include_bootstrap_in_budget: bool = False
    budget_seconds: float | None = None

    def __post_init__(self):
        if self.budget < 0:
            raise EngineError("budget must be >= 0")
        if self.initial_random_tests < 0:
            raise EngineError("initial_random_tests must be >= 0")
        if self.variable_strategy not in VARIABLE_STRATEGIES:
            raise EngineError(f"unknown variable strategy {self.variable_strategy!r}")
        if self.value_strategy not in VALUE_STRATEGIES:
            raise EngineError(f"unknown value strategy {self.value_strategy!r}")
        if self.value_strategy == "sampling" and self.value_sample_k < 1:
            raise EngineError("value_sample_k must be >= 1")
        if self.estimation not in ESTIMATION_METHODS:
            raise EngineError(f"unknown estimation method {self.estimation!r}")
        if self.objective not in OBJECTIVES:
            raise EngineError(f"unknown objective {self.objective!r}")
        if self.tests_per_iteration < 1:
            raise EngineError("tests_per_iteration must be >= 1")
        if self.rediscover_every is not None and self.rediscover_every < 1:
            raise EngineError("rediscover_every must be >= 1 or None")
        if self.output_bins < 2:
            raise EngineError("output_bins must be >= 2")


@dataclass(frozen=True)
class HypotheticalTest:
    """A candidate test: a complete input assignment reached by intervening
    on one variable and sampling the remaining inputs from the surged model."""

    assignment: tuple[int, ...]
    spec: InterventionSpec
    effect: EffectEstimate
    iteration: int

    @property
    def intervened(self) -> tuple[str, ...]:
        return self.spec.names


@dataclass(frozen=True)
class SessionRecord:
    """One executed test inside a session."""

    index: int
    iteration: int
    phase: str  # bootstrap | search
    codes: tuple[int, ...]
    inputs: dict[str, str]
    raw_output: float
    violation: bool
    t_gen: float
    t_exec: float


@dataclass(frozen=True)
class IterationInfo:
    """Book-keeping for one loop iteration."""

    iteration: int
    variable: str
    n_candidates: int
    chosen_effects: tuple[float, ...]
    refutation: RefutationReport | None = None


@dataclass(frozen=True)
class SessionReport:
    """Everything observable about one finished session."""

    technique: str
    sut_name: str
    config: dict
    records: tuple[SessionRecord, ...]
    iterations: tuple[IterationInfo, ...]
    model_snapshots: tuple[tuple[int, str], ...]
    budget: int
    executed: int

    def search_records(self) -> tuple[SessionRecord, ...]:
        return tuple(r for r in self.records if r.phase == "search")

    def violations(self, include_bootstrap: bool = False) -> int:
        records = self.records if include_bootstrap else self.search_records()
        return sum(1 for r in records if r.violation)


class SessionState:
    """Mutable engine state across iterations."""

    def __init__(
        self,
        sut: SyntheticSut,
        config: EngineConfig,
        dataset: Dataset,
        disc: Discretization,
        graph: Dag,
        model: Scm,
        records: list[SessionRecord],
    ):
        self.sut = sut
        self.config = config
        self.dataset = dataset
        self.disc = disc
        self.graph = graph
        self.model = model
        self.records = records
        self.iteration = 0
        self.executed_search = 0
        self.effect_cache: dict[str, tuple[EffectEstimate, ...]] = {}
        self.snapshots: list[tuple[int, str]] = [(0, graph_fingerprint(graph))]
        self.iterations: list[IterationInfo] = []
        self.encoding = disc.midpoints()
        self.input_cards = {v.name: v.cardinality for v in sut.inputs}

    @property
    def output_name(self) -> str:
        return self.sut.output.name

    def knowledge(self) -> BackgroundKnowledge:
        return BackgroundKnowledge.output_sink(self.sut.input_names, self.output_name)

    def discovery_config(self) -> DiscoveryConfig:
        return DiscoveryConfig(
            alpha=self.config.alpha,
            max_cond_set_size=self.config.max_cond_set_size,
            knowledge=self.knowledge(),
        )


def _uniform_assignment(sut: SyntheticSut, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(rng.integers(v.cardinality)) for v in sut.inputs)


def _session_schema(sut: SyntheticSut, disc: Discretization) -> tuple[VariableSchema, ...]:
    output = VariableSchema(sut.output.name, disc.labels(), ROLE_OUTPUT)
    return tuple(sut.inputs) + (output,)


def bootstrap(
    sut: SyntheticSut,
    config: EngineConfig,
    seed_records: Sequence[ExecutionRecord] | None = None,
) -> SessionState:
    """Create the initial database, discover a model from it, and fit CPTs.

    The raw outputs of the bootstrap fix the output discretization for the
    whole session.  With initial_random_tests zero the caller must supply
    seed records, which are folded in without spending executions.
    """
    executions: list[tuple[tuple[int, ...], ExecutionRecord]] = []
    if config.initial_random_tests == 0:
        if not seed_records:
            raise EngineError("initial_random_tests is 0 but no seed records given")
        for rec in seed_records:
            executions.append((tuple(rec.codes), rec))
    else:
        rng = derive_rng(config.seed, "bootstrap-inputs")
        for i in range(config.initial_random_tests):
            assignment = _uniform_assignment(sut, rng)
            rec = sut.execute(
                dict(zip(sut.input_names, assignment)),
                seed=derive_seed(config.seed, "bootstrap-exec", i),
            )
            executions.append((assignment, rec))

    raw = np.array([rec.raw_output for _, rec in executions])
    disc = discretize(raw, config.output_bins)
    if disc.degenerate:
        raise EngineError(
            "bootstrap outputs are constant; cannot discretize the output "
            "into at least 2 levels"
        )
    schema = _session_schema(sut, disc)
    rows = [
        tuple(codes) + (int(disc.codes[i]),)
        for i, (codes, _) in enumerate(executions)
    ]
    dataset = Dataset(schema, rows, raw)

    records = [
        SessionRecord(
            index=i,
            iteration=0,
            phase="bootstrap",
            codes=tuple(codes),
            inputs=dict(rec.inputs),
            raw_output=rec.raw_output,
            violation=rec.violation,
            t_gen=0.0,
            t_exec=rec.t_exec,
        )
        for i, (codes, rec) in enumerate(executions)
    ]

    knowledge = BackgroundKnowledge.output_sink(sut.input_names, sut.output.name)
    graph = discover_dag(
        dataset,
        DiscoveryConfig(
            alpha=config.alpha,
            max_cond_set_size=config.max_cond_set_size,
            knowledge=knowledge,
        ),
    )
    model = fit(graph, dataset, config.smoothing)
    return SessionState(sut, config, dataset, disc, graph, model, records)


def _argmax_first(names: Sequence[str], score: Callable[[str], float]) -> str:
    """The alphabetically first name among those with the maximal score."""
    best_name = names[0]
    best = -np.inf
    for name in sorted(names):
        s = score(name)
        if s > best:
            best, best_name = s, name
    return best_name


def _pick_variable(state: SessionState) -> str:
    """Variable selection over the inputs.

    random: uniform.  objective: widest spread of cached per-level effect
    estimates.  uncertainty: widest mean confidence interval.  Both informed
    strategies first fall back to a random still-unestimated variable, so
    every input gets estimated once before exploitation starts.
    """
    cfg = state.config
    names = list(state.sut.input_names)
    rng = derive_rng(cfg.seed, "variable", state.iteration)
    if cfg.variable_strategy == "random":
        return names[int(rng.integers(len(names)))]

    uncached = [n for n in names if n not in state.effect_cache]
    if uncached:
        return uncached[int(rng.integers(len(uncached)))]
    if cfg.variable_strategy == "objective":
        def spread(name: str) -> float:
            values = [e.value for e in state.effect_cache[name]]
            return max(values) - min(values)
        return _argmax_first(names, spread)

    def width(name: str) -> float:
        return float(np.mean([e.ci_high - e.ci_low for e in state.effect_cache[name]]))
    return _argmax_first(names, width)


def _candidate_levels(state: SessionState, variable: str) -> list[int]:
    cfg = state.config
    card = state.input_cards[variable]
    if cfg.value_strategy == "exhaustive" or cfg.value_sample_k >= card:
        return list(range(card))
    rng = derive_rng(cfg.seed, "values", state.iteration, variable)
    levels = rng.choice(card, size=cfg.value_sample_k, replace=False)
    return sorted(int(v) for v in levels)


def propose(state: SessionState) -> list[HypotheticalTest]:
    """Hypothetical tests for this iteration.

    One intervention per candidate level of the selected variable; the
    estimated interventional mean of the output is attached and the
    remaining inputs are completed by sampling the surged model.
    """
    variable = _pick_variable(state)
    levels = _candidate_levels(state, variable)
    input_names = state.sut.input_names
    hypotheticals: list[HypotheticalTest] = []
    estimates: list[EffectEstimate] = []
    for level in levels:
        spec = InterventionSpec({variable: level})
        est = estimate_effect(
            state.model,
            spec,
            state.output_name,
            state.encoding,
            method=state.config.estimation,
            n=state.config.estimation_samples,
            seed=derive_seed(state.config.seed, "estimate", state.iteration, variable, level),
            enumeration_bound=state.config.enumeration_bound,
        )
        estimates.append(est)
        fill = do_surgery(state.model, spec).sample(
            1, seed=derive_seed(state.config.seed, "fill", state.iteration, variable, level)
        )
        assignment = tuple(int(fill.column(name)[0]) for name in input_names)
        hypotheticals.append(
            HypotheticalTest(
                assignment=assignment,
                spec=spec,
                effect=est,
                iteration=state.iteration,
            )
        )
    state.effect_cache[variable] = tuple(estimates)
    return hypotheticals


def select(
    hypotheticals: Sequence[HypotheticalTest],
    k: int,
    objective: str = "minimize",
) -> list[HypotheticalTest]:
    """The k most promising tests by estimated effect.

    Minimizing sorts ascending, maximizing descending; ties break on the
    assignment tuple.  Asking for more than exist returns all of them.
    """
    if objective not in OBJECTIVES:
        raise EngineError(f"unknown objective {objective!r}")
    if k < 1:
        raise EngineError("k must be >= 1")
    sign = 1.0 if objective == "minimize" else -1.0
    ranked = sorted(hypotheticals, key=lambda h: (sign * h.effect.value, h.assignment))
    if k > len(ranked):
        log.info("selection asked for %d tests, only %d proposed", k, len(ranked))
        return list(ranked)
    return list(ranked[:k])


def update(
    state: SessionState,
    executed: Sequence[tuple[HypotheticalTest, ExecutionRecord]],
) -> None:
    """Fold executed tests into the dataset and refresh the model.

    CPTs are refit on every call.  The graph itself is rediscovered every
    rediscover_every iterations; a rediscovery failure keeps the previous
    graph and logs the reason.
    """
    if executed:
        new_rows = []
        new_raws = []
        for hyp, rec in executed:
            new_rows.append(tuple(rec.codes) + (state.disc.bin_of(rec.raw_output),))
            new_raws.append(rec.raw_output)
        all_codes = np.vstack([state.dataset.codes, np.asarray(new_rows, dtype=np.int64)])
        all_raws = np.concatenate([state.dataset.raw_output, np.asarray(new_raws)])
        state.dataset = Dataset(state.dataset.schema, all_codes, all_raws)

    every = state.config.rediscover_every
    if every is not None and state.iteration % every == 0:
        try:
            new_graph = discover_dag(state.dataset, state.discovery_config())
        except GraphError as exc:
            log.warning("rediscovery failed at iteration %d: %s", state.iteration, exc)
        else:
            if graph_fingerprint(new_graph) != graph_fingerprint(state.graph):
                state.graph = new_graph
                state.snapshots.append((state.iteration, graph_fingerprint(new_graph)))
    state.model = fit(state.graph, state.dataset, state.config.smoothing)


def run_session(
    sut: SyntheticSut,
    config: EngineConfig | None = None,
    seed_records: Sequence[ExecutionRecord] | None = None,
    technique: str = "rbst",
) -> SessionReport:
    """Full session: bootstrap, then propose/select/execute/update until the
    execution budget (and the optional time budget) is exhausted.

    The time budget runs on a virtual clock fed by recorded generation and
    execution times, so sessions with simulated execution cost stay cheap.
    """
    config = config or EngineConfig()
    state = bootstrap(sut, config, seed_records)
    remaining = config.budget
    if config.include_bootstrap_in_budget:
        remaining -= len(state.records)
    clock = 0.0

    while remaining > 0:
        if config.budget_seconds is not None and clock >= config.budget_seconds:
            log.info("time budget exhausted after %.1f virtual seconds", clock)
            break
        state.iteration += 1
        started = time.perf_counter()
        hypotheticals = propose(state)
        chosen = select(
            hypotheticals, min(config.tests_per_iteration, remaining), config.objective
        )
        t_gen_total = time.perf_counter() - started
        t_gen_each = t_gen_total / max(len(chosen), 1)
        variable = hypotheticals[0].spec.names[0]

        refutation = None
        if config.refute and chosen:
            refutation = refute_placebo(
                state.model,
                chosen[0].spec,
                state.output_name,
                state.dataset,
                state.encoding,
                method=config.estimation,
                n=config.estimation_samples,
                seed=derive_seed(config.seed, "refute", state.iteration),
                k_placebos=config.refute_placebos,
            )

        executed: list[tuple[HypotheticalTest, ExecutionRecord]] = []
        for hyp in chosen:
            exec_seed = derive_seed(config.seed, "search-exec", state.executed_search)
            rec = sut.execute(dict(zip(state.sut.input_names, hyp.assignment)), seed=exec_seed)
            state.executed_search += 1
            remaining -= 1
            clock += t_gen_each + rec.t_exec
            state.records.append(
                SessionRecord(
                    index=len(state.records),
                    iteration=state.iteration,
                    phase="search",
                    codes=hyp.assignment,
                    inputs=dict(rec.inputs),
                    raw_output=rec.raw_output,
                    violation=rec.violation,
                    t_gen=t_gen_each,
                    t_exec=rec.t_exec,
                )
            )
            executed.append((hyp, rec))

        state.iterations.append(
            IterationInfo(
                iteration=state.iteration,
                variable=variable,
                n_candidates=len(hypotheticals),
                chosen_effects=tuple(h.effect.value for h in chosen),
                refutation=refutation,
            )
        )
        update(state, executed)

    return SessionReport(
        technique=technique,
        sut_name=sut.name,
        config=_config_dict(config),
        records=tuple(state.records),
        iterations=tuple(state.iterations),
        model_snapshots=tuple(state.snapshots),
        budget=config.budget,
        executed=state.executed_search,
    )


def _config_dict(config: EngineConfig) -> dict:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}
