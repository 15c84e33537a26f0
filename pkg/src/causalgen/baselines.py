"""Comparison techniques: random testing, adaptive random testing, and
surrogate-assisted genetic search.

All three emit the same SessionReport as the causal engine, with identical
budget accounting: only searched executions count against the budget, and
an initial database (used by the surrogate search) is recorded as bootstrap
phase.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset, ROLE_OUTPUT, VariableSchema, discretize
from .engine import EngineError, SessionRecord, SessionReport
from .seeding import derive_rng, derive_seed
from .sutbench import ExecutionRecord, SyntheticSut

__all__ = [
    "ArtConfig",
    "GaConfig",
    "random_database",
    "random_baseline",
    "art",
    "sbst_ml",
    "KnnSurrogate",
]


@dataclass(frozen=True)
class ArtConfig:
    """Fixed-size candidate set adaptive random testing."""

    candidate_set_size: int = 10
    distance: str = "hamming"

    def __post_init__(self):
        if self.candidate_set_size < 1:
            raise EngineError("candidate_set_size must be >= 1")
        if self.distance != "hamming":
            raise EngineError(f"unknown distance {self.distance!r}")


@dataclass(frozen=True)
class GaConfig:
    """Genetic search over input assignments with a k-NN surrogate."""

    population: int = 50
    generations_per_step: int = 1
    crossover_rate: float = 0.9
    mutation_rate: float = 1.0 / 16.0
    tournament_size: int = 3
    knn_k: int = 5
    real_evals_per_generation: int = 2

    def __post_init__(self):
        for name in ("population", "generations_per_step", "tournament_size",
                     "knn_k", "real_evals_per_generation"):
            if getattr(self, name) < 1:
                raise EngineError(f"{name} must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise EngineError(f"{name} must be in [0, 1]")


def _config_dict(cfg) -> dict:
    return {name: getattr(cfg, name) for name in cfg.__dataclass_fields__}


def _record(
    sut: SyntheticSut,
    rec: ExecutionRecord,
    index: int,
    iteration: int,
    phase: str,
    t_gen: float,
) -> SessionRecord:
    return SessionRecord(
        index=index,
        iteration=iteration,
        phase=phase,
        codes=tuple(rec.codes),
        inputs=dict(rec.inputs),
        raw_output=rec.raw_output,
        violation=rec.violation,
        t_gen=t_gen,
        t_exec=rec.t_exec,
    )


def _uniform_codes(sut: SyntheticSut, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(rng.integers(v.cardinality)) for v in sut.inputs)


def random_database(
    sut: SyntheticSut,
    n: int,
    seed: int,
    bins: int = 5,
) -> tuple[Dataset, list[ExecutionRecord]]:
    """Uniform random executions packaged as a dataset with a discretized
    output column; the same shape the engine's bootstrap produces."""
    if n < 1:
        raise EngineError("initial database size must be >= 1")
    rng = derive_rng(seed, "bootstrap-inputs")
    records = []
    for i in range(n):
        codes = _uniform_codes(sut, rng)
        records.append(
            sut.execute(
                dict(zip(sut.input_names, codes)),
                seed=derive_seed(seed, "bootstrap-exec", i),
            )
        )
    raw = np.array([r.raw_output for r in records])
    disc = discretize(raw, bins)
    output = VariableSchema(sut.output.name, disc.labels(), ROLE_OUTPUT)
    schema = tuple(sut.inputs) + (output,)
    rows = [tuple(r.codes) + (int(disc.codes[i]),) for i, r in enumerate(records)]
    return Dataset(schema, rows, raw), records


def random_baseline(sut: SyntheticSut, budget: int, seed: int = 0) -> SessionReport:
    """Uniform random complete assignments until the budget is spent."""
    if budget < 1:
        raise EngineError("budget must be >= 1")
    rng = derive_rng(seed, "inputs")
    records: list[SessionRecord] = []
    for i in range(budget):
        started = time.perf_counter()
        codes = _uniform_codes(sut, rng)
        t_gen = time.perf_counter() - started
        rec = sut.execute(
            dict(zip(sut.input_names, codes)), seed=derive_seed(seed, "exec", i)
        )
        records.append(_record(sut, rec, i, i + 1, "search", t_gen))
    return SessionReport(
        technique="random",
        sut_name=sut.name,
        config={"budget": budget, "seed": seed},
        records=tuple(records),
        iterations=(),
        model_snapshots=(),
        budget=budget,
        executed=budget,
    )


def art(
    sut: SyntheticSut,
    budget: int,
    cfg: ArtConfig | None = None,
    seed: int = 0,
) -> SessionReport:
    """Adaptive random testing, fixed-size candidate set.

    The first test is uniform random.  Each later step draws a fresh
    candidate set and executes the candidate whose minimum Hamming distance
    to all executed inputs is largest; ties go to the earliest draw.
    """
    if budget < 1:
        raise EngineError("budget must be >= 1")
    cfg = cfg or ArtConfig()
    rng = derive_rng(seed, "candidates")
    records: list[SessionRecord] = []
    executed = np.empty((0, len(sut.inputs)), dtype=np.int64)
    for i in range(budget):
        started = time.perf_counter()
        if i == 0:
            codes = _uniform_codes(sut, rng)
        else:
            candidates = np.array(
                [_uniform_codes(sut, rng) for _ in range(cfg.candidate_set_size)],
                dtype=np.int64,
            )
            # min Hamming distance of each candidate to the executed set
            diffs = (candidates[:, None, :] != executed[None, :, :]).sum(axis=2)
            best = int(np.argmax(diffs.min(axis=1)))
            codes = tuple(int(c) for c in candidates[best])
        t_gen = time.perf_counter() - started
        rec = sut.execute(
            dict(zip(sut.input_names, codes)), seed=derive_seed(seed, "exec", i)
        )
        executed = np.vstack([executed, np.asarray(codes, dtype=np.int64)])
        records.append(_record(sut, rec, i, i + 1, "search", t_gen))
    return SessionReport(
        technique="art",
        sut_name=sut.name,
        config={"budget": budget, "seed": seed, **_config_dict(cfg)},
        records=tuple(records),
        iterations=(),
        model_snapshots=(),
        budget=budget,
        executed=budget,
    )


class KnnSurrogate:
    """k-nearest-neighbor regression over Hamming distance.

    Predictions are inverse-distance weighted.  A query at distance zero
    returns the recorded output of the earliest exact match.  Neighbor ties
    at equal distance resolve to the lower row index.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise EngineError("k must be >= 1")
        self.k = k
        self._x = np.empty((0, 0), dtype=np.int64)
        self._y = np.empty(0)

    def fit(self, inputs: np.ndarray, outputs: np.ndarray) -> "KnnSurrogate":
        x = np.asarray(inputs, dtype=np.int64)
        y = np.asarray(outputs, dtype=float)
        if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
            raise EngineError("surrogate needs a non-empty aligned training set")
        self._x = x
        self._y = y
        return self

    def predict_one(self, codes: Sequence[int]) -> float:
        if self._x.size == 0:
            raise EngineError("surrogate is not fitted")
        q = np.asarray(codes, dtype=np.int64)
        dist = (self._x != q).sum(axis=1)
        exact = np.nonzero(dist == 0)[0]
        if exact.size:
            return float(self._y[exact[0]])
        k = min(self.k, dist.shape[0])
        # stable sort keeps lower row indices first among equal distances
        nearest = np.argsort(dist, kind="stable")[:k]
        w = 1.0 / dist[nearest]
        return float(np.dot(w, self._y[nearest]) / w.sum())

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in np.asarray(inputs)])


def _tournament(
    fitness: np.ndarray,
    rng: np.random.Generator,
    size: int,
    minimize: bool,
) -> int:
    picks = rng.integers(fitness.shape[0], size=size)
    scores = fitness[picks]
    best = int(np.argmin(scores)) if minimize else int(np.argmax(scores))
    return int(picks[best])


def _evolve(
    population: np.ndarray,
    fitness: np.ndarray,
    cards: np.ndarray,
    cfg: GaConfig,
    rng: np.random.Generator,
    minimize: bool,
) -> np.ndarray:
    """One generation: tournament selection, one-point crossover, per-gene
    uniform mutation.  Returns a same-sized offspring population."""
    n, width = population.shape
    children = np.empty_like(population)
    filled = 0
    while filled < n:
        i = _tournament(fitness, rng, cfg.tournament_size, minimize)
        j = _tournament(fitness, rng, cfg.tournament_size, minimize)
        a = population[i].copy()
        b = population[j].copy()
        if width > 1 and rng.random() < cfg.crossover_rate:
            point = int(rng.integers(1, width))
            a[point:], b[point:] = population[j][point:].copy(), population[i][point:].copy()
        for child in (a, b):
            mask = rng.random(width) < cfg.mutation_rate
            if mask.any():
                child[mask] = rng.integers(cards[mask])
            if filled < n:
                children[filled] = child
                filled += 1
    return children


def sbst_ml(
    sut: SyntheticSut,
    budget: int,
    cfg: GaConfig | None = None,
    initial: Dataset | None = None,
    seed: int = 0,
    objective: str = "minimize",
) -> SessionReport:
    """Surrogate-assisted genetic search over the input space.

    Starts from an initial executed database (shared with the causal
    engine's bootstrap shape).  Each generation refits the k-NN surrogate on
    every executed record, evolves the population, ranks offspring by
    surrogate prediction, and spends real executions only on the top few.
    """
    if budget < 1:
        raise EngineError("budget must be >= 1")
    if initial is None or initial.n_rows == 0:
        raise EngineError("sbst_ml needs a non-empty initial database")
    if initial.raw_output is None:
        raise EngineError("initial database must carry raw outputs")
    if objective not in ("minimize", "maximize"):
        raise EngineError(f"unknown objective {objective!r}")
    cfg = cfg or GaConfig()
    minimize = objective == "minimize"
    input_names = sut.input_names
    input_cols = [initial.column_index(name) for name in input_names]
    cards = np.array([v.cardinality for v in sut.inputs], dtype=np.int64)
    width = len(input_names)

    train_x = initial.codes[:, input_cols].copy()
    train_y = np.array(initial.raw_output)

    records: list[SessionRecord] = []
    for i in range(initial.n_rows):
        labels = {
            name: initial.variable(name).levels[int(train_x[i, j])]
            for j, name in enumerate(input_names)
        }
        raw = float(train_y[i])
        records.append(
            SessionRecord(
                index=i,
                iteration=0,
                phase="bootstrap",
                codes=tuple(int(c) for c in train_x[i]),
                inputs=labels,
                raw_output=raw,
                violation=raw <= sut.threshold,
                t_gen=0.0,
                t_exec=sut.exec_time,
            )
        )

    # seed the population with the best initial rows, padded with randoms
    rng = derive_rng(seed, "ga")
    order = np.argsort(train_y, kind="stable")
    if not minimize:
        order = order[::-1]
    population = train_x[order[: cfg.population]].copy()
    if population.shape[0] < cfg.population:
        pad = rng.integers(cards, size=(cfg.population - population.shape[0], width))
        population = np.vstack([population, pad.astype(np.int64)])

    surrogate = KnnSurrogate(cfg.knn_k)
    executed = 0
    generation = 0
    while executed < budget:
        generation += 1
        started = time.perf_counter()
        surrogate.fit(train_x, train_y)
        for _ in range(cfg.generations_per_step):
            fitness = surrogate.predict(population)
            population = _evolve(population, fitness, cards, cfg, rng, minimize)
        scores = surrogate.predict(population)
        ranked = np.argsort(scores, kind="stable")
        if not minimize:
            ranked = ranked[::-1]
        n_real = min(cfg.real_evals_per_generation, budget - executed)
        chosen = population[ranked[:n_real]]
        t_gen = (time.perf_counter() - started) / max(n_real, 1)
        for row in chosen:
            codes = tuple(int(c) for c in row)
            rec = sut.execute(
                dict(zip(input_names, codes)), seed=derive_seed(seed, "exec", executed)
            )
            records.append(
                _record(sut, rec, len(records), generation, "search", t_gen)
            )
            train_x = np.vstack([train_x, np.asarray(codes, dtype=np.int64)])
            train_y = np.append(train_y, rec.raw_output)
            executed += 1

    return SessionReport(
        technique="sbst-ml",
        sut_name=sut.name,
        config={"budget": budget, "seed": seed, "objective": objective, **_config_dict(cfg)},
        records=tuple(records),
        iterations=(),
        model_snapshots=(),
        budget=budget,
        executed=executed,
    )
