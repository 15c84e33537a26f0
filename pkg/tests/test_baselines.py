"""Random, adaptive random, and surrogate-assisted genetic baselines.

The adaptive random tests replay the technique's candidate stream with an
independent re-implementation of the max-min-Hamming rule, so the selection
logic is checked against plain loops rather than against itself.
"""
import numpy as np
import pytest

from causalgen.baselines import (
    ArtConfig,
    GaConfig,
    KnnSurrogate,
    art,
    random_baseline,
    random_database,
    sbst_ml,
)
from causalgen.engine import EngineError
from causalgen.seeding import derive_rng
from causalgen.sutbench import load_sut

TWO = {
    "name": "twofour",
    "inputs": [
        {"name": "a", "levels": ["0", "1", "2", "3"]},
        {"name": "b", "levels": ["0", "1", "2", "3"]},
    ],
    "output": {
        "name": "y",
        "levels": ["v0", "v1", "v2", "v3", "v4"],
        "parents": ["a", "b"],
        "expr": "min(a + b, 4)",
        "values": [0.0, 1.0, 2.0, 4.0, 8.0],
    },
    "threshold": 0.5,
}

SEPARABLE = {
    "name": "sep",
    "inputs": [{"name": n, "levels": ["0", "1", "2", "3"]} for n in ("a", "b", "c", "d")],
    "output": {
        "name": "y",
        "levels": [f"s{i}" for i in range(13)],
        "parents": ["a", "b", "c", "d"],
        "expr": "a + b + c + d",
        "values": [float(i) for i in range(13)],
    },
    "threshold": 0.5,
}


@pytest.fixture
def two():
    return load_sut(TWO)


@pytest.fixture
def sep():
    return load_sut(SEPARABLE)


def hamming(u, v):
    return sum(1 for x, y in zip(u, v) if x != y)


def mean_pairwise_distance(rows):
    arr = [tuple(r) for r in rows]
    n = len(arr)
    total = sum(hamming(arr[i], arr[j]) for i in range(n) for j in range(i + 1, n))
    return total / (n * (n - 1) / 2)


# ------------------------------------------------------------- random

def test_random_baseline_accounting(two):
    report = random_baseline(two, 25, seed=1)
    assert report.technique == "random"
    assert report.executed == 25 and report.budget == 25
    assert len(report.records) == 25
    assert all(r.phase == "search" for r in report.records)


def test_random_baseline_is_deterministic_and_uniform(two):
    one = random_baseline(two, 400, seed=2)
    again = random_baseline(two, 400, seed=2)
    assert [r.codes for r in one.records] == [r.codes for r in again.records]
    counts = np.zeros((4, 4))
    for r in one.records:
        counts[r.codes] += 1
    assert np.abs(counts / 400 - 1 / 16).max() < 0.05


def test_random_baseline_validates_budget(two):
    with pytest.raises(EngineError):
        random_baseline(two, 0)


# ------------------------------------------------------------- art

def art_replay_oracle(sut, budget, k, seed):
    """Re-derive the executed sequence with plain loops over the same stream."""
    rng = derive_rng(seed, "candidates")

    def draw():
        return tuple(int(rng.integers(v.cardinality)) for v in sut.inputs)

    executed = [draw()]
    for _ in range(budget - 1):
        candidates = [draw() for _ in range(k)]
        best, best_score = None, -1
        for cand in candidates:
            score = min(hamming(cand, e) for e in executed)
            if score > best_score:
                best, best_score = cand, score
        executed.append(best)
    return executed


def test_art_matches_replay_oracle(two):
    for seed in (0, 1, 2):
        report = art(two, 8, ArtConfig(candidate_set_size=3), seed=seed)
        expected = art_replay_oracle(two, 8, 3, seed)
        assert [r.codes for r in report.records] == expected


def test_art_single_candidate_executes_its_stream(two):
    report = art(two, 10, ArtConfig(candidate_set_size=1), seed=4)
    assert [r.codes for r in report.records] == art_replay_oracle(two, 10, 1, 4)


def test_art_spreads_more_than_random(sep):
    wins = 0
    for seed in range(20):
        a = art(sep, 30, ArtConfig(candidate_set_size=10), seed=seed)
        r = random_baseline(sep, 30, seed=seed)
        da = mean_pairwise_distance([rec.codes for rec in a.records])
        dr = mean_pairwise_distance([rec.codes for rec in r.records])
        wins += da > dr
    assert wins >= 17


def test_art_config_validation(two):
    with pytest.raises(EngineError):
        ArtConfig(candidate_set_size=0)
    with pytest.raises(EngineError):
        ArtConfig(distance="euclidean")
    with pytest.raises(EngineError):
        art(two, 0)


# ------------------------------------------------------------- surrogate

def test_surrogate_exact_recall():
    x = np.array([[0, 0], [1, 1], [0, 0]])
    y = np.array([3.0, 10.0, 99.0])
    s = KnnSurrogate(k=2).fit(x, y)
    assert s.predict_one((1, 1)) == 10.0
    # duplicate rows: the earliest one answers
    assert s.predict_one((0, 0)) == 3.0


def test_surrogate_inverse_distance_weighting():
    x = np.array([[0, 0], [1, 1]])
    y = np.array([0.0, 10.0])
    s = KnnSurrogate(k=2).fit(x, y)
    # query at Hamming distance 1 from both: equal weights
    assert s.predict_one((0, 1)) == pytest.approx(5.0)
    # k=1 with tied distances resolves to the lower row index
    assert KnnSurrogate(k=1).fit(x, y).predict_one((0, 1)) == 0.0


def test_surrogate_validation():
    with pytest.raises(EngineError):
        KnnSurrogate(k=0)
    with pytest.raises(EngineError):
        KnnSurrogate().predict_one((0, 0))
    with pytest.raises(EngineError):
        KnnSurrogate().fit(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(EngineError):
        KnnSurrogate().fit(np.zeros((3, 2)), np.zeros(2))


# ------------------------------------------------------------- genetic

def test_ga_accounting_and_bootstrap_passthrough(sep):
    initial, initial_records = random_database(sep, 40, 5)
    report = sbst_ml(sep, 30, initial=initial, seed=5)
    assert report.technique == "sbst-ml"
    assert report.executed == 30
    boot = [r for r in report.records if r.phase == "bootstrap"]
    assert len(boot) == 40
    assert [r.codes for r in boot] == [tuple(rec.codes) for rec in initial_records]
    assert [r.raw_output for r in boot] == [rec.raw_output for rec in initial_records]
    assert len(report.search_records()) == 30


def test_ga_without_variation_replays_initial_genomes(sep):
    initial, _ = random_database(sep, 50, 6)
    cfg = GaConfig(population=20, crossover_rate=0.0, mutation_rate=0.0)
    report = sbst_ml(sep, 20, cfg, initial=initial, seed=6)
    pool = {tuple(row[:4]) for row in initial.codes}
    for rec in report.search_records():
        assert rec.codes in pool


def test_ga_minimizes_better_than_random(sep):
    wins = 0
    for seed in range(20):
        initial, _ = random_database(sep, 100, seed)
        g = sbst_ml(sep, 200, initial=initial, seed=seed)
        r = random_baseline(sep, 200, seed=seed)
        g_mean = np.mean([rec.raw_output for rec in g.search_records()])
        r_mean = np.mean([rec.raw_output for rec in r.records])
        wins += g_mean < r_mean
    assert wins >= 18


def test_ga_objective_direction(sep):
    initial, _ = random_database(sep, 100, 7)
    low = sbst_ml(sep, 60, initial=initial, seed=7, objective="minimize")
    high = sbst_ml(sep, 60, initial=initial, seed=7, objective="maximize")
    low_mean = np.mean([r.raw_output for r in low.search_records()])
    high_mean = np.mean([r.raw_output for r in high.search_records()])
    assert high_mean > low_mean + 3.0


def test_ga_is_deterministic(sep):
    initial, _ = random_database(sep, 60, 8)
    one = sbst_ml(sep, 40, initial=initial, seed=8)
    two_ = sbst_ml(sep, 40, initial=initial, seed=8)
    assert [r.codes for r in one.records] == [r.codes for r in two_.records]
    assert [r.raw_output for r in one.records] == [r.raw_output for r in two_.records]


def test_ga_validation(sep):
    initial, _ = random_database(sep, 10, 9)
    with pytest.raises(EngineError, match="initial"):
        sbst_ml(sep, 10, initial=None, seed=9)
    with pytest.raises(EngineError, match="raw"):
        stripped = type(initial)(initial.schema, initial.codes)
        sbst_ml(sep, 10, initial=stripped, seed=9)
    with pytest.raises(EngineError, match="objective"):
        sbst_ml(sep, 10, initial=initial, seed=9, objective="wander")
    with pytest.raises(EngineError):
        sbst_ml(sep, 0, initial=initial, seed=9)
    with pytest.raises(EngineError):
        GaConfig(population=0)
    with pytest.raises(EngineError):
        GaConfig(crossover_rate=1.5)
    with pytest.raises(EngineError):
        GaConfig(mutation_rate=-0.1)
    with pytest.raises(EngineError):
        random_database(sep, 0, 9)
