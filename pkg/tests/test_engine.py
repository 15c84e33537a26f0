"""Closed-loop session mechanics: bootstrap, propose, select, update, budget.

The fixture SUT is deterministic (y level = min(a+b, 4), no noise) with two
4-level inputs, so violations happen exactly at a = b = 0 and every executed
record can be replayed bit-for-bit from its phase seed.
"""
import numpy as np
import pytest

from causalgen.engine import (
    EngineConfig,
    EngineError,
    HypotheticalTest,
    bootstrap,
    propose,
    run_session,
    select,
    update,
)
from causalgen.graphs import graph_fingerprint
from causalgen.intervention import EffectEstimate, InterventionSpec, estimate_effect
from causalgen.seeding import derive_seed
from causalgen.sutbench import load_sut

SPEC = {
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


@pytest.fixture
def sut():
    return load_sut(SPEC)


def make_effect(value, name="exact"):
    return EffectEstimate(
        value=value, std_error=0.0, ci_low=value, ci_high=value, n_samples=0, method=name
    )


def hyp(value, assignment):
    return HypotheticalTest(
        assignment=assignment,
        spec=InterventionSpec({"a": assignment[0]}),
        effect=make_effect(value),
        iteration=1,
    )


# ------------------------------------------------------------- bootstrap

def test_bootstrap_builds_database(sut):
    state = bootstrap(sut, EngineConfig(initial_random_tests=50, seed=3))
    assert len(state.records) == 50
    assert all(r.phase == "bootstrap" for r in state.records)
    assert state.dataset.n_rows == 50
    assert state.dataset.names == ("a", "b", "y")
    assert state.snapshots[0][0] == 0


def test_bootstrap_inputs_are_uniform(sut):
    state = bootstrap(sut, EngineConfig(initial_random_tests=1600, seed=0))
    counts = np.zeros((4, 4))
    for rec in state.records:
        counts[rec.codes[0], rec.codes[1]] += 1
    freqs = counts / 1600
    assert np.abs(freqs - 1 / 16).max() < 0.02


def test_bootstrap_requires_tests_or_seeds(sut):
    with pytest.raises(EngineError, match="seed records"):
        bootstrap(sut, EngineConfig(initial_random_tests=0))


def test_bootstrap_accepts_seed_records(sut):
    seeds = [
        sut.execute({"a": a, "b": b}, seed=a * 4 + b)
        for a in range(4)
        for b in range(4)
    ]
    state = bootstrap(sut, EngineConfig(initial_random_tests=0), seed_records=seeds)
    assert state.dataset.n_rows == 16
    assert [r.codes for r in state.records] == [(a, b) for a in range(4) for b in range(4)]


def test_bootstrap_rejects_constant_output():
    flat = {
        "name": "flat",
        "inputs": [{"name": "a", "levels": ["0", "1"]}],
        "output": {
            "name": "y",
            "levels": ["l0", "l1"],
            "parents": [],
            "expr": "0",
            "values": [5.0, 5.0],
        },
    }
    with pytest.raises(EngineError, match="constant"):
        bootstrap(load_sut(flat), EngineConfig(initial_random_tests=30))


# ------------------------------------------------------------- propose

def test_propose_one_candidate_per_level(sut):
    state = bootstrap(sut, EngineConfig(initial_random_tests=200, seed=1))
    state.iteration = 1
    hyps = propose(state)
    variable = hyps[0].spec.names[0]
    assert len(hyps) == 4  # exhaustive over a 4-level input
    assert [h.spec.as_dict()[variable] for h in hyps] == [0, 1, 2, 3]
    var_idx = state.sut.input_names.index(variable)
    for h in hyps:
        assert len(h.assignment) == 2
        assert h.assignment[var_idx] == h.spec.as_dict()[variable]
        assert h.intervened == (variable,)
    assert variable in state.effect_cache
    assert len(state.effect_cache[variable]) == 4


def test_propose_estimates_match_direct_calls(sut):
    cfg = EngineConfig(initial_random_tests=200, seed=5)
    state = bootstrap(sut, cfg)
    state.iteration = 1
    hyps = propose(state)
    variable = hyps[0].spec.names[0]
    for h in hyps:
        level = h.spec.as_dict()[variable]
        direct = estimate_effect(
            state.model,
            h.spec,
            "y",
            state.encoding,
            method=cfg.estimation,
            n=cfg.estimation_samples,
            seed=derive_seed(cfg.seed, "estimate", 1, variable, level),
            enumeration_bound=cfg.enumeration_bound,
        )
        assert h.effect == direct


def test_value_sampling_limits_candidates(sut):
    cfg = EngineConfig(
        initial_random_tests=200, seed=2, value_strategy="sampling", value_sample_k=2
    )
    state = bootstrap(sut, cfg)
    state.iteration = 1
    hyps = propose(state)
    levels = [h.spec.as_dict()[h.spec.names[0]] for h in hyps]
    assert len(levels) == 2
    assert levels == sorted(levels)
    assert set(levels) <= {0, 1, 2, 3}


def test_objective_strategy_estimates_every_input_once(sut):
    cfg = EngineConfig(
        initial_random_tests=300,
        budget=10,
        seed=4,
        variable_strategy="objective",
    )
    report = run_session(sut, cfg)
    first_two = {info.variable for info in report.iterations[:2]}
    assert first_two == {"a", "b"}


# ------------------------------------------------------------- select

def test_select_minimize_takes_lowest():
    pool = [hyp(3.0, (0, 0)), hyp(1.0, (1, 0)), hyp(2.0, (2, 0))]
    assert [h.effect.value for h in select(pool, 2)] == [1.0, 2.0]


def test_select_maximize_takes_highest():
    pool = [hyp(3.0, (0, 0)), hyp(1.0, (1, 0)), hyp(2.0, (2, 0))]
    assert [h.effect.value for h in select(pool, 1, objective="maximize")] == [3.0]


def test_select_ties_break_on_assignment():
    pool = [hyp(1.0, (2, 0)), hyp(1.0, (0, 1)), hyp(1.0, (1, 1))]
    assert [h.assignment for h in select(pool, 3)] == [(0, 1), (1, 1), (2, 0)]


def test_select_clamps_and_validates():
    pool = [hyp(1.0, (0, 0))]
    assert len(select(pool, 10)) == 1
    with pytest.raises(EngineError):
        select(pool, 0)
    with pytest.raises(EngineError):
        select(pool, 1, objective="sideways")


# ------------------------------------------------------------- update

def test_update_folds_execution_into_dataset(sut):
    state = bootstrap(sut, EngineConfig(initial_random_tests=100, seed=6))
    before = state.dataset.n_rows
    state.iteration = 1
    h = hyp(0.0, (3, 3))
    rec = sut.execute({"a": 3, "b": 3}, seed=99)
    update(state, [(h, rec)])
    assert state.dataset.n_rows == before + 1
    assert tuple(state.dataset.codes[-1][:2]) == (3, 3)
    assert state.dataset.codes[-1][2] == state.disc.bin_of(rec.raw_output)


def test_no_rediscovery_keeps_single_snapshot(sut):
    cfg = EngineConfig(initial_random_tests=150, budget=12, rediscover_every=None, seed=7)
    report = run_session(sut, cfg)
    assert len(report.model_snapshots) == 1
    assert report.model_snapshots[0][0] == 0


# ------------------------------------------------------------- sessions

def test_budget_is_spent_exactly(sut):
    report = run_session(sut, EngineConfig(initial_random_tests=100, budget=17, seed=8))
    assert report.executed == 17
    assert len(report.search_records()) == 17
    assert len(report.records) == 117


def test_bootstrap_can_count_against_budget(sut):
    cfg = EngineConfig(
        initial_random_tests=10, budget=30, include_bootstrap_in_budget=True, seed=9
    )
    report = run_session(sut, cfg)
    assert report.executed == 20
    assert len(report.records) == 30


def test_virtual_time_budget_stops_early():
    spec = dict(SPEC)
    spec["exec_time"] = 60.0
    slow = load_sut(spec)
    cfg = EngineConfig(
        initial_random_tests=100, budget=50, budget_seconds=120.0, seed=10
    )
    report = run_session(slow, cfg)
    assert report.executed < 50
    assert report.executed <= 3
    assert sum(r.t_exec for r in report.search_records()) >= 120.0


def test_sessions_are_deterministic(sut):
    cfg = EngineConfig(initial_random_tests=120, budget=15, seed=11)
    key = lambda rep: [
        (r.phase, r.iteration, r.codes, r.raw_output, r.violation) for r in rep.records
    ]
    one, two = run_session(sut, cfg), run_session(sut, cfg)
    assert key(one) == key(two)
    assert one.executed == two.executed
    assert one.model_snapshots == two.model_snapshots


def test_every_record_replays_from_its_seed(sut):
    cfg = EngineConfig(initial_random_tests=40, budget=10, seed=12)
    report = run_session(sut, cfg)
    boot = [r for r in report.records if r.phase == "bootstrap"]
    for i, r in enumerate(boot):
        again = sut.execute(dict(zip(sut.input_names, r.codes)), seed=derive_seed(12, "bootstrap-exec", i))
        assert again.raw_output == r.raw_output and again.violation == r.violation
    for i, r in enumerate(report.search_records()):
        again = sut.execute(dict(zip(sut.input_names, r.codes)), seed=derive_seed(12, "search-exec", i))
        assert again.raw_output == r.raw_output and again.violation == r.violation


def test_violation_count_matches_records(sut):
    report = run_session(sut, EngineConfig(initial_random_tests=80, budget=20, seed=13))
    assert report.violations() == sum(r.violation for r in report.search_records())
    assert report.violations(include_bootstrap=True) == sum(r.violation for r in report.records)


def test_generation_time_is_small(sut):
    report = run_session(sut, EngineConfig(initial_random_tests=100, budget=10, seed=14))
    per_test = [r.t_gen for r in report.search_records()]
    assert max(per_test) < 2.0


def test_refutation_attached_when_enabled(sut):
    cfg = EngineConfig(initial_random_tests=150, budget=2, refute=True, refute_placebos=3, seed=15)
    report = run_session(sut, cfg)
    assert all(info.refutation is not None for info in report.iterations)


def test_config_validation():
    with pytest.raises(EngineError):
        EngineConfig(budget=-1)
    with pytest.raises(EngineError):
        EngineConfig(variable_strategy="greedy")
    with pytest.raises(EngineError):
        EngineConfig(value_strategy="all")
    with pytest.raises(EngineError):
        EngineConfig(value_strategy="sampling", value_sample_k=0)
    with pytest.raises(EngineError):
        EngineConfig(estimation="bayes")
    with pytest.raises(EngineError):
        EngineConfig(objective="balance")
    with pytest.raises(EngineError):
        EngineConfig(tests_per_iteration=0)
    with pytest.raises(EngineError):
        EngineConfig(rediscover_every=0)
    with pytest.raises(EngineError):
        EngineConfig(output_bins=1)
