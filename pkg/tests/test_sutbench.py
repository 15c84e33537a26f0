"""Synthetic SUT loading, execution, and ground-truth effects.

The mini fixture is deliberately deterministic (expression node, no noise)
so every expected number is hand-computable: output level = min(a+b, 2),
values (0, 1, 3), threshold 0.5, inputs uniform on {0, 1}.
"""
import copy

import numpy as np
import pytest

from causalgen.seeding import derive_rng
from causalgen.sutbench import (
    NoiseSpec,
    SutError,
    available_benches,
    ground_truth_effect,
    load_bench,
    load_sut,
)

MINI = {
    "name": "mini",
    "inputs": [
        {"name": "a", "levels": ["0", "1"]},
        {"name": "b", "levels": ["0", "1"]},
    ],
    "output": {
        "name": "y",
        "levels": ["l0", "l1", "l2"],
        "parents": ["a", "b"],
        "expr": "min(a + b, 2)",
        "values": [0.0, 1.0, 3.0],
    },
    "threshold": 0.5,
}


def mini_spec(**overrides):
    spec = copy.deepcopy(MINI)
    spec.update(overrides)
    return spec


@pytest.fixture
def mini():
    return load_sut(MINI)


# ------------------------------------------------------------- loading

def test_minimal_spec_loads(mini):
    assert mini.name == "mini"
    assert mini.input_names == ("a", "b")
    assert mini.input_space_size() == 4
    assert mini.output.name == "y"
    assert mini.threshold == 0.5


def test_packaged_benches_present():
    names = available_benches()
    for expected in ("ads16", "chain3", "confounder3", "sprinkler5"):
        assert expected in names
        load_bench(expected)


def test_unknown_bench_lists_available():
    with pytest.raises(SutError, match="ads16"):
        load_bench("nope")


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(SutError, match="not found"):
        load_sut(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(SutError, match="JSON"):
        load_sut(bad)


def test_missing_field_named():
    spec = mini_spec()
    del spec["output"]
    with pytest.raises(SutError, match="output"):
        load_sut(spec)


def test_cycle_rejected():
    spec = mini_spec(
        internal=[
            {"name": "m1", "levels": ["0", "1"], "parents": ["m2"], "expr": "m2"},
            {"name": "m2", "levels": ["0", "1"], "parents": ["m1"], "expr": "m1"},
        ]
    )
    with pytest.raises(SutError, match="cycle"):
        load_sut(spec)


def test_structural_validation():
    dup = mini_spec()
    dup["inputs"].append({"name": "a", "levels": ["0", "1"]})
    with pytest.raises(SutError, match="duplicate"):
        load_sut(dup)

    orphan = mini_spec()
    orphan["output"]["parents"] = ["a", "ghost"]
    with pytest.raises(SutError, match="ghost"):
        load_sut(orphan)

    loop = mini_spec(
        internal=[{"name": "m", "levels": ["0", "1"], "parents": ["y"], "expr": "y"}]
    )
    with pytest.raises(SutError, match="sink"):
        load_sut(loop)

    short = mini_spec()
    short["output"]["levels"] = ["only"]
    short["output"]["values"] = [1.0]
    with pytest.raises(SutError, match="2 levels"):
        load_sut(short)

    neither = mini_spec()
    del neither["output"]["expr"]
    with pytest.raises(SutError, match="exactly one"):
        load_sut(neither)

    both = mini_spec()
    both["output"]["table"] = [[1.0, 0.0, 0.0]] * 4
    with pytest.raises(SutError, match="exactly one"):
        load_sut(both)


def test_table_validation():
    tabled = mini_spec()
    del tabled["output"]["expr"]
    tabled["output"]["table"] = [[0.5, 0.5, 0.0]] * 3  # needs 4 rows (2x2 configs)
    with pytest.raises(SutError, match="shape"):
        load_sut(tabled)

    tabled["output"]["table"] = [[0.5, 0.6, 0.0]] * 4
    with pytest.raises(SutError, match="distribution"):
        load_sut(tabled)

    noisy_table = mini_spec()
    del noisy_table["output"]["expr"]
    noisy_table["output"]["table"] = [[1.0, 0.0, 0.0]] * 4
    noisy_table["output"]["noise"] = {"family": "duniform", "offsets": [0, 1]}
    with pytest.raises(SutError, match="noise"):
        load_sut(noisy_table)


def test_values_and_sigma_lengths():
    wrong_values = mini_spec()
    wrong_values["output"]["values"] = [0.0, 1.0]
    with pytest.raises(SutError, match="values"):
        load_sut(wrong_values)

    wrong_sigma = mini_spec()
    wrong_sigma["output"]["value_noise"] = {"family": "truncnormal", "sigma": [0.1, 0.2]}
    with pytest.raises(SutError, match="sigma"):
        load_sut(wrong_sigma)


def test_expression_safety():
    cases = {
        "a + unknown": "unknown name",
        "len(a)": "disallowed function",
        "a << 1": "disallowed operator",
        "a < b": "disallowed syntax",
        "a + 'x'": "non-numeric",
        "a +": "unparseable",
    }
    for expr, msg in cases.items():
        spec = mini_spec()
        spec["output"]["expr"] = expr
        with pytest.raises(SutError, match=msg):
            load_sut(spec)


def test_noise_spec_validation():
    assert NoiseSpec.from_dict(None).is_none
    assert NoiseSpec.from_dict({"family": "none"}).is_none
    with pytest.raises(SutError):
        NoiseSpec.from_dict({"family": "duniform", "offsets": []})
    with pytest.raises(SutError):
        NoiseSpec.from_dict({"family": "truncnormal"})
    with pytest.raises(SutError):
        NoiseSpec.from_dict({"family": "truncnormal", "sigma": -1.0})
    with pytest.raises(SutError):
        NoiseSpec.from_dict({"family": "truncnormal", "sigma": 1.0, "low": 2.0, "high": 1.0})
    with pytest.raises(SutError):
        NoiseSpec.from_dict({"family": "gauss"})


# ------------------------------------------------------------- execution

def test_execute_is_deterministic_and_labelled(mini):
    r1 = mini.execute({"a": "1", "b": 0}, seed=11)
    r2 = mini.execute({"a": 1, "b": "0"}, seed=11)
    assert r1.inputs == {"a": "1", "b": "0"}
    assert r1.codes == (1, 0)
    assert (r1.codes, r1.raw_output, r1.violation) == (r2.codes, r2.raw_output, r2.violation)
    assert r1.raw_output == 1.0
    assert r1.violation is False


def test_violation_follows_threshold(mini):
    zero = mini.execute({"a": 0, "b": 0})
    assert zero.raw_output == 0.0 and zero.violation is True
    for rec in (zero, mini.execute({"a": 1, "b": 1})):
        assert rec.violation == (rec.raw_output <= mini.threshold)


def test_fixed_exec_time_reported():
    sut = load_sut(mini_spec(exec_time=60.0))
    assert sut.execute({"a": 0, "b": 1}).t_exec == 60.0


def test_execute_argument_errors(mini):
    with pytest.raises(SutError, match="missing"):
        mini.execute({"a": 0})
    with pytest.raises(SutError, match="unknown"):
        mini.execute({"a": 0, "b": 0, "c": 1})
    with pytest.raises(SutError, match="range"):
        mini.execute({"a": 5, "b": 0})


def test_batch_shape_guard(mini):
    with pytest.raises(SutError, match="column"):
        mini.execute_batch(np.zeros((4, 3), dtype=int))


def test_uniform_violation_rate_matches_hand_value(mini):
    # violation iff min(a+b, 2) maps to value <= 0.5, i.e. a = b = 0: rate 1/4
    rng = derive_rng("mini-rate")
    codes = np.column_stack([rng.integers(0, 2, 20000) for _ in range(2)])
    raw, viol = mini.execute_batch(codes, seed=3)
    assert abs(viol.mean() - 0.25) < 0.01
    assert np.array_equal(viol, raw <= mini.threshold)


def test_noise_draw_semantics():
    du = NoiseSpec.from_dict({"family": "duniform", "offsets": [-1.0, 0.0, 2.0]})
    u = derive_rng("du").random(30000)
    draws = du.draw(u)
    assert set(np.unique(draws)) == {-1.0, 0.0, 2.0}
    counts = np.array([(draws == v).mean() for v in (-1.0, 0.0, 2.0)])
    assert np.abs(counts - 1 / 3).max() < 0.02

    tn = NoiseSpec.from_dict({"family": "truncnormal", "sigma": 0.8})
    d = tn.draw(derive_rng("tn").random(100000))
    assert d.min() >= -3.0 and d.max() <= 3.0
    assert abs(d.mean()) < 0.01


def test_level_shift_probs():
    none = NoiseSpec()
    assert np.array_equal(none.level_shift_probs(1.4, 3), [0.0, 1.0, 0.0])
    assert np.array_equal(none.level_shift_probs(9.0, 3), [0.0, 0.0, 1.0])  # clamped

    du = NoiseSpec.from_dict({"family": "duniform", "offsets": [-1, 0, 1]})
    assert np.allclose(du.level_shift_probs(1.0, 3), [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(du.level_shift_probs(0.0, 3), [2 / 3, 1 / 3, 0.0])  # -1 clamps to 0

    tn = NoiseSpec.from_dict({"family": "truncnormal", "sigma": 0.8})
    probs = tn.level_shift_probs(1.3, 4)
    assert abs(probs.sum() - 1.0) < 1e-9
    d = tn.draw(derive_rng("tn-shift").random(100000))
    emp = np.bincount(np.clip(np.rint(1.3 + d), 0, 3).astype(int), minlength=4) / len(d)
    assert np.abs(probs - emp).max() < 0.01


# ------------------------------------------------------------- ground truth

def test_exact_effect_matches_hand_computation(mini):
    # do(a=1): level = 1 + b with b uniform -> E = (1 + 3) / 2 = 2
    assert ground_truth_effect(mini, {"a": 1}) == pytest.approx(2.0)
    # do(a=0): level = b -> E = (0 + 1) / 2 = 0.5
    assert ground_truth_effect(mini, {"a": 0}) == pytest.approx(0.5)
    # pinning both inputs makes the run deterministic
    assert ground_truth_effect(mini, {"a": 1, "b": 1}) == pytest.approx(3.0)


def test_monte_carlo_effect_agrees_with_analytic_mean():
    spec = mini_spec()
    spec["output"]["values"] = [2.0, 3.0, 5.0]
    spec["output"]["value_noise"] = {"family": "truncnormal", "sigma": 0.3}
    sut = load_sut(spec)
    # symmetric value noise never reaches the clamp, so means are unchanged
    assert ground_truth_effect(sut, {"a": 1}, n=200000, seed=7) == pytest.approx(4.0, abs=0.02)
    assert ground_truth_effect(sut, {"a": 0}, n=200000, seed=7) == pytest.approx(2.5, abs=0.02)


def test_true_scm_reflects_generator(mini):
    model = mini.true_scm()
    assert model.joint_size() == 2 * 2 * 3
    assert model.graph.parents("y") == frozenset({"a", "b"})
    # deterministic expression: CPT rows are point masses on min(a+b, 2)
    cpt = model.cpts["y"]
    order = model.parent_order("y")
    assert set(order) == {"a", "b"}
    for cfg, (a, b) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        expected = np.zeros(3)
        expected[min(a + b, 2)] = 1.0
        assert np.array_equal(cpt[cfg], expected)


def test_declared_parent_order_is_reindexed_to_schema_order():
    spec = {
        "name": "swap",
        "inputs": [
            {"name": "a", "levels": ["0", "1"]},
            {"name": "b", "levels": ["0", "1", "2"]},
        ],
        "output": {
            "name": "y",
            "levels": ["v0", "v1", "v2", "v3"],
            "parents": ["b", "a"],
            "expr": "b + 2*a - max(b - 2, 0)",
            "values": [1.0, 2.0, 3.0, 4.0],
        },
    }
    sut = load_sut(spec)
    for a in range(2):
        for b in range(3):
            rec = sut.execute({"a": a, "b": b}, seed=0)
            assert rec.raw_output == pytest.approx(
                ground_truth_effect(sut, {"a": a, "b": b}), abs=1e-12
            )


def test_sampled_mean_is_stationary_across_seeds(mini):
    # fixed assignment (a=1, b=0) is deterministic: every seed returns 1.0
    outs = {mini.execute({"a": 1, "b": 0}, seed=s).raw_output for s in range(50)}
    assert outs == {1.0}


# ------------------------------------------------------------- ads16

def test_ads16_shape():
    sut = load_bench("ads16")
    assert len(sut.inputs) == 16
    assert sut.output.name == "min_distance"
    assert sut.output.cardinality == 5
    assert sut.exec_time == 60.0
    assert sut.threshold == 0.0
    assert sut.input_space_size() == 8957952


def test_ads16_violation_rate_band():
    sut = load_bench("ads16")
    rng = derive_rng("ads-rate", 0)
    codes = np.column_stack([rng.integers(0, v.cardinality, 20000) for v in sut.inputs])
    _, viol = sut.execute_batch(codes, seed=0)
    assert 0.01 <= viol.mean() <= 0.05


def test_ads16_joint_exceeds_enumeration_bound():
    from causalgen.intervention import DEFAULT_ENUMERATION_BOUND

    assert load_bench("ads16").true_scm().joint_size() > DEFAULT_ENUMERATION_BOUND
