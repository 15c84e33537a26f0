"""G-squared conditional independence testing and the chi-square tail."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from causalgen.citest import CITestResult, chi2_sf, ci_test, g2_test
from causalgen.data import Dataset, VariableSchema
from causalgen.seeding import derive_rng


def two_var_dataset(counts):
    """Dataset whose (x, y) joint counts equal the given 2-d table."""
    counts = np.asarray(counts)
    schema = (
        VariableSchema("x", tuple(f"x{i}" for i in range(counts.shape[0]))),
        VariableSchema("y", tuple(f"y{j}" for j in range(counts.shape[1])), role="output"),
    )
    rows = []
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            rows.extend([[i, j]] * int(counts[i, j]))
    return Dataset(schema, rows)


def chain_dataset(n, rng, flip=0.2):
    """X -> Y -> Z, each step copying its parent with probability 1-flip."""
    x = rng.integers(0, 2, size=n)
    y = np.where(rng.random(n) < flip, 1 - x, x)
    z = np.where(rng.random(n) < flip, 1 - y, y)
    schema = (
        VariableSchema("X", ("0", "1")),
        VariableSchema("Y", ("0", "1")),
        VariableSchema("Z", ("0", "1"), role="output"),
    )
    return Dataset(schema, np.column_stack([x, y, z]))


# ---------------------------------------------------------------- chi2_sf

def test_chi2_sf_at_zero_is_one():
    for k in range(1, 11):
        assert chi2_sf(0.0, k) == pytest.approx(1.0, abs=1e-12)


def test_chi2_sf_closed_form_two_dof():
    for x in np.arange(0.5, 30.5, 0.5):
        assert chi2_sf(float(x), 2) == pytest.approx(math.exp(-x / 2), abs=1e-10)


def test_chi2_sf_matches_quadrature_oracle():
    # independent route: numerically integrate the chi-square density; the
    # region beyond t=400 carries under 1e-70 of mass for k <= 10, so a
    # finite interval keeps the quadrature error estimate tight
    def tail(x, k):
        norm = 2.0 ** (k / 2.0) * math.gamma(k / 2.0)

        def pdf(t):
            return t ** (k / 2.0 - 1.0) * math.exp(-t / 2.0) / norm

        value, err = quad(pdf, x, 400.0, limit=400, epsabs=1e-11, epsrel=1e-11)
        assert err < 5e-9  # oracle noise well under the 1e-8 comparison bound
        return value

    for k in range(1, 11):
        for x in np.arange(0.5, 30.5, 0.5):
            assert abs(chi2_sf(float(x), k) - tail(float(x), k)) <= 1e-8


def test_chi2_sf_strictly_decreasing():
    for k in (1, 3, 7):
        values = [chi2_sf(x, k) for x in np.linspace(0.0, 40.0, 81)]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_chi2_sf_argument_validation():
    with pytest.raises(ValueError):
        chi2_sf(-0.1, 2)
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)


# ---------------------------------------------------------------- g2_test

def test_perfectly_balanced_table_is_independent():
    ds = two_var_dataset([[25, 25], [25, 25]])
    for alpha in (0.001, 0.01, 0.05, 0.5):
        res = g2_test(ds, "x", "y", alpha=alpha)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.independent


def test_diagonal_table_is_dependent():
    ds = two_var_dataset([[200, 0], [0, 200]])
    res = g2_test(ds, "x", "y", alpha=0.05)
    assert not res.independent
    assert res.p_value < 1e-10
    assert res.dof == 1


def test_chain_conditional_independence_frequencies():
    cond_indep = 0
    marg_dep = 0
    for seed in range(50):
        ds = chain_dataset(5000, derive_rng("citest-chain", seed))
        if g2_test(ds, "X", "Z", given=("Y",), alpha=0.01).independent:
            cond_indep += 1
        if not g2_test(ds, "X", "Z", alpha=0.01).independent:
            marg_dep += 1
    assert cond_indep >= 45  # d-separation holds given the middle node
    assert marg_dep >= 45


def test_symmetry_in_x_and_y():
    rng = derive_rng("citest-sym")
    schema = (
        VariableSchema("a", ("a0", "a1", "a2")),
        VariableSchema("b", ("b0", "b1")),
        VariableSchema("c", ("c0", "c1"), role="output"),
    )
    codes = np.column_stack(
        [rng.integers(0, v.cardinality, size=400) for v in schema]
    )
    ds = Dataset(schema, codes)
    one = g2_test(ds, "a", "b", given=("c",))
    two = g2_test(ds, "b", "a", given=("c",))
    assert one == two


def test_row_permutation_invariance():
    rng = derive_rng("citest-perm")
    schema = (
        VariableSchema("a", ("a0", "a1")),
        VariableSchema("b", ("b0", "b1", "b2"), role="output"),
    )
    codes = np.column_stack([rng.integers(0, 2, 300), rng.integers(0, 3, 300)])
    ds = Dataset(schema, codes)
    shuffled = Dataset(schema, codes[rng.permutation(300)])
    assert g2_test(ds, "a", "b") == g2_test(shuffled, "a", "b")


def test_verdict_matches_p_value_threshold():
    rng = derive_rng("citest-verdict")
    schema = (
        VariableSchema("a", ("a0", "a1")),
        VariableSchema("b", ("b0", "b1"), role="output"),
    )
    for _ in range(20):
        codes = np.column_stack([rng.integers(0, 2, 120), rng.integers(0, 2, 120)])
        ds = Dataset(schema, codes)
        for alpha in (0.01, 0.05):
            res = g2_test(ds, "a", "b", alpha=alpha)
            assert res.independent == (res.p_value > alpha)


def test_sparse_configurations_are_skipped():
    # 10 rows conditioned on a 5-level variable: every configuration falls
    # below the 5 * |x| * |y| count floor, so no evidence enters the test
    rng = derive_rng("citest-sparse")
    schema = (
        VariableSchema("a", ("a0", "a1")),
        VariableSchema("z", tuple(f"z{i}" for i in range(5))),
        VariableSchema("b", ("b0", "b1"), role="output"),
    )
    codes = np.column_stack(
        [rng.integers(0, 2, 10), rng.integers(0, 5, 10), rng.integers(0, 2, 10)]
    )
    ds = Dataset(schema, codes)
    res = g2_test(ds, "a", "b", given=("z",))
    assert res.configs_used == 0
    assert res.dof == 0
    assert res.independent
    assert res.p_value == 1.0


def test_zero_margin_levels_drop_dof():
    # level x2 never occurs: table is effectively 2x2, one degree of freedom
    ds = two_var_dataset([[30, 10], [10, 30], [0, 0]])
    res = g2_test(ds, "x", "y")
    assert res.dof == 1


def test_argument_validation():
    ds = two_var_dataset([[10, 10], [10, 10]])
    with pytest.raises(ValueError):
        g2_test(ds, "x", "x")
    with pytest.raises(ValueError):
        g2_test(ds, "x", "y", given=("x",))
    with pytest.raises(ValueError):
        g2_test(ds, "x", "y", alpha=0.0)
    with pytest.raises(ValueError):
        g2_test(ds, "x", "y", alpha=1.0)
    with pytest.raises(ValueError):
        g2_test(ds, "x", "y", method="fisher")
    with pytest.raises(Exception):
        g2_test(ds, "x", "missing")


def test_pearson_variant_agrees_on_verdicts():
    strong = two_var_dataset([[80, 5], [5, 80]])
    weak = two_var_dataset([[40, 45], [45, 40]])
    for ds, expect_indep in ((strong, False), (weak, True)):
        g = g2_test(ds, "x", "y", method="g2")
        p = g2_test(ds, "x", "y", method="pearson")
        assert g.independent == p.independent == expect_indep
        assert g.dof == p.dof


def test_ci_test_wrapper_defaults_to_g2():
    ds = two_var_dataset([[25, 25], [25, 25]])
    assert ci_test(ds, "x", "y") == g2_test(ds, "x", "y")
