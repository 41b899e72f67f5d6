"""Tableau construction, serialization, and the symplecticity condition."""
import json

import numpy as np
import pytest

from mssrk.tableau import (
    Tableau,
    builtin_tableau,
    condition_residual,
    condition_residual_literal,
    is_multisymplectic,
)

mpmath = pytest.importorskip("mpmath")


# ---------------------------------------------------------------------------
# construction and serialization
# ---------------------------------------------------------------------------

def test_rejects_non_square_a():
    with pytest.raises(ValueError, match="square"):
        Tableau(a=np.zeros((2, 3)), b=np.zeros(2))


def test_rejects_mismatched_b():
    with pytest.raises(ValueError, match="length"):
        Tableau(a=np.zeros((2, 2)), b=np.zeros(3))


def test_rejects_non_finite_entries():
    with pytest.raises(ValueError, match="finite"):
        Tableau(a=np.array([[np.nan]]), b=np.array([1.0]))


def test_c_is_row_sum_of_a():
    t = builtin_tableau("gauss2")
    np.testing.assert_allclose(t.c, t.a.sum(axis=1), rtol=0, atol=0)


def test_json_roundtrip():
    for name in ("midpoint", "gauss2", "gauss3", "rk4"):
        t = builtin_tableau(name)
        u = Tableau.from_json(t.to_json())
        np.testing.assert_array_equal(t.a, u.a)
        np.testing.assert_array_equal(t.b, u.b)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown tableau keys"):
        Tableau.from_dict({"a": [[0.5]], "b": [1.0], "order": 2})


def test_from_dict_rejects_inconsistent_stage_count():
    with pytest.raises(ValueError, match="stages"):
        Tableau.from_dict({"stages": 3, "a": [[0.5]], "b": [1.0]})


def test_tableau_is_immutable():
    t = builtin_tableau("midpoint")
    with pytest.raises(ValueError):
        t.a[0, 0] = 2.0


def test_unknown_builtin_name():
    with pytest.raises(ValueError, match="unknown tableau"):
        builtin_tableau("heun")


# ---------------------------------------------------------------------------
# condition residual
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["midpoint", "gauss2", "gauss3"])
def test_symplectic_builtins_pass(name):
    t = builtin_tableau(name)
    assert is_multisymplectic(t, tol=1e-12)


def test_midpoint_residual_exactly_zero():
    # 1*1 - 1*0.5 - 1*0.5 vanishes in exact floating point
    M = condition_residual(builtin_tableau("midpoint"))
    assert M[0, 0] == 0.0


def test_euler_explicit_residual_is_one():
    M = condition_residual(builtin_tableau("euler_explicit"))
    assert M[0, 0] == 1.0
    assert not is_multisymplectic(builtin_tableau("euler_explicit"))


def test_rk4_fails_with_known_entry():
    t = builtin_tableau("rk4")
    M = condition_residual(t)
    assert not is_multisymplectic(t)
    # b_1 b_1 - 2 b_1 a_11 = 1/9 at the (1,1) entry; largest violation 1/36...
    assert np.abs(M).max() >= 1.0 / 36.0 - 1e-15
    np.testing.assert_allclose(M[1, 1], 1.0 / 9.0, rtol=1e-15)


def test_residual_matrix_is_symmetric():
    rng = np.random.default_rng(42)
    for _ in range(20):
        s = rng.integers(1, 5)
        t = Tableau(a=rng.standard_normal((s, s)), b=rng.standard_normal(s))
        M = condition_residual(t)
        np.testing.assert_allclose(M, M.T, atol=1e-14)


def test_random_diagonal_family_is_symplectic():
    # any a with b_k = 2 a_kk and b_k b_j = b_k a_kj + b_j a_jk holds for
    # the one-parameter family a_kj = b_j (b_k - delta_kj b_k / 2) / b_k ...
    # simplest closed family: a_kj = b_j/2 for all k, b arbitrary positive
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = int(rng.integers(1, 6))
        b = rng.uniform(0.1, 2.0, s)
        a = 0.5 * np.tile(b, (s, 1))
        assert is_multisymplectic(Tableau(a=a, b=b), tol=1e-13)


def test_tolerance_monotonicity():
    t = builtin_tableau("gauss3")
    r = np.abs(condition_residual(t)).max()
    assert not is_multisymplectic(t, tol=r * 0.5 if r > 0 else -0.0) or r == 0.0
    assert is_multisymplectic(t, tol=max(r * 2, 1e-12))


def test_negative_tolerance_rejected():
    with pytest.raises(ValueError):
        is_multisymplectic(builtin_tableau("midpoint"), tol=-1e-12)


# ---------------------------------------------------------------------------
# high-precision oracle for the Gauss coefficients
# ---------------------------------------------------------------------------

def _mp_gauss(s):
    """Collocation coefficients at the s-point Gauss-Legendre nodes, 60 digits."""
    mpmath.mp.dps = 60
    nodes = mpmath.polyroots(mpmath.taylor(lambda x: mpmath.legendre(s, 2 * x - 1), 0, s)[::-1])
    nodes = sorted(nodes)
    b = []
    a = []
    for k in range(s):
        # weights/stage coefficients via exact Lagrange integration
        def lagrange(j, x):
            prod = mpmath.mpf(1)
            for i in range(s):
                if i != j:
                    prod *= (x - nodes[i]) / (nodes[j] - nodes[i])
            return prod
        a.append([mpmath.quad(lambda x, j=j: lagrange(j, x), [0, nodes[k]]) for j in range(s)])
    b = [mpmath.quad(lambda x, j=j: lagrange(j, x), [0, 1]) for j in range(s)]
    return a, b


@pytest.mark.parametrize("name,s", [("gauss2", 2), ("gauss3", 3)])
def test_gauss_coefficients_match_high_precision(name, s):
    a_mp, b_mp = _mp_gauss(s)
    t = builtin_tableau(name)
    for k in range(s):
        assert abs(t.b[k] - float(b_mp[k])) < 5e-16
        for j in range(s):
            assert abs(t.a[k, j] - float(a_mp[k][j])) < 5e-16


@pytest.mark.parametrize("name,s", [("gauss2", 2), ("gauss3", 3)])
def test_gauss_condition_vanishes_in_high_precision(name, s):
    a_mp, b_mp = _mp_gauss(s)
    for k in range(s):
        for j in range(s):
            r = b_mp[k] * b_mp[j] - b_mp[k] * a_mp[k][j] - b_mp[j] * a_mp[j][k]
            assert abs(r) < mpmath.mpf(10) ** -50


def test_literal_variant_differs_for_nonsymmetric_a():
    t = builtin_tableau("gauss2")
    M = condition_residual(t)
    M_lit = condition_residual_literal(t)
    assert np.abs(M).max() <= 1e-15
    # the literal (non-transposed) form does not vanish for Gauss methods
    assert np.abs(M_lit).max() > 0.1
