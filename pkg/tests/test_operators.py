import math

import numpy as np
import pytest

from osserman_lab.core import SymMatrix
from osserman_lab.operators import (Coeff, EllipticityPair, HamiltonianH,
                                    MetadataError, check_hamiltonian,
                                    check_uniform_ellipticity,
                                    empirical_increment_constant,
                                    hamiltonian_library, interpolation_check,
                                    laplacian_operator, negate_hamiltonian,
                                    pucci, pucci_bruteforce,
                                    pucci_bruteforce_sweep,
                                    pucci_minus_operator, pucci_plus_operator,
                                    tilde_gamma_value, weighted_trace_operator)

ELL = EllipticityPair(1.0, 2.0)


def _rand_sym(rng, n):
    mat = rng.standard_normal((n, n))
    return SymMatrix.from_matrix(mat + mat.T)


def test_pucci_closed_form_examples():
    X = SymMatrix.from_matrix(np.diag([1.0, -1.0]))
    assert pucci(X, ELL, "+") == pytest.approx(2.0 * 1.0 + 1.0 * (-1.0))
    assert pucci(X, ELL, "-") == pytest.approx(1.0 * 1.0 + 2.0 * (-1.0))
    eye = SymMatrix.from_matrix(np.eye(2))
    assert pucci(eye, ELL, "+") == pytest.approx(4.0)
    assert pucci(eye, ELL, "-") == pytest.approx(2.0)
    with pytest.raises(ValueError):
        pucci(eye, ELL, "0")


def test_pucci_duality_homogeneity_subadditivity():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3):
        for _ in range(100):
            X = _rand_sym(rng, n)
            Y = _rand_sym(rng, n)
            negX = SymMatrix.from_matrix(-X.matrix())
            assert pucci(X, ELL, "-") == pytest.approx(-pucci(negX, ELL, "+"),
                                                       abs=1e-10)
            t = float(rng.uniform(0.1, 10.0))
            tX = SymMatrix.from_matrix(t * X.matrix())
            assert pucci(tX, ELL, "+") == pytest.approx(t * pucci(X, ELL, "+"),
                                                        rel=1e-10)
            XY = SymMatrix.from_matrix(X.matrix() + Y.matrix())
            assert pucci(XY, ELL, "+") <= pucci(X, ELL, "+") + pucci(Y, ELL, "+") + 1e-10
            assert pucci(X, ELL, "-") <= pucci(X, ELL, "+") + 1e-12


def test_bruteforce_is_a_lower_bound_and_converges():
    rng = np.random.default_rng(17)
    X = _rand_sym(rng, 2)
    exact = pucci(X, ELL, "+")
    coarse = pucci_bruteforce(X, ELL, samples=50, rng=1)
    fine = pucci_bruteforce(X, ELL, samples=50_000, rng=1)
    assert coarse <= exact + 1e-12
    assert fine <= exact + 1e-12
    assert coarse <= fine
    assert abs(fine - exact) < 0.02 * max(1.0, abs(exact))


def test_bruteforce_degenerate_pair_single_sample():
    iso = EllipticityPair(1.5, 1.5)
    X = SymMatrix.from_matrix([[2.0, 1.0], [1.0, -3.0]])
    val = pucci_bruteforce(X, iso, samples=1, rng=0)
    assert val == pytest.approx(1.5 * X.trace(), rel=1e-12)
    with pytest.raises(ValueError):
        pucci_bruteforce(X, iso, samples=0)


def test_bruteforce_3d_path():
    rng = np.random.default_rng(23)
    X = _rand_sym(rng, 3)
    exact = pucci(X, ELL, "+")
    est = pucci_bruteforce(X, ELL, samples=20000, rng=2)
    assert est <= exact + 1e-10
    assert est >= ELL.lam * X.trace() - 1e-10  # A = lam I is admissible


def test_bruteforce_sweep_matches_scalar():
    rng = np.random.default_rng(31)
    Xs = rng.standard_normal((20, 3))
    vals = pucci_bruteforce_sweep(Xs, ELL, samples=5000, rng=9)
    for row, val in zip(Xs, vals):
        X = SymMatrix(n=2, upper=tuple(row))
        assert val <= pucci(X, ELL, "+") + 1e-10


def test_uniform_ellipticity_pucci_and_laplacian():
    for F in (pucci_plus_operator(ELL), pucci_minus_operator(ELL),
              laplacian_operator()):
        rep = check_uniform_ellipticity(F, samples=20_000, rng=0)
        assert rep.passed, (F.tag, rep.worst_margin)


def test_uniform_ellipticity_detects_wrong_pair():
    F = weighted_trace_operator([1.0, 3.0], declared=EllipticityPair(2.0, 2.0))
    rep = check_uniform_ellipticity(F, samples=20_000, rng=0)
    assert not rep.passed
    assert rep.worst_margin < -1e-3


def test_weighted_trace_default_pair():
    F = weighted_trace_operator([1.0, 3.0])
    assert F.ellipticity == EllipticityPair(1.0, 3.0)
    X = np.diag([2.0, -1.0])[None, :, :]
    assert F(np.zeros((1, 2)), X)[0] == pytest.approx(2.0 - 3.0)
    rep = check_uniform_ellipticity(F, samples=20_000, rng=0)
    assert rep.passed


def test_coeff_bounds():
    c = Coeff(c0=2.0, amp=-0.5, freq=3.0)
    assert c.sup == pytest.approx(2.5)
    assert c.inf == pytest.approx(1.5)
    assert c.sup_abs == pytest.approx(2.5)
    assert c.lipschitz(2) == pytest.approx(0.5 * 3.0 * math.sqrt(2.0))
    x = np.array([[0.1, 0.2], [1.0, -1.0]])
    assert np.all(c(x) <= c.sup + 1e-12)
    assert np.all(c(x) >= c.inf - 1e-12)
    assert Coeff(c0=4.0)(x)[0] == 4.0


@pytest.mark.parametrize("tag,params", [
    ("zero", {}),
    ("prototype", {"c1": 1.0, "cm": 1.0, "m": 2.0}),
    ("prototype", {"c1": {"c0": 1.0, "amp": 0.3}, "cm": 1.0, "m": 1.5}),
    ("prototype", {"c1": 2.0, "cm": 1.0, "m": 1.0}),
    ("two_power", {"c": 1.0, "a": 0.5, "m": 2.0, "l": 1.5}),
    ("two_power", {"c": {"c0": 1.0, "amp": 0.2}, "a": -0.5, "m": 1.8, "l": 1.0}),
    ("rational_factor", {"c": 1.0}),
    ("sup_inf", {"matrices": [[[[2.0, 0.0], [0.0, 1.0]]],
                              [[[1.0, 0.5], [0.5, 1.0]]]], "m": 2.0}),
])
def test_library_claims_hold(tag, params):
    H = hamiltonian_library(tag, **params)
    for condition in H.claims:
        rep = check_hamiltonian(H, condition, samples=50_000, rng=3)
        assert rep.passed, (tag, condition, rep.worst_margin)


def test_library_zero_values():
    H = hamiltonian_library("zero")
    p = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert np.all(H(np.zeros((2, 2)), p) == 0.0)
    assert set(H.claims) == {"lipschitz_structure", "shift_modulus",
                             "convexity_type", "sublinearization"}


def test_library_point_values():
    Hp = hamiltonian_library("prototype", c1=2.0, cm=3.0, m=1.5, n=1)
    x = np.zeros((1, 1))
    assert Hp(x, np.array([[4.0]]))[0] == pytest.approx(2.0 * 4.0 + 3.0 * 8.0)
    Hr = hamiltonian_library("rational_factor", c=2.0)
    e1 = np.array([[1.0, 0.0]])
    assert Hr(np.zeros((1, 2)), e1)[0] == pytest.approx(-1.0)
    assert Hr(np.zeros((1, 2)), np.zeros((1, 2)))[0] == pytest.approx(0.0)
    Hs = hamiltonian_library("sup_inf", matrices=[[2.0 * np.eye(2)]], m=2.0)
    assert Hs(np.zeros((1, 2)), e1)[0] == pytest.approx(2.0)


def test_library_rejects_bad_parameters():
    with pytest.raises(ValueError):
        hamiltonian_library("no_such_tag")
    with pytest.raises(ValueError):
        hamiltonian_library("prototype", m=2.5)
    with pytest.raises(ValueError):
        hamiltonian_library("two_power", l=0.5, m=2.0)
    with pytest.raises(ValueError):
        hamiltonian_library("two_power", c={"c0": 0.1, "amp": 0.2})
    with pytest.raises(ValueError):
        hamiltonian_library("sup_inf", matrices=[[np.diag([1.0, -0.5])]])


def test_prototype_m1_has_no_convexity_metadata():
    H = hamiltonian_library("prototype", c1=1.0, cm=1.0, m=1.0)
    assert H.convexity is None
    with pytest.raises(MetadataError):
        check_hamiltonian(H, "convexity_type", samples=10, rng=0)
    with pytest.raises(ValueError):
        check_hamiltonian(H, "no_such_condition", samples=10, rng=0)
    with pytest.raises(ValueError):
        check_hamiltonian(H, "lipschitz_structure", samples=0, rng=0)


def test_convexity_margin_hand_value():
    # H = |p|^2: H(p) - sigma H(p/sigma) = (1 - 1/sigma)|p|^2 and the stored
    # bound is (1-sigma)(-0.95|p|^2), so the margin at sigma, |p|=r is
    # ((1-sigma)/sigma - 0.95(1-sigma)) r^2 > 0.
    H = hamiltonian_library("prototype", c1=0.0, cm=1.0, m=2.0)
    c_lower, A, sigma0 = H.convexity
    assert c_lower == pytest.approx(0.95)
    assert A == 0.0
    sigma, r = 0.5, 2.0
    p = np.array([[r, 0.0]])
    quantity = float(H(np.zeros((1, 2)), p)[0]
                     - sigma * H(np.zeros((1, 2)), p / sigma)[0])
    margin = (1 - sigma) * (-c_lower * r ** 2 + A) - quantity
    assert margin == pytest.approx(((1 - sigma) / sigma - 0.95 * (1 - sigma)) * r ** 2)


def test_negate_hamiltonian():
    H = hamiltonian_library("prototype", c1=1.0, cm=1.0, m=2.0)
    G = negate_hamiltonian(H)
    assert G.sign == "concave"
    assert G.tag == "negated_prototype"
    assert set(G.claims) == {"lipschitz_structure", "shift_modulus"}
    p = np.array([[1.0, 1.0]])
    x = np.zeros((1, 2))
    assert G(x, p)[0] == pytest.approx(-H(x, p)[0])
    rep = check_hamiltonian(G, "convexity_type", samples=50_000, rng=4)
    assert not rep.passed  # -H violates the convexity-type bound


def test_tilde_gamma_value():
    assert tilde_gamma_value(1.0, 2.0, 1.0) == pytest.approx(1.25)
    assert tilde_gamma_value(2.0, 2.0, 1.0) == pytest.approx(3.0)
    assert tilde_gamma_value(0.0, 1.5, 0.0) == 0.0
    with pytest.raises(ValueError):
        tilde_gamma_value(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        tilde_gamma_value(1.0, 2.0, 0.0)


def test_interpolation_inequality():
    rep = interpolation_check(1.5, samples=100_000, rng=0)
    assert rep.passed
    # hand value at r = 2: bound (2-m)r + (m-1)r^2 = 3 vs r^1.5
    assert (2.0 - 1.5) * 2.0 + 0.5 * 4.0 - 2.0 ** 1.5 == pytest.approx(3.0 - 2.0 ** 1.5)
    for m in (1.0, 2.0):
        assert interpolation_check(m, samples=10_000, rng=1).passed
    with pytest.raises(ValueError):
        interpolation_check(2.5, samples=100)


def test_empirical_increment_constant():
    C = empirical_increment_constant(2.0, samples=200_000, rng=0)
    # exact constant for m=2 is 2 (attained as |p|/|q| -> infinity)
    assert 1.5 <= C <= 2.0 + 1e-9
    C15 = empirical_increment_constant(1.5, samples=100_000, rng=0)
    assert 0.0 < C15 <= 2.0 + 1e-9
