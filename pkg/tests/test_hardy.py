import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import roots_laguerre

from oracles import contour_coeffs
from semigroup_models import numerics as nx
from semigroup_models.cogenerator import purity_defect, semigroup_at
from semigroup_models.exceptions import DimensionError, DomainError, PreconditionError
from semigroup_models.hardy import (
    OperatorSymbol,
    SubspaceBasis,
    TruncationParams,
    blaschke_model_space,
    blaschke_symbol,
    check_star_invariant,
    compress,
    jet_space,
    laguerre_basis,
    lower_toeplitz,
    margin_frame,
    margin_isometry_defect,
    phi_coeffs,
    shift_matrix,
    shift_semigroup_matrix,
    toeplitz_of_symbol,
)

LN2 = math.log(2.0)


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
def test_phi_coeffs_match_contour_oracle(t):
    assert np.max(np.abs(phi_coeffs(t, 64) - contour_coeffs(t, 64))) <= 1e-10


def test_phi_coeffs_examples():
    c = phi_coeffs(LN2, 3)
    assert abs(c[0] - 0.5) < 1e-15
    assert abs(c[1] + LN2) < 1e-15
    assert np.array_equal(phi_coeffs(0.0, 5), np.eye(5)[0])
    with pytest.raises(PreconditionError):
        phi_coeffs(-0.1, 3)


def test_phi_coeffs_match_translated_laguerre_function():
    # <S_t e_0, e_n> in L^2(0, inf) equals the n-th coefficient of phi_t
    t = 0.7
    c = phi_coeffs(t, 6).real
    for n in range(6):
        val, _ = integrate.quad(lambda x: laguerre_basis(0, x - t) * laguerre_basis(n, x), t, np.inf,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        assert abs(val - c[n]) < 1e-10


@given(st.floats(0.0, 3.0), st.integers(1, 80))
def test_phi_coeffs_inner_bound(t, N):
    assert np.sum(np.abs(phi_coeffs(t, N)) ** 2) <= 1.0 + 1e-12


def test_degree_zero_column_deficit_matches_high_precision_sum():
    # the coefficients decay only like n^(-3/4); at N = 64 a visible part of
    # the unit norm of phi_t sits beyond the truncation
    expected = {0.1: 0.018012, LN2: 0.045861, 1.0: 0.055924, 2.0: 0.079173, 3.0: 0.099157}
    for t, deficit in expected.items():
        col = shift_semigroup_matrix(t, 64)[:, 0]
        got = 1.0 - np.sum(np.abs(col) ** 2)
        with mpmath.workdps(30):
            lag = [mpmath.laguerre(n, 0, 2 * t) for n in range(64)]
            c = [mpmath.exp(-t) * (lag[n] - (lag[n - 1] if n else 0)) for n in range(64)]
            oracle = 1 - mpmath.fsum(x * x for x in c)
        assert abs(got - float(oracle)) < 1e-12
        assert abs(got - deficit) < 1e-6


def test_laguerre_basis_examples():
    assert abs(laguerre_basis(0, [0.0])[0] - math.sqrt(2)) < 1e-15
    assert abs(laguerre_basis(1, [0.5])[0]) < 1e-15
    x = np.linspace(0, 3, 7)
    assert np.allclose(laguerre_basis(1, x), math.sqrt(2) * np.exp(-x) * (1 - 2 * x))
    with pytest.raises(DomainError):
        laguerre_basis(0, [-1.0])


def test_laguerre_basis_gram_by_gauss_laguerre():
    u, w = roots_laguerre(128)
    x = u / 2.0
    vals = np.array([laguerre_basis(n, x) for n in range(21)])
    # int f g dx = int e^{-u} (f g e^{u} / 2)(u / 2) du
    gram = (vals * (w * np.exp(u) / 2.0)) @ vals.T
    assert np.max(np.abs(gram - np.eye(21))) <= 1e-8


def test_toeplitz_examples():
    assert np.array_equal(toeplitz_of_symbol(OperatorSymbol.coordinate(), 3), np.eye(3, k=-1))
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.array_equal(toeplitz_of_symbol(OperatorSymbol.constant(a), 3), np.kron(np.eye(3), a))
    phi = OperatorSymbol.scalar(phi_coeffs(LN2, 2))
    assert np.allclose(toeplitz_of_symbol(phi, 2), [[0.5, 0], [-LN2, 0.5]], atol=1e-15)


def test_shift_semigroup_examples():
    assert np.array_equal(shift_semigroup_matrix(0.0, 5, 2), np.eye(10))
    assert np.allclose(shift_semigroup_matrix(LN2, 2), [[0.5, 0], [-LN2, 0.5]], atol=1e-15)
    nil = np.eye(2, k=-1)
    assert nx.op_norm(shift_semigroup_matrix(LN2, 2) - semigroup_at(nil, LN2)) < 1e-14


@given(st.integers(0, 2**32 - 1), st.integers(0, 5), st.integers(0, 5))
def test_toeplitz_homomorphism(seed, d1, d2):
    rng = np.random.default_rng(seed)
    p1 = OperatorSymbol(nx.random_matrix(2, rng, 2 * (d1 + 1)).T.reshape(d1 + 1, 2, 2))
    p2 = OperatorSymbol(nx.random_matrix(2, rng, 2 * (d2 + 1)).T.reshape(d2 + 1, 2, 2))
    N = 12
    lhs = toeplitz_of_symbol(p1 * p2, N)
    rhs = toeplitz_of_symbol(p1, N) @ toeplitz_of_symbol(p2, N)
    assert nx.op_norm(lhs - rhs) <= 1e-12 * (1 + nx.op_norm(lhs))


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_shift_semigroup_law(s, t):
    P = TruncationParams(64, 8)
    f = margin_frame(P)
    lhs = shift_semigroup_matrix(s, P) @ shift_semigroup_matrix(t, P)
    assert nx.op_norm((lhs - shift_semigroup_matrix(s + t, P)) @ f) <= 1e-8


@pytest.mark.parametrize("k", [2, 4, 8])
@pytest.mark.parametrize("t", [0.25, LN2, 1.0, 2.0])
def test_compressed_shift_semigroup_has_compressed_cogenerator(k, t):
    Q = jet_space(k, 64)
    lhs = semigroup_at(compress(shift_matrix(64), Q), t)
    assert nx.op_norm(lhs - compress(shift_semigroup_matrix(t, 64), Q)) <= 1e-8


def test_margin_isometry_of_shift():
    assert margin_isometry_defect(shift_matrix(10, 2), TruncationParams(10, 1), 2) < 1e-15
    assert margin_isometry_defect(shift_matrix(10), 10) == 1.0


def test_compress_examples():
    Q = jet_space(2, 8)
    assert np.allclose(compress(np.eye(8), Q), np.eye(2))
    assert np.array_equal(compress(shift_matrix(8), Q), np.eye(2, k=-1))
    assert check_star_invariant(shift_matrix(8), Q) <= 1e-12
    with pytest.raises(DimensionError):
        compress(np.eye(3), Q)


def test_subspace_basis_validation():
    with pytest.raises(PreconditionError):
        SubspaceBasis(np.ones((3, 2)))
    assert SubspaceBasis.span(np.ones((3, 2))).dim == 1


def test_blaschke_model_space_examples():
    Q, s = blaschke_model_space([0, 0])
    assert np.allclose(s, np.eye(2, k=-1))
    assert Q.dim == 2
    _, s = blaschke_model_space([0.5])
    assert np.allclose(s, [[0.5]])
    _, s = blaschke_model_space([0.3, -0.4j])
    eig = np.sort_complex(np.linalg.eigvals(s))
    assert np.allclose(eig, np.sort_complex(np.array([0.3, -0.4j])), atol=1e-9)
    with pytest.raises(DomainError):
        blaschke_model_space([1.0])


@given(st.lists(st.complex_numbers(max_magnitude=0.8), min_size=1, max_size=5))
def test_model_spaces_are_invariant_and_pure(zeros):
    Q, s = blaschke_model_space(zeros)
    assert check_star_invariant(shift_matrix(Q.ambient_dim), Q) <= 1e-10
    assert purity_defect(s, 200)[-1] < 1e-6


def test_blaschke_symbol_annihilates_model_space():
    zeros = [0.3, -0.5j, 0.3]
    Q, _ = blaschke_model_space(zeros)
    theta = blaschke_symbol(zeros, Q.ambient_dim)
    # theta H^2 is orthogonal to the model space
    assert nx.op_norm(nx.dagger(Q.frame) @ toeplitz_of_symbol(theta, Q.ambient_dim)[:, :8]) < 1e-10
    assert abs(abs(theta(np.exp(0.3j))) - 1) < 1e-10


def test_symbol_algebra_and_serialization():
    psi = OperatorSymbol(np.arange(12, dtype=complex).reshape(3, 2, 2))
    again = OperatorSymbol.from_dict(psi.to_dict())
    assert np.array_equal(psi.coefficients, again.coefficients)
    z = 0.3 - 0.2j
    assert np.allclose((psi + psi)(z), 2 * psi(z))
    assert np.allclose((psi * psi)(z), psi(z) @ psi(z))
    assert psi.direct_sum(psi).coeff_dim == 4
    with pytest.raises(DimensionError):
        OperatorSymbol(np.zeros((2, 2, 3)))
    assert np.allclose(lower_toeplitz([1, 2, 3]), [[1, 0, 0], [2, 1, 0], [3, 2, 1]])
