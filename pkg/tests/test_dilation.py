import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semigroup_models import numerics as nx
from semigroup_models.cogenerator import purity_defect
from semigroup_models.dilation import (
    _time_span,
    defect_operator,
    dilation_isometry,
    leg_tuple,
    power_time_rank_check,
    minimality_defect,
    random_pure_factors,
    required_truncation,
    tail_bounds,
    tensor_invariant_subspace_check,
    verify_semigroup_dilation,
)
from semigroup_models.exceptions import PreconditionError, StructureError, TruncationError
from semigroup_models.hardy import SubspaceBasis, blaschke_model_space, kron_subspaces, shift_matrix


def scalars(*cs):
    return [np.array([[c]], dtype=complex) for c in cs]


def pure_tuple(seed, n=2, norm=0.5, max_leg=3):
    rng = np.random.default_rng(seed)
    return leg_tuple(random_pure_factors(n, rng, max_leg=max_leg, norm=norm), rng)


# defect operator

def test_defect_of_scalars():
    d, basis = defect_operator(scalars(0.3, 0.6j))
    assert d[0, 0] == pytest.approx(np.sqrt((1 - 0.09) * (1 - 0.36)), abs=1e-15)
    assert basis.dim == 1
    d, _ = defect_operator(scalars(0.5, 0.5))
    assert d[0, 0] == pytest.approx(0.75, abs=1e-15)


def test_defect_of_zero_tuple():
    d, basis = defect_operator([np.zeros((3, 3))] * 2)
    assert np.array_equal(d, np.eye(3)) and basis.dim == 3


def test_defect_rank_of_leg_tuple():
    # D = D_{C_1*} (x) D_{C_2*} up to the scramble, so the rank multiplies
    c1 = np.array([[0, 1], [0, 0]], dtype=complex)  # one-dimensional defect
    c2 = np.zeros((3, 3), dtype=complex)
    ts, _ = leg_tuple([c1, c2], np.random.default_rng(0))
    _, basis = defect_operator(ts)
    assert basis.dim == 1 * 3


def test_non_doubly_commuting_rejected():
    a = np.array([[0, 0.5], [0, 0]], dtype=complex)
    with pytest.raises(StructureError):
        defect_operator([a, a])  # commute but [A, A*] != 0


def test_non_pure_rejected():
    with pytest.raises(PreconditionError, match="pure"):
        defect_operator([np.diag([0.5, -1.0]).astype(complex)])


# the dilation map

def test_zero_dilation():
    res = dilation_isometry([np.zeros((2, 2))])
    assert res.N == 1 and res.defect_dim == 2
    assert np.allclose(res.omega, nx.dagger(res.defect_frame), atol=1e-15)
    assert res.residuals["compression"] == [0.0]


def test_scalar_half_geometric_coefficients():
    res = dilation_isometry(scalars(0.5), N=40)
    m = np.arange(40)
    expected = np.sqrt(0.75) * 0.5 ** m
    assert np.allclose(np.abs(res.omega[:, 0]), expected, rtol=1e-14, atol=0)
    # the exact defect 0.25^40 is far below roundoff
    assert res.residuals["isometry"] <= 1e-15
    assert minimality_defect(res, max_power=res.N - 1) <= 1e-9


def test_two_leg_intertwining_at_32():
    ts, _ = pure_tuple(1, n=2, norm=0.5)
    res = dilation_isometry(ts, N=32)
    assert max(res.residuals["intertwining"]) <= 1e-9
    assert max(res.residuals["compression"]) <= 1e-9
    sg = verify_semigroup_dilation(res, ts, (0.0, 0.5, 1.0))
    assert all(v == 0.0 for (j, t), v in sg.items() if t == 0)
    assert max(sg.values()) <= 1e-7


def test_zero_semigroup_dilation():
    res = dilation_isometry([np.zeros((1, 1))], N=8)
    for t in (0.3, 1.0, 4.0):
        assert verify_semigroup_dilation(res, [np.zeros((1, 1))], [t])[(0, t)] <= 1e-10


@given(st.integers(0, 10 ** 6), st.integers(1, 3), st.floats(0.1, 0.8))
def test_residuals_within_tail_bounds(seed, n, norm):
    ts, _ = pure_tuple(seed, n=n, norm=norm, max_leg=2)
    N = required_truncation(ts, 1e-6)
    res = dilation_isometry(ts, N=N, tol=1e-6)
    tail = res.tail
    slack = 1e-12
    assert res.residuals["isometry"] <= tail["isometry"] + slack
    assert max(res.residuals["intertwining"]) <= tail["intertwining"] + slack
    assert max(res.residuals["compression"]) <= tail["compression"] + slack
    assert max(res.residuals["star_invariance"]) <= tail["intertwining"] + slack


def test_scale_covariance():
    ts, _ = pure_tuple(3, n=2, norm=0.4)
    w = nx.random_unitary(ts[0].shape[0], np.random.default_rng(30))
    moved = [w @ t @ nx.dagger(w) for t in ts]
    a = dilation_isometry(ts, N=30)
    b = dilation_isometry(moved, N=30)
    u = nx.dagger(b.defect_frame) @ w @ a.defect_frame
    assert nx.is_unitary(u, 1e-10)
    lifted = np.kron(np.eye(30 ** 2), u) @ a.omega
    assert nx.op_norm(b.omega @ w - lifted) <= 1e-10
    for k in a.residuals:
        assert np.allclose(a.residuals[k], b.residuals[k], atol=1e-10, rtol=0)


def test_dilation_legs_doubly_commute_and_are_pure():
    ts, _ = pure_tuple(4, n=3, norm=0.3, max_leg=2)
    res = dilation_isometry(ts, N=6, tol=1e-2)
    x = np.random.default_rng(0).standard_normal((res.ambient_dim, 3))
    for i in range(3):
        for j in range(3):
            if i != j:
                assert np.array_equal(res.shift(i, res.shift(j, x)), res.shift(j, res.shift(i, x)))
                assert np.array_equal(res.shift(i, res.shift(j, x, adjoint=True)),
                                      res.shift(j, res.shift(i, x), adjoint=True))
    assert purity_defect(shift_matrix(6), 6)[-1] == 0.0


def test_truncation_error_names_sufficient_n():
    ts, _ = pure_tuple(5, n=2, norm=0.5)
    need = required_truncation(ts, 1e-12)
    with pytest.raises(TruncationError, match=f"N >= {need}"):
        dilation_isometry(ts, N=8, tol=1e-12)
    assert dilation_isometry(ts, N=need, tol=1e-12).N == need


def test_auto_truncation_meets_bounds():
    ts, _ = pure_tuple(6, n=2, norm=0.6)
    res = dilation_isometry(ts, tol=1e-9)
    b = tail_bounds(ts, res.N)
    assert b["isometry"] <= 1e-9 and b["intertwining"] <= 1e-9
    assert max(tail_bounds(ts, res.N - 1)["isometry"], tail_bounds(ts, res.N - 1)["intertwining"]) > 1e-9


# minimality

def test_minimality_of_zero_tuple():
    res = dilation_isometry([np.zeros((2, 2))], N=4, tol=1.0)
    assert minimality_defect(res, max_power=3, margin_degree=4) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_minimality_on_margin(seed):
    ts, _ = pure_tuple(seed, n=2, norm=0.4)
    res = dilation_isometry(ts, tol=1e-9)
    assert minimality_defect(res, margin_degree=2) <= 1e-7


@pytest.mark.parametrize("n,norm", [(1, 0.1), (2, 0.01), (3, 0.005)])
def test_powers_and_times_span_the_same_space(n, norm):
    ts, _ = pure_tuple(7, n=n, norm=norm, max_leg=2)
    ranks = power_time_rank_check(dilation_isometry(ts, tol=1e-9))
    assert ranks["equal"], ranks


def test_time_grid_conditioning_limits_the_rank_check():
    """The time family is Vandermonde-like in the leg degree, so its condition number grows fast with N."""
    ts, _ = pure_tuple(8, n=1, norm=0.3, max_leg=1)
    ratios = []
    for N in (4, 7, 10):
        res = dilation_isometry(ts, N=N, tol=1.0)
        s = nx.singular_values(_time_span(res, [0.3 * k for k in range(N)]))
        ratios.append(s[-1] / s[0])
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 1e-6


# serialization

def test_to_dict_inline_and_file_reference(tmp_path):
    ts, _ = pure_tuple(9, n=2, norm=0.3, max_leg=2)
    res = dilation_isometry(ts, tol=1e-9)
    d = json.loads(json.dumps(res.to_dict()))
    assert d["N"] == res.N and d["defect_dim"] == res.defect_dim
    assert np.array_equal(nx.matrix_from_dict(d["omega"]), res.omega)
    path = tmp_path / "omega.json"
    ref = res.to_dict(matrix_path=path, size_threshold=1)
    assert ref["omega"]["file"] == str(path)
    with open(path) as fh:
        assert np.array_equal(nx.matrix_from_dict(json.load(fh)), res.omega)
    assert res.to_dict(size_threshold=1)["omega"]["omitted"]


# tensor invariant subspaces

def jet(N, k):
    f = np.zeros((N, k), dtype=complex)
    f[np.arange(k), np.arange(k)] = 1.0
    return SubspaceBasis(f)


def test_jet_tensor_is_split():
    r = tensor_invariant_subspace_check(kron_subspaces(jet(4, 2), jet(4, 2)), 2, 4)
    assert r.verdict and [f.dim for f in r.factors] == [2, 2]
    assert r.factor_residual <= 1e-8
    for f in r.factors:
        assert nx.op_norm(f.projector() - jet(4, 2).projector()) <= 1e-12


def test_three_leg_jet_tensor():
    q = kron_subspaces(jet(3, 1), jet(3, 2), jet(3, 3))
    r = tensor_invariant_subspace_check(q, 3, 3)
    assert r.verdict and [f.dim for f in r.factors] == [1, 2, 3]


def test_non_tensor_subspace():
    N = 4
    f = np.zeros((N * N, 3), dtype=complex)
    f[0, 0] = f[N, 1] = f[1, 2] = 1.0  # 1, z1, z2
    r = tensor_invariant_subspace_check(SubspaceBasis(f), 2, N)
    assert not r.verdict and r.factors is None
    # explicit 3x3 compressions: C1 e_1 = e_{z1}, C2 e_1 = e_{z2}; C1* C2 = 0 but C2 C1* maps z1 to z2
    c1 = np.zeros((3, 3))
    c1[1, 0] = 1.0
    c2 = np.zeros((3, 3))
    c2[2, 0] = 1.0
    expected = nx.op_norm(c1 @ c2.T - c2.T @ c1)
    assert r.commutator_residual == pytest.approx(expected) and r.commutator_residual >= 1e-2


def test_blaschke_tensor_factors():
    rng = np.random.default_rng(11)
    zs = [0.6 * np.exp(2j * np.pi * rng.uniform(size=2)) for _ in range(2)]
    cut = max(blaschke_model_space(z)[0].ambient_dim for z in zs)
    qs = [blaschke_model_space(z, cut)[0] for z in zs]
    r = tensor_invariant_subspace_check(kron_subspaces(*qs), 2, cut)
    assert r.verdict and [f.dim for f in r.factors] == [2, 2]
    assert r.factor_residual <= 1e-8
    for f, q in zip(r.factors, qs):
        assert nx.op_norm(f.projector() - q.projector()) <= 1e-8


def test_tensor_check_preconditions():
    f = np.zeros((16, 1), dtype=complex)
    f[5, 0] = 1.0  # z1 z2 alone is not *-invariant
    with pytest.raises(PreconditionError, match="invariant"):
        tensor_invariant_subspace_check(SubspaceBasis(f), 2, 4)
    with pytest.raises(PreconditionError):
        tensor_invariant_subspace_check(jet(16, 1), 4, 2)
