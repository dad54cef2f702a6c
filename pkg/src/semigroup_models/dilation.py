"""Minimal isometric dilation of doubly commuting pure tuples, and tensor-splitting checks.

The dilation space is the box-truncated ``H^2(D^n) (x) E`` with ``E = range D``
and ``D = (prod_j (I - T_j T_j*))^{1/2}``.  Coordinates are a tensor of shape
``(N, ..., N, r)``: one polynomial degree per leg, then the defect coordinate,
so the flat index of ``z^m (x) e_k`` is ``flat(m) * r + k``.  Leg operators are
applied along their tensor axis and never formed as ambient matrices.

``Omega h = sum_{m_j < N} z^m (x) B* D T*^m h``.  For doubly commuting tuples
``I - Omega* Omega = I - prod_j (I - T_j^N T_j*^N)`` exactly, so with
``a_j = ||T_j^N||`` the isometry defect is at most ``1 - prod_j (1 - a_j^2)``
and each intertwining residual is at most ``a_j``.
"""

from dataclasses import dataclass, field
from itertools import product
import json
import math

import numpy as np

from . import numerics as nx
from .cogenerator import is_pure, semigroup_at
from .exceptions import NotPSDError, PreconditionError, StructureError, TruncationError
from .hardy import SubspaceBasis, TruncationParams, phi_coeffs, lower_toeplitz

RANK_RTOL = 1e-9
PRODUCT_RTOL = 1e-14  # squared rank threshold for D, at roundoff level
MAX_TRUNCATION = 4096


def _commutation_residual(ts):
    worst = 0.0
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            worst = max(worst,
                        nx.op_norm(nx.commutator(ts[i], ts[j])),
                        nx.op_norm(ts[i] @ nx.dagger(ts[j]) - nx.dagger(ts[j]) @ ts[i]))
    return worst


def defect_operator(ts, tol=1e-8, purity_horizon=200, purity_threshold=1e-6):
    """``D = (prod_j (I - T_j T_j*))^{1/2}`` and an orthonormal frame of its range.

    The tuple must be doubly commuting and each member pure.  A product that
    is not positive semidefinite signals a failure of double commutation.
    """
    ts = [nx.as_matrix(t) for t in ts]
    if not ts:
        raise PreconditionError("empty tuple")
    dim = ts[0].shape[0]
    if any(t.shape != (dim, dim) for t in ts):
        raise PreconditionError("tuple members must be square of equal size")
    for j, t in enumerate(ts):
        if nx.op_norm(t) > 1.0 + tol:
            raise PreconditionError(f"T_{j + 1} is not a contraction")
        if not is_pure(t, purity_horizon, purity_threshold):
            raise PreconditionError(f"T_{j + 1} is not pure within horizon {purity_horizon}")
    dc = _commutation_residual(ts)
    if dc > tol:
        raise StructureError(f"tuple is not doubly commuting (residual {dc:.3e})")
    ident = np.eye(dim)
    prod_ = ident.astype(complex)
    for t in ts:
        prod_ = prod_ @ (ident - t @ nx.dagger(t))
    prod_ = 0.5 * (prod_ + nx.dagger(prod_))
    try:
        nx.psd_sqrt(prod_, tol=max(tol, 1e-9), clip=tol)
    except NotPSDError as exc:
        raise StructureError(f"defect product is not positive: double commutativity violated ({exc})") from None
    # rank is decided on the product: the square root lifts roundoff 1e-16 to 1e-8
    w, u = nx.herm_eig(prod_)
    keep = w > PRODUCT_RTOL * float(w[-1]) if w.size and w[-1] > 0 else np.zeros(w.size, bool)
    f = u[:, keep][:, ::-1]
    d = (f * np.sqrt(w[keep][::-1])) @ nx.dagger(f)
    return 0.5 * (d + nx.dagger(d)), SubspaceBasis(f)


def tail_amplitudes(ts, N):
    """``a_j = ||T_j^N||``."""
    return [nx.op_norm(np.linalg.matrix_power(nx.as_matrix(t), N)) for t in ts]


def tail_bounds(ts, N):
    a = tail_amplitudes(ts, N)
    iso = 1.0 - math.prod(1.0 - x * x for x in a)
    return {"amplitudes": a, "isometry": iso, "intertwining": max(a), "compression": iso + max(a)}


def required_truncation(ts, tol, max_N=MAX_TRUNCATION):
    """Smallest ``N`` with every tail bound at most ``tol``; ``None`` if beyond ``max_N``."""
    ts = [nx.as_matrix(t) for t in ts]
    powers = [np.eye(t.shape[0], dtype=complex) for t in ts]
    for N in range(1, max_N + 1):
        powers = [p @ t for p, t in zip(powers, ts)]
        a = [nx.op_norm(p) for p in powers]
        if max(a) <= tol and 1.0 - math.prod(1.0 - x * x for x in a) <= tol:
            return N
    return None


# leg operators on the (N, ..., N, r, cols) coordinate tensor

def _as_tensor(x, n, N, r):
    return x.reshape((N,) * n + (r, -1))


def _apply_leg(mat, j, x, n, N, r):
    """``(I (x) .. mat on leg j .. (x) I) x`` for a flat ``x`` with any number of columns."""
    t = _as_tensor(x, n, N, r)
    out = np.moveaxis(np.tensordot(mat, t, axes=([1], [j])), 0, j)
    return out.reshape(x.shape)


def _shift(N):
    return np.eye(N, k=-1, dtype=complex)


@dataclass
class DilationResult:
    """Dilation map with its residuals and a priori tail bounds."""

    n: int
    dim: int
    defect_dim: int
    N: int
    omega: np.ndarray
    defect_frame: np.ndarray
    residuals: dict = field(default_factory=dict)
    tail: dict = field(default_factory=dict)
    truncation: list = field(default_factory=list)

    @property
    def ambient_dim(self):
        return self.N ** self.n * self.defect_dim

    def apply_leg(self, mat, j, x):
        return _apply_leg(mat, j, x, self.n, self.N, self.defect_dim)

    def shift(self, j, x, adjoint=False):
        s = _shift(self.N)
        return self.apply_leg(s.T if adjoint else s, j, x)

    def shift_semigroup(self, j, t, x, adjoint=False):
        s = lower_toeplitz(phi_coeffs(t, self.N))
        return self.apply_leg(nx.dagger(s) if adjoint else s, j, x)

    def to_dict(self, matrix_path=None, size_threshold=20000):
        d = {
            "n": self.n, "dim": self.dim, "defect_dim": self.defect_dim, "N": self.N,
            "residuals": {k: float(v) if np.isscalar(v) else [float(x) for x in v]
                          for k, v in sorted(self.residuals.items())},
            "tail": {k: float(v) if np.isscalar(v) else [float(x) for x in v]
                     for k, v in sorted(self.tail.items())},
            "truncation": [{"N": p.N, "M": p.M, "tol": p.tol} for p in self.truncation],
        }
        if self.omega.size <= size_threshold:
            d["omega"] = nx.matrix_to_dict(self.omega)
        elif matrix_path is not None:
            with open(matrix_path, "w") as fh:
                json.dump(nx.matrix_to_dict(self.omega), fh)
            d["omega"] = {"file": str(matrix_path), "shape": list(self.omega.shape)}
        else:
            d["omega"] = {"omitted": True, "shape": list(self.omega.shape)}
        return d


def dilation_isometry(ts, N=None, tol=1e-9, margin=2, max_N=64):
    """Build ``Omega`` for a doubly commuting pure tuple and record its residuals.

    With ``N`` omitted the smallest truncation whose tail bounds are below
    ``tol`` is used.  A given ``N`` whose tail exceeds ``tol`` raises
    :class:`TruncationError` naming the truncation that would suffice.
    """
    ts = [nx.as_matrix(t) for t in ts]
    d, basis = defect_operator(ts)
    n, dim = len(ts), ts[0].shape[0]
    if N is None:
        N = required_truncation(ts, tol, max_N)
        if N is None:
            raise TruncationError(f"tail bound stays above {tol:g} up to N = {max_N}")
    else:
        tail = tail_bounds(ts, N)
        if max(tail["isometry"], tail["intertwining"]) > tol:
            need = required_truncation(ts, tol)
            hint = f"N >= {need}" if need else f"N beyond {MAX_TRUNCATION}"
            raise TruncationError(
                f"tail bound {max(tail['isometry'], tail['intertwining']):.3e} at N = {N} exceeds "
                f"tolerance {tol:g}; use {hint}")
    r = basis.dim
    coeff = nx.dagger(basis.frame) @ d  # r x dim
    out = coeff
    for j, t in enumerate(ts):
        adj = nx.dagger(t)
        powers = [np.eye(dim, dtype=complex)]
        for _ in range(N - 1):
            powers.append(powers[-1] @ adj)
        out = np.stack([out @ p for p in powers], axis=j)
    omega = out.reshape(N ** n * r, dim)
    result = DilationResult(
        n, dim, r, N, omega, basis.frame, tail=tail_bounds(ts, N),
        truncation=[TruncationParams(N, min(margin, N - 1), tol) for _ in range(n)])
    result.residuals = _residuals(result, ts)
    return result


def _residuals(res, ts):
    omega = res.omega
    ident = np.eye(res.dim)
    proj_out = lambda v: v - omega @ (nx.dagger(omega) @ v)  # noqa: E731
    out = {"isometry": nx.op_norm(nx.dagger(omega) @ omega - ident)}
    inter, comp, star = [], [], []
    for j, t in enumerate(ts):
        s_adj_omega = res.shift(j, omega, adjoint=True)
        inter.append(nx.op_norm(omega @ nx.dagger(t) - s_adj_omega))
        comp.append(nx.op_norm(nx.dagger(omega) @ res.shift(j, omega) - t))
        star.append(nx.op_norm(proj_out(s_adj_omega)))
    out["intertwining"] = inter
    out["compression"] = comp
    out["star_invariance"] = star
    return out


def verify_semigroup_dilation(result, ts, times):
    """``||Omega T_{j,t}* - (S_{j,t} (x) I)* Omega||`` for every ``j`` and ``t``.

    Returns ``{(j, t): residual}``.
    """
    out = {}
    for j, t_op in enumerate(ts):
        for t in times:
            if t == 0:
                out[(j, t)] = 0.0
                continue
            lhs = result.omega @ nx.dagger(semigroup_at(t_op, t))
            rhs = result.shift_semigroup(j, t, result.omega, adjoint=True)
            out[(j, t)] = nx.op_norm(lhs - rhs)
    return out


def _margin_rows(result, margin_degree):
    deg = min(margin_degree, result.N)
    rows = []
    for m in product(range(deg), repeat=result.n):
        flat = int(np.ravel_multi_index(m, (result.N,) * result.n)) if result.n else 0
        rows.extend(range(flat * result.defect_dim, (flat + 1) * result.defect_dim))
    return np.asarray(rows, dtype=int)


def _power_span(result, max_power):
    cols = []
    for m in product(range(max_power + 1), repeat=result.n):
        x = result.omega
        for j, k in enumerate(m):
            for _ in range(k):
                x = result.shift(j, x)
        cols.append(x)
    return np.hstack(cols)


def _time_span(result, times):
    cols = []
    for ts_ in product(times, repeat=result.n):
        x = result.omega
        for j, t in enumerate(ts_):
            if t:
                x = result.shift_semigroup(j, t, x)
        cols.append(x)
    return np.hstack(cols)


def minimality_defect(result, max_power=None, margin_degree=2):
    """``||(I - P_span)|_margin||`` for ``span{V^m Omega H : m_j <= max_power}``.

    The margin is spanned by ``z^m (x) e`` with every ``m_j < margin_degree``.
    ``max_power = margin_degree`` suffices for the exact dilation.
    """
    max_power = margin_degree if max_power is None else max_power
    q = nx.orth(_power_span(result, max_power), rtol=RANK_RTOL)
    rows = _margin_rows(result, margin_degree)
    f = np.zeros((result.ambient_dim, rows.size), dtype=complex)
    f[rows, np.arange(rows.size)] = 1.0
    return nx.op_norm(f - q @ nx.dagger(q[rows]))


def power_time_rank_check(result, count=None, step=0.3, rtol=1e-8):
    """Ranks of the spans over powers ``m_j < count`` and over times ``t_j = step * k``, ``k < count``.

    Equal spans need equal ranks of both families and of their union.
    """
    count = result.N if count is None else count
    times = [step * k for k in range(count)]
    pw = _power_span(result, count - 1)
    tm = _time_span(result, times)
    ranks = {
        "powers": nx.numerical_rank(pw, rtol),
        "times": nx.numerical_rank(tm, rtol),
        "joint": nx.numerical_rank(np.hstack([pw, tm]), rtol),
    }
    ranks["equal"] = ranks["powers"] == ranks["times"] == ranks["joint"]
    return ranks


def leg_tuple(factors, rng=None, scramble=True):
    """``T_j = W (I (x) .. C_j .. (x) I) W*`` for factors ``C_j``; doubly commuting by construction."""
    legs = [f.shape[0] for f in factors]
    dim = math.prod(legs)
    w = nx.random_unitary(dim, rng) if scramble else np.eye(dim, dtype=complex)
    out = []
    for j, c in enumerate(factors):
        op = np.ones((1, 1), dtype=complex)
        for i, d in enumerate(legs):
            op = np.kron(op, c if i == j else np.eye(d))
        out.append(w @ op @ nx.dagger(w))
    return out, w


def random_pure_factors(n, rng, max_leg=4, norm=0.3):
    """Random factors of size ``1..max_leg`` with operator norm ``norm``."""
    out = []
    for _ in range(n):
        d = int(rng.integers(1, max_leg + 1))
        c = nx.random_matrix(d, rng)
        out.append(norm * c / nx.op_norm(c))
    return out


@dataclass
class TensorCheck:
    verdict: bool
    star_residual: float
    commutator_residual: float
    worst_pair: tuple
    factors: list = None
    factor_residual: float = None


def _axis_shift_adjoint(frame, j, n, N):
    t = frame.reshape((N,) * n + (-1,))
    out = np.zeros_like(t)
    src = [slice(None)] * (n + 1)
    dst = [slice(None)] * (n + 1)
    src[j] = slice(1, None)
    dst[j] = slice(0, N - 1)
    out[tuple(dst)] = t[tuple(src)]
    return out.reshape(frame.shape)


def _axis_shift(frame, j, n, N):
    t = frame.reshape((N,) * n + (-1,))
    out = np.zeros_like(t)
    src = [slice(None)] * (n + 1)
    dst = [slice(None)] * (n + 1)
    src[j] = slice(0, N - 1)
    dst[j] = slice(1, None)
    out[tuple(dst)] = t[tuple(src)]
    return out.reshape(frame.shape)


def projector_distance(f, g):
    """``||F F* - G G*||`` for orthonormal frames, via principal angles."""
    if f.shape[1] != g.shape[1]:
        return 1.0
    if f.shape[1] == 0:
        return 0.0
    return nx.op_norm(g - f @ (nx.dagger(f) @ g))


def tensor_invariant_subspace_check(Q, n, N, tol=1e-8):
    """Decide whether a jointly ``*``-invariant ``Q`` in truncated ``H^2(D^n)`` is doubly commuting.

    Doubly commuting compressions of the coordinate shifts go with a tensor
    splitting ``Q = Q_1 (x) ... (x) Q_n``.  Positive verdicts recover the
    factors from the mode unfoldings of the coefficient tensor.
    """
    if not 1 <= n <= 3:
        raise PreconditionError("tensor check supports 1 <= n <= 3")
    f = Q.frame
    if f.shape[0] != N ** n:
        raise PreconditionError(f"Q lives in dimension {f.shape[0]}, expected N^n = {N ** n}")
    star = 0.0
    for j in range(n):
        v = _axis_shift_adjoint(f, j, n, N)
        star = max(star, nx.op_norm(v - f @ (nx.dagger(f) @ v)))
    if star > tol:
        raise PreconditionError(f"Q is not jointly *-invariant (residual {star:.3e})")
    comps = [nx.dagger(f) @ _axis_shift(f, j, n, N) for j in range(n)]
    worst, pair = 0.0, None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for label, c in (("[C_i, C_j]", nx.commutator(comps[i], comps[j])),
                             ("[C_i, C_j*]", comps[i] @ nx.dagger(comps[j]) - nx.dagger(comps[j]) @ comps[i])):
                r = nx.op_norm(c)
                if r > worst:
                    worst, pair = r, (i, j, label)
    if worst > tol:
        return TensorCheck(False, star, worst, pair)
    tensor = f.reshape((N,) * n + (f.shape[1],))
    factors = []
    for j in range(n):
        unfold = np.moveaxis(tensor, j, 0).reshape(N, -1)
        factors.append(SubspaceBasis(nx.orth(unfold, rtol=RANK_RTOL)))
    kron = np.ones((1, 1), dtype=complex)
    for fac in factors:
        kron = np.kron(kron, fac.frame)
    residual = projector_distance(f, kron)
    return TensorCheck(True, star, worst, pair, factors, residual)
