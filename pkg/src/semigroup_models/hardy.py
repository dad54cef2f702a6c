"""Truncated Hardy-space models.

``H^2(D, E)`` is truncated to polynomials of degree ``< N`` with the basis
``z^m xi_i`` ordered degree-major (index ``m * dim_e + i``), so analytic
Toeplitz operators become block lower-triangular block-Toeplitz matrices.
Lower-triangular Toeplitz matrices are closed under products, hence every
algebraic identity between analytic symbols survives the truncation exactly;
only adjoint/isometry identities need a margin below the top degree.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import numerics as nx
from .exceptions import DimensionError, DomainError, PreconditionError


@dataclass(frozen=True)
class TruncationParams:
    """Degree cut ``N`` and margin ``M``; identities are asserted below degree ``N - M``."""

    N: int = 64
    M: int = 8
    tol: float = 1e-9

    def __post_init__(self):
        if self.N < 1:
            raise PreconditionError(f"degree cut must be positive, got {self.N}")
        if not 0 <= self.M < self.N:
            raise PreconditionError(f"margin must satisfy 0 <= M < N, got M={self.M}, N={self.N}")

    @property
    def margin_degree(self):
        return self.N - self.M


def _cut(P):
    return P.N if isinstance(P, TruncationParams) else int(P)


class OperatorSymbol:
    """Operator-valued polynomial ``psi(z) = sum_k A_k z^k`` on ``E = C^coeff_dim``."""

    def __init__(self, coefficients, coeff_dim=None):
        c = np.asarray(coefficients, dtype=complex)
        if c.ndim == 1:
            c = c[:, None, None]
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise DimensionError(f"coefficients must have shape (d+1, e, e), got {c.shape}")
        if c.shape[0] == 0:
            e = coeff_dim or c.shape[1]
            c = np.zeros((1, e, e), dtype=complex)
        if coeff_dim is not None and c.shape[1] != coeff_dim:
            raise DimensionError(f"coefficients are {c.shape[1]}x{c.shape[1]}, expected {coeff_dim}")
        if not np.all(np.isfinite(c)):
            raise PreconditionError("symbol has non-finite coefficients")
        self.coefficients = c

    @classmethod
    def scalar(cls, coeffs):
        return cls(np.asarray(coeffs, dtype=complex).reshape(-1, 1, 1))

    @classmethod
    def constant(cls, a):
        a = nx.as_matrix(a)
        return cls(a[None])

    @classmethod
    def coordinate(cls, dim_e=1):
        """The symbol ``z I_E``."""
        c = np.zeros((2, dim_e, dim_e), dtype=complex)
        c[1] = np.eye(dim_e)
        return cls(c)

    @property
    def coeff_dim(self):
        return self.coefficients.shape[1]

    @property
    def degree(self):
        return self.coefficients.shape[0] - 1

    def __call__(self, z):
        acc = np.zeros((self.coeff_dim, self.coeff_dim), dtype=complex)
        for a in self.coefficients[::-1]:
            acc = acc * z + a
        return acc

    def __add__(self, other):
        d = max(self.degree, other.degree) + 1
        c = np.zeros((d, self.coeff_dim, self.coeff_dim), dtype=complex)
        c[: self.degree + 1] += self.coefficients
        c[: other.degree + 1] += other.coefficients
        return OperatorSymbol(c)

    def __mul__(self, other):
        if isinstance(other, OperatorSymbol):
            if other.coeff_dim != self.coeff_dim:
                raise DimensionError("symbols act on different coefficient spaces")
            d = self.degree + other.degree + 1
            c = np.zeros((d, self.coeff_dim, self.coeff_dim), dtype=complex)
            for i, a in enumerate(self.coefficients):
                for j, b in enumerate(other.coefficients):
                    c[i + j] += a @ b
            return OperatorSymbol(c)
        return OperatorSymbol(self.coefficients * other)

    __rmul__ = __mul__

    def truncated(self, degree):
        return OperatorSymbol(self.coefficients[: degree + 1])

    def direct_sum(self, other):
        d = max(self.degree, other.degree) + 1
        e1, e2 = self.coeff_dim, other.coeff_dim
        c = np.zeros((d, e1 + e2, e1 + e2), dtype=complex)
        c[: self.degree + 1, :e1, :e1] = self.coefficients
        c[: other.degree + 1, e1:, e1:] = other.coefficients
        return OperatorSymbol(c)

    def conjugated(self, u):
        """The symbol ``u* psi(z) u`` for a unitary change of basis ``u`` of ``E``."""
        u = nx.as_matrix(u)
        return OperatorSymbol(nx.dagger(u) @ self.coefficients @ u)

    def sup_norm(self, grid):
        return max(nx.op_norm(self(z)) for z in grid)

    def to_dict(self):
        return {
            "coeff_dim": self.coeff_dim,
            "coefficients": [nx.matrix_to_dict(a) for a in self.coefficients],
        }

    @classmethod
    def from_dict(cls, d):
        mats = [nx.matrix_from_dict(m) for m in d["coefficients"]]
        return cls(np.stack(mats), coeff_dim=int(d["coeff_dim"]))

    def __repr__(self):
        return f"OperatorSymbol(degree={self.degree}, coeff_dim={self.coeff_dim})"


class SubspaceBasis:
    """A subspace of a truncated model space given by an orthonormal frame."""

    def __init__(self, frame, tol=1e-9):
        f = nx.as_matrix(frame, "frame")
        if f.shape[1] > f.shape[0]:
            raise DimensionError(f"frame has more columns than rows: {f.shape}")
        defect = nx.op_norm(nx.dagger(f) @ f - np.eye(f.shape[1])) if f.shape[1] else 0.0
        if defect > tol:
            raise PreconditionError(f"frame is not orthonormal (defect {defect:.3e})")
        self.frame = f

    @classmethod
    def span(cls, vectors, rtol=1e-9):
        return cls(nx.orth(vectors, rtol))

    @property
    def ambient_dim(self):
        return self.frame.shape[0]

    @property
    def dim(self):
        return self.frame.shape[1]

    def projector(self):
        return self.frame @ nx.dagger(self.frame)

    def __repr__(self):
        return f"SubspaceBasis(dim={self.dim}, ambient_dim={self.ambient_dim})"


def laguerre_polynomials(n_max, x):
    """``L_0(x) .. L_{n_max}(x)`` by the three-term recurrence, shape ``(n_max + 1, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 - x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1 - x) * out[n] - n * out[n - 1]) / (n + 1)
    return out


def phi_coeffs(t, N):
    """Maclaurin coefficients ``c_0..c_{N-1}`` of ``phi_t(z) = exp(t (z + 1)/(z - 1))``.

    From the Laguerre generating function,
    ``c_n = exp(-t) (L_n(2t) - L_{n-1}(2t))`` with ``L_{-1} = 0``.
    """
    if t < 0:
        raise PreconditionError(f"time must be non-negative, got {t}")
    if N < 1:
        raise PreconditionError("need at least one coefficient")
    lag = laguerre_polynomials(N - 1, [2.0 * t])[:, 0]
    c = lag.copy()
    c[1:] -= lag[:-1]
    return (math.exp(-t) * c).astype(complex)


def laguerre_basis(n, points):
    """The orthonormal functions ``sqrt(2) exp(-x) L_n(2x)`` on ``L^2(0, inf)``."""
    x = np.asarray(points, dtype=float)
    if np.any(x < 0):
        raise DomainError("Laguerre functions are evaluated on x >= 0")
    lag = laguerre_polynomials(n, 2.0 * x.reshape(-1))[n]
    return (math.sqrt(2.0) * np.exp(-x.reshape(-1)) * lag).reshape(x.shape)


def toeplitz_of_symbol(psi, P):
    """Matrix of ``M_psi`` on ``span{z^m xi : m < N}``; block ``(i, j)`` is ``A_{i-j}``."""
    N = _cut(P)
    e = psi.coeff_dim
    out = np.zeros((N * e, N * e), dtype=complex)
    for k, a in enumerate(psi.coefficients[:N]):
        if not np.any(a):
            continue
        for j in range(N - k):
            i = j + k
            out[i * e:(i + 1) * e, j * e:(j + 1) * e] = a
    return out


def lower_toeplitz(c):
    """Scalar lower-triangular Toeplitz matrix with first column ``c``."""
    c = np.asarray(c, dtype=complex)
    N = c.size
    idx = np.arange(N)
    diff = idx[:, None] - idx[None, :]
    return np.where(diff >= 0, c[np.clip(diff, 0, N - 1)], 0.0)


def shift_matrix(P, dim_e=1):
    """Truncated ``M_z`` on ``H^2(D, C^dim_e)``."""
    N = _cut(P)
    return np.kron(np.eye(N, k=-1), np.eye(dim_e)).astype(complex)


def shift_semigroup_matrix(t, P, dim_e=1):
    """Truncation of ``M_{phi_t o z}``, the model of the right shift semigroup at time ``t``."""
    N = _cut(P)
    return np.kron(lower_toeplitz(phi_coeffs(t, N)), np.eye(dim_e))


def margin_indices(P, dim_e=1, margin_degree=None):
    N = _cut(P)
    if margin_degree is None:
        margin_degree = P.margin_degree if isinstance(P, TruncationParams) else N
    return np.arange(min(margin_degree, N) * dim_e)


def margin_frame(P, dim_e=1, margin_degree=None):
    N = _cut(P)
    idx = margin_indices(P, dim_e, margin_degree)
    f = np.zeros((N * dim_e, idx.size), dtype=complex)
    f[idx, np.arange(idx.size)] = 1.0
    return f


def margin_isometry_defect(op, P, dim_e=1):
    """``||(op* op - I)`` restricted to the margin``||``."""
    f = margin_frame(P, dim_e)
    g = op @ f
    return nx.op_norm(nx.dagger(g) @ g - np.eye(f.shape[1]))


def jet_space(k, P, dim_e=1):
    """``span{z^m xi : m < k}``, invariant under ``M_z*``."""
    N = _cut(P)
    if k > N:
        raise DimensionError(f"jet order {k} exceeds truncation {N}")
    return SubspaceBasis(margin_frame(N, dim_e, k))


def compress(op, Q):
    """``P_Q op |_Q`` in the frame coordinates of ``Q``."""
    op = nx.as_matrix(op)
    if op.shape != (Q.ambient_dim, Q.ambient_dim):
        raise DimensionError(f"operator {op.shape} does not act on ambient dimension {Q.ambient_dim}")
    return nx.dagger(Q.frame) @ op @ Q.frame


def check_star_invariant(op, Q):
    """``||(I - P_Q) op* P_Q||``; zero iff ``Q`` is invariant under ``op*``."""
    op = nx.as_matrix(op)
    if op.shape != (Q.ambient_dim, Q.ambient_dim):
        raise DimensionError(f"operator {op.shape} does not act on ambient dimension {Q.ambient_dim}")
    v = nx.dagger(op) @ Q.frame
    return nx.op_norm(v - Q.frame @ (nx.dagger(Q.frame) @ v))


def _group_zeros(zeros, tol=1e-12):
    groups = []
    for w in zeros:
        for g in groups:
            if abs(g[0] - w) <= tol:
                g[1] += 1
                break
        else:
            groups.append([w, 1])
    return groups


def _kernel_cut(zeros, floor=1e-17, minimum=16, maximum=4096):
    r = max((abs(w) for w in zeros), default=0.0)
    mult = max((m for _, m in _group_zeros(zeros)), default=1)
    N = max(minimum, len(zeros) + 1)
    while N < maximum and r > 0 and (N ** mult) * r ** N > floor:
        N *= 2
    return N


def blaschke_model_space(zeros, P=None):
    """Model space ``H^2 - theta H^2`` for the finite Blaschke product with ``zeros``.

    Spanned by the Cauchy kernels ``1/(1 - conj(w) z)`` (derivative kernels for
    repeated zeros) truncated to degree ``< N``; when ``P`` is omitted ``N`` is
    chosen so the truncated tail is below roundoff.  Returns the subspace and
    the compressed shift ``S_theta``, whose eigenvalues are the zeros.
    """
    zeros = [complex(w) for w in np.atleast_1d(zeros)]
    if not zeros:
        raise PreconditionError("need at least one zero")
    for w in zeros:
        if abs(w) >= 1.0:
            raise DomainError(f"zero {w} is not inside the unit disc")
    N = _kernel_cut(zeros) if P is None else _cut(P)
    n = np.arange(N)
    cols = []
    for w, mult in _group_zeros(zeros):
        wb = np.conj(w)
        for j in range(mult):
            binom = np.array([math.comb(int(k), j) for k in n], dtype=float)
            powers = np.where(n >= j, wb ** np.clip(n - j, 0, None), 0.0)
            cols.append(binom * powers)
    q, _ = nx.qr(np.array(cols).T)
    Q = SubspaceBasis(q)
    return Q, compress(shift_matrix(N), Q)


def blaschke_symbol(zeros, degree):
    """Taylor polynomial of degree ``degree`` of the scalar Blaschke product with ``zeros``."""
    c = np.zeros(degree + 1, dtype=complex)
    c[0] = 1.0
    for a in np.atleast_1d(zeros):
        a = complex(a)
        f = np.zeros(degree + 1, dtype=complex)
        if a == 0:
            if degree >= 1:
                f[1] = 1.0
        else:
            f[0] = -a
            k = np.arange(1, degree + 1)
            f[1:] = (1 - abs(a) ** 2) * np.conj(a) ** (k - 1)
        c = np.convolve(c, f)[: degree + 1]
    return OperatorSymbol.scalar(c)


def kron_subspaces(*subspaces):
    """Tensor product ``Q_1 (x) ... (x) Q_n`` (first factor most significant)."""
    f = np.ones((1, 1), dtype=complex)
    for q in subspaces:
        f = np.kron(f, q.frame)
    return SubspaceBasis(f)


def leg_operator(op, j, legs):
    """``I (x) ... (x) op (x) ... (x) I`` with ``op`` on leg ``j`` of sizes ``legs``."""
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(legs):
        out = np.kron(out, op if i == j else np.eye(d))
    return out
