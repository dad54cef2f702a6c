"""Commutant of a compressed shift and the class ``C_E``.

``C_E`` holds the contractive analytic symbols ``psi`` for which 1 is never
an eigenvalue of ``psi(z)``; compressions of ``M_psi`` to ``M_psi*``-invariant
subspaces are exactly the cogenerators commuting with the compressed shift.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numerics as nx
from .cogenerator import EIGENVALUE_ONE_TOL
from .exceptions import InconsistencyError, PreconditionError, StructureError
from .hardy import (
    OperatorSymbol,
    SubspaceBasis,
    check_star_invariant,
    compress,
    jet_space,
    shift_matrix,
    toeplitz_of_symbol,
)

#: Singular values of ``eta(z) - I`` below this span the eigenvalue-1 kernel.
KERNEL_THRESHOLD = 1e-7
RIDGE = 1e-12


def default_grid(radius=0.95, count=16):
    """``count`` points on ``|z| = radius`` together with the origin."""
    k = np.arange(count)
    return [0j] + list(radius * np.exp(2j * np.pi * k / count))


def circle(count):
    return np.exp(2j * np.pi * np.arange(count) / count)


@dataclass
class ClassCEWitness:
    symbol: OperatorSymbol
    norm_bound_residual: float
    eig1_margin: float
    worst_z: complex
    accepted: bool = field(default=True, init=False)

    def __bool__(self):
        return True


@dataclass
class ClassCERejection:
    symbol: OperatorSymbol
    offending_z: complex
    reason: str
    offending_vector: Optional[np.ndarray] = None
    accepted: bool = field(default=False, init=False)

    def __bool__(self):
        return False


def in_class_CE(psi, grid=None, tol=1e-8, eig_tol=EIGENVALUE_ONE_TOL):
    """Check membership in ``C_E`` on a grid of points of the open disc.

    Returns a :class:`ClassCEWitness` recording the worst norm excess and the
    smallest ``min_singular(psi(z) - I)``, or a :class:`ClassCERejection`
    naming the first offending point.
    """
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise PreconditionError("grid is empty")
    if any(abs(z) >= 1 for z in grid):
        raise PreconditionError("grid points must lie in the open unit disc")
    ident = np.eye(psi.coeff_dim)
    worst_norm = -np.inf
    margin = np.inf
    worst_z = grid[0]
    for z in grid:
        val = psi(z)
        excess = nx.op_norm(val) - 1.0
        if excess > tol:
            return ClassCERejection(psi, z, f"||psi(z)|| = {1 + excess:.12g} exceeds 1")
        _, s, vh = nx.svd(val - ident)
        if s[-1] <= eig_tol:
            return ClassCERejection(psi, z, "1 is an eigenvalue of psi(z)", np.conj(vh[-1]))
        worst_norm = max(worst_norm, excess)
        if s[-1] < margin:
            margin, worst_z = float(s[-1]), z
    return ClassCEWitness(psi, max(worst_norm, 0.0), margin, worst_z)


@dataclass
class CommutantSolution:
    symbol: OperatorSymbol
    residual: float
    sup_norm: float
    refined: bool


def _compression_map(Q, max_degree, dim_e):
    """Columns are ``vec(P_Q M_{z^k E_ab} |_Q)`` over ``k <= max_degree`` and ``a, b``."""
    N = Q.ambient_dim // dim_e
    s = shift_matrix(N)
    fh = nx.dagger(Q.frame)
    cols = []
    power = np.eye(N)
    for _ in range(max_degree + 1):
        for a in range(dim_e):
            for b in range(dim_e):
                unit = np.zeros((dim_e, dim_e))
                unit[a, b] = 1.0
                cols.append((fh @ np.kron(power, unit) @ Q.frame).reshape(-1))
        power = s @ power
    return np.array(cols).T


def _coeffs_to_symbol(x, max_degree, dim_e):
    return OperatorSymbol(np.asarray(x).reshape(max_degree + 1, dim_e, dim_e))


def _sup_on_circle(psi, count):
    if psi.coeff_dim == 1:
        vals = np.polynomial.polynomial.polyval(circle(count), psi.coefficients[:, 0, 0])
        return float(np.max(np.abs(vals)))
    return max(nx.op_norm(psi(z)) for z in circle(count))


def _min_sup_refinement(x0, null, max_degree, dim_e, samples):
    import cvxpy as cp

    pts = circle(samples)
    powers = pts[:, None] ** np.arange(max_degree + 1)[None, :]
    c = cp.Variable(null.shape[1], complex=True)
    s = cp.Variable()
    coeffs = x0 + null @ c
    cons = []
    if dim_e == 1:
        cons.append(cp.abs(powers @ coeffs) <= s)
    else:
        blocks = cp.reshape(coeffs, (max_degree + 1, dim_e * dim_e), order="C")
        vals = powers @ blocks
        for k in range(samples):
            cons.append(cp.sigma_max(cp.reshape(vals[k], (dim_e, dim_e), order="C")) <= s)
    prob = cp.Problem(cp.Minimize(s), cons)
    prob.solve(solver=cp.CLARABEL)
    if c.value is None:
        return x0
    return x0 + null @ c.value


def commutant_solve(Q, T, max_degree, dim_e=1, tol=1e-8, contractive=True):
    """Find a polynomial symbol ``psi`` with ``P_Q M_psi |_Q = T``.

    ``Q`` must be ``M_z*``-invariant and ``T`` must commute with the compressed
    shift.  The minimum-norm least-squares symbol of degree ``<= max_degree``
    is computed first (ridge-regularized when the compression map is rank
    deficient).  With ``contractive=True`` and that symbol not contractive
    on the circle, the sup norm is minimized over all symbols with the same
    compression.
    """
    T = nx.as_matrix(T, "T")
    if T.shape != (Q.dim, Q.dim):
        raise PreconditionError(f"T has shape {T.shape}, Q has dimension {Q.dim}")
    N = Q.ambient_dim // dim_e
    shift = shift_matrix(N, dim_e)
    star = check_star_invariant(shift, Q)
    if star > tol:
        raise PreconditionError(f"Q is not invariant under M_z* (residual {star:.3e})")
    s_c = compress(shift, Q)
    comm = nx.op_norm(nx.commutator(T, s_c))
    if comm > tol:
        raise PreconditionError(f"T does not commute with the compressed shift (||[T, S]|| = {comm:.3e})")
    norm = nx.op_norm(T)
    if norm > 1.0 + tol:
        raise PreconditionError(f"T is not a contraction (||T|| = {norm:.12g})")

    G = _compression_map(Q, max_degree, dim_e)
    rhs = T.reshape(-1)
    u, sv, vh = np.linalg.svd(G, full_matrices=True)
    rank = int(np.count_nonzero(sv > 1e-10 * sv[0])) if sv.size else 0
    if rank < G.shape[1]:
        aug = np.vstack([G, np.sqrt(RIDGE) * np.eye(G.shape[1])])
        x = np.linalg.lstsq(aug, np.concatenate([rhs, np.zeros(G.shape[1])]), rcond=None)[0]
    else:
        x = np.linalg.lstsq(G, rhs, rcond=None)[0]
    samples = max(256, 16 * (max_degree + 1))
    psi = _coeffs_to_symbol(x, max_degree, dim_e)
    sup = _sup_on_circle(psi, samples)
    refined = False
    null = nx.dagger(vh[rank:])
    if contractive and sup > 1.0 + tol and null.shape[1] > 0:
        x = _min_sup_refinement(x, null, max_degree, dim_e, samples)
        psi = _coeffs_to_symbol(x, max_degree, dim_e)
        sup = _sup_on_circle(psi, samples)
        refined = True
    residual = nx.op_norm(compress(toeplitz_of_symbol(psi, N), Q) - T)
    return CommutantSolution(psi, residual, sup, refined)


def eigenspace_one(eta, grid=None, threshold=KERNEL_THRESHOLD, tol=1e-8):
    """Orthonormal basis of the subspace of ``E`` on which ``eta(z) = I`` for every grid point.

    The kernel of ``eta(z) - I`` must have the same dimension at every grid
    point and the common kernel must attain it; otherwise the eigenvalue-1
    space is not z-independent and :class:`InconsistencyError` is raised.
    """
    grid = default_grid() if grid is None else list(grid)
    ident = np.eye(eta.coeff_dim)
    mats = []
    dims = []
    for z in grid:
        val = eta(z)
        if nx.op_norm(val) > 1.0 + tol:
            raise PreconditionError(f"eta is not contractive at z = {z}")
        m = val - ident
        dims.append(int(np.count_nonzero(nx.singular_values(m) <= threshold)))
        mats.append(m)
    if len(set(dims)) > 1:
        raise InconsistencyError(f"eigenvalue-1 multiplicity varies over the grid: {sorted(set(dims))}")
    e1 = nx.null_space(np.vstack(mats), atol=threshold * np.sqrt(len(grid)))
    if e1.shape[1] != dims[0]:
        raise InconsistencyError(
            f"pointwise kernels have dimension {dims[0]} but their intersection has {e1.shape[1]}")
    for z, m in zip(grid, mats):
        if e1.shape[1] and nx.op_norm(m @ e1) > tol:
            raise InconsistencyError(f"eigenvalue-1 space is not fixed at z = {z}")
    return SubspaceBasis(e1)


def repair_symbol(eta, kappa=None, grid=None, tol=1e-8):
    """Replace the identity block of ``eta`` on its eigenvalue-1 space ``E_1`` by ``kappa``.

    ``eta`` must split as ``I (+) theta`` along ``E = E_1 (+) E_2``.  The result
    ``kappa (+) theta`` (in the original coordinates of ``E``) agrees with
    ``eta`` on ``H^2(D, E_2)``.  ``kappa`` defaults to the zero symbol and must
    itself lie in ``C_{E_1}``.
    """
    grid = default_grid() if grid is None else list(grid)
    E1 = eigenspace_one(eta, grid, tol=tol)
    k = E1.dim
    if k == 0:
        return eta
    e2 = nx.null_space(nx.dagger(E1.frame), atol=1e-9)
    u = np.hstack([E1.frame, e2])
    local = eta.conjugated(u)
    off = max(np.max(np.abs(local.coefficients[:, :k, k:]), initial=0.0),
              np.max(np.abs(local.coefficients[:, k:, :k]), initial=0.0))
    if off > tol:
        raise StructureError(f"eta couples E_1 and E_2 (off-diagonal coefficient {off:.3e})")
    if kappa is None:
        kappa = OperatorSymbol(np.zeros((1, k, k)))
    if kappa.coeff_dim != k:
        raise StructureError(f"kappa acts on dimension {kappa.coeff_dim}, E_1 has dimension {k}")
    if not in_class_CE(kappa, grid, tol=tol):
        raise PreconditionError("kappa is not in C_{E_1}")
    theta = OperatorSymbol(local.coefficients[:, k:, k:])
    repaired = kappa.direct_sum(theta)
    return repaired.conjugated(nx.dagger(u))


def represent_cogenerator(Q, T, max_degree, dim_e=1, grid=None, tol=1e-8):
    """A symbol in ``C_E`` whose compression to ``Q`` is the commuting cogenerator ``T``.

    Returns ``(psi, residual, witness)``.
    """
    sol = commutant_solve(Q, T, max_degree, dim_e=dim_e, tol=tol)
    psi = repair_symbol(sol.symbol, grid=grid, tol=tol)
    N = Q.ambient_dim // dim_e
    residual = nx.op_norm(compress(toeplitz_of_symbol(psi, N), Q) - T)
    return psi, residual, in_class_CE(psi, grid, tol=tol)


@dataclass
class CommutingModel:
    """``(P_Q M_z|_Q, P_Q M_{psi_2}|_Q, ...)`` on ``Q = {a_0 + a_1 z}``."""

    Q: SubspaceBasis
    symbols: list
    cogenerators: list
    dims: tuple


def _commuting_family(count, dim, rng, norm):
    if dim == 0:
        return [np.zeros((0, 0), dtype=complex) for _ in range(count)]
    x = nx.random_matrix(dim, rng)
    x /= nx.op_norm(x)
    out = []
    for _ in range(count):
        deg = int(rng.integers(1, 4))
        coeffs = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
        p = sum(c * np.linalg.matrix_power(x, k) for k, c in enumerate(coeffs))
        scale = nx.op_norm(p)
        out.append(p * (norm * rng.uniform(0.2, 1.0) / scale) if scale > 0 else p)
    return out


def build_commuting_model(n, dims=(1, 1), seed=None, B0=None, B1=None, norm=0.9, N=4):
    """The commuting family ``psi_j(z) = (B_{j,0} (+) 0) + z (0 (+) B_{j,1})``.

    ``B0`` and ``B1`` (lists of ``n - 1`` matrices) default to random commuting
    contractions built as polynomials in one random matrix, scaled to norm
    at most ``norm``.  ``B0`` entries must not have 1 as an eigenvalue.
    """
    if n < 1:
        raise PreconditionError("need at least one semigroup")
    e0, e1 = dims
    rng = np.random.default_rng(seed)
    B0 = _commuting_family(n - 1, e0, rng, norm) if B0 is None else [nx.as_matrix(b) for b in B0]
    B1 = _commuting_family(n - 1, e1, rng, norm) if B1 is None else [nx.as_matrix(b) for b in B1]
    if len(B0) != n - 1 or len(B1) != n - 1:
        raise PreconditionError(f"need {n - 1} matrices in each family")
    e = e0 + e1
    Q = jet_space(2, N, e)
    symbols = [OperatorSymbol.coordinate(e)]
    for b0, b1 in zip(B0, B1):
        if e0 and nx.min_singular(b0 - np.eye(e0)) <= EIGENVALUE_ONE_TOL:
            raise PreconditionError("B_{j,0} has 1 as an eigenvalue")
        a0 = np.zeros((e, e), dtype=complex)
        a1 = np.zeros((e, e), dtype=complex)
        a0[:e0, :e0] = b0
        a1[e0:, e0:] = b1
        symbols.append(OperatorSymbol(np.stack([a0, a1])))
    cogens = [compress(toeplitz_of_symbol(s, N), Q) for s in symbols]
    return CommutingModel(Q, symbols, cogens, (e0, e1))
