"""Doubly commuting isometry tuples and their 2^n-fold Wold-type decomposition.

Finite-dimensional isometries are unitary, so pure (c.n.u.) parts only exist
as truncated shifts.  A :class:`StructuredIsometryTuple` is a direct sum of
blocks, each a tensor product of *legs*: a truncated shift leg carries the
c.n.u. part of one semigroup index, a unitary leg carries commuting unitaries
for any number of indices.  A random unitary ``scramble`` hides the structure;
the construction keeps the subspace dimensions as ground truth.

For a truncated shift ``S_N`` the power ``S_N^N`` vanishes, so
``E = V^K V*^K`` with ``K`` at least the truncation degree is exactly the
projection onto the unitary part of ``V``.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict
import math

import numpy as np

from . import numerics as nx
from .cogenerator import semigroup_at
from .exceptions import DecompositionError, HeadroomError, PreconditionError
from .hardy import SubspaceBasis, margin_frame, shift_matrix, shift_semigroup_matrix
from .normal import normal_model

ROUNDING_TOL = 1e-6


@dataclass(frozen=True)
class ShiftLeg:
    """Truncated shift of degree ``N`` carrying the c.n.u. part of semigroup ``index``."""

    index: int
    N: int = 6

    @property
    def dim(self):
        return self.N


@dataclass(frozen=True)
class UnitaryLeg:
    """A leg of dimension ``dim`` on which semigroup ``j`` acts by ``unitaries[j]`` (identity if absent)."""

    dim: int
    unitaries: Dict[int, np.ndarray] = field(default_factory=dict)


def _leg_factor(leg, j, power=1, t=None):
    if isinstance(leg, ShiftLeg):
        if leg.index != j:
            return np.eye(leg.N, dtype=complex)
        if t is not None:
            return shift_semigroup_matrix(t, leg.N)
        return np.linalg.matrix_power(shift_matrix(leg.N), power)
    u = leg.unitaries.get(j)
    if u is None:
        return np.eye(leg.dim, dtype=complex)
    if t is not None:
        return semigroup_at(u, t)
    return np.linalg.matrix_power(u, power)


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _block_diag(mats):
    dim = sum(m.shape[0] for m in mats)
    out = np.zeros((dim, sum(m.shape[1] for m in mats)), dtype=complex)
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


@dataclass
class StructuredIsometryTuple:
    """Direct sum of tensor blocks of legs, conjugated by ``scramble``."""

    n: int
    blocks: list
    scramble: np.ndarray = None
    margin: int = 2

    def __post_init__(self):
        for b, legs in enumerate(self.blocks):
            shifted = [leg.index for leg in legs if isinstance(leg, ShiftLeg)]
            if len(shifted) != len(set(shifted)):
                raise PreconditionError(f"block {b}: a semigroup index has two shift legs")
            for leg in legs:
                if isinstance(leg, ShiftLeg):
                    if not 0 <= leg.index < self.n:
                        raise PreconditionError(f"shift leg index {leg.index} out of range")
                    if leg.N <= self.margin:
                        raise PreconditionError(f"shift leg N={leg.N} leaves no margin below {self.margin}")
                else:
                    for j, u in leg.unitaries.items():
                        if j in shifted:
                            raise PreconditionError(f"block {b}: index {j} is both shifted and unitary")
                        if not nx.is_unitary(u, 1e-9) or u.shape[0] != leg.dim:
                            raise PreconditionError(f"block {b}: leg unitary for index {j} is not a {leg.dim}x{leg.dim} unitary")
        if self.scramble is None:
            self.scramble = np.eye(self.dim, dtype=complex)
        self.scramble = nx.as_matrix(self.scramble)
        if self.scramble.shape != (self.dim, self.dim) or not nx.is_unitary(self.scramble, 1e-9):
            raise PreconditionError("scramble must be a unitary on the full space")

    @property
    def dim(self):
        return sum(self.block_dims)

    @property
    def block_dims(self):
        return [math.prod(leg.dim for leg in legs) for legs in self.blocks]

    def shifted_indices(self, b):
        return frozenset(leg.index for leg in self.blocks[b] if isinstance(leg, ShiftLeg))

    @property
    def ground_truth(self):
        """Dimension of the part on which exactly the indices in ``A`` are c.n.u."""
        truth = {frozenset(a): 0 for a in all_subsets(self.n)}
        for b, d in enumerate(self.block_dims):
            truth[self.shifted_indices(b)] += d
        return truth

    @property
    def max_shift_degree(self):
        return max([leg.N for legs in self.blocks for leg in legs if isinstance(leg, ShiftLeg)], default=1)

    def margin_basis(self):
        """Frame of the subspace whose shift-leg degrees stay below ``N - margin``."""
        parts = []
        for legs in self.blocks:
            parts.append(_kron_all([
                margin_frame(leg.N, 1, leg.N - self.margin) if isinstance(leg, ShiftLeg)
                else np.eye(leg.dim, dtype=complex)
                for leg in legs]))
        return SubspaceBasis(self.scramble @ _block_diag(parts))

    def to_dict(self, scramble_seed=None):
        blocks = []
        for legs in self.blocks:
            out = []
            for leg in legs:
                if isinstance(leg, ShiftLeg):
                    out.append({"type": "shift", "index": leg.index, "N": leg.N})
                else:
                    out.append({"type": "unitary", "dim": leg.dim,
                                "unitaries": {str(j): nx.matrix_to_dict(u) for j, u in leg.unitaries.items()}})
            blocks.append(out)
        d = {"n": self.n, "margin": self.margin, "blocks": blocks}
        if scramble_seed is not None:
            d["scramble_seed"] = scramble_seed
        else:
            d["scramble"] = nx.matrix_to_dict(self.scramble)
        return d

    @classmethod
    def from_dict(cls, d):
        blocks = []
        for legs in d["blocks"]:
            out = []
            for leg in legs:
                if leg["type"] == "shift":
                    out.append(ShiftLeg(int(leg["index"]), int(leg["N"])))
                elif leg["type"] == "unitary":
                    out.append(UnitaryLeg(int(leg["dim"]), {int(j): nx.matrix_from_dict(u)
                                                            for j, u in leg.get("unitaries", {}).items()}))
                else:
                    raise PreconditionError(f"unknown leg type {leg['type']!r}")
            blocks.append(out)
        dim = sum(math.prod(l.dim for l in legs) for legs in blocks)
        if "scramble" in d:
            scramble = nx.matrix_from_dict(d["scramble"])
        elif "scramble_seed" in d:
            scramble = nx.random_unitary(dim, np.random.default_rng(int(d["scramble_seed"])))
        else:
            scramble = None
        return cls(int(d["n"]), blocks, scramble, int(d.get("margin", 2)))


def all_subsets(n):
    for k in range(n + 1):
        yield from combinations(range(n), k)


def realize(tup, m=1, t=None):
    """Cogenerator powers ``V_j^{m_j}`` (or semigroup members ``V_{j,t}`` when ``t`` is given).

    ``m`` is an int or one power per index.  Shift legs use the truncated
    shift, or the truncated ``M_{phi_t o z}`` for times.
    """
    powers = [m] * tup.n if np.isscalar(m) else list(m)
    if len(powers) != tup.n:
        raise PreconditionError(f"need {tup.n} powers, got {len(powers)}")
    w = tup.scramble
    out = []
    for j in range(tup.n):
        parts = [_kron_all([_leg_factor(leg, j, powers[j], t) for leg in legs]) for legs in tup.blocks]
        out.append(w @ _block_diag(parts) @ nx.dagger(w))
    return out


def double_commutation_residual(ops, frame=None):
    """Largest ``||[V_i, V_j]||`` and ``||[V_i, V_j*]||`` over ``i != j`` (restricted to ``frame``)."""
    worst = 0.0
    for i in range(len(ops)):
        for j in range(len(ops)):
            if i == j:
                continue
            for c in (nx.commutator(ops[i], ops[j]), ops[i] @ nx.dagger(ops[j]) - nx.dagger(ops[j]) @ ops[i]):
                worst = max(worst, nx.op_norm(c if frame is None else c @ frame))
    return worst


def _round_projection(p, tol=ROUNDING_TOL):
    w, u = nx.herm_eig(0.5 * (p + nx.dagger(p)), tol=1e-6)
    if np.any((np.abs(w) > tol) & (np.abs(w - 1.0) > tol)):
        bad = w[(np.abs(w) > tol) & (np.abs(w - 1.0) > tol)]
        raise DecompositionError(f"not a projection: eigenvalues {bad[:4]} are not within {tol:g} of 0 or 1")
    keep = np.abs(w - 1.0) <= tol
    f = u[:, keep]
    return f @ nx.dagger(f), f


def asymptotic_unitary_projection(V, n_max, margin_basis=None, tol=1e-8):
    """Projection onto the unitary part of ``V``, computed as ``V^n_max V*^n_max``.

    ``V`` must be isometric on ``margin_basis``.  The result must reduce ``V``;
    otherwise the powers have not exhausted the shift part and
    :class:`HeadroomError` is raised.
    """
    V = nx.as_matrix(V)
    dim = V.shape[0]
    if margin_basis is not None:
        f = margin_basis.frame
        iso = nx.op_norm((nx.dagger(V) @ V - np.eye(dim)) @ f)
        if iso > tol:
            raise PreconditionError(f"V is not isometric on the margin (defect {iso:.3e})")
    vp = np.linalg.matrix_power(V, n_max)
    e, _ = _round_projection(vp @ nx.dagger(vp))
    reducing = max(nx.op_norm(nx.commutator(e, V)), nx.op_norm(nx.commutator(e, nx.dagger(V))))
    if reducing > max(tol, 1e-6):
        raise HeadroomError(
            f"V^{n_max} V*^{n_max} does not reduce V (||[E, V]|| = {reducing:.3e}); "
            "n_max must reach the truncation degree of the shift part")
    return e


@dataclass
class SlocinskiDecomposition:
    projections: dict
    dims: dict
    classification: dict
    residuals: dict

    def nonzero(self):
        return {a: d for a, d in self.dims.items() if d}


def _subset_label(a):
    return "{" + ",".join(str(i + 1) for i in sorted(a)) + "}"


def slocinski_decompose(tup, n_max=None, tol=1e-8):
    """Split the space into ``2^n`` joint reducing subspaces ``H_A``.

    ``P_A = prod_{i in A}(I - E_i) prod_{i not in A} E_i`` with ``E_i`` the
    unitary-part projection of ``V_i``.  On ``H_A`` each ``V_i`` is tagged
    ``"c.n.u."`` (co-isometric defect present) or ``"unitary"``.
    """
    n_max = tup.max_shift_degree if n_max is None else n_max
    ops = realize(tup, 1)
    margin = tup.margin_basis()
    f = margin.frame
    dc = double_commutation_residual(ops, f)
    if dc > tol:
        raise PreconditionError(f"tuple is not doubly commuting on the margin (residual {dc:.3e})")
    ident = np.eye(tup.dim)
    E = [asymptotic_unitary_projection(v, n_max, margin, tol) for v in ops]
    projections, dims, classification = {}, {}, {}
    for a in all_subsets(tup.n):
        p = ident.copy()
        for i in range(tup.n):
            p = p @ ((ident - E[i]) if i in a else E[i])
        p, frame = _round_projection(p)
        key = frozenset(a)
        projections[key] = p
        dims[key] = frame.shape[1]
        if frame.shape[1]:
            for i, v in enumerate(ops):
                d_iso = nx.op_norm(nx.dagger(frame) @ (nx.dagger(v) @ v - ident) @ frame)
                d_co = nx.op_norm(nx.dagger(frame) @ (v @ nx.dagger(v) - ident) @ frame)
                classification[(key, i)] = "unitary" if max(d_iso, d_co) <= tol else "c.n.u."
    keys = [a for a in projections if dims[a]]  # rounded zero projections are exactly zero
    total = sum(projections.values())
    ortho = max([nx.op_norm(projections[a] @ projections[b])
                 for x, a in enumerate(keys) for b in keys[x + 1:]], default=0.0)
    reduce_res = max([nx.op_norm(nx.commutator(projections[a], v) @ f) for a in keys for v in ops],
                     default=0.0)
    residuals = {
        "completeness": nx.op_norm(total - ident),
        "orthogonality": ortho,
        "reducing": reduce_res,
        "double_commutation": dc,
    }
    if residuals["completeness"] > tol or ortho > tol:
        raise DecompositionError(f"projections fail to decompose the space: {residuals}")
    return SlocinskiDecomposition(projections, dims, classification, residuals)


def classification_agrees(dec, n):
    """Every nonzero ``H_A`` has ``V_i`` c.n.u. exactly for ``i in A``."""
    for (a, i), tag in dec.classification.items():
        if (tag == "c.n.u.") != (i in a):
            return False
    return True


def classify_multishift(tup, n_max=None, tol=1e-8, dec=None):
    """Whether the tuple is a multi-shift, with its multiplicity.

    The multiplicity is the dimension of the joint wandering subspace
    ``range prod_j (I - V_j V_j*)``.  A decomposition already computed for
    ``tup`` can be passed as ``dec``.
    """
    dec = slocinski_decompose(tup, n_max, tol) if dec is None else dec
    full = frozenset(range(tup.n))
    flag = all(d == 0 for a, d in dec.dims.items() if a != full)
    if not flag:
        return False, 0
    ops = realize(tup, 1)
    ident = np.eye(tup.dim)
    w = ident.copy()
    for v in ops:
        w = w @ (ident - v @ nx.dagger(v))
    _, frame = _round_projection(w)
    return True, frame.shape[1]


def random_leg_unitaries(indices, dim, rng, gap=0.05):
    """Commuting unitaries (shared eigenbasis) for ``indices`` with spectra avoiding 1."""
    basis = nx.random_unitary(dim, rng)
    out = {}
    for j in indices:
        angles = rng.uniform(gap, 2 * np.pi - gap, dim)
        out[j] = (basis * np.exp(1j * angles)) @ nx.dagger(basis)
    return out


def subset_pattern_tuple(n, A, seed=None, N=6, unitary_dim=2, margin=2):
    """Single-block tuple where exactly the indices in ``A`` are c.n.u."""
    rng = np.random.default_rng(seed)
    legs = [ShiftLeg(j, N) for j in sorted(A)]
    rest = [j for j in range(n) if j not in A]
    legs.append(UnitaryLeg(unitary_dim, random_leg_unitaries(rest, unitary_dim, rng)))
    dim = math.prod(leg.dim for leg in legs)
    return StructuredIsometryTuple(n, [legs], nx.random_unitary(dim, rng), margin)


def direct_sum_tuple(n, patterns, seed=None, N=4, unitary_dim=1, margin=2):
    """Direct sum of single-block patterns, one block per entry of ``patterns``."""
    rng = np.random.default_rng(seed)
    blocks = []
    for A in patterns:
        legs = [ShiftLeg(j, N) for j in sorted(A)]
        rest = [j for j in range(n) if j not in A]
        legs.append(UnitaryLeg(unitary_dim, random_leg_unitaries(rest, unitary_dim, rng)))
        blocks.append(legs)
    dim = sum(math.prod(leg.dim for leg in legs) for legs in blocks)
    return StructuredIsometryTuple(n, blocks, nx.random_unitary(dim, rng), margin)


@dataclass
class MixedModel:
    model: object
    reassembled: list
    residual: float


def mixed_model(tup, seed=0):
    """Spectral model of the unitary leg of a single-block tuple, reassembled with its shift legs.

    The commuting unitaries carried by the unitary leg go through
    :func:`normal_model`; rebuilding ``V_j`` from the model must reproduce
    :func:`realize` on the margin.
    """
    if len(tup.blocks) != 1:
        raise PreconditionError("mixed model needs a single-block tuple")
    legs = tup.blocks[0]
    uleg = [leg for leg in legs if isinstance(leg, UnitaryLeg)]
    if len(uleg) != 1:
        raise PreconditionError("mixed model needs exactly one unitary leg")
    uleg = uleg[0]
    indices = sorted(uleg.unitaries)
    model = normal_model([uleg.unitaries[j] for j in indices], seed=seed) if indices else None
    w = tup.scramble
    rebuilt = []
    for j in range(tup.n):
        factors = []
        for leg in legs:
            if leg is uleg and j in uleg.unitaries:
                factors.append(model.operator(indices.index(j)))
            else:
                factors.append(_leg_factor(leg, j))
        rebuilt.append(w @ _kron_all(factors) @ nx.dagger(w))
    f = tup.margin_basis().frame
    residual = max(nx.op_norm((a - b) @ f) for a, b in zip(rebuilt, realize(tup, 1)))
    return MixedModel(model, rebuilt, residual)
