"""Spectral models of commuting normal contraction tuples.

A commuting tuple of normal matrices is simultaneously diagonalized,
``T_j = gamma diag(psi_j) gamma*``, which realizes the multiplication-operator
model on a counting measure over the eigenbasis.  The semigroups are then
``gamma diag(phi_t(psi_j)) gamma*`` with ``phi_t(w) = exp(t (w + 1)/(w - 1))``.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .exceptions import NotACogeneratorError, PreconditionError

CLUSTER_TOL = 1e-6
ATOM_AT_ONE_TOL = 1e-8


@dataclass
class DiscreteMeasureModel:
    """Atoms ``x_k`` with weights ``mu_k``, values ``psi_j(x_k)`` and the conjugating unitary."""

    atoms: list
    weights: np.ndarray
    values: np.ndarray  # shape (n, len(atoms))
    gamma: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def multiplication_operator(self, j):
        return np.diag(self.values[j])

    def operator(self, j):
        """``gamma M_{psi_j} gamma*``."""
        return (self.gamma * self.values[j]) @ nx.dagger(self.gamma)

    def to_dict(self):
        return {
            "atoms": list(self.atoms),
            "weights": [float(w) for w in self.weights],
            "values": [[[float(v.real), float(v.imag)] for v in row] for row in self.values],
            "gamma": nx.matrix_to_dict(self.gamma),
        }

    @classmethod
    def from_dict(cls, d):
        values = np.array([[complex(re, im) for re, im in row] for row in d["values"]])
        return cls(list(d["atoms"]), np.asarray(d["weights"], dtype=float), values,
                   nx.matrix_from_dict(d["gamma"]))


def _check_normal_commuting(ts, tol):
    scale = max([1.0] + [nx.op_norm(t) for t in ts])
    for j, t in enumerate(ts):
        defect = nx.op_norm(t @ nx.dagger(t) - nx.dagger(t) @ t)
        if defect > tol * scale:
            raise PreconditionError(f"T_{j + 1} is not normal (defect {defect:.3e})")
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            c = nx.op_norm(nx.commutator(ts[i], ts[j]))
            if c > tol * scale:
                raise PreconditionError(f"T_{i + 1} and T_{j + 1} do not commute (||[.,.]|| = {c:.3e})")


def _hermitian_combination(ts, rng):
    h = np.zeros_like(ts[0])
    for t in ts:
        a, b = rng.uniform(-1.0, 1.0, 2)
        re = 0.5 * (t + nx.dagger(t))
        im = -0.5j * (t - nx.dagger(t))
        h = h + a * re + b * im
    return 0.5 * (h + nx.dagger(h))


def _clusters(w, tol):
    groups = [[0]]
    for k in range(1, w.size):
        if w[k] - w[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _diagonalize(ts, rng, depth):
    dim = ts[0].shape[0]
    if dim == 1:
        return np.eye(1, dtype=complex)
    scale = max([1.0] + [nx.op_norm(t) for t in ts])
    h = _hermitian_combination(ts, rng)
    w, u = nx.herm_eig(h)
    if depth > 8:
        return u
    blocks = []
    for idx in _clusters(w, CLUSTER_TOL * scale):
        v = u[:, idx]
        if len(idx) == 1:
            blocks.append(v)
            continue
        local = [nx.dagger(v) @ t @ v for t in ts]
        if all(nx.op_norm(m - np.trace(m) / len(idx) * np.eye(len(idx))) <= CLUSTER_TOL * scale
               for m in local):
            blocks.append(v)
        else:
            blocks.append(v @ _diagonalize(local, rng, depth + 1))
    return np.hstack(blocks)


def joint_diagonalize(ts, seed=0, tol=1e-8):
    """Unitary ``gamma`` with every ``gamma* T_j gamma`` diagonal.

    A random Hermitian combination of the real and imaginary parts is
    diagonalized; eigenvalue clusters closer than ``1e-6`` are split
    recursively with fresh combinations of the restricted operators.
    Returns ``(gamma, values)`` with ``values[j]`` the diagonal of
    ``gamma* T_j gamma``.
    """
    ts = [nx.as_matrix(t) for t in ts]
    if not ts:
        raise PreconditionError("empty tuple")
    _check_normal_commuting(ts, tol)
    rng = np.random.default_rng(seed)
    gamma = _diagonalize(ts, rng, 0)
    values = np.array([np.diag(nx.dagger(gamma) @ t @ gamma) for t in ts])
    return gamma, values


def off_diagonal_residual(ts, gamma):
    worst = 0.0
    for t in ts:
        d = nx.dagger(gamma) @ t @ gamma
        worst = max(worst, nx.op_norm(d - np.diag(np.diag(d))))
    return worst


def normal_model(ts, seed=0, tol=1e-8):
    """Counting-measure model of a commuting normal tuple of cogenerators.

    Raises :class:`NotACogeneratorError` naming ``j`` and ``k`` when some
    ``psi_j(x_k)`` lies within ``1e-8`` of 1.
    """
    gamma, values = joint_diagonalize(ts, seed=seed, tol=tol)
    hits = np.argwhere(np.abs(values - 1.0) <= ATOM_AT_ONE_TOL)
    if hits.size:
        j, k = (int(v) for v in hits[0])
        raise NotACogeneratorError(f"T_{j + 1} has an atom at 1 (atom {k}): not a cogenerator")
    dim = gamma.shape[0]
    return DiscreteMeasureModel(list(range(dim)), np.ones(dim), values, gamma)


def phi_t_values(values, t):
    """``phi_t(w) = exp(t (w + 1)/(w - 1))`` elementwise."""
    w = np.asarray(values, dtype=complex)
    return np.exp(t * (w + 1.0) / (w - 1.0))


def model_semigroup_at(model, j, t):
    """``gamma diag(phi_t(psi_j)) gamma*``."""
    if t < 0:
        raise PreconditionError(f"time must be non-negative, got {t}")
    return (model.gamma * phi_t_values(model.values[j], t)) @ nx.dagger(model.gamma)


def random_commuting_normal(dim, n, rng, kind="normal"):
    """A commuting normal tuple of contractions with no eigenvalue at 1.

    ``kind`` is ``"normal"`` (values in the disc), ``"unitary"`` (values on
    the circle) or ``"selfadjoint"`` (values in ``[-1, 1)``).  Degenerate
    eigenvalues are included on purpose.  Returns ``(tuple, gamma, values)``.
    """
    gamma = nx.random_unitary(dim, rng)
    distinct = max(1, int(rng.integers(max(1, dim // 2), dim + 1)))
    labels = rng.integers(0, distinct, dim)
    values = np.empty((n, dim), dtype=complex)
    for j in range(n):
        if kind == "unitary":
            base = np.exp(1j * rng.uniform(0.05, 2 * np.pi - 0.05, distinct))
        elif kind == "selfadjoint":
            base = rng.uniform(-1.0, 0.95, distinct).astype(complex)
        else:
            base = np.sqrt(rng.uniform(0, 0.95, distinct)) * np.exp(2j * np.pi * rng.uniform(size=distinct))
        values[j] = base[labels]
    ts = [(gamma * values[j]) @ nx.dagger(gamma) for j in range(n)]
    return ts, gamma, values
