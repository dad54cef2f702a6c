"""Contractive semigroups and their cogenerators on finite-dimensional spaces.

A contraction ``T`` without eigenvalue 1 is the cogenerator of the semigroup
``T_t = exp(t A)`` with ``A = (T + I)(T - I)^{-1}``.  At finite dimension the
functional calculus ``phi_t(T)`` is exactly this matrix exponential, so no
radial limits are needed.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional
import logging

import numpy as np

from . import numerics as nx
from .exceptions import ConvergenceError, NotACogeneratorError, PreconditionError

log = logging.getLogger(__name__)

#: ``min_singular(T - I)`` at or below this counts as "1 is an eigenvalue".
EIGENVALUE_ONE_TOL = 1e-8
#: Default norm slack accepted for computed contractions.
NORM_SLACK = 1e-8
#: Times on which the semigroup law is sampled by default.
DEFAULT_TIME_GRID = (0.1, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class Contraction:
    """A square matrix with operator norm at most ``1 + norm_slack``."""

    matrix: np.ndarray
    norm_slack: float = NORM_SLACK

    def __post_init__(self):
        m = nx.as_matrix(self.matrix, "contraction")
        if m.shape[0] != m.shape[1]:
            raise PreconditionError(f"contraction must be square, got {m.shape}")
        norm = nx.op_norm(m)
        if norm > 1.0 + self.norm_slack:
            raise PreconditionError(f"operator norm {norm:.12g} exceeds 1 + {self.norm_slack:g}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def adjoint(self):
        return Contraction(nx.dagger(self.matrix), self.norm_slack)


def _matrix_of(T):
    if isinstance(T, Contraction):
        return T.matrix
    return nx.as_matrix(T)


@dataclass(frozen=True)
class SemigroupSampler:
    """A deterministic map ``t -> T_t`` on a space of dimension ``dimension``."""

    evaluate: Callable[[float], np.ndarray]
    dimension: int
    generator: Optional[np.ndarray] = field(default=None, compare=False)

    def __call__(self, t):
        return self.evaluate(t)

    def law_residuals(self, grid=DEFAULT_TIME_GRID):
        """Return the worst identity, semigroup-law and norm residuals on ``grid``."""
        ident = np.eye(self.dimension)
        at_zero = nx.op_norm(self.evaluate(0.0) - ident)
        law = 0.0
        norm_excess = 0.0
        values = {t: self.evaluate(t) for t in grid}
        for s in grid:
            norm_excess = max(norm_excess, nx.op_norm(values[s]) - 1.0)
            for t in grid:
                law = max(law, nx.op_norm(self.evaluate(s + t) - values[s] @ values[t]))
        return {"identity": at_zero, "law": law, "norm_excess": max(norm_excess, 0.0)}


class CogeneratorCheck(NamedTuple):
    ok: bool
    op_norm: float
    min_singular: float

    def __bool__(self):
        return self.ok


def is_cogenerator(T, tol=NORM_SLACK, eig_tol=EIGENVALUE_ONE_TOL):
    """Test ``||T|| <= 1 + tol`` and ``1`` not an eigenvalue of ``T``."""
    m = _matrix_of(T)
    norm = nx.op_norm(m)
    smin = nx.min_singular(m - np.eye(m.shape[0]))
    return CogeneratorCheck(norm <= 1.0 + tol and smin > eig_tol, norm, smin)


def mobius(X):
    """``(X + I)(X - I)^{-1}``; this map is its own inverse."""
    m = nx.as_matrix(X)
    ident = np.eye(m.shape[0])
    # (X + I) and (X - I)^{-1} commute
    return nx.solve(m - ident, m + ident, rtol=0.0)


def cayley_generator(T, eig_tol=EIGENVALUE_ONE_TOL):
    """Generator ``A = (T + I)(T - I)^{-1}`` of the semigroup with cogenerator ``T``."""
    m = _matrix_of(T)
    smin = nx.min_singular(m - np.eye(m.shape[0]))
    if smin <= eig_tol:
        raise NotACogeneratorError(
            f"1 is numerically an eigenvalue (min singular value of T - I is {smin:.3e})")
    a = mobius(m)
    abscissa = float(np.max(np.linalg.eigvals(a).real)) if a.size else 0.0
    if abscissa > 1e-8:
        log.warning("generator has spectral abscissa %.3e > 0; input is not a contraction", abscissa)
    return a


def semigroup_at(T, t):
    """``phi_t(T) = exp(t A)`` for the cogenerator ``T``."""
    if t < 0:
        raise PreconditionError(f"time must be non-negative, got {t}")
    return nx.expm(t * cayley_generator(T))


def sampler_from_cogenerator(T):
    a = cayley_generator(T)
    return SemigroupSampler(lambda t: nx.expm(t * a), a.shape[0], generator=a)


def _phi_small(Tt, t):
    # (T_t - (1 - t)I)(T_t - (1 + t)I)^{-1}; the factors commute
    ident = np.eye(Tt.shape[0])
    return np.linalg.solve(Tt - (1.0 + t) * ident, Tt - (1.0 - t) * ident)


def cogenerator_of(sampler, h=1e-2, floor=1e-12):
    """Recover the cogenerator ``T = lim_{t->0+} phi_t(T_t)``.

    ``phi_t(z) = (z - 1 + t)/(z - 1 - t)``.  The estimates at ``h, h/2, h/4``
    are combined by two rounds of Richardson extrapolation.  The base step is
    shrunk to ``2 h / ||A||`` when the generator size, estimated from
    ``||T_h - I|| / h``, exceeds 2.  The raw estimates must approach each
    other (first-order convergence halves the gap); a growing gap raises
    :class:`ConvergenceError`.
    """
    probe = nx.as_matrix(sampler(h))
    rate = nx.op_norm(probe - np.eye(probe.shape[0])) / h
    if rate > 2.0:
        h *= 2.0 / rate
    steps = [h, h / 2.0, h / 4.0]
    try:
        est = [_phi_small(nx.as_matrix(sampler(s)), s) for s in steps]
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"phi_t(T_t) is singular at small t: {exc}") from None
    gap1 = nx.op_norm(est[1] - est[0])
    gap2 = nx.op_norm(est[2] - est[1])
    if gap2 > max(gap1, floor):
        raise ConvergenceError(f"Richardson estimates diverge (gaps {gap1:.3e} -> {gap2:.3e})")
    first = [2.0 * est[1] - est[0], 2.0 * est[2] - est[1]]
    second = (4.0 * first[1] - first[0]) / 3.0
    return Contraction(second, norm_slack=max(NORM_SLACK, 10 * nx.op_norm(second - first[1])))


def purity_defect(T, horizon):
    """``||(T*)^n||`` for ``n = 1..horizon``."""
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    adj = nx.dagger(_matrix_of(T))
    out = np.empty(horizon)
    p = np.eye(adj.shape[0], dtype=complex)
    for n in range(horizon):
        p = p @ adj
        out[n] = nx.op_norm(p)
    return out


def is_pure(T, horizon=200, threshold=1e-6):
    return bool(purity_defect(T, horizon)[-1] < threshold)
