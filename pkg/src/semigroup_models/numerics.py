"""Dense complex linear-algebra kernels shared by every other module.

All routines take and return ``numpy`` arrays of dtype ``complex128`` (or
real vectors for spectra).  Factorizations go through LAPACK; the matrix
exponential is a scaling-and-squaring Padé implementation, and a cyclic
Jacobi eigensolver is kept as an independent route for small matrices.
"""

import json
import math

import numpy as np

from .exceptions import DimensionError, NotPSDError, PreconditionError, RankDeficiencyError

#: Absolute tolerance used on unit-normalized operators when none is given.
DEFAULT_TOL = 1e-9
#: Negative eigenvalues above ``-PSD_CLIP`` are rounded to zero by :func:`psd_sqrt`.
PSD_CLIP = 1e-10

# Padé (13, 13) numerator coefficients and the scaling threshold for it.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D complex array (a copy only if needed)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError(f"{name} has non-finite entries")
    return m


def _square(a, name="matrix"):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def op_norm(a):
    """Operator (spectral) norm: the largest singular value."""
    m = as_matrix(a)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def svd(a, full_matrices=False):
    """Return ``(U, s, Vh)`` with ``a = U @ diag(s) @ Vh`` and ``s`` descending."""
    m = as_matrix(a)
    return np.linalg.svd(m, full_matrices=full_matrices)


def singular_values(a):
    m = as_matrix(a)
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def min_singular(a):
    s = singular_values(a)
    return float(s[-1]) if s.size else 0.0


def numerical_rank(a, rtol=1e-9):
    """Count singular values above ``rtol`` times the largest one."""
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def orth(a, rtol=1e-9):
    """Orthonormal basis of the column space of ``a``."""
    m = as_matrix(a)
    if m.size == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    return u[:, s > rtol * s[0]]


def null_space(a, atol=1e-9):
    """Orthonormal basis of ``{x : a x = 0}``, singular values ``<= atol`` count as zero."""
    m = as_matrix(a)
    n = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    rank = int(np.count_nonzero(s > atol))
    return dagger(vh[rank:])


def qr(a):
    """Reduced QR with the diagonal of ``R`` made real and non-negative."""
    m = as_matrix(a)
    q, r = np.linalg.qr(m)
    d = np.diag(r).copy()
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    q = q * phase
    r = np.conj(phase)[:, None] * r
    return q, r


def solve(a, b, rtol=1e-13):
    """Solve ``a x = b`` for square ``a``.

    Raises :class:`RankDeficiencyError` (carrying the computed rank) when the
    smallest singular value of ``a`` is below ``rtol`` times the largest.
    """
    a = _square(a, "a")
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"cannot solve {a.shape} system with rhs {b.shape}")
    s = singular_values(a)
    if s.size and (s[0] == 0.0 or s[-1] <= rtol * s[0]):
        rank = numerical_rank(a, rtol)
        raise RankDeficiencyError(f"singular system (rank {rank} of {a.shape[0]})", rank=rank)
    return np.linalg.solve(a, b)


def expm(a):
    """Matrix exponential by scaling and squaring with the (13, 13) Padé approximant."""
    a = _square(a, "A")
    n = a.shape[0]
    ident = np.eye(n, dtype=complex)
    if n == 0:
        return ident
    norm = op_norm(a)
    s = 0
    if norm > _THETA13:
        s = int(math.ceil(math.log2(norm / _THETA13)))
    x = a / (2.0 ** s)
    b = _PADE13
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
             + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident)
    v = (x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2)
         + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def hermiticity_defect(h):
    h = as_matrix(h)
    return op_norm(h - dagger(h))


def herm_eig(h, tol=DEFAULT_TOL, method="lapack"):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    ``method="jacobi"`` uses :func:`jacobi_eigh` instead of LAPACK.
    """
    h = _square(h, "H")
    scale = max(1.0, op_norm(h))
    defect = hermiticity_defect(h)
    if defect > tol * scale:
        raise PreconditionError(f"matrix is not Hermitian (||H - H*|| = {defect:.3e})")
    h = 0.5 * (h + dagger(h))
    if method == "jacobi":
        return jacobi_eigh(h)
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    w, u = np.linalg.eigh(h)
    return w, u


def jacobi_eigh(h, max_sweeps=60):
    """Cyclic Jacobi eigensolver for a Hermitian matrix.

    Each 2x2 pivot is first made real by a diagonal phase and then annihilated
    by a real plane rotation.  Returns ascending eigenvalues and a unitary whose
    columns are the eigenvectors.
    """
    a = np.array(h, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        w = np.real(np.diag(a)).copy()
        order = np.argsort(w, kind="stable")
        return w[order], v[:, order]
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= eps * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                mag = abs(b)
                if mag <= eps * eps * scale:
                    continue
                phase = b / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = a[:, [p, q]] @ g
                a[:, p], a[:, q] = cols[:, 0], cols[:, 1]
                rows = dagger(g) @ a[[p, q], :]
                a[p, :], a[q, :] = rows[0], rows[1]
                a[p, q] = a[q, p] = 0.0
                vc = v[:, [p, q]] @ g
                v[:, p], v[:, q] = vc[:, 0], vc[:, 1]
    w = np.real(np.diag(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def psd_sqrt(h, tol=DEFAULT_TOL, clip=PSD_CLIP):
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in ``[-clip, 0)`` are rounded to zero; anything more negative
    raises :class:`NotPSDError`.
    """
    w, u = herm_eig(h, tol=tol)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if w.size and w[0] < -clip * scale:
        raise NotPSDError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    r = (u * root) @ dagger(u)
    return 0.5 * (r + dagger(r))


def is_unitary(u, tol=DEFAULT_TOL):
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return False
    return op_norm(dagger(u) @ u - np.eye(u.shape[0])) <= tol


def random_unitary(n, rng):
    """Haar-distributed unitary from a QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_matrix(n, rng, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def commutator(a, b):
    return a @ b - b @ a


# -- JSON ------------------------------------------------------------------

def matrix_to_dict(a):
    a = as_matrix(a)
    flat = a.reshape(-1)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_dict(d):
    try:
        rows, cols, data = int(d["rows"]), int(d["cols"]), d["data"]
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"malformed matrix record: {exc}") from None
    if len(data) != rows * cols:
        raise DimensionError(f"matrix record has {len(data)} entries, expected {rows * cols}")
    arr = np.array([complex(re, im) for re, im in data], dtype=complex)
    return as_matrix(arr.reshape(rows, cols))


def matrix_to_json(a):
    return json.dumps(matrix_to_dict(a))


def matrix_from_json(text):
    return matrix_from_dict(json.loads(text))
