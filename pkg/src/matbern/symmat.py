"""Dense real symmetric matrices and their spectral calculus.

Everything here is built on a cyclic Jacobi eigensolver that works on
stacks of matrices (any leading batch shape), so the streaming code can
diagonalise one matrix at a time while the Monte Carlo code diagonalises
an entire sample path in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    AsymmetryError,
    ConvergenceError,
    DimMismatchError,
    DomainError,
    NonFiniteError,
)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
POLISH_SWEEPS = 1
DEFAULT_SYM_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class SymMat:
    """A d x d real symmetric matrix.

    Construct through :func:`sym_from_dense` (or :meth:`SymMat.of`); the
    stored array is exactly symmetric and read-only.
    """

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def of(cls, raw, atol: float = DEFAULT_SYM_ATOL) -> "SymMat":
        return sym_from_dense(raw, atol)

    @classmethod
    def zeros(cls, d: int) -> "SymMat":
        return _wrap(np.zeros((d, d)))

    @classmethod
    def identity(cls, d: int) -> "SymMat":
        return _wrap(np.eye(d))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymMat):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __add__(self, other: "SymMat") -> "SymMat":
        _check_same_dim(self, other)
        return _wrap(self.entries + other.entries)

    def __sub__(self, other: "SymMat") -> "SymMat":
        _check_same_dim(self, other)
        return _wrap(self.entries - other.entries)

    def __neg__(self) -> "SymMat":
        return _wrap(-self.entries)

    def __mul__(self, c: float) -> "SymMat":
        return _wrap(float(c) * self.entries)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "SymMat":
        return _wrap(self.entries / float(c))

    def square(self) -> "SymMat":
        return _wrap(_symmetrize(self.entries @ self.entries))

    def tolist(self):
        return self.entries.tolist()

    def __repr__(self):
        return f"SymMat({self.entries.tolist()!r})"


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Ascending eigenvalues and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + np.swapaxes(a, -1, -2)) / 2


def _wrap(a: np.ndarray) -> SymMat:
    # internal constructor for arrays that are symmetric by construction
    a = np.array(_symmetrize(a), dtype=float)
    a.setflags(write=False)
    return SymMat(a)


def _check_same_dim(a: SymMat, b: SymMat) -> None:
    if a.dim != b.dim:
        raise DimMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def sym_from_dense(raw, atol: float = DEFAULT_SYM_ATOL) -> SymMat:
    """Validate a square array and return its exactly symmetric part.

    ``atol`` is relative to the largest entry magnitude: the input is
    accepted when ``max |raw[i,j] - raw[j,i]| <= atol * max |raw|``.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimMismatchError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has NaN or infinite entries")
    skew = float(np.max(np.abs(a - a.T)))
    scale = float(np.max(np.abs(a)))
    if skew > atol * scale:
        raise AsymmetryError(f"asymmetry {skew:.3g} exceeds tolerance {atol * scale:.3g}")
    return _wrap(a)


def as_array(a) -> np.ndarray:
    if isinstance(a, SymMat):
        return a.entries
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# Jacobi eigensolver
# ---------------------------------------------------------------------------


def _rotation(app, aqq, apq):
    """Cosine, sine and tangent zeroing apq; identity where apq == 0."""
    nz = apq != 0
    safe = np.where(nz, apq, 1.0)
    with np.errstate(over="ignore"):
        tau = (aqq - app) / (2.0 * safe)
        t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
    t = np.where(nz, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c, t


def jacobi_eigh(a, vectors: bool = True, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalisation of a stack of symmetric matrices.

    Parameters
    ----------
    a : array_like, shape (..., d, d)
        Symmetric input; only exact symmetry is assumed, not checked.
    vectors : bool
        Also accumulate the rotations into eigenvectors.
    tol, max_sweeps
        Stop once the off-diagonal Frobenius mass is at most
        ``tol * ||a||_F``; one further polishing sweep then runs.

    Returns
    -------
    w : ndarray, shape (..., d)
        Eigenvalues in the order the sweeps leave them (unsorted).
    v : ndarray, shape (..., d, d) or None
        Columns are eigenvectors, ``a = v @ diag(w) @ v.T``.

    Raises
    ------
    ConvergenceError
        If some matrix keeps off-diagonal Frobenius mass above
        ``tol * ||a||_F`` after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float, copy=True)
    d = a.shape[-1]
    v = np.broadcast_to(np.eye(d), a.shape).copy() if vectors else None
    if d == 1:
        return a[..., 0, :].copy(), v
    target = tol * np.sqrt(np.sum(a * a, axis=(-2, -1)))
    offmask = ~np.eye(d, dtype=bool)
    pairs = [(p, q) for p in range(d - 1) for q in range(p + 1, d)]
    polish = POLISH_SWEEPS
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.where(offmask, a * a, 0.0), axis=(-2, -1)))
        if np.all(off <= target):
            # convergence is quadratic, so one more sweep takes the
            # remaining off-diagonal mass down to rounding level
            if polish == 0 or not np.any(off > 0):
                break
            polish -= 1
        for p, q in pairs:
            app = a[..., p, p].copy()
            aqq = a[..., q, q].copy()
            apq = a[..., p, q].copy()
            c, s, t = _rotation(app, aqq, apq)
            cc = c[..., None]
            ss = s[..., None]
            ap = a[..., :, p].copy()
            aq = a[..., :, q].copy()
            a[..., :, p] = cc * ap - ss * aq
            a[..., :, q] = ss * ap + cc * aq
            ap = a[..., p, :].copy()
            aq = a[..., q, :].copy()
            a[..., p, :] = cc * ap - ss * aq
            a[..., q, :] = ss * ap + cc * aq
            a[..., p, p] = app - t * apq
            a[..., q, q] = aqq + t * apq
            a[..., p, q] = 0.0
            a[..., q, p] = 0.0
            if vectors:
                vp = v[..., :, p].copy()
                vq = v[..., :, q]
                v[..., :, p] = cc * vp - ss * vq
                v[..., :, q] = ss * vp + cc * vq
    else:
        off = np.sqrt(np.sum(np.where(offmask, a * a, 0.0), axis=(-2, -1)))
        if not np.all(off <= target):
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps "
                f"(off-diagonal mass {float(np.max(off - target)):.3g} above target)")
    return np.diagonal(a, axis1=-2, axis2=-1).copy(), v


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix or stack of them."""
    w, _ = jacobi_eigh(as_array(a), vectors=False)
    return np.sort(w, axis=-1)


def _canonical_order(w: np.ndarray, v: np.ndarray):
    # sign: first non-negligible component positive
    for j in range(v.shape[1]):
        col = v[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12)
        if big.size and col[big[0]] < 0:
            v[:, j] = -col
    # ascending eigenvalues; exact ties ordered by descending
    # lexicographic eigenvector so that diagonal input keeps the basis order
    keys = [-v[i] for i in range(v.shape[0] - 1, -1, -1)] + [w]
    order = np.lexsort(keys)
    return w[order], v[:, order]


def eig_sym(a: SymMat) -> SpectralDecomp:
    """Full eigendecomposition with a deterministic ordering and sign."""
    w, v = jacobi_eigh(as_array(a), vectors=True)
    w, v = _canonical_order(w, v)
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomp(w, v)


# ---------------------------------------------------------------------------
# spectral functions
# ---------------------------------------------------------------------------


def spectral_fn(a: SymMat, f: Callable[[np.ndarray], np.ndarray],
                domain: tuple[float, float] | None = None) -> SymMat:
    """Lift a scalar function to ``U diag(f(lambda)) U^T``.

    ``domain`` is an open interval; eigenvalues outside it, or any
    non-finite value of ``f``, raise :class:`DomainError`.
    """
    dec = eig_sym(a)
    lam = dec.eigenvalues
    if domain is not None:
        lo, hi = domain
        if np.any(lam <= lo) or np.any(lam >= hi):
            raise DomainError(f"eigenvalues {lam} outside the domain ({lo}, {hi})")
    with np.errstate(all="ignore"):
        fl = np.asarray(f(lam), dtype=float)
    if fl.shape != lam.shape or not np.all(np.isfinite(fl)):
        raise DomainError(f"function is not finite on eigenvalues {lam}")
    u = dec.eigenvectors
    return _wrap((u * fl) @ u.T)


def expm(a: SymMat) -> SymMat:
    return spectral_fn(a, np.exp)


def logm(a: SymMat) -> SymMat:
    return spectral_fn(a, np.log, domain=(0.0, math.inf))


def lambda_max(a) -> float:
    return float(eigvalsh(a)[..., -1])


def lambda_min(a) -> float:
    return float(eigvalsh(a)[..., 0])


def spectral_norm(a) -> float:
    w = eigvalsh(a)
    return float(max(-w[..., 0], w[..., -1]))


def spectral_norms(stack: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of symmetric matrices."""
    w = eigvalsh(stack)
    return np.maximum(-w[..., 0], w[..., -1])


def loewner_leq(a: SymMat, b: SymMat, tol: float = 0.0) -> bool:
    """True iff ``a`` is below ``b`` in the Loewner order, up to ``tol``."""
    _check_same_dim(a, b)
    return lambda_min(b - a) >= -tol


def log_trace_exp(a) -> np.ndarray | float:
    """``log tr exp(a)``, stable for large eigenvalues; batched."""
    w = eigvalsh(a)
    top = w[..., -1]
    out = top + np.log(np.sum(np.exp(w - top[..., None]), axis=-1))
    return float(out) if np.ndim(out) == 0 else out


_LOG_MAX_FLOAT = math.log(np.finfo(float).max)


def trace_exp(a) -> float:
    """``tr exp(a)``; ``math.inf`` when the value is not representable."""
    lte = log_trace_exp(a)
    if lte > _LOG_MAX_FLOAT:
        return math.inf
    return math.exp(lte)
