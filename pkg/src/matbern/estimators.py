"""Sample statistics consumed by the bounds.

A :class:`MatrixSample` stores its observations as one ``(n, d, d)``
array so that means, variances and eigenvalue checks are vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AsymmetryError,
    BoundednessError,
    DimMismatchError,
    EmptySampleError,
    NonFiniteError,
    ParamError,
    SampleTooSmall,
    WeightError,
)
from .symmat import SymMat, _symmetrize, _wrap, as_array, eigvalsh, spectral_norm

INTERVAL_TOL = 1e-9


class MatrixSample:
    """Ordered observations with eigenvalues in ``[lower, upper]``.

    Parameters
    ----------
    data : array_like, shape (n, d, d) or sequence of SymMat
    interval : (lower, upper)
        Declared eigenvalue range, checked with tolerance 1e-9. Values
        outside raise :class:`BoundednessError`; nothing is clamped.
    validate : bool
        Skip the symmetry/eigenvalue checks for data produced by a
        trusted generator.
    """

    __slots__ = ("data", "lower", "upper")

    def __init__(self, data, interval: tuple[float, float] = (0.0, 1.0), validate: bool = True):
        if not isinstance(data, np.ndarray):
            data = [as_array(x) for x in data]
        arr = np.array(data, dtype=float)
        if arr.ndim == 1 and arr.size:
            arr = arr.reshape(-1, 1, 1)
        if arr.size == 0 or arr.shape[0] == 0:
            raise EmptySampleError("a sample needs at least one observation")
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimMismatchError(f"expected shape (n, d, d), got {arr.shape}")
        lower, upper = (float(v) for v in interval)
        if not lower < upper:
            raise ParamError(f"empty interval [{lower}, {upper}]")
        if validate:
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError("sample has NaN or infinite entries")
            skew = np.max(np.abs(arr - np.swapaxes(arr, 1, 2)))
            if skew > 1e-9 * max(1.0, float(np.max(np.abs(arr)))):
                raise AsymmetryError("sample contains non-symmetric matrices")
            arr = _symmetrize(arr)
            w = eigvalsh(arr)
            lo = float(w[:, 0].min())
            hi = float(w[:, -1].max())
            if lo < lower - INTERVAL_TOL or hi > upper + INTERVAL_TOL:
                raise BoundednessError(
                    f"eigenvalues span [{lo:.6g}, {hi:.6g}], outside [{lower}, {upper}]")
        arr.setflags(write=False)
        self.data = arr
        self.lower = lower
        self.upper = upper

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        for x in self.data:
            yield _wrap(x)

    def __getitem__(self, i) -> SymMat:
        return _wrap(self.data[i])

    def head(self, k: int) -> "MatrixSample":
        return MatrixSample(self.data[:k], (self.lower, self.upper), validate=False)

    def __repr__(self):
        return f"MatrixSample(n={self.n}, d={self.dim}, interval=[{self.lower}, {self.upper}])"


def rescale(s: MatrixSample) -> MatrixSample:
    """Map ``S_d^[a,b]`` observations to ``S_d^[0,1]`` via ``(X - aI)/(b - a)``."""
    a, b = s.lower, s.upper
    eye = np.eye(s.dim)
    return MatrixSample((s.data - a * eye) / (b - a), (0.0, 1.0), validate=False)


def sample_mean(s: MatrixSample) -> SymMat:
    if s.n < 1:
        raise EmptySampleError("empty sample")
    return _wrap(np.sum(s.data, axis=0) / s.n)


def weighted_mean(s: MatrixSample, w: Sequence[float]) -> SymMat:
    w = np.asarray(w, dtype=float)
    if w.shape != (s.n,):
        raise WeightError(f"need {s.n} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise WeightError("weights must be finite and strictly positive")
    return _wrap(np.tensordot(w, s.data, axes=1) / np.sum(w))


def even_count(n: int) -> int:
    """Number of observations the paired estimator uses."""
    return n - n % 2


def paired_variance(s: MatrixSample) -> SymMat:
    """Average of squared differences over disjoint consecutive pairs.

    With ``m`` the even part of ``n`` (see :func:`even_count`) this is
    ``m^-1 * sum_j (X_{2j-1} - X_{2j})^2``; an odd trailing observation
    is dropped.
    """
    if s.n < 2:
        raise SampleTooSmall("paired variance needs at least two observations")
    m = even_count(s.n)
    diff = s.data[0:m:2] - s.data[1:m:2]
    return _wrap(np.sum(diff @ diff, axis=0) / m)


def bessel_variance(s: MatrixSample) -> SymMat:
    """Bessel-corrected sample variance ``(n-1)^-1 sum (X_i - mean)^2``.

    Equal to the pairwise U-statistic ``(n(n-1))^-1 sum_{i<j} (X_i - X_j)^2``.
    """
    if s.n < 2:
        raise SampleTooSmall("sample variance needs at least two observations")
    centered = s.data - np.sum(s.data, axis=0) / s.n
    return _wrap(np.sum(centered @ centered, axis=0) / (s.n - 1))


def estimate_summary(s: MatrixSample, estimator: str) -> tuple[SymMat, dict]:
    """Run a named estimator and return it with a JSON-ready summary."""
    if estimator == "mean":
        est, used = sample_mean(s), s.n
    elif estimator == "paired":
        est, used = paired_variance(s), even_count(s.n)
    elif estimator == "bessel":
        est, used = bessel_variance(s), s.n
    else:
        raise ParamError(f"unknown estimator {estimator!r}")
    return est, {"n_used": used, "estimator": estimator, "spectral_norm": spectral_norm(est)}


# ---------------------------------------------------------------------------
# running variance proxy
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RunningProxy:
    """Running mean, second moment and floored variance norm.

    ``norm`` is the spectral norm of ``V_k = k^-1 sum (X_i - mean_k)^2``
    (1/4 for the ``V_0 = I/4`` start) and ``vbar = max(norm, floor)``
    with ``floor = 5 log(d/alpha) / n``.
    """

    k: int
    total: np.ndarray
    total_sq: np.ndarray
    norm: float
    floor: float

    @classmethod
    def fresh(cls, d: int, alpha: float, n: int) -> "RunningProxy":
        if not 0 < alpha < 1:
            raise ParamError(f"alpha must lie in (0, 1), got {alpha}")
        if n < 1 or d < 1:
            raise ParamError("n and d must be positive")
        z = np.zeros((d, d))
        z.setflags(write=False)
        return cls(0, z, z, 0.25, 5.0 * math.log(d / alpha) / n)

    @property
    def dim(self) -> int:
        return self.total.shape[0]

    @property
    def vbar(self) -> float:
        return max(self.norm, self.floor)

    @property
    def mean(self) -> SymMat:
        if self.k == 0:
            return SymMat.zeros(self.dim)
        return _wrap(self.total / self.k)

    @property
    def second_moment(self) -> SymMat:
        if self.k == 0:
            return SymMat.zeros(self.dim)
        return _wrap(self.total_sq / self.k)

    @property
    def variance(self) -> SymMat:
        if self.k == 0:
            return SymMat.identity(self.dim) / 4
        return _wrap(_proxy_variance(self.total, self.total_sq, self.k))


def _proxy_variance(total, total_sq, k):
    mean = total / k
    return total_sq / k - mean @ mean


def running_proxy_update(r: RunningProxy, x) -> RunningProxy:
    x = as_array(x)
    if x.shape != r.total.shape:
        raise DimMismatchError(f"observation shape {x.shape} does not match {r.total.shape}")
    total = r.total + x
    total_sq = r.total_sq + x @ x
    k = r.k + 1
    total.setflags(write=False)
    total_sq.setflags(write=False)
    norm = spectral_norm(_symmetrize(_proxy_variance(total, total_sq, k)))
    return RunningProxy(k, total, total_sq, norm, r.floor)


def running_proxy_norms(data: np.ndarray) -> np.ndarray:
    """``||V_k||`` for k = 0..n-1 in one pass (k = 0 gives 1/4).

    Arithmetic mirrors :func:`running_proxy_update`, so the two agree to
    rounding.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    out = np.empty(n)
    out[0] = 0.25
    if n > 1:
        total = np.cumsum(data[:-1], axis=0)
        total_sq = np.cumsum(data[:-1] @ data[:-1], axis=0)
        k = np.arange(1, n, dtype=float)[:, None, None]
        mean = total / k
        v = _symmetrize(total_sq / k - mean @ mean)
        w = eigvalsh(v)
        out[1:] = np.maximum(-w[:, 0], w[:, -1])
    return out
