"""Closed-form one-sided deviation radii.

Every function returns a :class:`BoundResult` whose ``radius`` is the sum
of its named ``terms``. A radius ``r`` bounds the upper tail:
``P(lambda_max(estimate - M) >= r) <= alpha``. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import BoundednessError, DomainError, ParamError, SampleTooSmall
from .estimators import (
    MatrixSample,
    bessel_variance,
    even_count,
    paired_variance,
)
from .symmat import spectral_norm

# sqrt(5/3) + 1 = sqrt(2) * (sqrt(5/6) + 1/sqrt(2))
MEB1_CORRECTION = math.sqrt(5.0 / 3.0) + 1.0


@dataclass(frozen=True)
class BoundResult:
    radius: float
    terms: dict
    method: str
    n_used: int
    side: str = "upper"

    def to_json(self) -> dict:
        return {"method": self.method, "n_used": self.n_used, "radius": self.radius,
                "terms": dict(self.terms), "side": self.side}


def _result(method: str, n_used: int, **terms: float) -> BoundResult:
    radius = 0.0
    for v in terms.values():
        radius += v
    return BoundResult(radius, terms, method, n_used)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParamError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _check_n(n, minimum: int = 1) -> int:
    if int(n) != n or n < 1:
        raise ParamError(f"n must be a positive integer, got {n}")
    if n < minimum:
        raise SampleTooSmall(f"need n >= {minimum}, got {n}")
    return int(n)


def _check_nonneg(name: str, v: float) -> float:
    v = float(v)
    if not v >= 0.0 or math.isinf(v):
        raise ParamError(f"{name} must be finite and non-negative, got {v}")
    return v


@dataclass(frozen=True)
class BoundRequest:
    """Inputs for the oracle bounds; validated on construction."""

    n: int
    d: int
    alpha: float
    B: float = 1.0
    variance_norm: Optional[float] = None
    trace_V: Optional[float] = None
    data_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_n(self.n)
        if int(self.d) != self.d or self.d < 1:
            raise ParamError(f"d must be a positive integer, got {self.d}")
        _check_alpha(self.alpha)
        if not self.B > 0 or math.isinf(self.B):
            raise ParamError(f"B must be positive and finite, got {self.B}")
        for name in ("variance_norm", "trace_V"):
            v = getattr(self, name)
            if v is not None:
                _check_nonneg(name, v)
        for k, v in self.data_stats.items():
            _check_nonneg(k, v)


# ---------------------------------------------------------------------------
# Bennett helper function
# ---------------------------------------------------------------------------


def h_fn(u: float) -> float:
    """``(1+u) log(1+u) - u``."""
    if u < 0:
        raise DomainError(f"h is defined here for u >= 0, got {u}")
    return (1.0 + u) * math.log1p(u) - u


def h_inv_upper(x: float) -> float:
    """Polynomial upper bound ``sqrt(2x) + x/3`` on the inverse of h."""
    if x < 0:
        raise DomainError(f"h^-1 bound needs x >= 0, got {x}")
    return math.sqrt(2.0 * x) + x / 3.0


# ---------------------------------------------------------------------------
# oracle bounds
# ---------------------------------------------------------------------------


def scalar_bennett_bernstein(n: int, alpha: float, B: float = 1.0, sigma2: float = 0.0) -> BoundResult:
    """Bennett-Bernstein radius for a scalar mean with known variance ``sigma2``."""
    return matrix_bennett_bernstein(BoundRequest(n, 1, alpha, B, variance_norm=sigma2))


def matrix_bennett_bernstein(req: BoundRequest) -> BoundResult:
    if req.variance_norm is None:
        raise ParamError("the Bennett-Bernstein bound needs variance_norm")
    log_term = math.log(req.d / req.alpha)
    return _result(
        "tb", req.n,
        boundedness=req.B * log_term / (3.0 * req.n),
        variance=math.sqrt(2.0 * log_term * req.variance_norm / req.n),
    )


def minsker_radius(req: BoundRequest) -> BoundResult:
    """Dimension-free Bernstein radius with effective rank ``14 tr(V)/||V||``."""
    v, tr = req.variance_norm, req.trace_V
    if v is None or tr is None:
        raise ParamError("the Minsker bound needs variance_norm and trace_V")
    if v <= 0:
        raise ParamError("the Minsker bound needs variance_norm > 0")
    if tr < v * (1 - 1e-12):
        raise ParamError(f"trace_V={tr} is smaller than variance_norm={v}")
    log_term = math.log(14.0 * tr / v / req.alpha)
    b_log = req.B * log_term
    return _result(
        "mb", req.n,
        boundedness=b_log / (3.0 * req.n),
        variance=math.sqrt(b_log * b_log + 18.0 * req.n * log_term * v) / (3.0 * req.n),
    )


def matrix_hoeffding_radius(n: int, d: int, alpha: float, bound_norm: float) -> BoundResult:
    """Hoeffding radius when ``(X_i - E X_i)^2 <= B`` with ``bound_norm = ||B||``."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    if not bound_norm > 0:
        raise ParamError(f"bound_norm must be positive, got {bound_norm}")
    return _result("hoeffding", n,
                   boundedness=math.sqrt(2.0 * bound_norm * math.log(d / alpha) / n))


# ---------------------------------------------------------------------------
# empirical bounds from the paired / classical sample variance
# ---------------------------------------------------------------------------


def meb1_bound(m: int, d: int, alpha: float, paired_norm: float) -> BoundResult:
    """Paired-variance empirical Bernstein radius from summary statistics.

    ``m`` is the (even) number of observations actually used.
    """
    m = _check_n(m, 2)
    alpha = _check_alpha(alpha)
    paired_norm = _check_nonneg("paired_norm", paired_norm)
    l1 = math.log(m * d / ((m - 1) * alpha))
    l2 = math.log(2.0 * m * d / alpha)
    return _result(
        "meb1", m,
        boundedness=l1 / (3.0 * m),
        variance=math.sqrt(2.0 * paired_norm * l1 / m),
        correction=MEB1_CORRECTION * math.sqrt(l1 * l2) / m,
    )


def _require_unit_interval(s: MatrixSample) -> None:
    if s.lower < 0.0 or s.upper > 1.0:
        raise BoundednessError(
            f"bound requires eigenvalues in [0, 1], sample declares [{s.lower}, {s.upper}]; "
            "use estimators.rescale first")


def meb1_radius(s: MatrixSample, alpha: float) -> BoundResult:
    _require_unit_interval(s)
    m = even_count(s.n)
    if m < 2:
        raise SampleTooSmall("need at least two observations")
    return meb1_bound(m, s.dim, alpha, spectral_norm(paired_variance(s)))


def meb1c_bound(n: int, d: int, alpha: float, bessel_norm: float) -> BoundResult:
    """Classical-variance variant; the minimum takes the fourth-root branch at zero variance."""
    n = _check_n(n, 2)
    alpha = _check_alpha(alpha)
    v = _check_nonneg("bessel_norm", bessel_norm)
    l1 = math.log(n * d / ((n - 1) * alpha))
    l2 = math.log(2.0 * n * d / alpha)
    scale = math.sqrt(2.0 * l1 / n)
    quartic = (2.0 * l2 / n) ** 0.25
    slack = min(math.sqrt(l2 / (2.0 * n * v)), quartic) if v > 0 else quartic
    return _result(
        "meb1c", n,
        boundedness=l1 / (3.0 * n),
        variance=scale * math.sqrt(v),
        correction=scale * slack,
    )


def meb1c_radius(s: MatrixSample, alpha: float) -> BoundResult:
    _require_unit_interval(s)
    if s.n < 2:
        raise SampleTooSmall("need at least two observations")
    return meb1c_bound(s.n, s.dim, alpha, spectral_norm(bessel_variance(s)))


# ---------------------------------------------------------------------------
# scalar empirical Bernstein (Maurer-Pontil and its sharpened split)
# ---------------------------------------------------------------------------


def maurer_pontil_radius(n: int, alpha: float, sigma_hat2: float) -> BoundResult:
    n = _check_n(n, 2)
    alpha = _check_alpha(alpha)
    s2 = _check_nonneg("sigma_hat2", sigma_hat2)
    log_term = math.log(2.0 / alpha)
    return _result(
        "mp", n,
        variance=math.sqrt(2.0 * s2 * log_term / n),
        boundedness=7.0 * log_term / (3.0 * (n - 1)),
    )


def sharp_mp_radius(n: int, alpha: float, sigma_hat2: float) -> BoundResult:
    """Maurer-Pontil with the ``alpha(n-1)/n + alpha/n`` split."""
    n = _check_n(n, 2)
    alpha = _check_alpha(alpha)
    s2 = _check_nonneg("sigma_hat2", sigma_hat2)
    l1 = math.log(n / ((n - 1) * alpha))
    l2 = math.log(n / alpha)
    return _result(
        "sharp-mp", n,
        boundedness=l1 / (3.0 * n),
        variance=math.sqrt(2.0 * s2 * l1 / n),
        correction=2.0 * math.sqrt(l1 * l2 / (n * (n - 1.0))),
    )


def scalar_variance(s: MatrixSample) -> float:
    if s.dim != 1:
        raise ParamError(f"scalar bound applied to a d={s.dim} sample")
    return float(bessel_variance(s).entries[0, 0])


def two_sided(fn, *args, alpha: float, **kwargs) -> BoundResult:
    """Run a one-sided radius at ``alpha/2``; the ball of that radius is two-sided."""
    res = fn(*args, alpha=_check_alpha(alpha) / 2.0, **kwargs)
    return replace(res, side="two-sided")
