"""Self-normalised matrix empirical Bernstein method.

For bounded symmetric observations ``X_i``, predictable weights
``gamma_i in (0, 1)`` and predictable predictions ``Xhat_i`` with
``lambda_min(X_i - Xhat_i) >= -1``, the process

    L_n = tr exp( sum gamma_i (X_i - M_i) - sum psi_E(gamma_i) (X_i - Xhat_i)^2 )

is a nonnegative supermartingale starting at ``d``. Ville's inequality
turns it into a sequential test of a null mean (reject once
``L_n >= d/alpha``) and into a time-uniform confidence radius around the
gamma-weighted mean.

Two code paths compute the same quantities:

* :func:`seqeb_update` folds one observation into an immutable
  :class:`SeqEBState` (used for monitoring live streams);
* :func:`seqeb_path` processes a whole sample at once with cumulative sums
  and batched eigenvalues (used for fixed-n radii and simulations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .bounds import BoundResult, _check_alpha, _require_unit_interval
from .errors import (
    DimMismatchError,
    DomainError,
    ParamError,
    PredictorRangeError,
    StateEmptyError,
)
from .estimators import MatrixSample, RunningProxy, running_proxy_norms, running_proxy_update
from .symmat import SymMat, _symmetrize, _wrap, as_array, eigvalsh, lambda_max, lambda_min, log_trace_exp

PREDICTORS = ("running-mean", "psi-weighted")
SCHEDULE_MODES = ("fixed", "anytime", "user")
PREDICTOR_SLACK = 1e-9


def psi_e(gamma):
    """CGF of a centred standard exponential, ``-log(1 - gamma) - gamma``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(g >= 1) or np.any(np.isnan(g)):
        raise DomainError(f"psi_E needs 0 <= gamma < 1, got {gamma}")
    out = -np.log1p(-g) - g
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# weight schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaSchedule:
    """Predictable weights.

    ``fixed``
        ``gamma_i = sqrt(2 log(d/alpha) / (n vbar_{i-1}))`` for a horizon
        ``n`` fixed in advance, with ``vbar`` floored at ``5 log(d/alpha)/n``.
    ``anytime``
        The same rule with the current step ``i`` in place of ``n`` (floor
        ``5 log(d/alpha)/i``), for streams without a horizon.
    ``user``
        ``values`` is a sequence indexed by step (1-based) or a callable
        ``step -> gamma``.

    Every emitted weight is checked to lie in (0, 1); nothing is clamped.
    """

    mode: str
    alpha: float
    d: int
    n: Optional[int] = None
    values: Union[Sequence[float], Callable[[int], float], None] = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.mode not in SCHEDULE_MODES:
            raise ParamError(f"unknown schedule mode {self.mode!r}")
        if self.d < 1:
            raise ParamError("d must be positive")
        if self.mode == "fixed" and (self.n is None or self.n < 1):
            raise ParamError("fixed schedule needs a horizon n >= 1")
        if self.mode == "user" and self.values is None:
            raise ParamError("user schedule needs values")

    @classmethod
    def fixed(cls, alpha: float, d: int, n: int) -> "GammaSchedule":
        return cls("fixed", alpha, d, n)

    @classmethod
    def anytime(cls, alpha: float, d: int) -> "GammaSchedule":
        return cls("anytime", alpha, d)

    @classmethod
    def user(cls, alpha: float, d: int, values) -> "GammaSchedule":
        return cls("user", alpha, d, values=values)

    @property
    def log_term(self) -> float:
        return math.log(self.d / self.alpha)

    def floor(self, step: int) -> float:
        horizon = self.n if self.mode == "fixed" else step
        return 5.0 * self.log_term / horizon

    def gamma(self, step: int, proxy: RunningProxy) -> float:
        """Weight for observation ``step`` given the proxy after ``step - 1``."""
        if self.mode == "user":
            if callable(self.values):
                g = float(self.values(step))
            else:
                if step > len(self.values):
                    raise ParamError(f"user schedule has no weight for step {step}")
                g = float(self.values[step - 1])
        else:
            horizon = self.n if self.mode == "fixed" else step
            vbar = max(proxy.norm, self.floor(step))
            g = math.sqrt(2.0 * self.log_term / (horizon * vbar))
        return _check_gamma(g, step)

    def gammas(self, data: np.ndarray) -> np.ndarray:
        """All weights for a sample at once."""
        n = data.shape[0]
        if self.mode == "user":
            if callable(self.values):
                g = np.array([float(self.values(i)) for i in range(1, n + 1)])
            else:
                if len(self.values) < n:
                    raise ParamError(f"user schedule has {len(self.values)} weights for {n} steps")
                g = np.asarray(self.values[:n], dtype=float)
        else:
            steps = np.arange(1, n + 1, dtype=float)
            horizon = np.full(n, float(self.n)) if self.mode == "fixed" else steps
            vbar = np.maximum(running_proxy_norms(data), 5.0 * self.log_term / horizon)
            g = np.sqrt(2.0 * self.log_term / (horizon * vbar))
        bad = ~((g > 0) & (g < 1))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            _check_gamma(float(g[i]), i + 1)
        return g


def _check_gamma(g: float, step: int) -> float:
    if not 0.0 < g < 1.0:
        raise DomainError(f"schedule emitted gamma={g} at step {step}; weights must lie in (0, 1)")
    return g


# ---------------------------------------------------------------------------
# streaming state
# ---------------------------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SeqEBState:
    step: int
    gamma_sum: float
    weighted_obs_sum: np.ndarray
    null_sum: np.ndarray
    penalty_matrix: np.ndarray
    psi_weight_sum: float
    psi_obs_sum: np.ndarray
    proxy: RunningProxy

    @classmethod
    def fresh(cls, schedule: GammaSchedule) -> "SeqEBState":
        d = schedule.d
        z = _frozen(np.zeros((d, d)))
        proxy = RunningProxy.fresh(d, schedule.alpha, schedule.n or 1)
        return cls(0, 0.0, z, z, z, 0.0, z, proxy)

    @property
    def dim(self) -> int:
        return self.weighted_obs_sum.shape[0]

    @property
    def weighted_mean(self) -> SymMat:
        if self.step == 0:
            raise StateEmptyError("no observations yet")
        return _wrap(self.weighted_obs_sum / self.gamma_sum)


class SeqDecision(NamedTuple):
    step: int
    gamma: float
    log_supermartingale: float
    threshold: float
    reject: bool
    current_radius: float
    weighted_mean: SymMat

    def to_json(self) -> dict:
        return {"step": self.step, "log_L": self.log_supermartingale, "threshold": self.threshold,
                "reject": self.reject, "radius": self.current_radius, "gamma": self.gamma}


def predictor_next(state: SeqEBState, choice: str = "running-mean") -> SymMat:
    """Prediction of the next observation from the past only (0 before any data)."""
    if choice not in PREDICTORS:
        raise ParamError(f"unknown predictor {choice!r}")
    if state.step == 0:
        return SymMat.zeros(state.dim)
    if choice == "running-mean":
        return state.proxy.mean
    if state.psi_weight_sum <= 0:
        return SymMat.zeros(state.dim)
    return _wrap(state.psi_obs_sum / state.psi_weight_sum)


def _threshold(d: int, alpha: float, randomize_u: Optional[float]) -> float:
    t = math.log(d / alpha)
    if randomize_u is not None:
        if not 0.0 < randomize_u <= 1.0:
            raise ParamError(f"randomize_u must lie in (0, 1], got {randomize_u}")
        t += math.log(randomize_u)
    return t


def time_uniform_radius(state: SeqEBState, alpha: float,
                        randomize_u: Optional[float] = None) -> float:
    """``(log(d/alpha) + lambda_max(penalty)) / sum gamma``.

    With ``randomize_u`` (an independent uniform drawn by the caller, valid
    at a stopping time) ``log(u d / alpha)`` replaces ``log(d/alpha)``.
    """
    if state.step == 0:
        raise StateEmptyError("radius undefined before the first observation")
    _check_alpha(alpha)
    top = lambda_max(state.penalty_matrix)
    return (_threshold(state.dim, alpha, randomize_u) + top) / state.gamma_sum


def seqeb_update(state: SeqEBState, x, schedule: GammaSchedule, m_null=None,
                 predictor: str = "running-mean",
                 randomize_u: Optional[float] = None) -> tuple[SeqEBState, SeqDecision]:
    """Fold one observation into the state and test the null mean.

    ``m_null`` is a constant :class:`SymMat` or a callable ``step -> SymMat``
    for time-varying nulls; ``None`` skips the test (``log_L`` is NaN).
    """
    x = as_array(x)
    d = state.dim
    if x.shape != (d, d):
        raise DimMismatchError(f"observation shape {x.shape}, state dimension {d}")
    step = state.step + 1
    gamma = schedule.gamma(step, state.proxy)
    xhat = as_array(predictor_next(state, predictor))
    diff = x - xhat
    lo = lambda_min(diff)
    if lo < -1.0 - PREDICTOR_SLACK:
        raise PredictorRangeError(
            f"step {step}: lambda_min(x - prediction) = {lo:.6g} < -1")
    psi = psi_e(gamma)
    penalty = _frozen(state.penalty_matrix + psi * _symmetrize(diff @ diff))
    gamma_sum = state.gamma_sum + gamma
    wsum = _frozen(state.weighted_obs_sum + gamma * x)
    null_sum = state.null_sum
    if m_null is not None:
        m = as_array(m_null(step) if callable(m_null) else m_null)
        if m.shape != (d, d):
            raise DimMismatchError(f"null mean shape {m.shape}, state dimension {d}")
        null_sum = _frozen(state.null_sum + gamma * m)
    new = SeqEBState(
        step=step,
        gamma_sum=gamma_sum,
        weighted_obs_sum=wsum,
        null_sum=null_sum,
        penalty_matrix=penalty,
        psi_weight_sum=state.psi_weight_sum + psi,
        psi_obs_sum=_frozen(state.psi_obs_sum + psi * x),
        proxy=running_proxy_update(state.proxy, x),
    )
    log_l = math.nan
    if m_null is not None:
        log_l = log_trace_exp(_symmetrize(wsum - null_sum - penalty))
    threshold = _threshold(d, schedule.alpha, randomize_u)
    decision = SeqDecision(
        step=step,
        gamma=gamma,
        log_supermartingale=log_l,
        threshold=threshold,
        reject=bool(log_l >= threshold),
        current_radius=time_uniform_radius(new, schedule.alpha, randomize_u),
        weighted_mean=new.weighted_mean,
    )
    return new, decision


# ---------------------------------------------------------------------------
# whole-sample path
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SeqPath:
    """Per-step quantities for a whole sample (arrays indexed by step - 1)."""

    gammas: np.ndarray
    gamma_sums: np.ndarray
    penalty_top: Optional[np.ndarray]
    radii: Optional[np.ndarray]
    log_L: Optional[np.ndarray]
    weighted_mean: np.ndarray
    final_penalty: np.ndarray
    extras: dict = field(default_factory=dict)


def _predictions(data: np.ndarray, psi: np.ndarray, predictor: str) -> np.ndarray:
    n = data.shape[0]
    out = np.zeros_like(data)
    if n == 1:
        return out
    if predictor == "running-mean":
        k = np.arange(1, n, dtype=float)[:, None, None]
        out[1:] = np.cumsum(data[:-1], axis=0) / k
    elif predictor == "psi-weighted":
        num = np.cumsum(psi[:-1, None, None] * data[:-1], axis=0)
        den = np.cumsum(psi[:-1])
        pos = den > 0
        out[1:][pos] = num[pos] / den[pos][:, None, None]
    else:
        raise ParamError(f"unknown predictor {predictor!r}")
    return out


def seqeb_path(s: MatrixSample, schedule: GammaSchedule, m_null=None,
               predictor: str = "running-mean", radii: bool = True,
               randomize_u: Optional[float] = None) -> SeqPath:
    """Run the supermartingale method over a whole sample.

    ``m_null`` may be a constant matrix or an ``(n, d, d)`` array of
    per-step nulls; when given, ``log_L`` holds ``log L_k`` for every k.
    ``radii`` toggles the per-step time-uniform radius (one eigenvalue
    problem per step).
    """
    data = s.data
    d = data.shape[1]
    if d != schedule.d:
        raise DimMismatchError(f"sample dimension {d}, schedule dimension {schedule.d}")
    gammas = schedule.gammas(data)
    psi = psi_e(gammas)
    psi = np.atleast_1d(psi)
    diff = data - _predictions(data, psi, predictor)
    if s.lower < 0.0 or s.upper > 1.0:
        # the [0, 1] case is guaranteed: predictions are convex combinations
        lo = eigvalsh(diff)[:, 0]
        if np.any(lo < -1.0 - PREDICTOR_SLACK):
            i = int(np.flatnonzero(lo < -1.0 - PREDICTOR_SLACK)[0])
            raise PredictorRangeError(f"step {i + 1}: lambda_min(x - prediction) = {lo[i]:.6g} < -1")
    sq = _symmetrize(diff @ diff)
    cum_pen = np.cumsum(psi[:, None, None] * sq, axis=0)
    gamma_sums = np.cumsum(gammas)
    cum_w = np.cumsum(gammas[:, None, None] * data, axis=0)
    threshold = _threshold(d, schedule.alpha, randomize_u)

    penalty_top = radius = log_l = None
    if radii:
        penalty_top = eigvalsh(cum_pen)[:, -1]
        radius = (threshold + penalty_top) / gamma_sums
    if m_null is not None:
        m = as_array(m_null)
        if m.ndim == 2:
            null_cum = gamma_sums[:, None, None] * m
        else:
            null_cum = np.cumsum(gammas[:, None, None] * m, axis=0)
        log_l = log_trace_exp(_symmetrize(cum_w - null_cum - cum_pen))
        log_l = np.atleast_1d(log_l)
    return SeqPath(
        gammas=gammas,
        gamma_sums=gamma_sums,
        penalty_top=penalty_top,
        radii=radius,
        log_L=log_l,
        weighted_mean=cum_w[-1] / gamma_sums[-1],
        final_penalty=cum_pen[-1],
    )


class Meb2Result(NamedTuple):
    weighted_mean: SymMat
    radius: float
    proxy: float


def meb2_fixed_n(s: MatrixSample, alpha: float, predictor: str = "running-mean") -> Meb2Result:
    """Fixed-sample-size radius of the supermartingale method.

    Returns the gamma-weighted mean, the radius
    ``(log(d/alpha) + lambda_max(sum psi_E(gamma_i)(X_i - Xbar_{i-1})^2)) / sum gamma_i``
    and the variance proxy ``radius^2 n / (2 log(d/alpha))``.
    """
    _require_unit_interval(s)
    schedule = GammaSchedule.fixed(alpha, s.dim, s.n)
    path = seqeb_path(s, schedule, predictor=predictor, radii=False)
    log_term = schedule.log_term
    radius = (log_term + lambda_max(path.final_penalty)) / path.gamma_sums[-1]
    proxy = radius * radius * s.n / (2.0 * log_term)
    return Meb2Result(_wrap(path.weighted_mean), radius, proxy)


def meb2_radius(s: MatrixSample, alpha: float, predictor: str = "running-mean") -> BoundResult:
    """:func:`meb2_fixed_n` packaged as a :class:`BoundResult`."""
    _require_unit_interval(s)
    schedule = GammaSchedule.fixed(alpha, s.dim, s.n)
    path = seqeb_path(s, schedule, predictor=predictor, radii=False)
    g = float(path.gamma_sums[-1])
    top = lambda_max(path.final_penalty)
    terms = {"confidence": schedule.log_term / g, "penalty": top / g}
    return BoundResult(terms["confidence"] + terms["penalty"], terms, "meb2", s.n)


def monitor(stream, schedule: GammaSchedule, m_null=None, predictor: str = "running-mean",
            randomize_u: Optional[float] = None):
    """Generator of :class:`SeqDecision` for an iterable of observations."""
    state = SeqEBState.fresh(schedule)
    for x in stream:
        state, decision = seqeb_update(state, x, schedule, m_null, predictor, randomize_u)
        yield decision


__all__ = [
    "GammaSchedule", "Meb2Result", "SeqDecision", "SeqEBState", "SeqPath",
    "meb2_fixed_n", "meb2_radius", "monitor", "predictor_next", "psi_e",
    "seqeb_path", "seqeb_update", "time_uniform_radius",
]
