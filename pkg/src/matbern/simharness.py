"""Seeded generators and Monte Carlo experiments.

Randomness
----------
Every replication draws from its own Philox4x64 stream (numpy's
counter-based generator) keyed by ``SeedSequence(seed, spawn_key=key)``,
where ``key`` is ``(experiment code, n, replication, generator code)``.
Streams never overlap, so a cell of a table can be recomputed alone and
replications could run in any order or in parallel without changing the
result.

Experiments
-----------
``"1"``, ``"3"``
    projection-mixture sample (d = 3), radii divided by the oracle
    Bennett-Bernstein radius with ``||V|| = 1/12``.
``"2"``
    scalar Unif[0, 1] sample, same normalisation with ``sigma^2 = 1/12``.
``"coverage"``
    every implemented radius at n = 200; ``coverage`` is the fraction of
    replications with ``lambda_max(estimate - M) < radius``.
``"sharpness"``
    ``sqrt(n) * radius / sqrt(2 log(d/alpha) / 12)``, which tends to one
    for a sharp bound.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, TextIO

import numpy as np

from .bounds import (
    BoundRequest,
    maurer_pontil_radius,
    matrix_bennett_bernstein,
    matrix_hoeffding_radius,
    meb1_radius,
    meb1c_radius,
    scalar_variance,
    sharp_mp_radius,
)
from .errors import ConfigError
from .estimators import MatrixSample, sample_mean
from .seqeb import GammaSchedule, meb2_fixed_n, seqeb_path
from .symmat import SymMat, _wrap, eigvalsh

UNIFORM_VARIANCE = 1.0 / 12.0
DESK_MAX_N = 100_000
FULL_GRID = (100, 1_000, 10_000, 100_000, 1_000_000)
COVERAGE_N = 200

# fixed rotation: QR of a standard normal 3x3 draw from default_rng(0),
# signs chosen so that R has a positive diagonal
_ROTATION_LITERAL = (
    (0.09566758570650524, -0.33463852249636405, 0.9374778783024902),
    (0.0798180490027644, -0.936186030393776, -0.3423226483143298),
    (0.9922080387189374, 0.10757683652624493, -0.06285246331310232),
)


def _orthonormalize(a: np.ndarray) -> np.ndarray:
    # Gram-Schmidt on the columns, to remove rounding in the literals
    q = np.array(a, dtype=float)
    for j in range(q.shape[1]):
        for k in range(j):
            q[:, j] -= (q[:, k] @ q[:, j]) * q[:, k]
        q[:, j] /= np.linalg.norm(q[:, j])
    return q


ROTATION = _orthonormalize(np.array(_ROTATION_LITERAL))
ROTATION.setflags(write=False)
PROJECTIONS = tuple(_wrap(np.outer(ROTATION[:, k], ROTATION[:, k])) for k in range(3))

_GENERATOR_CODES = {"projection-mixture": 0, "scalar-uniform": 1,
                    "covariance-outer": 2, "dependent-stream": 3}
_TABLE_CODES = {"1": 1, "2": 2, "3": 3, "coverage": 4, "sharpness": 5, "null": 6}


def replication_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, key)``."""
    if int(seed) != seed or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return replication_rng(seed)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _mix(eigs: np.ndarray) -> np.ndarray:
    # R diag(u) R^T for each row u
    return np.einsum("ik,nk,jk->nij", ROTATION, eigs, ROTATION)


def gen_projection_mixture(seed, n: int) -> MatrixSample:
    """``sum_k U_k P_k`` with independent ``U_k ~ Unif[0, 1]``.

    The mean is ``I/2`` and the variance ``V = I/12``.
    """
    rng = _as_rng(seed)
    return MatrixSample(_mix(rng.uniform(size=(n, 3))), validate=False)


def gen_scalar_uniform(seed, n: int) -> MatrixSample:
    rng = _as_rng(seed)
    return MatrixSample(rng.uniform(size=n).reshape(n, 1, 1), validate=False)


def _sphere_mixture(rng: np.random.Generator, n: int, d: int, p: float, rho: float) -> np.ndarray:
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    keep = rng.uniform(size=n) < p
    return rho * z * keep[:, None]


def gen_covariance_outer(seed, n: int, d: int, law: Optional[Callable] = None,
                         p: float = 0.5, rho: float = 1.0) -> tuple[MatrixSample, dict]:
    """Outer products ``x x^T`` of vectors with ``||x|| <= 1``.

    Parameters
    ----------
    law : callable, optional
        ``law(rng, n, d)`` returning an ``(n, d)`` array of vectors. The
        default draws ``x = 0`` with probability ``1 - p`` and otherwise a
        uniform point on the sphere of radius ``rho``.

    Returns
    -------
    sample : MatrixSample
    meta : dict
        ``law`` name and, for the built-in law, the true covariance
        ``sigma = p rho^2 I / d`` as a :class:`SymMat`.
    """
    rng = _as_rng(seed)
    if law is None:
        if not (0.0 <= p <= 1.0 and 0.0 <= rho <= 1.0):
            raise ConfigError(f"need p, rho in [0, 1], got p={p}, rho={rho}")
        x = _sphere_mixture(rng, n, d, p, rho)
        meta = {"law": "sphere-mixture", "p": p, "rho": rho,
                "sigma": SymMat.identity(d) * (p * rho * rho / d)}
    else:
        x = np.asarray(law(rng, n, d), dtype=float)
        if x.shape != (n, d):
            raise ConfigError(f"law returned shape {x.shape}, expected {(n, d)}")
        if np.any(np.linalg.norm(x, axis=1) > 1.0 + 1e-12):
            raise ConfigError("law produced vectors with norm above 1")
        meta = {"law": getattr(law, "__name__", "custom"), "sigma": None}
    return MatrixSample(np.einsum("ni,nj->nij", x, x), validate=False), meta


DEPENDENT_KAPPA_HIGH = 0.5
DEPENDENT_KAPPA_LOW = 4.0


def gen_dependent_stream(seed, n: int) -> MatrixSample:
    """Projection mixture whose eigenvalue law depends on the past.

    ``X_i = R diag(B_i) R^T`` with ``B_i`` three independent
    ``Beta(kappa_i, kappa_i)`` draws, ``kappa_i = 0.5`` when
    ``tr(Xbar_{i-1}) >= 1.5`` and ``4`` otherwise (``4`` at ``i = 1``).
    A symmetric Beta law has mean 1/2 whatever ``kappa`` is, so
    ``E[X_i | past] = I/2`` while the conditional variance switches
    between ``I/8`` and ``I/36``.
    """
    rng = _as_rng(seed)
    eigs = np.empty((n, 3))
    trace_sum = 0.0
    for i in range(n):
        high = i > 0 and trace_sum / i >= 1.5
        kappa = DEPENDENT_KAPPA_HIGH if high else DEPENDENT_KAPPA_LOW
        eigs[i] = rng.beta(kappa, kappa, size=3)
        trace_sum += float(eigs[i].sum())
    return MatrixSample(_mix(eigs), validate=False)


# ---------------------------------------------------------------------------
# experiment configuration and report
# ---------------------------------------------------------------------------

TABLE_METHODS = {
    "1": ("meb1", "meb2"),
    "2": ("mp", "sharp-mp", "meb2"),
    "3": ("meb1", "meb1c", "meb2"),
    "coverage": ("tb", "meb1", "meb1c", "meb2", "hoeffding", "mp", "sharp-mp", "meb2-dependent"),
    "sharpness": ("meb1", "meb1c", "meb2"),
}


@dataclass(frozen=True)
class SimConfig:
    """One experiment.

    ``grid`` defaults to the table grid ``100 .. 10^5`` (n = 200 for the
    coverage experiment); ``max_n`` filters it. Sizes above ``10^5`` need
    ``allow_large``.
    """

    table: str
    reps: int = 100
    seed: int = 0
    max_n: int = DESK_MAX_N
    grid: Optional[tuple] = None
    alpha: float = 0.05
    allow_large: bool = False
    predictor: str = "running-mean"

    def __post_init__(self):
        if self.table not in TABLE_METHODS:
            raise ConfigError(f"unknown table {self.table!r}; choose from {sorted(TABLE_METHODS)}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ConfigError(f"reps must be a positive integer, got {self.reps!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if int(self.max_n) != self.max_n or self.max_n < 2:
            raise ConfigError(f"max_n must be an integer >= 2, got {self.max_n!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.grid is not None:
            if not self.grid or any(int(n) != n or n < 2 for n in self.grid):
                raise ConfigError(f"grid must hold integers >= 2, got {self.grid!r}")
        if self.resolved_grid and max(self.resolved_grid) > DESK_MAX_N and not self.allow_large:
            raise ConfigError(f"sample sizes above {DESK_MAX_N} need allow_large")
        if not self.resolved_grid:
            raise ConfigError(f"no grid point is <= max_n={self.max_n}")

    @property
    def resolved_grid(self) -> tuple:
        if self.grid is not None:
            base = tuple(int(n) for n in self.grid)
        elif self.table == "coverage":
            base = (COVERAGE_N,)
        else:
            base = FULL_GRID
        return tuple(n for n in base if n <= self.max_n)


class SimRow(NamedTuple):
    table: str
    n: int
    method: str
    ratio_mean: float
    ratio_sd: float
    coverage: float
    reps: int
    seed: int


CSV_COLUMNS = SimRow._fields


@dataclass
class SimReport:
    """Aggregated rows; ``runtime`` is excluded from equality."""

    config: SimConfig
    rows: list
    runtime: float = field(default=0.0, compare=False)

    def row(self, n: int, method: str) -> SimRow:
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))

    def ratio(self, n: int, method: str) -> float:
        return self.row(n, method).ratio_mean

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.table, r.n, r.method, repr(r.ratio_mean), repr(r.ratio_sd),
                        repr(r.coverage), r.reps, r.seed])

    def format_table(self) -> str:
        """Fixed-width text rendering, one line per row."""
        head = f"{'n':>9}  {'method':<15}{'ratio':>9}{'sd':>9}{'coverage':>10}"
        lines = [f"table {self.config.table}, reps={self.config.reps}, seed={self.config.seed}", head]
        for r in self.rows:
            lines.append(f"{r.n:>9}  {r.method:<15}{r.ratio_mean:>9.3f}{r.ratio_sd:>9.3f}{r.coverage:>10.4f}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# per-replication work
# ---------------------------------------------------------------------------


def _upper_deviation(est: np.ndarray, mean: np.ndarray) -> float:
    return float(eigvalsh(est - mean)[-1])


def _oracle_tb(n: int, d: int, alpha: float) -> float:
    return matrix_bennett_bernstein(BoundRequest(n, d, alpha, variance_norm=UNIFORM_VARIANCE)).radius


def _matrix_methods(s: MatrixSample, alpha: float, methods, predictor: str) -> dict:
    """Radius and upper deviation for each method on one sample."""
    d = s.dim
    truth = np.eye(d) / 2.0
    out = {}
    need_mean = any(m in methods for m in ("tb", "meb1", "meb1c", "hoeffding", "mp", "sharp-mp"))
    dev_mean = _upper_deviation(sample_mean(s).entries, truth) if need_mean else math.nan
    for m in methods:
        if m == "tb":
            out[m] = (_oracle_tb(s.n, d, alpha), dev_mean)
        elif m == "meb1":
            out[m] = (meb1_radius(s, alpha).radius, dev_mean)
        elif m == "meb1c":
            out[m] = (meb1c_radius(s, alpha).radius, dev_mean)
        elif m == "hoeffding":
            # (X - I/2)^2 <= I/4 for eigenvalues in [0, 1]
            out[m] = (matrix_hoeffding_radius(s.n, d, alpha, 0.25).radius, dev_mean)
        elif m == "mp":
            out[m] = (maurer_pontil_radius(s.n, alpha, scalar_variance(s)).radius, dev_mean)
        elif m == "sharp-mp":
            out[m] = (sharp_mp_radius(s.n, alpha, scalar_variance(s)).radius, dev_mean)
        elif m in ("meb2", "meb2-dependent"):
            res = meb2_fixed_n(s, alpha, predictor)
            out[m] = (res.radius, _upper_deviation(res.weighted_mean.entries, truth))
        else:
            raise ConfigError(f"unknown method {m!r}")
    return out


def _method_plan(cfg: SimConfig):
    """Group methods by the generator that feeds them."""
    methods = TABLE_METHODS[cfg.table]
    if cfg.table == "2":
        return [("scalar-uniform", methods)]
    if cfg.table == "coverage":
        return [
            ("projection-mixture", tuple(m for m in methods if m in ("tb", "meb1", "meb1c", "meb2", "hoeffding"))),
            ("scalar-uniform", ("mp", "sharp-mp")),
            ("dependent-stream", ("meb2-dependent",)),
        ]
    return [("projection-mixture", methods)]


_GENERATORS = {
    "projection-mixture": gen_projection_mixture,
    "scalar-uniform": gen_scalar_uniform,
    "dependent-stream": gen_dependent_stream,
}


def run_replication(cfg: SimConfig, n: int, rep: int) -> dict:
    """``{method: (ratio, covered)}`` for one replication at size ``n``."""
    code = _TABLE_CODES[cfg.table]
    out = {}
    for gen_name, methods in _method_plan(cfg):
        rng = replication_rng(cfg.seed, code, n, rep, _GENERATOR_CODES[gen_name])
        s = _GENERATORS[gen_name](rng, n)
        tb = _oracle_tb(n, s.dim, cfg.alpha)
        if cfg.table == "sharpness":
            scale = math.sqrt(2.0 * math.log(s.dim / cfg.alpha) * UNIFORM_VARIANCE / n)
        else:
            scale = tb
        for m, (radius, dev) in _matrix_methods(s, cfg.alpha, methods, cfg.predictor).items():
            out[m] = (radius / scale, dev < radius)
    return out


def run_table(cfg: SimConfig) -> SimReport:
    """Run every replication of ``cfg`` and aggregate in a fixed order."""
    if max(cfg.resolved_grid) > DESK_MAX_N:
        warnings.warn(f"sample sizes above {DESK_MAX_N} take minutes per replication", RuntimeWarning)
    t0 = time.perf_counter()
    methods = TABLE_METHODS[cfg.table]
    rows = []
    for n in cfg.resolved_grid:
        ratios = {m: np.empty(cfg.reps) for m in methods}
        covered = {m: np.empty(cfg.reps, dtype=bool) for m in methods}
        for rep in range(cfg.reps):
            for m, (r, c) in run_replication(cfg, n, rep).items():
                ratios[m][rep] = r
                covered[m][rep] = c
        for m in methods:
            x = ratios[m]
            sd = float(np.std(x, ddof=1)) if cfg.reps > 1 else 0.0
            rows.append(SimRow(cfg.table, n, m, float(np.mean(x)), sd,
                               float(np.mean(covered[m])), cfg.reps, cfg.seed))
    return SimReport(cfg, rows, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# null-hypothesis runs of the sequential test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullRunSummary:
    checkpoints: tuple
    mean_L: tuple
    se_L: tuple
    false_alarm: float
    reps: int


def run_null_monitor(seed: int, reps: int, n_max: int, checkpoints: Sequence[int] = (),
                     alpha: float = 0.05, predictor: str = "running-mean") -> NullRunSummary:
    """Monitor projection-mixture streams against their true mean ``I/2``.

    Uses the anytime gamma schedule, so one path of length ``n_max`` gives
    ``L_n`` at every checkpoint. ``false_alarm`` is the fraction of paths
    whose ``log L_k`` reaches ``log(d/alpha)`` at some ``k <= n_max``.
    """
    checkpoints = tuple(int(c) for c in checkpoints)
    if any(c < 1 or c > n_max for c in checkpoints):
        raise ConfigError(f"checkpoints must lie in [1, {n_max}]")
    schedule = GammaSchedule.anytime(alpha, 3)
    null = np.eye(3) / 2.0
    threshold = math.log(3 / alpha)
    values = np.empty((reps, len(checkpoints)))
    alarms = 0
    for rep in range(reps):
        s = gen_projection_mixture(replication_rng(seed, _TABLE_CODES["null"], n_max, rep), n_max)
        log_l = seqeb_path(s, schedule, m_null=null, predictor=predictor, radii=False).log_L
        values[rep] = np.exp(log_l[[c - 1 for c in checkpoints]])
        alarms += bool(np.any(log_l >= threshold))
    se = np.std(values, axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(len(checkpoints))
    return NullRunSummary(checkpoints, tuple(float(v) for v in values.mean(axis=0)),
                          tuple(float(v) for v in se), alarms / reps, reps)

