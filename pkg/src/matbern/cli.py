"""Command-line interface.

Subcommands::

    matbern radius    --method meb2 --alpha 0.05 --input sample.mat
    matbern monitor   --alpha 0.05 --d 3 --null null.mat < stream.mat
    matbern simulate  --table 1 --reps 100 --seed 1 --max-n 10000 --out t1.csv
    matbern generate  --kind projection-mixture --n 50 --seed 1

Output is JSON (``radius``), JSON lines (``monitor``) or CSV
(``simulate``); ``--pretty`` switches to human-readable text. Options
can also come from ``--config FILE`` holding ``key=value`` lines, where
keys are option names (``max-n`` or ``max_n``); flags on the command line
win.

Exit codes: 0 success, 1 computation or input-data error, 2 usage error,
3 configuration error. Every nonzero exit writes one JSON object
``{"error": {"type", "message", "exit_code"}}`` to standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

from . import __version__
from .bounds import (
    BoundRequest,
    matrix_bennett_bernstein,
    matrix_hoeffding_radius,
    maurer_pontil_radius,
    meb1_radius,
    meb1c_radius,
    minsker_radius,
    scalar_variance,
    sharp_mp_radius,
    two_sided,
)
from .errors import ConfigError, MatBernError
from .estimators import MatrixSample
from .matio import iter_records, read_matrices, write_csv, write_text
from .seqeb import PREDICTORS, GammaSchedule, meb2_radius, monitor
from .simharness import (
    DESK_MAX_N,
    TABLE_METHODS,
    SimConfig,
    gen_covariance_outer,
    gen_dependent_stream,
    gen_projection_mixture,
    gen_scalar_uniform,
    replication_rng,
    run_table,
)

SEED_ENV = "MATBERN_SEED"
EXIT_OK, EXIT_COMPUTE, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3

METHODS = ("tb", "meb1", "meb1c", "mb", "hoeffding", "mp", "sharp-mp", "meb2")
ORACLE_METHODS = ("tb", "mb", "hoeffding")
GENERATOR_KINDS = ("projection-mixture", "scalar-uniform", "covariance-outer", "dependent-stream")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return a


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {text}")
    return v


def _unit_open(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return v


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v >= 0.0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be finite and non-negative, got {text}")
    return v


def _grid(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated integers: {text!r}") from None


def _flag(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags override it")
    common.add_argument("--pretty", action="store_true", help="human-readable output")

    parser = _Parser(prog="matbern", description="Matrix empirical Bernstein confidence sets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("radius", parents=[common], help="confidence radius for a sample")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--input", help="matrix file ('-' for stdin); optional for oracle methods")
    p.add_argument("--n", type=_positive_int, help="sample size for oracle methods without --input")
    p.add_argument("--d", type=_positive_int, help="dimension for oracle methods without --input")
    p.add_argument("--variance-norm", type=_nonneg, help="||V|| for tb and mb")
    p.add_argument("--trace-v", type=_nonneg, help="tr(V) for mb")
    p.add_argument("--bound-b", type=_nonneg, default=None,
                   help="B for tb/mb (default 1); ||B|| for hoeffding (required)")
    p.add_argument("--two-sided", action="store_true", help="spend alpha/2 on the upper tail")

    p = sub.add_parser("monitor", parents=[common], help="sequential test over a stdin stream")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--d", type=_positive_int)
    p.add_argument("--null", help="matrix file holding the null mean")
    p.add_argument("--n", type=_positive_int, help="planned sample size (fixed schedule)")
    p.add_argument("--schedule", choices=("fixed", "anytime", "user"))
    p.add_argument("--gammas", help="file of whitespace-separated weights for --schedule user")
    p.add_argument("--predictor", choices=PREDICTORS, default="running-mean")
    p.add_argument("--randomize-u", type=_unit_open, help="independent Unif(0,1) draw")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo tables")
    p.add_argument("--table", choices=tuple(TABLE_METHODS))
    p.add_argument("--reps", type=_positive_int, default=100)
    p.add_argument("--seed", type=_seed, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--max-n", type=_positive_int, default=DESK_MAX_N)
    p.add_argument("--grid", type=_grid, help="comma-separated sample sizes")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--allow-large", type=_flag, nargs="?", const=True, default=False,
                   help=f"permit sample sizes above {DESK_MAX_N} (slow)")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")

    p = sub.add_parser("generate", parents=[common], help="write a synthetic sample")
    p.add_argument("--kind", choices=GENERATOR_KINDS, default="projection-mixture")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--d", type=_positive_int, default=3, help="dimension for covariance-outer")
    p.add_argument("--seed", type=_seed, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out", default="-")
    return parser


@dataclass(frozen=True)
class CliConfig:
    command: str
    options: dict

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config_file(path: str) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(sub: argparse.ArgumentParser, path: str) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, text in read_config_file(path).items():
        action = actions.get(key)
        if action is None:
            raise ConfigError(f"{path}: unknown option {key!r} for this subcommand")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = _flag(text)
            elif action.type is not None:
                value = action.type(text)
            else:
                value = text
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"{path}: {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"{path}: {key} must be one of {list(action.choices)}, got {value!r}")
        defaults[key] = value
    sub.set_defaults(**defaults)


def _default_seed() -> int:
    text = os.environ.get(SEED_ENV)
    if text is None or text == "":
        return 0
    try:
        return _seed(text)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(f"${SEED_ENV}: {exc}") from None


def _require(cfg: dict, command: str, *names: str) -> None:
    for name in names:
        if cfg.get(name) is None:
            raise UsageError(f"matbern {command}: --{name.replace('_', '-')} is required")


def _require_file(path: Optional[str], flag: str) -> None:
    if path is not None and path != "-" and (not os.path.exists(path) or os.path.isdir(path)):
        raise UsageError(f"{flag}: no such file {path!r}")


def parse_args(argv: Sequence[str]) -> CliConfig:
    """Parse and validate; raises :class:`UsageError` or :class:`ConfigError`."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("matbern: a subcommand is required (radius, monitor, simulate, generate)")
    if ns.config is not None:
        sub = _subparser(parser, ns.command)
        _apply_config(sub, ns.config)
        ns = parser.parse_args(argv)
    opts = vars(ns)
    cmd = opts.pop("command")

    if cmd == "radius":
        _require(opts, cmd, "method")
        _require_file(opts["input"], "--input")
        if opts["method"] not in ORACLE_METHODS:
            _require(opts, cmd, "input")
        elif opts["input"] is None:
            _require(opts, cmd, "n", "d")
        if opts["method"] in ("tb", "mb"):
            _require(opts, cmd, "variance_norm")
        if opts["method"] == "mb":
            _require(opts, cmd, "trace_v")
        if opts["method"] == "hoeffding":
            _require(opts, cmd, "bound_b")
    elif cmd == "monitor":
        _require(opts, cmd, "d", "null")
        _require_file(opts["null"], "--null")
        schedule = opts["schedule"]
        if schedule is None:
            schedule = "fixed" if opts["n"] is not None else "anytime"
        if schedule == "fixed":
            _require(opts, cmd, "n")
        elif opts["n"] is not None:
            raise UsageError(f"matbern monitor: --n conflicts with --schedule {schedule}")
        if schedule == "user":
            _require(opts, cmd, "gammas")
            _require_file(opts["gammas"], "--gammas")
        elif opts["gammas"] is not None:
            raise UsageError("matbern monitor: --gammas needs --schedule user")
        opts["schedule"] = schedule
    elif cmd == "simulate":
        _require(opts, cmd, "table")
        if opts["seed"] is None:
            opts["seed"] = _default_seed()
    elif cmd == "generate":
        _require(opts, cmd, "n")
        if opts["seed"] is None:
            opts["seed"] = _default_seed()
    return CliConfig(cmd, opts)


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _read_sample(path: str, stdin: TextIO) -> MatrixSample:
    mats = list(iter_records(stdin)) if path == "-" else read_matrices(path)
    return MatrixSample(mats)


def _json_line(obj, pretty: bool) -> str:
    return json.dumps(obj, indent=2 if pretty else None, allow_nan=False)


def _radius(cfg: CliConfig, stdin: TextIO) -> dict:
    method, alpha = cfg.method, cfg.alpha
    s = _read_sample(cfg.input, stdin) if cfg.input is not None else None
    n = s.n if s is not None else cfg.n
    d = s.dim if s is not None else cfg.d

    def compute(alpha):
        if method in ("tb", "mb"):
            req = BoundRequest(n, d, alpha, B=cfg.bound_b if cfg.bound_b is not None else 1.0,
                               variance_norm=cfg.variance_norm, trace_V=cfg.trace_v)
            return matrix_bennett_bernstein(req) if method == "tb" else minsker_radius(req)
        if method == "hoeffding":
            return matrix_hoeffding_radius(n, d, alpha, cfg.bound_b)
        if method == "meb1":
            return meb1_radius(s, alpha)
        if method == "meb1c":
            return meb1c_radius(s, alpha)
        if method == "meb2":
            return meb2_radius(s, alpha)
        sigma2 = scalar_variance(s)
        fn = maurer_pontil_radius if method == "mp" else sharp_mp_radius
        return fn(s.n, alpha, sigma2)

    res = two_sided(compute, alpha=alpha) if cfg.two_sided else compute(alpha)
    out = res.to_json()
    out.update(alpha=alpha, d=d)
    return out


def _load_gammas(path: str) -> list:
    with open(path) as fh:
        text = fh.read()
    try:
        return [float(tok) for tok in text.split()]
    except ValueError:
        raise MatBernError(f"{path}: gamma file must hold whitespace-separated numbers") from None


def _monitor(cfg: CliConfig, stdin: TextIO, stdout: TextIO) -> None:
    nulls = read_matrices(cfg.null)
    if len(nulls) != 1:
        raise MatBernError(f"{cfg.null}: expected exactly one matrix, found {len(nulls)}")
    if cfg.schedule == "fixed":
        schedule = GammaSchedule.fixed(cfg.alpha, cfg.d, cfg.n)
    elif cfg.schedule == "anytime":
        schedule = GammaSchedule.anytime(cfg.alpha, cfg.d)
    else:
        schedule = GammaSchedule.user(cfg.alpha, cfg.d, _load_gammas(cfg.gammas))
    if cfg.pretty:
        stdout.write(f"{'step':>6} {'gamma':>10} {'log_L':>12} {'threshold':>10} {'radius':>10}  reject\n")
    for dec in monitor(iter_records(stdin), schedule, nulls[0], cfg.predictor, cfg.randomize_u):
        if cfg.pretty:
            stdout.write(f"{dec.step:>6} {dec.gamma:>10.5f} {dec.log_supermartingale:>12.5f} "
                         f"{dec.threshold:>10.5f} {dec.current_radius:>10.5f}  {dec.reject}\n")
        else:
            stdout.write(json.dumps(dec.to_json(), allow_nan=False) + "\n")
        stdout.flush()


def _open_out(path: str, stdout: TextIO):
    if path == "-":
        return stdout, False
    return open(path, "w", newline=""), True


def _simulate(cfg: CliConfig, stdout: TextIO) -> None:
    sim = SimConfig(cfg.table, reps=cfg.reps, seed=cfg.seed, max_n=cfg.max_n, grid=cfg.grid,
                    alpha=cfg.alpha, allow_large=cfg.allow_large)
    report = run_table(sim)
    fh, close = _open_out(cfg.out, stdout)
    try:
        if cfg.pretty:
            fh.write(report.format_table() + "\n")
        else:
            report.write_csv(fh)
    finally:
        if close:
            fh.close()


def _generate(cfg: CliConfig, stdout: TextIO) -> None:
    rng = replication_rng(cfg.seed)
    if cfg.kind == "projection-mixture":
        s = gen_projection_mixture(rng, cfg.n)
    elif cfg.kind == "scalar-uniform":
        s = gen_scalar_uniform(rng, cfg.n)
    elif cfg.kind == "dependent-stream":
        s = gen_dependent_stream(rng, cfg.n)
    else:
        s, _ = gen_covariance_outer(rng, cfg.n, cfg.d)
    fh, close = _open_out(cfg.out, stdout)
    try:
        if cfg.format == "csv":
            write_csv(s, fh)
        else:
            write_text(s, fh)
    finally:
        if close:
            fh.close()


def run(cfg: CliConfig, stdin: TextIO = None, stdout: TextIO = None) -> int:
    """Execute a parsed command; errors propagate to :func:`main`."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    if cfg.command == "radius":
        stdout.write(_json_line(_radius(cfg, stdin), cfg.pretty) + "\n")
    elif cfg.command == "monitor":
        _monitor(cfg, stdin, stdout)
    elif cfg.command == "simulate":
        _simulate(cfg, stdout)
    elif cfg.command == "generate":
        _generate(cfg, stdout)
    return EXIT_OK


def _report(exc: BaseException, code: int, stderr: TextIO) -> int:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None, stdin: TextIO = None, stdout: TextIO = None,
         stderr: TextIO = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    stderr = sys.stderr if stderr is None else stderr
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        return _report(exc, EXIT_USAGE, stderr)
    except ConfigError as exc:
        return _report(exc, EXIT_CONFIG, stderr)
    try:
        return run(cfg, stdin, stdout)
    except ConfigError as exc:
        return _report(exc, EXIT_CONFIG, stderr)
    except (MatBernError, ValueError, ArithmeticError, OSError) as exc:
        return _report(exc, EXIT_COMPUTE, stderr)


if __name__ == "__main__":
    sys.exit(main())
