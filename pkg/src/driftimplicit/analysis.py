"""Monte Carlo strong-error estimation over coupled paths.

For every path the Brownian increments are drawn once on the reference grid
with ``n_ref`` steps. The reference solution is the implicit scheme on that
grid; every coarse scheme in the ladder is evaluated at all reference times
from the same increments, and the pathwise error is the maximum over those
times of ``|X_coarse - X_ref|``.

Per-path errors are kept in path order and reduced with ``math.fsum``, so the
result does not depend on how paths were split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .brownian import TimeGrid, cumulative, generate_batch
from .config import ExperimentConfig
from .processes import ProcessSpec
from .schemes import DEFAULT_TOL, SchemePath, euler_rows, implicit_rows

__all__ = [
    "CONFIDENCE",
    "ErrorRow",
    "ErrorTable",
    "OrderFit",
    "pathwise_sup_error",
    "lp_estimate",
    "sup_error_batch",
    "collect_sup_errors",
    "error_table",
    "strong_error",
    "fit_order",
    "empirical_moment",
    "moment_estimate",
]

CONFIDENCE = 0.99
_Z = float(norm.ppf(0.5 + CONFIDENCE / 2))


@dataclass(frozen=True)
class ErrorRow:
    n: int
    error: float
    half_width: float


@dataclass(frozen=True)
class ErrorTable:
    """Strong error estimates for a ladder of coarse step counts."""

    rows: tuple
    p: float
    paths: int
    n_ref: int
    seed: int
    label: str = ""
    min_state: float = math.nan

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("rows must have strictly increasing n")

    @property
    def n(self) -> np.ndarray:
        return np.array([r.n for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    @property
    def half_widths(self) -> np.ndarray:
        return np.array([r.half_width for r in self.rows])

    def to_csv(self) -> str:
        lines = ["n,error,half_width,p,paths,seed"]
        for r in self.rows:
            lines.append(f"{r.n},{r.error!r},{r.half_width!r},{self.p!r},{self.paths},{self.seed}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OrderFit:
    """Least-squares line through ``(log2 n, log2 error)``; ``slope`` is the order."""

    slope: float
    intercept: float
    residual: float


def pathwise_sup_error(coarse: SchemePath, reference: SchemePath) -> float:
    """``max_u |x_coarse(u) - x_ref(u)|`` over the shared fine grid."""
    if coarse.grid != reference.grid or coarse.x.shape != reference.x.shape:
        raise ValueError("paths live on different grids")
    return float(np.max(np.abs(coarse.x - reference.x)))


def lp_estimate(sup_errors, p: float):
    """``(mean S^p)^(1/p)`` and its delta-method confidence half-width."""
    s = np.asarray(sup_errors, dtype=float)
    M = s.size
    if M == 0:
        raise ValueError("no samples")
    sp = s**p
    mean = math.fsum(sp) / M
    est = mean ** (1.0 / p)
    if M < 2 or mean == 0:
        return est, 0.0
    var = math.fsum((sp - mean) ** 2) / (M - 1)
    half = _Z * (1.0 / p) * mean ** (1.0 / p - 1.0) * math.sqrt(var / M)
    return est, half


def sup_error_batch(spec: ProcessSpec, horizon: float, ladder, n_ref: int, seed: int,
                    start: int, stop: int, scheme: str = "implicit",
                    solver: str = "auto", tol: float = DEFAULT_TOL):
    """Sup-errors of paths ``start .. stop-1`` for every ladder entry.

    Returns ``(errors, min_state)`` where ``errors`` has shape
    ``(stop - start, len(ladder))`` and ``min_state`` is the smallest ``Y``
    value met by any implicit-scheme path (reference included).
    """
    grid = TimeGrid(horizon, n_ref)
    W = np.ascontiguousarray(cumulative(generate_batch(grid, seed, start, stop)).T)
    Y = implicit_rows(spec, W, horizon, 1, solver, tol)
    min_state = float(Y.min())
    x_ref = np.asarray(spec.inverse_transform(Y), dtype=float)
    out = np.empty((stop - start, len(ladder)))
    for j, n in enumerate(ladder):
        m = n_ref // n
        if scheme == "euler":
            Y = euler_rows(spec, W, horizon, m)
        else:
            Y = implicit_rows(spec, W, horizon, m, solver, tol)
            min_state = min(min_state, float(Y.min()))
        out[:, j] = np.max(np.abs(np.asarray(spec.inverse_transform(Y)) - x_ref), axis=0)
    return out, min_state


def _config_batch(config: ExperimentConfig, start: int, stop: int):
    return sup_error_batch(config.build_spec(), config.horizon, config.ladder, config.n_ref,
                           config.seed, start, stop, config.scheme, config.solver, config.tol)


def _batches(config: ExperimentConfig):
    b = config.batch_size
    return [(i, min(i + b, config.paths)) for i in range(0, config.paths, b)]


def collect_sup_errors(config: ExperimentConfig, workers: int | None = None):
    """Per-path sup-errors for the whole ladder, in path order.

    Batches have a fixed size independent of ``workers``.
    """
    config.build_spec()  # fail fast on parameter errors
    workers = config.workers if workers is None else workers
    batches = _batches(config)
    if workers <= 1 or len(batches) == 1:
        results = [_config_batch(config, a, b) for a, b in batches]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_config_batch, [config] * len(batches),
                                    [a for a, _ in batches], [b for _, b in batches]))
    errors = np.concatenate([r[0] for r in results], axis=0)
    return errors, min(r[1] for r in results)


def error_table(config: ExperimentConfig, workers: int | None = None) -> ErrorTable:
    """Strong error at every ladder entry of ``config`` from one set of coupled paths."""
    errors, min_state = collect_sup_errors(config, workers)
    rows = []
    for j, n in enumerate(config.ladder):
        est, half = lp_estimate(errors[:, j], config.p)
        rows.append(ErrorRow(n, est, half))
    return ErrorTable(tuple(rows), config.p, config.paths, config.n_ref, config.seed,
                      config.build_spec().label, min_state)


def strong_error(config: ExperimentConfig, n: int):
    """``(error, half_width)`` for a single coarse step count ``n``."""
    if config.n_ref % n:
        raise ValueError(f"n={n} does not divide the reference n {config.n_ref}")
    # keep the configured reference grid while evaluating a single level
    single = config.replace(ladder=(n,), reference_multiplier=config.n_ref // n)
    row = error_table(single).rows[0]
    return row.error, row.half_width


def fit_order(table) -> OrderFit:
    """Fit ``log2 error = intercept - slope log2 n`` by least squares.

    ``table`` is an :class:`ErrorTable` or a sequence of ``(n, error)`` pairs.
    """
    if isinstance(table, ErrorTable):
        n, err = table.n, table.errors
    else:
        pairs = np.asarray(table, dtype=float)
        n, err = pairs[:, 0], pairs[:, 1]
    if len(n) < 3:
        raise ValueError("need at least 3 rows to fit an order")
    if np.any(err <= 0):
        raise ValueError("errors must be positive to fit on a log scale")
    x, y = np.log2(n), np.log2(err)
    coef, intercept = np.polyfit(x, y, 1)
    resid = y - (coef * x + intercept)
    return OrderFit(float(-coef), float(intercept), float(np.sqrt(np.mean(resid**2))))


def empirical_moment(x, q: float, positive: bool = True) -> float:
    """Sample mean of ``x**q``; nonpositive states are rejected for ``q < 0``."""
    x = np.asarray(x, dtype=float).ravel()
    if q < 0 and positive and np.any(x <= 0):
        raise ValueError("nonpositive state while estimating a negative moment")
    if q == 0:
        return 1.0
    return math.fsum(x**q) / x.size


def moment_estimate(config: ExperimentConfig, q: float, t: float) -> float:
    """Monte Carlo estimate of ``E[X_t^q]`` from fine-grid implicit paths.

    Paths use the reference grid of ``config`` (``n_ref`` steps) and the
    same per-path streams as the error experiments.
    """
    spec = config.build_spec()
    grid = TimeGrid(config.horizon, config.n_ref)
    k = int(round(t * grid.n / grid.horizon))
    if k < 0 or k > grid.n or not math.isclose(k * grid.step, t, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"time {t} is not on the fine grid")
    if q == 0:
        return 1.0
    values = []
    sub = TimeGrid(config.horizon * k / grid.n, k) if k else None
    for a, b in _batches(config):
        if k == 0:
            values.append(np.full(b - a, spec.x0))
            continue
        inc = generate_batch(grid, config.seed, a, b)[:, :k]
        W = np.ascontiguousarray(cumulative(inc).T)
        Y = implicit_rows(spec, W, sub.horizon, 1, config.solver, config.tol)
        values.append(np.asarray(spec.inverse_transform(Y[-1]), dtype=float))
    return empirical_moment(np.concatenate(values), q, spec.interval.bounded_below)
