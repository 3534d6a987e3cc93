"""Drift implicit Euler scheme and the explicit Euler-Maruyama baseline.

On each coarse interval ``(t_k, t_{k+1}]`` the implicit scheme is defined at
every time ``t`` by

    Y_t = Y_{t_k} + f(Y_t) (t - t_k) + gamma (W_t - W_{t_k}),

so a coarse scheme can be evaluated on any finer grid that shares its
Brownian path. Paths are therefore always produced on the fine grid, with the
value at each coarse node becoming the anchor of the next interval.

Batched helpers work on time-major arrays of shape ``(n + 1, paths)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brownian import IncrementArray, TimeGrid, cumulative
from .processes import CirParams, ParameterError, ProcessSpec, cir_closed_form, validate_step

__all__ = [
    "DEFAULT_TOL",
    "MAX_ITER",
    "SolverError",
    "StepInput",
    "SchemePath",
    "cir_step_closed_form",
    "implicit_step_rootfind",
    "solve_implicit",
    "simulate_path",
    "euler_maruyama_path",
    "implicit_rows",
    "euler_rows",
]

DEFAULT_TOL = 1e-12
MAX_ITER = 200


class SolverError(RuntimeError):
    """The implicit equation could not be solved to tolerance.

    ``index`` locates the first failure: a flat index into the solved array,
    or ``(time_index, path)`` when raised from path simulation.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class StepInput:
    """State at the last coarse node, time elapsed since it, and ``W_t - W_{t_k}``."""

    y_prev: float | np.ndarray
    dt: float | np.ndarray
    dW: float | np.ndarray


@dataclass(frozen=True)
class SchemePath:
    """Scheme values at every time of ``grid``; coarse nodes every ``factor`` points."""

    grid: TimeGrid
    factor: int
    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)

    @property
    def coarse_grid(self) -> TimeGrid:
        return self.grid.coarsened(self.factor)


def cir_step_closed_form(step: StepInput, p: CirParams):
    """Closed-form implicit CIR step (positive root of a quadratic)."""
    dt = np.asarray(step.dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be positive")
    if p.a < 0.25 * p.sigma**2:
        raise ParameterError("closed form needs a >= sigma^2/4", "a ≥ σ²/4")
    y = cir_closed_form(step.y_prev, dt, step.dW, p.a, p.k, p.sigma)
    return float(y) if np.ndim(y) == 0 else y


def solve_implicit(spec: ProcessSpec, target, dt, tol=DEFAULT_TOL, maxiter=MAX_ITER, guess=None):
    """Solve ``y - dt f(y) = target`` for ``y`` in ``spec.interval``, elementwise.

    ``g(y) = y - dt f(y)`` is increasing with slope at least ``1 - kappa dt``,
    so the root is unique. When ``f'`` is known a few plain Newton steps are
    tried first (damped towards ``c`` if they leave the domain). Anything not
    converged by then is bracketed by geometric expansion (towards ``c`` as
    ``c + (y - c) / 2**j``) and refined by bisection-safeguarded Newton, until
    ``|g(y) - target| <= tol (1 + |y|)``.
    """
    target, dt = np.broadcast_arrays(np.asarray(target, dtype=float), np.asarray(dt, dtype=float))
    shape = target.shape
    tgt = target.ravel()
    h = dt.ravel()
    c = spec.interval.c
    f, fp = spec.drift, spec.drift_prime

    if guess is None:
        y = tgt.copy()
    else:
        y = np.broadcast_to(np.asarray(guess, dtype=float), shape).ravel().copy()
    if c > -math.inf:
        bad = ~(y > c)
        if np.any(bad):
            y[bad] = np.where(tgt[bad] > c, tgt[bad], c + 1.0)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        idx = np.arange(y.size)
        yi, ti, hi_ = y, tgt, h
        fast_iters = 12 if fp is not None else 0
        for it in range(fast_iters + 1):
            r = yi - hi_ * f(yi) - ti
            conv = np.abs(r) <= tol * (1.0 + np.abs(yi))
            y[idx] = yi
            if conv.all():
                return y.reshape(shape)
            if it == fast_iters:
                break
            keep = ~conv
            idx, yi, ti, hi_, r = idx[keep], yi[keep], ti[keep], hi_[keep], r[keep]
            cand = yi - r / (1.0 - hi_ * fp(yi))
            if c > -math.inf:
                cand = np.where(cand > c, cand, c + 0.5 * (yi - c))
            yi = np.where(np.isfinite(cand), cand, yi)
        y[idx] = _bracketed(f, fp, c, yi, ti, hi_, tol, maxiter, idx)
    return y.reshape(shape)


def _bracketed(f, fp, c, y, t_, h_, tol, maxiter, idx):
    r = y - h_ * f(y) - t_
    lo = np.where(r < 0, y, np.nan)
    hi = np.where(r > 0, y, np.nan)
    need_lo = np.flatnonzero(r > 0)
    need_hi = np.flatnonzero(r < 0)
    step = 1.0 + np.abs(y)
    for j in range(1, maxiter + 1):
        if need_lo.size == 0 and need_hi.size == 0:
            break
        if need_lo.size:
            if c > -math.inf:
                cand = c + (y[need_lo] - c) / 2.0**j
            else:
                cand = y[need_lo] - step[need_lo] * 2.0**j
            ok = cand - h_[need_lo] * f(cand) - t_[need_lo] <= 0
            lo[need_lo[ok]] = cand[ok]
            hi[need_lo[~ok]] = cand[~ok]
            need_lo = need_lo[~ok]
        if need_hi.size:
            cand = y[need_hi] + step[need_hi] * 2.0**j
            ok = cand - h_[need_hi] * f(cand) - t_[need_hi] >= 0
            hi[need_hi[ok]] = cand[ok]
            lo[need_hi[~ok]] = cand[~ok]
            need_hi = need_hi[~ok]
    else:
        failed = np.concatenate([need_lo, need_hi])
        if failed.size:
            raise SolverError(
                f"bracket expansion failed after {maxiter} iterations "
                f"for {failed.size} equation(s)",
                index=int(idx[failed.min()]),
            )

    active = np.arange(y.size)
    for _ in range(maxiter):
        ya, ha, ta = y[active], h_[active], t_[active]
        ra = ya - ha * f(ya) - ta
        conv = np.abs(ra) <= tol * (1.0 + np.abs(ya))
        la = np.where(ra < 0, ya, lo[active])
        ua = np.where(ra > 0, ya, hi[active])
        collapsed = ~conv & (ua <= np.nextafter(la, np.inf))
        if np.any(collapsed):
            raise SolverError(
                "bracket collapsed before reaching tolerance "
                f"(residual {float(np.max(np.abs(ra[collapsed]))):.3e})",
                index=int(idx[active[collapsed].min()]),
            )
        if fp is not None:
            cand = ya - ra / (1.0 - ha * fp(ya))
            inside = (cand > la) & (cand < ua)
            cand = np.where(inside, cand, 0.5 * (la + ua))
        else:
            cand = 0.5 * (la + ua)
        lo[active], hi[active] = la, ua
        y[active] = np.where(conv, ya, cand)
        active = active[~conv]
        if active.size == 0:
            return y
    raise SolverError(
        f"no convergence within {maxiter} iterations for {active.size} equation(s)",
        index=int(idx[active.min()]),
    )


def implicit_step_rootfind(step: StepInput, spec: ProcessSpec, tol: float = DEFAULT_TOL):
    """One implicit step by monotone root finding.

    Requires ``kappa dt < 1/2``.
    """
    dt = np.asarray(step.dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be positive")
    if not validate_step(spec, float(np.max(dt))).admissible:
        raise ParameterError(
            f"step {float(np.max(dt))} too large for kappa={spec.kappa}", "κ·dt < 1/2"
        )
    y_prev = np.asarray(step.y_prev, dtype=float)
    target = y_prev + spec.gamma * np.asarray(step.dW, dtype=float)
    y = solve_implicit(spec, target, dt, tol=tol)
    return float(y) if np.ndim(y) == 0 else y


def _check_factor(n: int, m: int):
    if int(m) != m or m < 1 or n % m:
        raise ValueError(f"coarse factor {m} does not divide n={n}")


def _resolve_solver(spec: ProcessSpec, solver: str) -> bool:
    if solver == "auto":
        return spec.exact_step is not None
    if solver == "closed-form":
        if spec.exact_step is None:
            raise ValueError(f"no closed-form step for {spec.label or 'this process'}")
        return True
    if solver == "rootfind":
        return False
    raise ValueError(f"unknown solver {solver!r}")


def implicit_rows(spec: ProcessSpec, W: np.ndarray, horizon: float, m: int,
                  solver: str = "auto", tol: float = DEFAULT_TOL) -> np.ndarray:
    """Implicit scheme with coarse factor ``m`` on a batch of Brownian paths.

    ``W`` has shape ``(N + 1, paths)`` with ``W[0] = 0``. Returns ``Y`` of the
    same shape, evaluated at all ``N + 1`` fine times.
    """
    N = W.shape[0] - 1
    _check_factor(N, m)
    n = N // m
    verdict = validate_step(spec, horizon / n)
    if not verdict.admissible:
        raise ParameterError(
            f"coarse step {horizon / n} inadmissible for kappa={spec.kappa}: "
            f"need at least {validate_step(spec, horizon / n, horizon).min_steps} steps",
            "κ·T/n < 1/2",
        )
    exact = _resolve_solver(spec, solver)
    dts = (np.arange(1, m + 1) * horizon / N)[:, None]
    Y = np.empty(W.shape)
    Y[0] = spec.y0
    anchor = Y[0]
    gamma = spec.gamma
    for k in range(n):
        base = k * m
        dW = W[base + 1: base + m + 1] - W[base]
        if exact:
            y = spec.exact_step(anchor, dts, dW)
        else:
            try:
                y = solve_implicit(spec, anchor + gamma * dW, dts, tol=tol)
            except SolverError as err:
                j, path = divmod(err.index, W.shape[1])
                raise SolverError(f"{err} at time index {base + 1 + j}, path {path}",
                                  index=(base + 1 + j, path)) from err
        Y[base + 1: base + m + 1] = y
        anchor = Y[base + m]
    return Y


def euler_rows(spec: ProcessSpec, W: np.ndarray, horizon: float, m: int) -> np.ndarray:
    """Euler-Maruyama with coarse factor ``m`` on a batch; drift frozen at ``t_k``."""
    if spec.interval.bounded_below:
        raise ParameterError(
            "Euler-Maruyama may leave a bounded-below domain; use the implicit scheme",
            "c = −∞",
        )
    N = W.shape[0] - 1
    _check_factor(N, m)
    n = N // m
    dts = (np.arange(1, m + 1) * horizon / N)[:, None]
    Y = np.empty(W.shape)
    Y[0] = spec.y0
    anchor = Y[0]
    for k in range(n):
        base = k * m
        dW = W[base + 1: base + m + 1] - W[base]
        Y[base + 1: base + m + 1] = anchor + spec.drift(anchor) * dts + spec.gamma * dW
        anchor = Y[base + m]
    return Y


def _as_path(spec, fine: IncrementArray, m, rows) -> SchemePath:
    y = rows[:, 0]
    return SchemePath(fine.grid, int(m), y, np.asarray(spec.inverse_transform(y), dtype=float))


def simulate_path(spec: ProcessSpec, fine: IncrementArray, m: int = 1,
                  solver: str = "auto", tol: float = DEFAULT_TOL) -> SchemePath:
    """Run the implicit scheme with ``fine.grid.n / m`` coarse steps.

    The result holds the scheme at every fine time, each intra-interval value
    solving the implicit equation anchored at the preceding coarse node.
    ``solver`` is ``"auto"`` (closed form when available), ``"closed-form"``
    or ``"rootfind"``.
    """
    W = cumulative(fine)[:, None]
    return _as_path(spec, fine, m, implicit_rows(spec, W, fine.grid.horizon, m, solver, tol))


def euler_maruyama_path(spec: ProcessSpec, fine: IncrementArray, m: int = 1) -> SchemePath:
    """Explicit Euler-Maruyama counterpart of :func:`simulate_path` (``c = -inf`` only)."""
    W = cumulative(fine)[:, None]
    return _as_path(spec, fine, m, euler_rows(spec, W, fine.grid.horizon, m))
