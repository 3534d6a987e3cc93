"""Transformed SDEs ``dY = f(Y) dt + gamma dW`` on ``I = (c, +inf)``.

Each built-in family maps its original state ``X`` to a variable ``Y`` with
constant noise and provides the inverse map back to ``X``:

* CIR, ``Y = sqrt(X)``;
* CEV-type with ``1/2 < alpha < 1``, ``Y = X**(1 - alpha)``;
* general bounded diffusions through the Lamperti map
  ``phi(x) = int_0^x dz / sigma(z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ParameterError",
    "Interval",
    "ProcessSpec",
    "CirParams",
    "CevParams",
    "LampertiSpec",
    "StepVerdict",
    "cir_closed_form",
    "cir_drift",
    "cir_spec",
    "cev_drift",
    "cev_spec",
    "cev_kappa",
    "lamperti_spec",
    "constant_diffusion",
    "cos_diffusion",
    "probe_kappa",
    "validate_step",
]

Fn = Callable[[np.ndarray], np.ndarray]


class ParameterError(ValueError):
    """Parameters violate a hypothesis needed for the scheme to be well posed.

    ``condition`` names the violated inequality.
    """

    def __init__(self, message: str, condition: str = ""):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class Interval:
    """Open half-line ``(c, +inf)``; ``c = -inf`` gives the real line."""

    c: float = -math.inf

    def contains(self, y):
        return np.asarray(y) > self.c

    @property
    def bounded_below(self) -> bool:
        return self.c > -math.inf


@dataclass(frozen=True)
class ProcessSpec:
    """A drift/noise pair in the constant-noise variable.

    ``inverse_transform`` maps ``Y`` back to the state of interest ``X``.
    ``exact_step`` is an optional closed-form solver of the implicit step,
    called as ``exact_step(y_prev, dt, dW)``.
    """

    interval: Interval
    drift: Fn
    gamma: float
    kappa: float
    inverse_transform: Fn
    y0: float
    label: str = ""
    drift_prime: Optional[Fn] = None
    drift_second: Optional[Fn] = None
    exact_step: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}", "gamma > 0")
        if not self.interval.contains(self.y0):
            raise ParameterError(
                f"initial value {self.y0} outside ({self.interval.c}, inf)", "y0 in I"
            )

    @property
    def x0(self) -> float:
        return float(self.inverse_transform(np.asarray(self.y0)))


# ---------------------------------------------------------------------------
# step admissibility


@dataclass(frozen=True)
class StepVerdict:
    """Outcome of :func:`validate_step`.

    ``admissible`` uses the conservative margin ``kappa h < 1/2``;
    ``well_defined`` is the bare bijectivity requirement ``kappa h < 1``.
    ``min_steps`` / ``min_steps_defined`` are the smallest step counts over
    ``horizon`` meeting each requirement (``None`` without a horizon).
    """

    admissible: bool
    well_defined: bool
    kappa: float
    h: float
    max_step: float
    min_steps: Optional[int] = None
    min_steps_defined: Optional[int] = None


def _min_steps(kappa: float, horizon: float, bound: float) -> int:
    # smallest n >= 1 with kappa * horizon / n < bound
    if kappa <= 0:
        return 1
    return max(1, math.floor(kappa * horizon / bound) + 1)


def validate_step(spec: ProcessSpec | float, h: float, horizon: Optional[float] = None) -> StepVerdict:
    """Check whether step ``h`` is admissible for ``spec`` (or a bare kappa)."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    kappa = spec.kappa if isinstance(spec, ProcessSpec) else float(spec)
    max_step = math.inf if kappa <= 0 else 0.5 / kappa
    return StepVerdict(
        admissible=kappa * h < 0.5,
        well_defined=kappa * h < 1.0,
        kappa=kappa,
        h=h,
        max_step=max_step,
        min_steps=None if horizon is None else _min_steps(kappa, horizon, 0.5),
        min_steps_defined=None if horizon is None else _min_steps(kappa, horizon, 1.0),
    )


def probe_kappa(drift: Fn, probes, drift_prime: Optional[Fn] = None, inflate: float = 0.1) -> float:
    """Estimate a one-sided Lipschitz constant of ``drift`` on ``probes``.

    Takes the largest derivative (or adjacent difference quotient when no
    derivative is supplied) and adds ``inflate`` times its magnitude.
    """
    y = np.unique(np.asarray(probes, dtype=float))
    if drift_prime is not None:
        slopes = np.asarray(drift_prime(y), dtype=float)
    else:
        slopes = np.diff(drift(y)) / np.diff(y)
    slopes = slopes[np.isfinite(slopes)]
    if slopes.size == 0:
        raise ValueError("no finite slope on the probe grid")
    top = float(slopes.max())
    return top + inflate * abs(top)


def _half_line_probes(c: float) -> np.ndarray:
    return c + np.logspace(-8, 6, 4001)


def _real_line_probes() -> np.ndarray:
    pos = np.logspace(-6, 3, 1801)
    return np.concatenate([-pos[::-1], [0.0], pos])


# ---------------------------------------------------------------------------
# CIR


@dataclass(frozen=True)
class CirParams:
    """``dX = (a - k X) dt + sigma sqrt(X) dW``, ``X_0 = x0``."""

    a: float
    k: float
    sigma: float
    x0: float

    def __post_init__(self):
        if not self.a >= 0:
            raise ParameterError(f"a must be nonnegative, got {self.a}", "a >= 0")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}", "sigma > 0")
        if not self.x0 > 0:
            raise ParameterError(f"x0 must be positive, got {self.x0}", "x0 > 0")

    def check_positivity(self):
        if self.sigma**2 > 2 * self.a:
            raise ParameterError(
                f"CIR requires 2a >= sigma^2 (got a={self.a}, sigma^2={self.sigma**2})",
                "2a ≥ σ²",
            )


def cir_closed_form(y_prev, dt, dW, a, k, sigma):
    """Positive root of the CIR implicit step, vectorized.

    Solves ``q y^2 - z y - B = 0`` with ``z = y_prev + sigma/2 dW``,
    ``q = 1 + k dt / 2`` and ``B = (a - sigma^2/4) dt / 2``.
    """
    z = np.asarray(y_prev, dtype=float) + 0.5 * sigma * np.asarray(dW, dtype=float)
    dt = np.asarray(dt, dtype=float)
    q = 1.0 + 0.5 * k * dt
    if np.any(q <= 0):
        raise ParameterError(
            "time step too large: need 1 + k dt / 2 > 0", "T/n ≤ 2/max(−k,0)"
        )
    B = 0.5 * (a - 0.25 * sigma**2) * dt
    s = np.sqrt(z * z + 4.0 * q * B)
    with np.errstate(divide="ignore", invalid="ignore"):
        # product of roots is -B/q; avoids cancellation when z < 0
        y = np.where(z >= 0, (z + s) / (2.0 * q), 2.0 * B / (s - z))
    return np.where((z < 0) & (B == 0), 0.0, y)


def cir_drift(p: CirParams):
    """Drift, first and second derivative of the CIR SDE in ``Y = sqrt(X)``."""
    A = 0.5 * (p.a - 0.25 * p.sigma**2)
    half_k = 0.5 * p.k

    def drift(y):
        y = np.asarray(y, dtype=float)
        return A / y - half_k * y

    def drift_prime(y):
        y = np.asarray(y, dtype=float)
        return -A / (y * y) - half_k

    def drift_second(y):
        y = np.asarray(y, dtype=float)
        return 2.0 * A / y**3

    return drift, drift_prime, drift_second


def cir_spec(p: CirParams, check_positivity: bool = True) -> ProcessSpec:
    """Square-root transform of the CIR process.

    ``check_positivity=False`` skips the ``2a >= sigma^2`` gate, which is
    only useful to inspect degenerate drifts.
    """
    if check_positivity:
        p.check_positivity()
    a, k, sigma = p.a, p.k, p.sigma
    drift, drift_prime, drift_second = cir_drift(p)

    def step(y_prev, dt, dW):
        return cir_closed_form(y_prev, dt, dW, a, k, sigma)

    # f' = -(a - sigma^2/4) / (2 y^2) - k/2 <= -k/2 when a >= sigma^2/4
    kappa = max(-0.5 * k, 0.0) if a >= 0.25 * sigma**2 else math.inf
    return ProcessSpec(
        interval=Interval(0.0),
        drift=drift,
        gamma=0.5 * sigma,
        kappa=kappa,
        inverse_transform=np.square,
        y0=math.sqrt(p.x0),
        label=f"CIR(a={a}, k={k}, sigma={sigma}, x0={p.x0})",
        drift_prime=drift_prime,
        drift_second=drift_second,
        exact_step=step,
    )


# ---------------------------------------------------------------------------
# CEV-type


@dataclass(frozen=True)
class CevParams:
    """``dX = (a - k X) dt + sigma X**alpha dW`` with ``1/2 < alpha < 1``."""

    a: float
    k: float
    sigma: float
    alpha: float
    x0: float

    def __post_init__(self):
        if not 0.5 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (1/2, 1), got {self.alpha}", "1/2 < α < 1")
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a}", "a > 0")
        if not self.sigma >= 0:
            raise ParameterError(f"sigma must be nonnegative, got {self.sigma}", "σ > 0")
        if not self.x0 > 0:
            raise ParameterError(f"x0 must be positive, got {self.x0}", "x0 > 0")


def cev_kappa(p: CevParams) -> float:
    """Exact supremum of the CEV drift derivative in the ``Y`` variable.

    With ``u = 1/y`` and ``r = alpha/(1-alpha) > 1`` the derivative is
    ``(1-alpha)(-k + A u^2 - a r u^(r+1))`` where ``A = alpha sigma^2 / 2``.
    The bracket in ``u`` peaks at ``u*^(r-1) = 2A / (a r (r+1))``.
    """
    alpha = p.alpha
    r = alpha / (1 - alpha)
    A = 0.5 * alpha * p.sigma**2
    if A == 0:
        peak = 0.0
    else:
        u_star = (2 * A / (p.a * r * (r + 1))) ** (1 / (r - 1))
        peak = A * u_star**2 * (r - 1) / (r + 1)
    return (1 - alpha) * (-p.k + peak)


def cev_drift(p: CevParams):
    """Drift, first and second derivative of the CEV-type SDE in ``Y = X**(1-alpha)``."""
    alpha, a, k, sigma = p.alpha, p.a, p.k, p.sigma
    beta = 1.0 - alpha
    r = alpha / beta
    c_noise = 0.5 * alpha * sigma**2

    def drift(y):
        y = np.asarray(y, dtype=float)
        return beta * (a * y ** (-r) - k * y - c_noise / y)

    def drift_prime(y):
        y = np.asarray(y, dtype=float)
        return beta * (-a * r * y ** (-r - 1) - k + c_noise / (y * y))

    def drift_second(y):
        y = np.asarray(y, dtype=float)
        return beta * (a * r * (r + 1) * y ** (-r - 2) - 2 * c_noise / y**3)

    return drift, drift_prime, drift_second


def cev_spec(p: CevParams, kappa: Optional[float] = None) -> ProcessSpec:
    """``Y = X**(1 - alpha)`` transform of the CEV-type SDE.

    ``kappa`` defaults to the analytic bound :func:`cev_kappa`.
    """
    if not p.sigma > 0:
        raise ParameterError("sigma must be positive to build a CEV scheme", "σ > 0")
    beta = 1.0 - p.alpha
    drift, drift_prime, drift_second = cev_drift(p)

    def inverse(y):
        return np.asarray(y, dtype=float) ** (1.0 / beta)

    return ProcessSpec(
        interval=Interval(0.0),
        drift=drift,
        gamma=p.sigma * beta,
        kappa=cev_kappa(p) if kappa is None else float(kappa),
        inverse_transform=inverse,
        y0=p.x0**beta,
        label=f"CEV(a={p.a}, k={p.k}, sigma={p.sigma}, alpha={p.alpha}, x0={p.x0})",
        drift_prime=drift_prime,
        drift_second=drift_second,
    )


# ---------------------------------------------------------------------------
# general Lamperti transform


@dataclass(frozen=True)
class LampertiSpec:
    """``dX = b(X) dt + sigma(X) dW`` with ``sigma_lo <= sigma <= sigma_hi``.

    ``phi``/``phi_inv`` may be supplied in closed form. Otherwise
    ``phi(x) = int_0^x dz / sigma(z)`` is computed by adaptive quadrature and
    inverted by bracketed root finding. ``db`` and ``d2sigma`` are optional
    and only needed to give the drift a derivative (Newton steps).
    """

    b: Fn
    sigma: Fn
    dsigma: Fn
    sigma_lo: float
    sigma_hi: float
    x0: float
    phi: Optional[Fn] = None
    phi_inv: Optional[Fn] = None
    db: Optional[Fn] = None
    d2sigma: Optional[Fn] = None
    kappa: Optional[float] = None
    label: str = "lamperti"


_QUAD_TOL = 1e-12


def _quad_phi(sigma: Fn) -> Fn:
    def phi_scalar(x):
        if x == 0.0:
            return 0.0
        val, _ = integrate.quad(lambda z: 1.0 / float(sigma(z)), 0.0, x,
                                epsabs=_QUAD_TOL, epsrel=1e-13, limit=200)
        return val

    vec = np.vectorize(phi_scalar, otypes=[float])
    return lambda x: vec(np.asarray(x, dtype=float))


def _quad_phi_inv(phi: Fn, sigma_lo: float, sigma_hi: float) -> Fn:
    # phi is increasing with slope in [1/sigma_hi, 1/sigma_lo], so phi^{-1}(y)
    # lies between sigma_lo * y and sigma_hi * y
    def inv_scalar(y):
        if y == 0.0:
            return 0.0
        lo, hi = sorted((sigma_lo * y, sigma_hi * y))
        lo -= 1e-9 * (1 + abs(lo))
        hi += 1e-9 * (1 + abs(hi))
        return optimize.brentq(lambda x: float(phi(x)) - y, lo, hi,
                               xtol=_QUAD_TOL, rtol=4 * np.finfo(float).eps, maxiter=200)

    vec = np.vectorize(inv_scalar, otypes=[float])
    return lambda y: vec(np.asarray(y, dtype=float))


def _check_sigma_bounds(s: LampertiSpec, probes: np.ndarray):
    if not 0 < s.sigma_lo <= s.sigma_hi:
        raise ParameterError("need 0 < sigma_lo <= sigma_hi", "0 < σ_lo ≤ σ_hi")
    vals = np.asarray(s.sigma(probes), dtype=float)
    bad = (vals < s.sigma_lo) | (vals > s.sigma_hi) | ~np.isfinite(vals)
    if np.any(bad):
        x = probes[np.argmax(bad)]
        raise ParameterError(
            f"diffusion coefficient {float(s.sigma(x))} at x={x} outside "
            f"[{s.sigma_lo}, {s.sigma_hi}]",
            "σ_lo ≤ σ(x) ≤ σ_hi",
        )


def _phi_sorted(sigma: Fn, xs: np.ndarray) -> np.ndarray:
    # phi on an increasing grid containing 0, one short quadrature per gap
    inv = lambda z: 1.0 / float(sigma(z))
    gaps = np.array([integrate.quad(inv, u, v, epsabs=_QUAD_TOL, epsrel=1e-13)[0]
                     for u, v in zip(xs[:-1], xs[1:])])
    out = np.concatenate([[0.0], np.cumsum(gaps)])
    return out - out[np.searchsorted(xs, 0.0)]


def _lamperti_kappa(s: LampertiSpec, phi: Fn, inflate: float = 0.1) -> float:
    # sup_y f'(y) = sup_x h'(x) sigma(x) with h = b/sigma - sigma'/2, so
    # probing in x avoids inverting phi
    xs = _real_line_probes()
    h = s.b(xs) / s.sigma(xs) - 0.5 * s.dsigma(xs)
    if s.db is not None and s.d2sigma is not None:
        sx = s.sigma(xs)
        slopes = (s.db(xs) / sx - s.b(xs) * s.dsigma(xs) / sx**2 - 0.5 * s.d2sigma(xs)) * sx
    else:
        ys = _phi_sorted(s.sigma, xs) if s.phi is None else np.asarray(phi(xs), dtype=float)
        slopes = np.diff(h) / np.diff(ys)
    top = float(np.max(slopes[np.isfinite(slopes)]))
    return top + inflate * abs(top)


def lamperti_spec(s: LampertiSpec, scale: float = 1.0) -> ProcessSpec:
    """Lamperti transform ``Y = scale * phi(X)`` of a bounded diffusion.

    With ``scale = 1`` this is the unit-noise equation with drift
    ``f = (b / sigma - sigma' / 2) o phi^{-1}``. A general ``scale`` gives
    ``f_scale(y) = scale * f(y / scale)`` with noise ``scale``; the resulting
    scheme maps back to the same ``X`` paths.
    """
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}", "γ > 0")
    probes = np.linspace(-50.0, 50.0, 2001)
    _check_sigma_bounds(s, probes)
    phi = s.phi if s.phi is not None else _quad_phi(s.sigma)
    phi_inv = s.phi_inv if s.phi_inv is not None else _quad_phi_inv(phi, s.sigma_lo, s.sigma_hi)
    b, sig, dsig = s.b, s.sigma, s.dsigma

    def base_drift(y):
        x = phi_inv(y)
        return b(x) / sig(x) - 0.5 * dsig(x)

    base_prime = None
    if s.db is not None and s.d2sigma is not None:
        db, d2sig = s.db, s.d2sigma

        def base_prime(y):
            x = phi_inv(y)
            sx = sig(x)
            h_prime = db(x) / sx - b(x) * dsig(x) / sx**2 - 0.5 * d2sig(x)
            return h_prime * sx

    kappa = s.kappa
    if kappa is None:
        kappa = _lamperti_kappa(s, phi)

    def drift(y):
        return scale * base_drift(np.asarray(y, dtype=float) / scale)

    drift_prime = None
    if base_prime is not None:
        def drift_prime(y):
            return base_prime(np.asarray(y, dtype=float) / scale)

    def inverse(y):
        return phi_inv(np.asarray(y, dtype=float) / scale)

    return ProcessSpec(
        interval=Interval(-math.inf),
        drift=drift,
        gamma=float(scale),
        kappa=float(kappa),
        inverse_transform=inverse,
        y0=float(scale * phi(np.asarray(s.x0, dtype=float))),
        label=s.label if scale == 1 else f"{s.label} (scale {scale})",
        drift_prime=drift_prime,
    )


def constant_diffusion(sigma0: float, lam: float = 1.0, theta: float = 0.0, x0: float = 1.0) -> LampertiSpec:
    """``dX = (theta - lam X) dt + sigma0 dW``; linear drift in ``Y = X / sigma0``."""
    if not sigma0 > 0:
        raise ParameterError(f"sigma0 must be positive, got {sigma0}", "σ0 > 0")
    return LampertiSpec(
        b=lambda x: theta - lam * np.asarray(x, dtype=float),
        sigma=lambda x: np.full(np.shape(x), sigma0, dtype=float),
        dsigma=lambda x: np.zeros(np.shape(x)),
        sigma_lo=sigma0,
        sigma_hi=sigma0,
        x0=x0,
        phi=lambda x: np.asarray(x, dtype=float) / sigma0,
        phi_inv=lambda y: sigma0 * np.asarray(y, dtype=float),
        db=lambda x: np.full(np.shape(x), -lam, dtype=float),
        d2sigma=lambda x: np.zeros(np.shape(x)),
        kappa=-lam,
        label=f"constant-diffusion(sigma0={sigma0}, lam={lam}, theta={theta}, x0={x0})",
    )


_SQRT3 = math.sqrt(3.0)
_PERIOD = 2 * math.pi / _SQRT3  # int over one period of 1/(2 + cos)


def _cos_phi(x):
    x = np.asarray(x, dtype=float)
    j = np.rint(x / (2 * math.pi))
    r = x - 2 * math.pi * j
    return (2 / _SQRT3) * np.arctan(np.tan(0.5 * r) / _SQRT3) + _PERIOD * j


def _cos_phi_inv(y):
    y = np.asarray(y, dtype=float)
    j = np.rint(y / _PERIOD)
    r = y - _PERIOD * j
    return 2 * np.arctan(_SQRT3 * np.tan(0.5 * _SQRT3 * r)) + 2 * math.pi * j


def cos_diffusion(lam: float = 1.0, theta: float = 0.0, x0: float = 0.5, closed_form: bool = True) -> LampertiSpec:
    """``dX = (theta - lam sin X) dt + (2 + cos X) dW``.

    The drift is bounded so the transformed drift stays one-sided Lipschitz
    (a linear ``b`` would not: ``b sigma' / sigma^2`` grows like ``x``).
    The Lamperti map has the closed form
    ``phi(x) = 2/sqrt(3) atan(tan(x/2)/sqrt(3))`` extended by periodicity;
    pass ``closed_form=False`` to use quadrature instead.
    """
    return LampertiSpec(
        b=lambda x: theta - lam * np.sin(x),
        sigma=lambda x: 2.0 + np.cos(x),
        dsigma=lambda x: -np.sin(x),
        sigma_lo=1.0,
        sigma_hi=3.0,
        x0=x0,
        phi=_cos_phi if closed_form else None,
        phi_inv=_cos_phi_inv if closed_form else None,
        db=lambda x: -lam * np.cos(x),
        d2sigma=lambda x: -np.cos(x),
        label=f"cos-diffusion(lam={lam}, theta={theta}, x0={x0})",
    )
