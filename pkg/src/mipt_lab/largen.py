"""Continuum (large system) theory of the purity master equation.

In the scaling limit the symmetrized generator becomes a Schroedinger
problem on x = n/N with potential V(x) and hopping tau(x); its WKB
treatment yields the stationary entropy curve, the saddle points that
pick the dominant well, and closed forms for every critical observable
of the entanglement transition at alpha_c = (d - 1) / 2.  Quadrature is
used only where no closed form exists (the action integrals), with the
integrable log endpoints left to an adaptive rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq
from scipy.special import xlogy

from .errors import ConfigError, NumericalFailure, PhaseError
from .model import ModelParams, _readonly

__all__ = [
    "PHASE_CUSP",
    "PHASE_SMOOTH",
    "PHASE_CRITICAL",
    "ContinuumProfile",
    "CriticalObservables",
    "action_gradient",
    "action_left",
    "action_right",
    "critical_alpha",
    "critical_observables",
    "curvature_smooth",
    "cusp_slope",
    "dfunc",
    "ground_energy",
    "hopping",
    "one_mixed_profile",
    "phase_of",
    "potential",
    "residual_entropy",
    "saddle_points",
    "stationary_entropy_curve",
]

PHASE_CUSP = "cusp"
PHASE_SMOOTH = "smooth"
PHASE_CRITICAL = "critical"

# Absolute accuracy demanded of every action quadrature.
_QUAD_TOL = 1e-9


@dataclass(frozen=True)
class ContinuumProfile:
    """Continuum profiles on a uniform grid of x = n/N in [0, 1].

    ``A_L`` carries the gauge A_L(0) = 0 and ``A_R`` is its exact mirror,
    so only differences of the actions are physical.
    """

    x: np.ndarray
    V: np.ndarray
    tau: np.ndarray
    D: np.ndarray
    A_L: np.ndarray
    A_R: np.ndarray
    s_inf: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x", "V", "tau", "D", "A_L", "A_R", "s_inf"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


@dataclass(frozen=True)
class CriticalObservables:
    """Closed-form observables bundled for one parameter point.

    Fields that only exist on one side of the transition are None on the
    other side; at exactly alpha_c the cusp quantities take their common
    limits (zero slope, saddle at the center).
    """

    alpha_c: float
    epsilon0: float
    x_V_left: float
    phase: str
    x_L: Optional[float] = None
    residual_entropy: float = 0.0
    cusp_slope: Optional[float] = None
    curvature_smooth: Optional[float] = None


def critical_alpha(local_dim: int) -> float:
    """Measurement ratio of the entanglement transition, (d - 1) / 2."""
    if not (isinstance(local_dim, (int, np.integer)) and local_dim >= 2):
        raise ConfigError(f"local_dim must be an integer >= 2, got {local_dim!r}")
    return (local_dim - 1) / 2.0


def phase_of(params: ModelParams) -> str:
    alpha_c = critical_alpha(params.local_dim)
    if params.meas_ratio < alpha_c:
        return PHASE_CUSP
    if params.meas_ratio == alpha_c:
        return PHASE_CRITICAL
    return PHASE_SMOOTH


def _unit_interval(x):
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(xs > 1) or not np.all(np.isfinite(xs)):
        raise ConfigError(f"x must lie in [0, 1], got {x!r}")
    return xs


def _maybe_scalar(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


def hopping(x, params: ModelParams):
    """Continuum hopping strength tau(x), in units of the coupling."""
    xs = _unit_interval(x)
    alpha = params.meas_ratio
    inner = xs * (1 - xs) * (1 - xs + alpha) * (xs + alpha)
    tau = params.coupling * np.sqrt(np.clip(inner, 0.0, None))
    return _maybe_scalar(tau, x)


def potential(x, params: ModelParams):
    """Continuum potential V(x), in units of the coupling."""
    xs = _unit_interval(x)
    d = float(params.local_dim)
    alpha = params.meas_ratio
    flat = d * alpha * (d + 1 - 1 / d)
    v = params.coupling * (flat + (d + 1 / d) * xs * (1 - xs)) - 2 * np.asarray(
        hopping(xs, params)
    )
    return _maybe_scalar(v, x)


def dfunc(x, params: ModelParams):
    """Similarity density D(x), the entropic part of the weight profile.

    Closed form built from y log y terms; endpoints are exactly zero and
    the whole function vanishes identically at alpha = 0.
    """
    xs = _unit_interval(x)
    alpha = params.meas_ratio
    if alpha == 0:
        return _maybe_scalar(np.zeros_like(xs), x)
    inner = (
        xlogy(xs, xs)
        + xlogy(1 - xs, 1 - xs)
        + xlogy(alpha, alpha)
        + xlogy(alpha + 1, alpha + 1)
        - xlogy(alpha + 1 - xs, alpha + 1 - xs)
        - xlogy(alpha + xs, alpha + xs)
    )
    val = np.where((xs == 0) | (xs == 1), 0.0, -0.5 * inner)
    return _maybe_scalar(val, x)


def ground_energy(params: ModelParams):
    """Minimum of the potential: (epsilon0, left minimum location, phase).

    Both closed forms agree at the transition, where the two wells merge
    into one at x = 1/2.
    """
    d = float(params.local_dim)
    alpha = params.meas_ratio
    phase = phase_of(params)
    if phase == PHASE_CUSP:
        eps = alpha * (d * d + d - 1 - 1 / d - alpha / d)
        x_v = 0.5 - math.sqrt(max(0.25 - (alpha * alpha + alpha) / (d * d - 1), 0.0))
    else:
        eps = 0.25 * (d + 1 / d - 2) + alpha * (d * d + d - 2)
        x_v = 0.5
    return params.coupling * eps, x_v, phase


def action_gradient(x: float, params: ModelParams) -> float:
    """Signed integrand p(x) of the left action, d A_L / d x.

    Satisfies the stationarity relation V - 4 tau sinh^2(p/2) = epsilon0;
    the sign flips once, at the left potential minimum.
    """
    xs = float(_unit_interval(x))
    eps0, x_v, _ = ground_energy(params)
    return _momentum(xs, params, eps0, x_v)


def _momentum(x: float, params: ModelParams, eps0: float, x_v: float) -> float:
    t = hopping(x, params)
    if t <= 0.0:
        return 0.0
    q = (potential(x, params) - eps0) / (4.0 * t)
    return math.copysign(2.0 * math.asinh(math.sqrt(max(q, 0.0))), x - x_v)


def _quad_segment(f, lo: float, hi: float, break_at: Optional[float]):
    pts = [break_at] if break_at is not None and lo < break_at < hi else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(f, lo, hi, points=pts, limit=300, epsabs=1e-12, epsrel=1e-12)
        except IntegrationWarning as exc:
            raise NumericalFailure(f"action quadrature failed on [{lo}, {hi}]: {exc}")
    if not (math.isfinite(val) and err <= _QUAD_TOL):
        raise NumericalFailure(
            f"action quadrature on [{lo}, {hi}] reached error {err:g}"
        )
    return val


def action_left(x: float, params: ModelParams) -> float:
    """WKB action of the left well, A_L(x) = integral of p from 0 to x."""
    xs = float(_unit_interval(x))
    if xs == 0.0:
        return 0.0
    eps0, x_v, _ = ground_energy(params)
    return _quad_segment(lambda t: _momentum(t, params, eps0, x_v), 0.0, xs, x_v)


def action_right(x: float, params: ModelParams) -> float:
    """Mirror action, A_R(x) = A_L(1 - x)."""
    return action_left(1.0 - float(_unit_interval(x)), params)


def stationary_entropy_curve(
    params: ModelParams, init: str = "pure", num_points: int = 401
) -> ContinuumProfile:
    """Late-time entropy density s(x) = D(x) + min(A_L(x), A_R(x)).

    The density is the same for a pure start and for one with an order
    one admixture; such an admixture only shifts entropies by an amount
    that stays finite as the system grows (see ``residual_entropy``), so
    ``init`` is validated but does not alter the curve.
    """
    if init not in ("pure", "order1_mixed"):
        raise ConfigError(f"init must be 'pure' or 'order1_mixed', got {init!r}")
    if not (isinstance(num_points, (int, np.integer)) and num_points >= 5):
        raise ConfigError(f"num_points must be an integer >= 5, got {num_points!r}")
    xs = np.linspace(0.0, 1.0, num_points)
    eps0, x_v, _ = ground_energy(params)
    f = lambda t: _momentum(t, params, eps0, x_v)
    a_left = np.empty(num_points)
    a_left[0] = 0.0
    for i in range(num_points - 1):
        a_left[i + 1] = a_left[i] + _quad_segment(f, xs[i], xs[i + 1], x_v)
    a_right = a_left[::-1].copy()
    d_vals = np.asarray(dfunc(xs, params))
    return ContinuumProfile(
        x=xs,
        V=np.asarray(potential(xs, params)),
        tau=np.asarray(hopping(xs, params)),
        D=d_vals,
        A_L=a_left,
        A_R=a_right,
        s_inf=d_vals + np.minimum(a_left, a_right),
    )


def saddle_points(params: ModelParams):
    """Locations (x_L, x_R) dominating the late-time entropy sums.

    Found by bisecting the gradient of A_L - D between the left well and
    the center, then checked against the closed form alpha / (d - 1).
    """
    d = float(params.local_dim)
    alpha = params.meas_ratio
    phase = phase_of(params)
    if alpha == 0:
        raise ConfigError("saddle points are defined only for alpha > 0")
    if phase == PHASE_SMOOTH:
        raise PhaseError("saddle points exist only below the transition")
    if phase == PHASE_CRITICAL:
        return 0.5, 0.5
    eps0, x_v, _ = ground_energy(params)

    def grad(x: float) -> float:
        drift = 0.5 * math.log(x * (1 - x + alpha) / ((1 - x) * (x + alpha)))
        return _momentum(x, params, eps0, x_v) + drift

    try:
        root = brentq(grad, x_v, 0.5, xtol=1e-13, rtol=8.9e-16)
    except ValueError as exc:
        raise NumericalFailure(f"saddle bracket failed on ({x_v}, 0.5): {exc}")
    closed = alpha / (d - 1)
    if abs(root - closed) > 1e-6:
        raise NumericalFailure(
            f"saddle bisection found {root!r}, outside tolerance of {closed!r}"
        )
    return root, 1.0 - root


def one_mixed_profile(params: ModelParams) -> Callable[[float], float]:
    """Initial purity profile for a single maximally mixed qudit."""
    slope = 1.0 - 1.0 / params.local_dim

    def profile(x):
        return 1.0 - slope * np.asarray(x, dtype=float)

    return profile


def residual_entropy(
    params: ModelParams, initial_profile: Optional[Callable] = None
) -> float:
    """Late-time entropy of the full system, log P(x_L, 0) / P(x_R, 0).

    Uses the closed-form saddle locations, so it stays finite all the
    way down to alpha = 0 where it recovers the initial mixedness; the
    smooth phase retains nothing.
    """
    phase = phase_of(params)
    if phase != PHASE_CUSP:
        return 0.0
    x_l = params.meas_ratio / (params.local_dim - 1)
    profile = initial_profile if initial_profile is not None else one_mixed_profile(params)
    p_l, p_r = float(profile(x_l)), float(profile(1.0 - x_l))
    if not (p_l > 0 and p_r > 0 and math.isfinite(p_l) and math.isfinite(p_r)):
        raise ConfigError("initial profile must be positive at the saddle points")
    return math.log(p_l / p_r)


def cusp_slope(params: ModelParams) -> float:
    """One-sided slope of s(x) at x = 1/2 in the cusp phase."""
    if phase_of(params) == PHASE_SMOOTH:
        raise PhaseError("the slope discontinuity exists only at or below alpha_c")
    return math.log(params.local_dim / (1 + 2 * params.meas_ratio))


def curvature_smooth(params: ModelParams) -> float:
    """Curvature of s(x) at x = 1/2 above the transition."""
    if phase_of(params) != PHASE_SMOOTH:
        raise PhaseError("the finite curvature exists only above alpha_c")
    d = float(params.local_dim)
    alpha = params.meas_ratio
    root = math.sqrt((2 * alpha - d + 1) * (2 * d * alpha + d - 1))
    return 2 * root / ((1 + 2 * alpha) * math.sqrt(d)) - 4 * alpha / (1 + 2 * alpha)


def critical_observables(
    params: ModelParams, initial_profile: Optional[Callable] = None
) -> CriticalObservables:
    """Bundle every closed-form observable for one parameter point."""
    eps0, x_v, phase = ground_energy(params)
    d = params.local_dim
    alpha = params.meas_ratio
    smooth = phase == PHASE_SMOOTH
    return CriticalObservables(
        alpha_c=critical_alpha(d),
        epsilon0=eps0,
        x_V_left=x_v,
        phase=phase,
        x_L=None if smooth else alpha / (d - 1),
        residual_entropy=residual_entropy(params, initial_profile),
        cusp_slope=None if smooth else cusp_slope(params),
        curvature_smooth=curvature_smooth(params) if smooth else None,
    )
