"""Cusp-formation dynamics of the entropy-profile center curvature.

Early on, the entropy profile of a pure state is a parabola around
x = 1/2 whose curvature u(t) obeys the quadratic flow

    du / dt = J (a~ (u - u~)^2 + b~)

with constants fixed by (d, alpha).  Below the transition (b~ > 0) the
tan solution reaches a pole at a finite t_c, the cusp-formation time;
above it (b~ < 0) the coth solution relaxes to a fixed point; exactly at
it the rational b~ = 0 solution saturates at u~ with no pole, matching
the divergence of t_c as the transition is approached from below.  A
plain RK4 integrator provides the independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DivergedError
from .largen import PHASE_CRITICAL, PHASE_CUSP, PHASE_SMOOTH, phase_of
from .model import ModelParams, _readonly

__all__ = [
    "U_CAP",
    "RiccatiCoefficients",
    "RiccatiSeries",
    "analytic_u",
    "coefficients",
    "integrate_u",
]

# Curvature beyond which the numeric flow is declared diverged.
U_CAP = 1e6


@dataclass(frozen=True)
class RiccatiCoefficients:
    """Constants of the curvature flow at one parameter point.

    ``t0`` is the time offset fixing u(0) = 0 (negative in the smooth
    phase); ``t_c`` is the pole time, present only below the transition.
    All times are in units of 1/J, with the coupling carried along so the
    closed forms are self-contained.
    """

    a_tilde: float
    b_tilde: float
    u_tilde: float
    t0: float
    phase: str
    coupling: float
    t_c: Optional[float] = None


@dataclass(frozen=True)
class RiccatiSeries:
    """RK4 trace of the curvature flow, ending early on divergence."""

    times: np.ndarray
    u: np.ndarray
    diverged: bool
    t_c_estimate: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "u", _readonly(self.u))


def coefficients(params: ModelParams) -> RiccatiCoefficients:
    """Closed-form flow constants, time offset, and pole time."""
    d = float(params.local_dim)
    alpha = params.meas_ratio
    j = params.coupling
    a = alpha + 0.5
    b = (2 * d * d + 2) / d - (2 * (1 + 2 * alpha) ** 2 + 2) / (1 + 2 * alpha)
    ut = 4 * alpha / (1 + 2 * alpha)
    phase = phase_of(params)
    t_c = None
    if phase == PHASE_CUSP:
        w = math.sqrt(a * b)
        t0 = math.atan(math.sqrt(a / b) * ut) / (j * w)
        t_c = t0 + math.pi / (2 * j * w)
    elif phase == PHASE_SMOOTH:
        # u(0) = 0 sits below the attracting fixed point, so the coth
        # branch needs a negative offset; its argument u~ sqrt(a/|b|)
        # exceeds 1 because a u~^2 + b = 2(d + 1/d - 2) > 0 identically.
        w = math.sqrt(-a * b)
        z = ut * math.sqrt(-a / b)
        t0 = -0.5 * math.log((z + 1) / (z - 1)) / (j * w)
    else:
        t0 = 0.0
    return RiccatiCoefficients(
        a_tilde=a, b_tilde=b, u_tilde=ut, t0=t0, phase=phase, coupling=j, t_c=t_c
    )


def analytic_u(t: float, coeffs: RiccatiCoefficients) -> float:
    """Closed-form curvature at time t (units 1/J), from u(0) = 0."""
    if not (math.isfinite(t) and t >= 0):
        raise ConfigError(f"time must be finite and >= 0, got {t!r}")
    a, b, ut, j = coeffs.a_tilde, coeffs.b_tilde, coeffs.u_tilde, coeffs.coupling
    if coeffs.phase == PHASE_CUSP:
        if t >= coeffs.t_c:
            raise DivergedError(
                f"curvature has a pole at t_c = {coeffs.t_c:g}, requested t = {t:g}"
            )
        w = math.sqrt(a * b)
        return math.sqrt(b / a) * math.tan(j * w * (t - coeffs.t0)) + ut
    if coeffs.phase == PHASE_SMOOTH:
        w = math.sqrt(-a * b)
        return ut - math.sqrt(-b / a) / math.tanh(j * w * (t - coeffs.t0))
    return ut - ut / (1 + j * a * ut * t)


def integrate_u(params: ModelParams, t_max: float, dt: float) -> RiccatiSeries:
    """RK4 trace of the curvature flow from u(0) = 0.

    Stops as soon as u exceeds U_CAP (or leaves the finite range) and
    then extrapolates the pole time: a linear fit of 1/u over the last
    decade of growth when enough samples exist, otherwise the exact
    remaining time of the pure quadratic flow from the last sample.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ConfigError(f"dt must be finite and > 0, got {dt!r}")
    if not (math.isfinite(t_max) and t_max >= dt):
        raise ConfigError(f"t_max must be finite and >= dt, got {t_max!r}")
    c = coefficients(params)
    a, b, ut, j = c.a_tilde, c.b_tilde, c.u_tilde, c.coupling

    def flow(u: float) -> float:
        return j * (a * (u - ut) ** 2 + b)

    us = [0.0]
    u = 0.0
    diverged = False
    for _ in range(int(round(t_max / dt))):
        k1 = flow(u)
        k2 = flow(u + 0.5 * dt * k1)
        k3 = flow(u + 0.5 * dt * k2)
        k4 = flow(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * (k2 + k3) + k4)
        if not math.isfinite(u):
            diverged = True
            break
        us.append(u)
        if u > U_CAP:
            diverged = True
            break
    u_arr = np.asarray(us)
    times = np.arange(u_arr.size) * dt
    estimate = _pole_estimate(times, u_arr, c) if diverged else None
    return RiccatiSeries(times=times, u=u_arr, diverged=diverged, t_c_estimate=estimate)


def _pole_estimate(times: np.ndarray, u: np.ndarray, c: RiccatiCoefficients) -> float:
    top = np.max(u)
    sel = u >= top / 10
    if np.count_nonzero(sel) >= 3:
        slope, intercept = np.polyfit(times[sel], 1.0 / u[sel], 1)
        if slope < 0:
            root = -intercept / slope
            if root >= times[-1]:
                return float(root)
    # Too few samples near the pole: integrate the dominant quadratic
    # term exactly from the last point instead.
    tail = max(u[-1] - c.u_tilde, 1e-300)
    return float(times[-1] + 1.0 / (c.coupling * c.a_tilde * tail))
