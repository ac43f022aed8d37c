"""Model parameters, master-equation coefficients, and purity vectors.

The object of study is the ensemble-averaged two-replica purity P_n of a
size-n subsystem in an all-to-all Brownian circuit of N qudits (local
dimension d) interrupted by random single-site measurements at
dimensionless rate alpha.  After ensemble averaging, P_n obeys a closed
birth-death-like master equation

    dP_n / d(Jt) = a_n P_n + b_n P_{n+1} + c_{n-1} P_{n-1}

with the tridiagonal coefficients built here.  Coefficients are stored
dimensionless (units of the coupling J); J enters only when a time
integration or a spectral propagation is performed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "ModelParams",
    "TridiagonalGenerator",
    "PurityVector",
    "build_generator",
    "initial_purity",
    "reflect",
]

INITIAL_KINDS = ("pure", "one_mixed", "max_mixed")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """The four physical knobs every computation takes.

    Attributes
    ----------
    num_sites : int
        Number of qudits N, at least 2.
    local_dim : int
        Local Hilbert-space dimension d, at least 2.
    meas_ratio : float
        Dimensionless measurement rate alpha = lambda / (d J), >= 0.
    coupling : float
        Coupling rate J (inverse time), > 0.  Defaults to 1.
    """

    num_sites: int
    local_dim: int
    meas_ratio: float
    coupling: float = 1.0

    def __post_init__(self) -> None:
        n, d = self.num_sites, self.local_dim
        if not (isinstance(n, (int, np.integer)) and n >= 2):
            raise ConfigError(f"num_sites must be an integer >= 2, got {n!r}")
        if not (isinstance(d, (int, np.integer)) and d >= 2):
            raise ConfigError(f"local_dim must be an integer >= 2, got {d!r}")
        a, j = self.meas_ratio, self.coupling
        if not (math.isfinite(a) and a >= 0):
            raise ConfigError(f"meas_ratio must be finite and >= 0, got {a!r}")
        if not (math.isfinite(j) and j > 0):
            raise ConfigError(f"coupling must be finite and > 0, got {j!r}")


@dataclass(frozen=True)
class TridiagonalGenerator:
    """Coefficients (a_n, b_n, c_{n-1}) of the purity master equation.

    All three arrays have length N+1 and are dimensionless (units of J).
    ``lower[n]`` holds c_{n-1}, the coefficient of P_{n-1} in the
    equation for P_n; slot 0 is exactly zero, as is ``upper[N]``.
    """

    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self) -> None:
        for name in ("diag", "upper", "lower"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.diag.shape[0]
        if self.upper.shape != (n,) or self.lower.shape != (n,):
            raise ConfigError("coefficient arrays must share one length")

    @property
    def num_sites(self) -> int:
        return self.diag.shape[0] - 1

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Matrix-vector product of the generator with a purity vector."""
        out = self.diag * values
        out[:-1] += self.upper[:-1] * values[1:]
        out[1:] += self.lower[1:] * values[:-1]
        return out

    def dense_matrix(self) -> np.ndarray:
        """Dense (N+1)x(N+1) form of the generator, for small-N checks."""
        m = np.diag(self.diag)
        n = self.num_sites
        m[np.arange(n), np.arange(1, n + 1)] = self.upper[:-1]
        m[np.arange(1, n + 1), np.arange(n)] = self.lower[1:]
        return m


@dataclass(frozen=True)
class PurityVector:
    """P_n at one time instant, with a log-scale offset.

    The physical purity is ``exp(log_scale) * values``; keeping the
    offset separate lets the vector survive the exponential decay of
    long runs.  ``values`` must stay strictly positive.
    """

    log_scale: float
    values: np.ndarray
    time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _readonly(self.values))
        if self.time < 0:
            raise ConfigError(f"time must be >= 0, got {self.time!r}")
        if not np.all(self.values > 0):
            raise ConfigError("purity values must be strictly positive")

    @property
    def num_sites(self) -> int:
        return self.values.shape[0] - 1

    def log_values(self) -> np.ndarray:
        """Natural log of the physical purities, offset included."""
        return np.log(self.values) + self.log_scale


def build_generator(params: ModelParams) -> TridiagonalGenerator:
    """Build the master-equation coefficients for the given parameters.

    With x_n = (N-n) n / N:

        a_n     = -(d + 1/d) x_n - alpha N d (d + 1 - 1/d)
        b_n     = x_n + alpha (N - n)
        c_{n-1} = x_n + alpha n

    The boundary entries b_N and c_{-1} vanish identically, so the
    generator never references indices outside 0..N.
    """
    n_sites = params.num_sites
    d = float(params.local_dim)
    alpha = params.meas_ratio
    n = np.arange(n_sites + 1, dtype=float)
    x = (n_sites - n) * n / n_sites
    diag = -(d + 1.0 / d) * x - alpha * n_sites * d * (d + 1.0 - 1.0 / d)
    upper = x + alpha * (n_sites - n)
    lower = x + alpha * n
    return TridiagonalGenerator(diag=diag, upper=upper, lower=lower)


def initial_purity(kind: str, params: ModelParams) -> PurityVector:
    """Purity vector at t = 0 for a named initial state.

    ``pure``      : global pure state, P_n = 1.
    ``one_mixed`` : one qudit maximally mixed, the rest pure,
                    P_n = (N-n)/N + n/(N d) after site averaging.
    ``max_mixed`` : globally maximally mixed state, P_n = d^{-n}.
    """
    n_sites = params.num_sites
    d = float(params.local_dim)
    n = np.arange(n_sites + 1, dtype=float)
    if kind == "pure":
        values = np.ones(n_sites + 1)
    elif kind == "one_mixed":
        values = (n_sites - n) / n_sites + n / (n_sites * d)
    elif kind == "max_mixed":
        values = d ** (-n)
    else:
        raise ConfigError(
            f"unknown initial state {kind!r}; expected one of {INITIAL_KINDS}"
        )
    return PurityVector(log_scale=0.0, values=values, time=0.0)


def reflect(p: PurityVector) -> PurityVector:
    """Reverse the subsystem index, n -> N - n.

    The generator commutes with this reversal, so reflected solutions
    are solutions; the operation is an involution.
    """
    return PurityVector(
        log_scale=p.log_scale, values=p.values[::-1].copy(), time=p.time
    )
