"""Spectral solution of the purity master equation.

The birth-death generator from :mod:`mipt_lab.model` is not symmetric, but a
diagonal rescaling with weights Λ_n turns it into a real symmetric tridiagonal
matrix H.  Diagonalizing H once then gives the purity at any time as a sum of
decaying modes, the spectral gap, and the long-time entropy profile without
ever time-stepping.

Purities decay like exp(-E_0 t) and the mode profiles span hundreds of orders
of magnitude at large N, so everything downstream of the eigensolver is done
in log space.  Where LAPACK eigenvectors lose their tails to round-off (any
component below ~1e-16 of the peak is noise), ground-state and
first-excited-state profiles are rebuilt from two-sided ratio recurrences run
at a shifted energy just below E_0; see ``stationary_entropy``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateSimilarity, NumericalFailure
from .model import ModelParams, PurityVector, TridiagonalGenerator, _readonly

__all__ = [
    "SimilarityWeights",
    "SymmetricTridiagonal",
    "SpectralDecomposition",
    "similarity_weights",
    "hermitianize",
    "eigendecompose",
    "project_initial",
    "propagate",
    "gap",
    "stationary_entropy",
]

# LAPACK eigenvector entries below this fraction of the peak cannot be
# distinguished from round-off noise accumulated during the factorization;
# profiles that dip further are rebuilt by ratio recurrences instead.
_TAIL_TRUST = 1e-10

# Values are floored here instead of hitting exact zero, keeping PurityVector
# valid under extreme decay.  Anything at the floor is physically "zero".
_VALUE_FLOOR = 1e-300


@dataclass(frozen=True)
class SimilarityWeights:
    """Logarithms of the diagonal rescaling weights Λ_n, with Λ_0 = 1."""

    log_lambda: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_lambda", _readonly(self.log_lambda))
        if not np.all(np.isfinite(self.log_lambda)):
            raise ConfigError("similarity weights must be finite")


@dataclass(frozen=True)
class SymmetricTridiagonal:
    """Symmetric tridiagonal matrix H with the physical rate J attached.

    ``diag`` holds the N+1 diagonal entries, ``offdiag`` the N entries of the
    first off-diagonal (all non-positive for meas_ratio > 0).
    """

    diag: np.ndarray
    offdiag: np.ndarray
    coupling: float

    def __post_init__(self):
        object.__setattr__(self, "diag", _readonly(self.diag))
        object.__setattr__(self, "offdiag", _readonly(self.offdiag))
        if len(self.offdiag) != max(len(self.diag) - 1, 0):
            raise ConfigError("offdiag must be one entry shorter than diag")

    @property
    def num_sites(self) -> int:
        return len(self.diag) - 1

    def scale(self) -> float:
        off = np.max(np.abs(self.offdiag)) if len(self.offdiag) else 0.0
        return max(np.max(np.abs(self.diag)), off)

    def dense_matrix(self) -> np.ndarray:
        out = np.diag(self.diag)
        n = np.arange(len(self.offdiag))
        out[n, n + 1] = self.offdiag
        out[n + 1, n] = self.offdiag
        return out


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigensystem of a SymmetricTridiagonal, plus projection data.

    ``energies`` are ascending, ``vectors`` holds orthonormal eigenvectors in
    columns with the ground state sign-normalized positive.  ``eta`` and
    ``log_p0`` are filled by :func:`project_initial` and stay None until then;
    ``time0`` records the timestamp of the projected initial state.
    """

    energies: np.ndarray
    vectors: np.ndarray
    matrix: SymmetricTridiagonal
    eta: np.ndarray | None = None
    log_p0: np.ndarray | None = None
    time0: float = 0.0

    @property
    def num_sites(self) -> int:
        return len(self.energies) - 1


def _rates(gen: TridiagonalGenerator) -> tuple[np.ndarray, np.ndarray]:
    """Forward rates b_0..b_{N-1} and backward rates c_0..c_{N-1}."""
    return gen.upper[:-1], gen.lower[1:]


def similarity_weights(gen: TridiagonalGenerator) -> SimilarityWeights:
    """Diagonal weights Λ_n = prod_{m<=n} sqrt(c_{m-1}/b_{m-1}).

    Raises DegenerateSimilarity for meas_ratio = 0, where b_0 = 0 makes the
    rescaling singular (use mod:`mipt_lab.evolve` for that boundary case).
    """
    b, c = _rates(gen)
    if np.any(b <= 0) or np.any(c <= 0):
        raise DegenerateSimilarity(
            "hopping rates must be strictly positive to rescale; "
            "meas_ratio = 0 has b_0 = 0"
        )
    log_lambda = np.zeros(gen.num_sites + 1)
    log_lambda[1:] = 0.5 * np.cumsum(np.log(c) - np.log(b))
    return SimilarityWeights(log_lambda)


def hermitianize(gen: TridiagonalGenerator, params: ModelParams) -> SymmetricTridiagonal:
    """Symmetric form of the generator: diag -J·a_n, offdiag -J·sqrt(b_n c_n).

    Entrywise this equals diag(Λ)^{-1} (-J·M) diag(Λ) with the weights from
    :func:`similarity_weights`; the identity is exercised in the test suite.
    """
    b, c = _rates(gen)
    if np.any(b <= 0) or np.any(c <= 0):
        raise DegenerateSimilarity(
            "generator cannot be symmetrized at meas_ratio = 0"
        )
    j = params.coupling
    return SymmetricTridiagonal(-j * gen.diag, -j * np.sqrt(b * c), j)


def eigendecompose(matrix: SymmetricTridiagonal) -> SpectralDecomposition:
    """Full ascending eigensystem of H, ground state sign-normalized."""
    if len(matrix.diag) == 1:
        return SpectralDecomposition(
            energies=_readonly(matrix.diag.copy()),
            vectors=_readonly(np.ones((1, 1))),
            matrix=matrix,
        )
    try:
        energies, vectors = scipy.linalg.eigh_tridiagonal(matrix.diag, matrix.offdiag)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"tridiagonal eigensolver failed: {exc}") from exc
    anchor = np.argmax(np.abs(vectors[:, 0]))
    if vectors[anchor, 0] < 0:
        vectors = vectors.copy()
        vectors[:, 0] = -vectors[:, 0]
    return SpectralDecomposition(
        energies=_readonly(energies), vectors=_readonly(vectors), matrix=matrix
    )


def project_initial(
    decomp: SpectralDecomposition,
    weights: SimilarityWeights,
    p0: PurityVector,
) -> SpectralDecomposition:
    """Expansion coefficients eta_a = sum_n phi_{a,n} P_n(0) / Λ_n.

    The weight 1/Λ_n is applied by log subtraction before exponentiating, so
    the coefficients stay accurate when Λ dips exponentially mid-chain.
    """
    n_levels = len(decomp.energies)
    if len(p0.values) != n_levels or len(weights.log_lambda) != n_levels:
        raise ConfigError(
            f"dimension mismatch: {n_levels} levels vs {len(p0.values)} purities"
        )
    log_f = p0.log_values() - weights.log_lambda
    eta = decomp.vectors.T @ np.exp(log_f)
    return replace(
        decomp, eta=_readonly(eta), log_p0=_readonly(log_f + weights.log_lambda),
        time0=p0.time,
    )


def propagate(
    decomp: SpectralDecomposition,
    weights: SimilarityWeights,
    t: float,
) -> PurityVector:
    """Purity profile a time t after the projected initial state.

    The overall factor exp(-E_0 t) goes into log_scale; values are normalized
    to values_0 = 1.  Entries whose mode sum cancels below round-off are
    floored at a tiny positive constant rather than returned as garbage; use
    :func:`stationary_entropy` for asymptotic tails.
    """
    if decomp.eta is None:
        raise ConfigError("propagate requires eta; call project_initial first")
    if not t >= 0:
        raise ConfigError(f"time must be non-negative, got {t}")
    energies = decomp.energies
    amplitudes = decomp.eta * np.exp(-(energies - energies[0]) * t)
    mode_sum = decomp.vectors @ amplitudes
    if not mode_sum[0] > 0:
        raise NumericalFailure("purity at n=0 lost positivity during propagation")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_values = weights.log_lambda + np.log(np.abs(mode_sum)) - np.log(mode_sum[0])
    values = np.where(mode_sum > 0, np.exp(log_values), 0.0)
    values = np.maximum(values, _VALUE_FLOOR)
    values[0] = 1.0
    log_scale = np.log(mode_sum[0]) - energies[0] * t
    return PurityVector(log_scale=log_scale, values=values, time=decomp.time0 + t)


def gap(decomp: SpectralDecomposition) -> float:
    """Distance E_1 - E_0 between the two lowest modes."""
    if len(decomp.energies) < 2:
        raise ConfigError("gap needs at least two levels")
    return float(decomp.energies[1] - decomp.energies[0])


def _signed_logsumexp(logmag, signs):
    total, sign = logsumexp(logmag, b=signs, return_sign=True)
    return total, sign


def _shooting_profiles(matrix: SymmetricTridiagonal, energy: float):
    """Cumulative log profiles of the two one-sided recurrences at ``energy``.

    Returns (log_fwd, log_bwd) where log_fwd[n] is the log of the solution
    grown from site 0 and log_bwd[n] the log of the solution grown from site
    N, each normalized to 0 at its seed.  Both stay strictly positive when
    ``energy`` sits below the whole spectrum; a non-positive ratio means the
    shift was not actually below E_0.
    """
    d = matrix.diag
    off = matrix.offdiag
    n = len(d) - 1
    log_fwd = np.zeros(n + 1)
    ratio = (energy - d[0]) / off[0]
    if not ratio > 0:
        raise NumericalFailure("forward recurrence lost positivity", index=1)
    log_fwd[1] = np.log(ratio)
    for k in range(1, n):
        ratio = (energy - d[k] - off[k - 1] / ratio) / off[k]
        if not ratio > 0:
            raise NumericalFailure("forward recurrence lost positivity", index=k + 1)
        log_fwd[k + 1] = log_fwd[k] + np.log(ratio)
    log_bwd = np.zeros(n + 1)
    ratio = (energy - d[n]) / off[n - 1]
    if not ratio > 0:
        raise NumericalFailure("backward recurrence lost positivity", index=n - 1)
    log_bwd[n - 1] = np.log(ratio)
    for k in range(n - 1, 0, -1):
        ratio = (energy - d[k] - off[k] / ratio) / off[k - 1]
        if not ratio > 0:
            raise NumericalFailure("backward recurrence lost positivity", index=k - 1)
        log_bwd[k - 1] = log_bwd[k] + np.log(ratio)
    return log_fwd, log_bwd


def _shoot_mode(matrix: SymmetricTridiagonal, e_target: float, margin: float, left_only: bool):
    """Log profile of a node-free mode rebuilt by two-sided shooting.

    Integrates both recurrences at an energy nudged ``margin`` below
    ``e_target`` (strictly below the spectrum, which keeps every ratio
    positive), then glues them at the profile maximum: the forward branch is
    accurate left of the peak, the backward branch right of it.

    With ``left_only`` the glue point is restricted to the left half,
    selecting the left well of a double-well profile, and the profile is
    truncated at its trailing minimum: past the barrier floor the backward
    branch is dominated by leakage of the opposite-well mode, while the true
    packet content there is splitting-suppressed and contributes nothing.
    """
    log_fwd, log_bwd = _shooting_profiles(matrix, e_target - margin)
    n = len(log_fwd) - 1
    upper = n // 2 + 1 if left_only else n + 1
    glue = int(np.argmax(log_fwd[:upper] + log_bwd[:upper]))
    log_phi = np.concatenate(
        [log_fwd[: glue + 1], log_bwd[glue + 1 :] + (log_fwd[glue] - log_bwd[glue])]
    )
    if left_only:
        cut = glue + int(np.argmin(log_phi[glue:]))
        log_phi[cut + 1 :] = -np.inf
    return log_phi - 0.5 * logsumexp(2.0 * log_phi)


def _lapack_packet(decomp: SpectralDecomposition):
    """Left-well packet (phi_0 + phi_1)/sqrt(2) from LAPACK vectors.

    The far half is filled in by mirror symmetry from (phi_0 - phi_1)/sqrt(2),
    which keeps its absolute error at the level of the small mirrored tail
    instead of the local cancellation noise.
    """
    n = decomp.num_sites
    mid = n // 2
    phi0 = decomp.vectors[:, 0]
    phi1 = decomp.vectors[:, 1]
    left_anchor = np.argmax(np.abs(phi1[: mid + 1]))
    if phi1[left_anchor] < 0:
        phi1 = -phi1
    packet = np.empty(n + 1)
    packet[: mid + 1] = phi0[: mid + 1] + phi1[: mid + 1]
    mirror = n - np.arange(mid + 1, n + 1)
    packet[mid + 1 :] = phi0[mirror] - phi1[mirror]
    return packet / np.sqrt(2.0)


def _log_abs(values):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values)), np.sign(values)


def _left_packet(decomp: SpectralDecomposition):
    """Signed log profile of the left-localized quasi-mode.

    Three regimes, decided by where the LAPACK ground state still carries
    signal: fully trusted vectors are combined directly; a trusted center
    with noise-floor end tails keeps the LAPACK trunk and regrows the left
    tail from the forward recurrence (the negligible far-right tail is
    dropped); and a noise-floor center falls back to pure shooting.
    """
    phi0 = np.abs(decomp.vectors[:, 0])
    peak = phi0.max()
    n = decomp.num_sites
    e0, e1, e2 = decomp.energies[:3]
    # Below this splitting LAPACK returns an arbitrary rotation of the
    # doublet instead of the symmetric/antisymmetric pair.  Such deep
    # splitting also means the recurrences cross the barrier essentially
    # uncontaminated, so the shooting fallback is exact there.
    resolvable = (e1 - e0) >= 1e4 * np.finfo(float).eps * decomp.matrix.scale()
    if resolvable and phi0.min() >= _TAIL_TRUST * peak:
        return _log_abs(_lapack_packet(decomp))
    if not resolvable or phi0[n // 2] < _TAIL_TRUST * peak:
        # The margin must sit well above the doublet splitting, or the
        # backward branch arrives at the left well contaminated by the
        # right-well mode at order splitting/margin.
        margin = max(
            1e3 * np.finfo(float).eps * decomp.matrix.scale(),
            1e-9 * (e2 - e0),
            1e3 * (e1 - e0),
        )
        log_phi = _shoot_mode(decomp.matrix, e0, margin, left_only=True)
        return log_phi, np.ones(n + 1)
    packet = _lapack_packet(decomp)
    logmag, signs = _log_abs(packet)
    trusted = phi0 >= _TAIL_TRUST * peak
    edge = int(np.argmax(trusted))
    if edge > 0:
        margin = max(1e3 * np.finfo(float).eps * decomp.matrix.scale(), 1e-9 * (e2 - e0))
        log_fwd, _ = _shooting_profiles(decomp.matrix, e0 - margin)
        if not packet[edge] > 0:
            raise NumericalFailure("packet anchor lost positivity", index=edge)
        logmag[:edge] = np.log(packet[edge]) + log_fwd[:edge] - log_fwd[edge]
        signs[:edge] = 1.0
        logmag[n - edge + 1 :] = -np.inf
        signs[n - edge + 1 :] = 1.0
    return logmag, signs


def _ground_log_profile(decomp: SpectralDecomposition):
    """Log of the (positive) ground-state profile, tails rebuilt if needed."""
    phi0 = decomp.vectors[:, 0]
    if np.min(phi0) >= _TAIL_TRUST * np.max(phi0):
        return np.log(phi0)
    e0, e2 = decomp.energies[0], decomp.energies[2]
    margin = max(1e3 * np.finfo(float).eps * decomp.matrix.scale(), 1e-9 * (e2 - e0))
    return _shoot_mode(decomp.matrix, e0, margin, left_only=False)


def stationary_entropy(
    decomp: SpectralDecomposition, weights: SimilarityWeights
) -> np.ndarray:
    """Long-time entropy density profile s_n = -(1/N) log(P_n / P_0).

    The long-time limit is taken symbolically: only the slowest mode is kept,
    or the two slowest when they are quasi-degenerate (E_1 - E_0 below
    max(1e-8·J, 0.2·(E_2 - E_1)); the relative clause keeps exponentially
    split but well-separated doublets together at moderate N).  A retained
    doublet is evaluated at the central plateau time 1/sqrt((E_1-E_0)(E_2-E_1)),
    the geometric midpoint of the metastable window between relaxation onto
    the doublet and its final decay; the resulting weight exp(-sqrt(gap
    ratio)) on the upper mode tends to one exponentially fast as the
    splitting closes, so deep doublets reduce to equal weights.  The profile
    eta_L·phi_L + eta_R·phi_R is assembled in the left/right packet basis in
    log space.
    """
    if decomp.eta is None or decomp.log_p0 is None:
        raise ConfigError("stationary_entropy requires projection data")
    energies = decomp.energies
    n = decomp.num_sites
    if n < 2:
        raise ConfigError("stationary entropy needs at least three levels")
    tol = max(1e-8 * decomp.matrix.coupling, 0.2 * (energies[2] - energies[1]))
    two_mode = (energies[1] - energies[0]) < tol
    if not two_mode:
        log_profile = weights.log_lambda + _ground_log_profile(decomp)
    else:
        log_f = decomp.log_p0 - weights.log_lambda
        logmag_l, sign_l = _left_packet(decomp)
        logmag_r, sign_r = logmag_l[::-1], sign_l[::-1]
        log_eta_l, sgn = _signed_logsumexp(logmag_l + log_f, sign_l)
        if sgn <= 0:
            raise NumericalFailure("left packet weight lost positivity")
        log_eta_r, sgn = _signed_logsumexp(logmag_r + log_f, sign_r)
        if sgn <= 0:
            raise NumericalFailure("right packet weight lost positivity")
        # Plateau-time weight on the antisymmetric mode mixes the packet
        # coefficients: eta_L' = ((1+w) eta_L + (1-w) eta_R)/2 and mirrored.
        upper_weight = np.exp(-np.sqrt((energies[1] - energies[0]) / (energies[2] - energies[1])))
        with np.errstate(divide="ignore"):
            log_same = np.log((1.0 + upper_weight) / 2.0)
            log_cross = np.log((1.0 - upper_weight) / 2.0)
        log_eta_l, log_eta_r = (
            logsumexp([log_same + log_eta_l, log_cross + log_eta_r]),
            logsumexp([log_cross + log_eta_l, log_same + log_eta_r]),
        )
        stacked = np.stack([log_eta_l + logmag_l, log_eta_r + logmag_r])
        stacked_signs = np.stack([sign_l, sign_r])
        log_mix, mix_sign = logsumexp(
            stacked, b=stacked_signs, axis=0, return_sign=True
        )
        if np.any(mix_sign <= 0):
            raise NumericalFailure("stationary profile lost positivity")
        log_profile = weights.log_lambda + log_mix
    s = -(log_profile - log_profile[0]) / n
    s[0] = 0.0
    return s
