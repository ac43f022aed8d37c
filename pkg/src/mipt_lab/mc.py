"""Direct Monte Carlo simulation of the hybrid Brownian circuit.

Trajectories evolve a dense density matrix on the full ``d**N`` Hilbert
space: each time step applies a fresh Gaussian two-site Hamiltonian to
every pair, then with probability ``N (d+1) lambda dt`` a rank-one
operator built from two independent Haar-random single-qudit states.
Measurements are not normalized, so trajectory averages estimate the
unnormalized two-copy moments E[tr sigma_Q^2] and E[(tr sigma)^2]; the
n = 0 channel of every record is exactly the latter.

Randomness is counter-based: trajectory ``k`` draws from a Philox stream
keyed by ``(seed, k)``, so runs are reproducible per trajectory and
independent across trajectories regardless of batching. The draw order
per step is fixed: one normal block for all pair couplings, then the
measurement coin, then (only if it fires) the site index and the two
Haar states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .model import INITIAL_KINDS, ModelParams

__all__ = [
    "HILBERT_CAP",
    "HermitianBasis",
    "MCEstimate",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "estimate_purity",
    "measurement_probability",
    "pauli_basis",
    "run_trajectory",
    "sample_step_hamiltonian",
]

# Two-copy bookkeeping needs d**(2N) complex numbers per trajectory.
HILBERT_CAP = 4**10

# Largest stash of pre-embedded pair operators we keep around, in complex
# entries. Above this the step Hamiltonian is assembled pair by pair.
_PRECOMPUTE_CAP = 1 << 22

_SUBSET_STREAM = 0xFFFFFFFFFFFFFFFF

_MAX_STEP_PROB = 0.1


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HermitianBasis:
    """Orthogonal Hermitian operator basis with tr(T_a T_b) = d delta_ab."""

    matrices: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self.matrices)

    @property
    def local_dim(self) -> int:
        return self.matrices.shape[1]


@dataclass(frozen=True)
class TrajectoryConfig:
    """Sampling plan for the trajectory ensemble.

    ``dt`` and ``t_max`` are in units of 1/J. ``subset_family`` picks the
    subsets whose purity is recorded: "nested" uses the first n sites for
    every n, "random" draws one fixed n-subset per size from the seed.
    """

    dt: float
    t_max: float
    n_traj: int
    seed: int
    subset_family: str = "nested"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive and finite")
        if not (math.isfinite(self.t_max) and self.t_max >= 0):
            raise ConfigError("t_max must be nonnegative and finite")
        if not isinstance(self.n_traj, int) or self.n_traj < 1:
            raise ConfigError("n_traj must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.subset_family not in ("nested", "random"):
            raise ConfigError("subset_family must be 'nested' or 'random'")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-step subset purities of a single trajectory.

    ``purities[k, n]`` is tr(sigma_{Q_n}^2) at time ``times[k]``; column 0
    is (tr sigma)^2 and column N the global purity.
    """

    times: np.ndarray
    purities: np.ndarray
    subsets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        _freeze(self.times)
        _freeze(self.purities)


@dataclass(frozen=True)
class MCEstimate:
    """Ensemble averages at the final time, with batch-mean errors.

    ``renyi`` holds the second Renyi entropies -log(raw_mean[n] /
    raw_mean[0]) with first-order error propagation through the ratio,
    covariance between numerator and denominator included.
    """

    time: float
    raw_mean: np.ndarray
    raw_se: np.ndarray
    norm_mean: float
    norm_se: float
    renyi: np.ndarray
    renyi_se: np.ndarray

    def __post_init__(self) -> None:
        for a in (self.raw_mean, self.raw_se, self.renyi, self.renyi_se):
            _freeze(a)


def measurement_probability(params: ModelParams, dt: float) -> float:
    """Per-step probability N (d+1) lambda dt of a measurement event.

    The bare rate is lambda = meas_ratio * d * J per site, and the d+1
    factor converts the rank-one Haar channel into that rate.
    """
    lam = params.meas_ratio * params.local_dim * params.coupling
    return params.num_sites * (params.local_dim + 1) * lam * dt


def pauli_basis(local_dim: int) -> HermitianBasis:
    """Generalized Gell-Mann basis rescaled so tr(T_a T_b) = d delta_ab.

    T_0 is the identity; for d = 2 the result is exactly {I, X, Y, Z}.
    """
    if not isinstance(local_dim, int) or local_dim < 2:
        raise ConfigError("local_dim must be an integer >= 2")
    d = local_dim
    mats = [np.eye(d, dtype=complex)]
    s = math.sqrt(d / 2.0)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = s
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j * s
            m[k, j] = 1j * s
            mats.append(m)
    for l in range(1, d):
        v = np.zeros(d, dtype=complex)
        v[:l] = 1.0
        v[l] = -l
        mats.append(np.diag(v) * math.sqrt(d / (l * (l + 1.0))))
    return HermitianBasis(matrices=np.stack(mats))


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    key = np.zeros(2, dtype=np.uint64)
    key[0] = seed
    key[1] = stream
    return np.random.Generator(np.random.Philox(key=key))


class _Circuit:
    """Static per-run data: embedded pair operators and coupling scale."""

    def __init__(self, params: ModelParams, dt: float):
        n = params.num_sites
        d = params.local_dim
        dim = d**n
        if dim * dim > HILBERT_CAP:
            raise ConfigError(
                f"state of {dim}^2 complex entries exceeds the size cap; "
                f"reduce num_sites so d**(2N) <= {HILBERT_CAP}"
            )
        self.sites = n
        self.local = d
        self.dim = dim
        self.d2 = d * d
        basis = pauli_basis(d).matrices
        # pair_products[a, b] = T_a (x) T_b on an adjacent two-site block
        self.pair_products = np.stack(
            [np.kron(a, b) for a in basis for b in basis]
        ).reshape(self.d2, self.d2, self.d2, self.d2)
        self.pairs = list(combinations(range(n), 2))
        self.perms = [self._pair_permutation(i, j) for i, j in self.pairs]
        self.sigma_c = math.sqrt(params.coupling / (4.0 * d**3 * n * dt))
        self._rest = np.eye(d ** (n - 2), dtype=complex)
        self._embedded = None
        n_ops = len(self.pairs) * self.d2 * self.d2
        if n_ops * dim * dim <= _PRECOMPUTE_CAP:
            blocks = []
            for pi in self.perms:
                ix = np.ix_(pi, pi)
                for pp in self.pair_products.reshape(-1, self.d2, self.d2):
                    blocks.append(np.kron(pp, self._rest)[ix])
            self._embedded = np.stack(blocks)

    def _pair_permutation(self, i: int, j: int) -> np.ndarray:
        # Position of each computational basis state once sites are
        # reordered to (i, j, rest), site 0 most significant.
        n, d = self.sites, self.local
        weights = d ** np.arange(n - 1, -1, -1)
        digits = (np.arange(self.dim)[:, None] // weights[None, :]) % d
        order = [i, j] + [k for k in range(n) if k not in (i, j)]
        return digits[:, order] @ weights

    def draw_hamiltonian(self, rng: np.random.Generator) -> np.ndarray:
        coeffs = rng.standard_normal((len(self.pairs), self.d2, self.d2))
        coeffs *= self.sigma_c
        if self._embedded is not None:
            return np.tensordot(coeffs.reshape(-1), self._embedded, axes=1)
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for c, pi in zip(coeffs, self.perms):
            local = np.tensordot(c, self.pair_products, axes=([0, 1], [0, 1]))
            h += np.kron(local, self._rest)[np.ix_(pi, pi)]
        return h


def sample_step_hamiltonian(
    rng: np.random.Generator, params: ModelParams, dt: float
) -> np.ndarray:
    """One draw of the Brownian step Hamiltonian on the full space.

    Couplings are i.i.d. normal with variance J / (4 d^3 N dt), one real
    coefficient per ordered basis pair (a, b) per site pair i < j. The
    (0, 0) identity component only shifts the global phase.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ConfigError("dt must be positive and finite")
    return _Circuit(params, dt).draw_hamiltonian(rng)


def _haar_state(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def _apply_measurement(
    sigma: np.ndarray, site: int, op: np.ndarray, n: int, d: int
) -> np.ndarray:
    t = sigma.reshape((d,) * (2 * n))
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site])), 0, site)
    t = np.moveaxis(np.tensordot(t, op.conj(), axes=([n + site], [1])), -1, n + site)
    return t.reshape(d**n, d**n)


def _subset_purity(
    sigma: np.ndarray, subset: tuple[int, ...], n_sites: int, d: int
) -> float:
    """tr(sigma_Q^2) after tracing out the complement of ``subset``."""
    t = sigma.reshape((d,) * (2 * n_sites))
    remaining = list(range(n_sites))
    for site in sorted(set(range(n_sites)) - set(subset), reverse=True):
        pos = remaining.index(site)
        t = np.trace(t, axis1=pos, axis2=pos + len(remaining))
        remaining.pop(pos)
    k = len(remaining)
    if k == 0:
        return float(t.real) ** 2
    m = t.reshape(d**k, d**k)
    return float(np.einsum("ij,ji->", m, m).real)


def _subsets_for(cfg: TrajectoryConfig, n_sites: int) -> tuple[tuple[int, ...], ...]:
    if cfg.subset_family == "nested":
        return tuple(tuple(range(m)) for m in range(n_sites + 1))
    rng = _rng_for(cfg.seed, _SUBSET_STREAM)
    out = [()]
    for m in range(1, n_sites):
        out.append(tuple(sorted(rng.choice(n_sites, size=m, replace=False).tolist())))
    out.append(tuple(range(n_sites)))
    return tuple(out)


def _init_sigma(circuit: _Circuit, kind: str, rng: np.random.Generator) -> np.ndarray:
    d, n = circuit.local, circuit.sites
    if kind == "pure":
        sigma = np.zeros((circuit.dim, circuit.dim), dtype=complex)
        sigma[0, 0] = 1.0
        return sigma
    if kind == "one_mixed":
        # Symmetrized initial state: the mixed site is drawn uniformly
        # per trajectory, which restores permutation symmetry on average.
        site = int(rng.integers(n))
        ground = np.zeros((d, d), dtype=complex)
        ground[0, 0] = 1.0
        sigma = np.eye(1, dtype=complex)
        for k in range(n):
            sigma = np.kron(sigma, np.eye(d) / d if k == site else ground)
        return sigma
    if kind == "max_mixed":
        return np.eye(circuit.dim, dtype=complex) / circuit.dim
    raise ConfigError(f"initial state must be one of {INITIAL_KINDS}")


def _simulate(
    params: ModelParams,
    cfg: TrajectoryConfig,
    init: str,
    indices: Sequence[int],
    on_step: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """Evolve one batch of trajectories, returning the final batch state."""
    circuit = _Circuit(params, cfg.dt)
    prob = measurement_probability(params, cfg.dt)
    if prob > _MAX_STEP_PROB:
        raise ConfigError(
            f"measurement probability {prob:.3g} per step exceeds "
            f"{_MAX_STEP_PROB}; decrease dt"
        )
    n_steps = int(round(cfg.t_max / cfg.dt))
    rngs = [_rng_for(cfg.seed, i) for i in indices]
    sig = np.stack([_init_sigma(circuit, init, rng) for rng in rngs])
    if on_step is not None:
        on_step(0, sig)
    n, d = circuit.sites, circuit.local
    for step in range(1, n_steps + 1):
        hs = np.stack([circuit.draw_hamiltonian(rng) for rng in rngs])
        w, v = np.linalg.eigh(hs)
        phase = np.exp(-1j * cfg.dt * w)
        u = np.einsum("bik,bk,bjk->bij", v, phase, v.conj())
        sig = np.einsum("bij,bjk,blk->bil", u, sig, u.conj())
        for b, rng in enumerate(rngs):
            if prob > 0 and rng.random() < prob:
                site = int(rng.integers(n))
                op = np.outer(_haar_state(rng, d), _haar_state(rng, d).conj())
                sig[b] = _apply_measurement(sig[b], site, op, n, d)
        if on_step is not None:
            on_step(step, sig)
    return sig


def run_trajectory(
    params: ModelParams, cfg: TrajectoryConfig, traj_index: int, init_state: str = "pure"
) -> TrajectoryRecord:
    """Single reproducible trajectory with purities recorded every step."""
    if not isinstance(traj_index, int) or not 0 <= traj_index < 2**64:
        raise ConfigError("traj_index must fit in 64 unsigned bits")
    subsets = _subsets_for(cfg, params.num_sites)
    n, d = params.num_sites, params.local_dim
    rows = []

    def grab(_step: int, sig: np.ndarray) -> None:
        rows.append([_subset_purity(sig[0], q, n, d) for q in subsets])

    _simulate(params, cfg, init_state, [traj_index], on_step=grab)
    times = np.arange(len(rows)) * cfg.dt
    return TrajectoryRecord(times=times, purities=np.array(rows), subsets=subsets)


def estimate_purity(
    params: ModelParams, cfg: TrajectoryConfig, init: str = "pure"
) -> MCEstimate:
    """Trajectory-averaged two-copy moments at t_max.

    Standard errors come from 20 batch means; the Renyi entropies use the
    ratio of means, so a common decay of all channels cancels exactly.
    """
    if cfg.n_traj < 20:
        raise ConfigError("n_traj must be at least 20 to form batch means")
    n, d = params.num_sites, params.local_dim
    subsets = _subsets_for(cfg, n)
    finals = np.empty((cfg.n_traj, len(subsets)))
    dim = d**n
    chunk = max(1, min(512, int(4_000_000 // (dim * dim))))
    for start in range(0, cfg.n_traj, chunk):
        indices = range(start, min(start + chunk, cfg.n_traj))
        sig = _simulate(params, cfg, init, indices)
        for b, idx in enumerate(indices):
            finals[idx] = [_subset_purity(sig[b], q, n, d) for q in subsets]

    batch_means = np.stack([b.mean(axis=0) for b in np.array_split(finals, 20)])
    cov = np.cov(batch_means, rowvar=False)
    raw_mean = finals.mean(axis=0)
    raw_se = np.sqrt(np.diag(cov) / 20.0)

    ratio = raw_mean / raw_mean[0]
    renyi = -np.log(ratio)
    renyi[0] = 0.0
    rel = (
        np.diag(cov) / raw_mean**2
        + cov[0, 0] / raw_mean[0] ** 2
        - 2.0 * cov[:, 0] / (raw_mean * raw_mean[0])
    )
    renyi_se = np.sqrt(np.clip(rel, 0.0, None) / 20.0)
    renyi_se[0] = 0.0

    return MCEstimate(
        time=int(round(cfg.t_max / cfg.dt)) * cfg.dt,
        raw_mean=raw_mean,
        raw_se=raw_se,
        norm_mean=float(raw_mean[0]),
        norm_se=float(raw_se[0]),
        renyi=renyi,
        renyi_se=renyi_se,
    )
