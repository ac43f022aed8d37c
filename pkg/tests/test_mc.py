import math

import numpy as np
import pytest
import scipy.linalg

from mipt_lab import ConfigError, ModelParams, build_generator, initial_purity
from mipt_lab.mc import (
    HILBERT_CAP,
    HermitianBasis,
    MCEstimate,
    TrajectoryConfig,
    estimate_purity,
    measurement_probability,
    pauli_basis,
    run_trajectory,
    sample_step_hamiltonian,
)
from mipt_lab.mc import _haar_state, _rng_for, _simulate
from mipt_lab.spectral import (
    eigendecompose,
    hermitianize,
    project_initial,
    propagate,
    similarity_weights,
)


def params(n=3, d=2, alpha=0.5, j=1.0):
    return ModelParams(num_sites=n, local_dim=d, meas_ratio=alpha, coupling=j)


def cfg(dt=0.01, t_max=0.5, n_traj=100, seed=7, subset_family="nested"):
    return TrajectoryConfig(
        dt=dt, t_max=t_max, n_traj=n_traj, seed=seed, subset_family=subset_family
    )


def master_equation_purities(p, kind, t):
    gen = build_generator(p)
    w = similarity_weights(gen)
    decomp = project_initial(
        eigendecompose(hermitianize(gen, p)), w, initial_purity(kind, p)
    )
    return np.exp(propagate(decomp, w, t).log_values())


class TestPauliBasis:
    def test_qubit_case_is_pauli(self):
        mats = pauli_basis(2).matrices
        assert np.allclose(mats[0], np.eye(2))
        assert np.allclose(mats[1], [[0, 1], [1, 0]])
        assert np.allclose(mats[2], [[0, -1j], [1j, 0]])
        assert np.allclose(mats[3], [[1, 0], [0, -1]])

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_orthonormality(self, d):
        mats = pauli_basis(d).matrices
        assert mats.shape == (d * d, d, d)
        gram = np.einsum("aij,bji->ab", mats, mats)
        assert np.allclose(gram, d * np.eye(d * d), atol=1e-12)
        assert np.allclose(mats, np.conj(np.swapaxes(mats, 1, 2)), atol=1e-13)

    @pytest.mark.parametrize("d", [2, 3])
    def test_completeness_gives_swap(self, d):
        mats = pauli_basis(d).matrices
        total = sum(np.kron(m, m) for m in mats)
        swap = np.zeros((d * d, d * d))
        for i in range(d):
            for j in range(d):
                swap[i * d + j, j * d + i] = 1
        assert np.allclose(total, d * swap, atol=1e-12)

    def test_rejects_small_dim(self):
        with pytest.raises(ConfigError):
            pauli_basis(1)


class TestStepHamiltonian:
    def test_hermitian(self):
        rng = _rng_for(3, 0)
        h = sample_step_hamiltonian(rng, params(n=3, alpha=0.0), dt=0.01)
        assert h.shape == (8, 8)
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12

    def test_coupling_variance(self):
        # E[tr H^2] = sigma_c^2 d^6 per pair = J/dt at N=2, d=2.
        rng = _rng_for(11, 0)
        p = params(n=2, alpha=0.0, j=1.3)
        dt = 0.05
        vals = [
            np.einsum("ij,ji->", *(2 * (sample_step_hamiltonian(rng, p, dt),))).real
            for _ in range(4000)
        ]
        assert np.mean(vals) == pytest.approx(1.3 / dt, rel=0.03)

    def test_identity_component_is_pure_phase(self):
        rng = _rng_for(5, 9)
        p = params(n=2, alpha=0.0)
        h = sample_step_hamiltonian(rng, p, 0.01)
        sigma = np.diag([0.6, 0.4, 0.0, 0.0]).astype(complex)
        u1 = scipy.linalg.expm(-1j * 0.01 * h)
        u2 = scipy.linalg.expm(-1j * 0.01 * (h + 3.0 * np.eye(4)))
        s1 = u1 @ sigma @ u1.conj().T
        s2 = u2 @ sigma @ u2.conj().T
        assert np.allclose(s1, s2, atol=1e-12)

    def test_eigh_step_matches_expm(self):
        rng = _rng_for(2, 4)
        p = params(n=3, alpha=0.0)
        h = sample_step_hamiltonian(rng, p, 0.02)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * 0.02 * w)) @ v.conj().T
        assert np.allclose(u, scipy.linalg.expm(-1j * 0.02 * h), atol=1e-12)
        assert np.max(np.abs(u @ u.conj().T - np.eye(8))) <= 1e-13


class TestRunTrajectory:
    def test_unitary_run_conserves_purity(self):
        rec = run_trajectory(params(alpha=0.0), cfg(dt=0.02, t_max=0.4), 0, "pure")
        assert rec.times[0] == 0.0
        assert rec.purities.shape == (21, 4)
        assert np.max(np.abs(rec.purities[:, 0] - 1)) <= 1e-10
        assert np.max(np.abs(rec.purities[:, -1] - 1)) <= 1e-10

    def test_initial_row_pure(self):
        rec = run_trajectory(params(alpha=0.5), cfg(t_max=0.05), 3, "pure")
        assert np.allclose(rec.purities[0], np.ones(4), atol=1e-13)

    def test_initial_row_one_mixed(self):
        p = params(n=2, alpha=0.5)
        rec = run_trajectory(p, cfg(t_max=0.02), 1, "one_mixed")
        # The mixed site is drawn per trajectory, so the n=1 entry is
        # 1/2 or 1; the global entries are fixed.
        assert rec.purities[0, 0] == pytest.approx(1.0, abs=1e-13)
        assert rec.purities[0, 2] == pytest.approx(0.5, abs=1e-13)
        assert rec.purities[0, 1] in (
            pytest.approx(0.5, abs=1e-13),
            pytest.approx(1.0, abs=1e-13),
        )

    def test_deterministic_and_streams_differ(self):
        a = run_trajectory(params(), cfg(t_max=0.1), 5, "pure")
        b = run_trajectory(params(), cfg(t_max=0.1), 5, "pure")
        c = run_trajectory(params(), cfg(t_max=0.1), 6, "pure")
        assert np.array_equal(a.purities, b.purities)
        assert not np.allclose(a.purities, c.purities)

    def test_matches_batch_engine(self):
        p = params()
        c = cfg(t_max=0.1, n_traj=4)
        single = run_trajectory(p, c, 2, "pure")
        batch = _simulate(p, c, "pure", [0, 1, 2, 3])
        from mipt_lab.mc import _subset_purity

        row = [_subset_purity(batch[2], tuple(range(m)), 3, 2) for m in range(4)]
        assert np.allclose(single.purities[-1], row, rtol=1e-12, atol=1e-14)

    def test_haar_first_moment(self):
        rng = _rng_for(123, 0)
        overlaps = [abs(_haar_state(rng, 2)[0]) ** 2 for _ in range(20000)]
        assert np.mean(overlaps) == pytest.approx(0.5, abs=0.01)


class TestEstimatePurity:
    def test_headline_against_master_equation(self):
        p = params(n=3, d=2, alpha=0.5)
        est = estimate_purity(p, cfg(dt=0.01, t_max=0.5, n_traj=3000, seed=42), "pure")
        ref = master_equation_purities(p, "pure", 0.5)
        assert est.raw_mean.shape == (4,)
        for n in range(4):
            assert abs(est.raw_mean[n] - ref[n]) <= 3 * est.raw_se[n]
        assert est.renyi[0] == 0.0
        assert np.all(est.raw_mean > 0)

    def test_one_mixed_against_master_equation(self):
        p = params(n=2, d=2, alpha=0.3)
        est = estimate_purity(
            p, cfg(dt=0.01, t_max=0.4, n_traj=2000, seed=9), "one_mixed"
        )
        ref = master_equation_purities(p, "one_mixed", 0.4)
        for n in range(3):
            assert abs(est.raw_mean[n] - ref[n]) <= 3 * est.raw_se[n]

    def test_unitary_runs_conserve(self):
        est = estimate_purity(params(alpha=0.0), cfg(dt=0.02, t_max=0.4, n_traj=40), "pure")
        assert abs(est.norm_mean - 1) <= 1e-10
        assert abs(est.raw_mean[-1] - 1) <= 1e-10
        assert est.norm_se <= 1e-12

    def test_errors_shrink_with_trajectories(self):
        p = params(n=2, alpha=0.5)
        small = estimate_purity(p, cfg(dt=0.01, t_max=0.3, n_traj=400, seed=1), "pure")
        big = estimate_purity(p, cfg(dt=0.01, t_max=0.3, n_traj=1600, seed=2), "pure")
        ratio = np.mean(small.raw_se[1:] / big.raw_se[1:])
        assert 1.5 < ratio < 2.6

    def test_subset_families_agree(self):
        p = params(n=4, d=2, alpha=0.3)
        nested = estimate_purity(
            p, cfg(dt=0.01, t_max=0.3, n_traj=1200, seed=33), "pure"
        )
        scattered = estimate_purity(
            p,
            cfg(dt=0.01, t_max=0.3, n_traj=1200, seed=33, subset_family="random"),
            "pure",
        )
        for n in range(5):
            gap = abs(nested.raw_mean[n] - scattered.raw_mean[n])
            assert gap <= 4 * math.hypot(nested.raw_se[n], scattered.raw_se[n]) + 1e-12

    def test_time_step_bias_below_noise(self):
        p = params(n=2, alpha=0.5)
        coarse = estimate_purity(p, cfg(dt=0.01, t_max=0.4, n_traj=1500, seed=4), "pure")
        fine = estimate_purity(p, cfg(dt=0.005, t_max=0.4, n_traj=1500, seed=5), "pure")
        for n in range(3):
            gap = abs(coarse.raw_mean[n] - fine.raw_mean[n])
            assert gap <= 4 * math.hypot(coarse.raw_se[n], fine.raw_se[n])

    def test_rejects_large_probability(self):
        with pytest.raises(ConfigError):
            estimate_purity(params(alpha=0.5), cfg(dt=0.02, n_traj=20), "pure")

    def test_probability_formula(self):
        # p = N (d+1) lambda dt with lambda = alpha d J.
        assert measurement_probability(params(n=3, d=2, alpha=0.5), 0.01) == (
            pytest.approx(0.09, abs=1e-15)
        )

    def test_hilbert_cap(self):
        with pytest.raises(ConfigError):
            estimate_purity(params(n=11, d=2, alpha=0.1), cfg(dt=0.001, n_traj=20), "pure")
        with pytest.raises(ConfigError):
            estimate_purity(params(n=7, d=3, alpha=0.1), cfg(dt=0.001, n_traj=20), "pure")

    def test_requires_enough_batches(self):
        with pytest.raises(ConfigError):
            estimate_purity(params(alpha=0.0), cfg(n_traj=10), "pure")

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            cfg(dt=-0.01)
        with pytest.raises(ConfigError):
            cfg(seed=-1)
        with pytest.raises(ConfigError):
            cfg(subset_family="alternating")
