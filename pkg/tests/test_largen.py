import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from mipt_lab import ConfigError, ModelParams, NumericalFailure, PhaseError
from mipt_lab.largen import (
    action_gradient,
    action_left,
    action_right,
    critical_alpha,
    critical_observables,
    curvature_smooth,
    cusp_slope,
    dfunc,
    ground_energy,
    hopping,
    one_mixed_profile,
    phase_of,
    potential,
    residual_entropy,
    saddle_points,
    stationary_entropy_curve,
)


def params(d=2, alpha=0.3, j=1.0):
    return ModelParams(num_sites=2, local_dim=d, meas_ratio=alpha, coupling=j)


def cumulative_quad(f, xs):
    """Reference antiderivative of f on the grid xs, one quad per segment."""
    out = [0.0]
    for a, b in zip(xs[:-1], xs[1:]):
        out.append(out[-1] + quad(f, a, b, limit=200)[0])
    return np.array(out)


class TestHoppingPotential:
    def test_frozen_midpoint(self):
        p = params(d=2, alpha=0.25)
        assert hopping(0.5, p) == pytest.approx(0.375, abs=1e-14)
        assert potential(0.5, p) == pytest.approx(1.125, abs=1e-14)

    @given(st.floats(min_value=0.01, max_value=3.0))
    @settings(max_examples=30, deadline=None)
    def test_midpoint_hopping_identity(self, alpha):
        assert hopping(0.5, params(alpha=alpha)) == pytest.approx(
            (1 + 2 * alpha) / 4, abs=1e-12
        )

    def test_boundaries(self):
        p = params(d=3, alpha=0.4)
        assert hopping(0.0, p) == 0.0
        assert hopping(1.0, p) == 0.0
        edge = 3 * 0.4 * (3 + 1 - 1 / 3)
        assert potential(0.0, p) == pytest.approx(edge, abs=1e-12)
        assert potential(1.0, p) == pytest.approx(edge, abs=1e-12)

    @given(st.floats(min_value=0.01, max_value=0.99))
    @settings(max_examples=40, deadline=None)
    def test_potential_symmetric(self, x):
        # Near the edges 1 - x itself rounds, so probe the interior only.
        p = params(d=3, alpha=0.7)
        assert potential(x, p) == pytest.approx(potential(1 - x, p), abs=1e-11)

    def test_coupling_scales_both(self):
        assert potential(0.3, params(j=2.0)) == pytest.approx(
            2 * potential(0.3, params(j=1.0)), abs=1e-13
        )
        assert hopping(0.3, params(j=2.0)) == pytest.approx(
            2 * hopping(0.3, params(j=1.0)), abs=1e-13
        )

    def test_accepts_arrays(self):
        p = params()
        xs = np.array([0.0, 0.25, 0.5, 1.0])
        assert np.allclose(potential(xs, p), [potential(x, p) for x in xs])
        assert np.allclose(hopping(xs, p), [hopping(x, p) for x in xs])

    def test_domain_checked(self):
        with pytest.raises(ConfigError):
            potential(-0.1, params())
        with pytest.raises(ConfigError):
            hopping(1.0001, params())


class TestDfunc:
    def test_frozen_value(self):
        assert dfunc(0.5, params(alpha=0.5)) == pytest.approx(0.2157616, abs=1e-7)

    def test_endpoints_exact_zero(self):
        p = params(alpha=0.8)
        assert dfunc(0.0, p) == 0.0
        assert dfunc(1.0, p) == 0.0

    def test_alpha_zero_vanishes(self):
        xs = np.linspace(0, 1, 17)
        assert np.array_equal(dfunc(xs, params(alpha=0.0)), np.zeros(17))

    @given(st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=40, deadline=None)
    def test_symmetric(self, x):
        p = params(alpha=0.45)
        assert dfunc(x, p) == pytest.approx(dfunc(1 - x, p), abs=1e-13)

    @pytest.mark.parametrize("alpha", [0.1, 0.37, 0.8])
    def test_matches_quadrature(self, alpha):
        # Independent route: integrate the log-ratio density directly.
        xs = np.linspace(0.0, 1.0, 201)

        def f(t):
            return 0.5 * math.log((1 - t) * (alpha + t) / (t * (alpha + 1 - t)))

        oracle = cumulative_quad(f, xs)
        assert np.max(np.abs(dfunc(xs, params(alpha=alpha)) - oracle)) <= 1e-8


class TestGroundEnergy:
    def test_frozen_cusp(self):
        eps0, x_v, phase = ground_energy(params(d=2, alpha=0.25))
        assert eps0 == pytest.approx(1.09375, abs=1e-12)
        assert x_v == pytest.approx(0.1181187, abs=1e-7)
        assert phase == "cusp"

    def test_frozen_smooth(self):
        eps0, x_v, phase = ground_energy(params(d=2, alpha=1.0))
        assert eps0 == pytest.approx(4.125, abs=1e-12)
        assert x_v == 0.5
        assert phase == "smooth"

    def test_critical_point(self):
        eps0, x_v, phase = ground_energy(params(d=2, alpha=0.5))
        assert eps0 == pytest.approx(2.125, abs=1e-12)
        assert x_v == 0.5
        assert phase == "critical"

    @pytest.mark.parametrize("d, alpha", [(2, 0.25), (2, 0.8), (3, 0.6), (5, 2.5)])
    def test_matches_grid_minimum(self, d, alpha):
        p = params(d=d, alpha=alpha)
        eps0, x_v, _ = ground_energy(p)
        best = minimize_scalar(
            lambda x: potential(x, p),
            bounds=(1e-12, 0.5),
            method="bounded",
            options={"xatol": 1e-12},
        )
        assert eps0 == pytest.approx(best.fun, abs=1e-9)
        assert x_v == pytest.approx(best.x, abs=1e-6)

    def test_coupling_scales_energy(self):
        assert ground_energy(params(alpha=0.25, j=3.0))[0] == pytest.approx(
            3 * 1.09375, abs=1e-12
        )


class TestActionLeft:
    def test_alpha_zero_is_linear(self):
        p = params(d=2, alpha=0.0)
        for x in (0.2, 0.5, 0.9):
            assert action_left(x, p) == pytest.approx(x * math.log(2), abs=1e-10)

    def test_gauge_zero_at_origin(self):
        assert action_left(0.0, params()) == 0.0

    def test_minimum_sits_at_well(self):
        p = params(d=2, alpha=0.3)
        _, x_v, _ = ground_energy(p)
        floor = action_left(x_v, p)
        assert floor < 0
        samples = [action_left(x, p) for x in np.linspace(0, 1, 21)]
        assert floor <= min(samples) + 1e-12

    def test_mirror_route(self):
        p = params(d=2, alpha=0.4)
        assert action_right(0.3, p) == pytest.approx(action_left(0.7, p), abs=1e-12)

    def test_smooth_phase_action_closes(self):
        # Symmetric single well: the signed integrand cancels over [0, 1].
        assert action_left(1.0, params(alpha=0.7)) == pytest.approx(0.0, abs=1e-9)

    def test_hamilton_jacobi_residual(self):
        for alpha in (0.2, 0.7):
            p = params(d=2, alpha=alpha)
            eps0, _, _ = ground_energy(p)
            for x in np.linspace(0.02, 0.98, 33):
                mom = action_gradient(x, p)
                resid = (
                    potential(x, p)
                    - 4 * hopping(x, p) * math.sinh(mom / 2) ** 2
                    - eps0
                )
                assert abs(resid) <= 1e-9

    def test_half_slope_identity(self):
        # The left-approach entropy slope at the midpoint in the cusp phase.
        for alpha in (0.1, 0.3):
            p = params(d=2, alpha=alpha)
            assert action_gradient(0.5, p) == pytest.approx(
                cusp_slope(p), abs=1e-12
            )

    def test_domain_checked(self):
        with pytest.raises(ConfigError):
            action_left(1.2, params())


class TestStationaryEntropyCurve:
    def test_alpha_zero_page_curve(self):
        prof = stationary_entropy_curve(params(d=3, alpha=0.0), num_points=101)
        tent = np.minimum(prof.x, 1 - prof.x) * math.log(3)
        assert np.max(np.abs(prof.s_inf - tent)) <= 1e-12

    def test_profile_invariants(self):
        prof = stationary_entropy_curve(params(d=2, alpha=0.3), num_points=201)
        assert np.array_equal(prof.A_R, prof.A_L[::-1])
        assert np.allclose(prof.s_inf, prof.s_inf[::-1], atol=1e-14)
        assert prof.s_inf[0] == 0.0 and prof.s_inf[-1] == 0.0
        assert np.all(prof.tau[1:-1] > 0)
        assert prof.tau[0] == 0.0 and prof.tau[-1] == 0.0
        assert np.allclose(prof.D, prof.D[::-1], atol=1e-13)
        assert np.all(prof.s_inf[1:-1] > 0)

    def test_action_column_matches_pointwise_op(self):
        p = params(d=2, alpha=0.3)
        prof = stationary_entropy_curve(p, num_points=41)
        for i in (3, 10, 20, 33, 40):
            assert prof.A_L[i] == pytest.approx(action_left(prof.x[i], p), abs=1e-8)

    def test_kink_between_phases(self):
        # Cusp phase carries a slope discontinuity at 1/2; smooth does not.
        cusp = stationary_entropy_curve(params(alpha=0.2), num_points=401)
        smooth = stationary_entropy_curve(params(alpha=0.8), num_points=401)
        h = 1 / 400

        def jump(prof):
            mid = 200
            left = (prof.s_inf[mid] - prof.s_inf[mid - 1]) / h
            right = (prof.s_inf[mid + 1] - prof.s_inf[mid]) / h
            return left - right

        assert jump(cusp) > 0.5  # about 2 log(d/(1+2a))
        assert abs(jump(smooth)) < 0.05

    def test_init_validated(self):
        with pytest.raises(ConfigError):
            stationary_entropy_curve(params(), init="thermal")
        stationary_entropy_curve(params(), init="order1_mixed", num_points=21)

    def test_finite_size_error_shrinks(self):
        from mipt_lab import build_generator, initial_purity
        from mipt_lab.spectral import (
            eigendecompose,
            hermitianize,
            project_initial,
            similarity_weights,
            stationary_entropy,
        )

        errs = []
        for n in (100, 200, 400):
            mp = ModelParams(num_sites=n, local_dim=2, meas_ratio=0.1)
            gen = build_generator(mp)
            w = similarity_weights(gen)
            decomp = project_initial(
                eigendecompose(hermitianize(gen, mp)), w, initial_purity("pure", mp)
            )
            s_fin = stationary_entropy(decomp, w)
            s_inf = stationary_entropy_curve(mp, num_points=n + 1).s_inf
            errs.append(np.max(np.abs(s_fin - s_inf)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] <= 0.02

    def test_ground_state_matches_single_well_action(self):
        # WKB exponent of the finite-size ground profile in the smooth phase.
        from mipt_lab import build_generator
        from mipt_lab.spectral import (
            _ground_log_profile,
            eigendecompose,
            hermitianize,
            similarity_weights,
        )

        n = 2000
        mp = ModelParams(num_sites=n, local_dim=2, meas_ratio=0.7)
        gen = build_generator(mp)
        similarity_weights(gen)
        decomp = eigendecompose(hermitianize(gen, mp))
        log_phi = _ground_log_profile(decomp)
        prof = stationary_entropy_curve(mp, num_points=201)
        stride = n // 200
        wkb = -(log_phi[::stride] - log_phi[n // 2]) / n
        ref = prof.A_L - prof.A_L[100]
        assert np.max(np.abs(wkb - ref)) <= 0.01


class TestSaddlePoints:
    @pytest.mark.parametrize("d", [2, 3, 5])
    @pytest.mark.parametrize("frac", [0.1, 0.3, 0.45])
    def test_matches_closed_form(self, d, frac):
        alpha = frac if frac in (0.1, 0.3) else 0.45 * (d - 1)
        x_l, x_r = saddle_points(params(d=d, alpha=alpha))
        assert x_l == pytest.approx(alpha / (d - 1), abs=1e-6)
        assert x_r == pytest.approx(1 - x_l, abs=1e-12)

    def test_ordering(self):
        p = params(d=2, alpha=0.3)
        _, x_v, _ = ground_energy(p)
        x_l, _ = saddle_points(p)
        assert 0 < x_v < x_l < 0.5

    def test_smooth_phase_rejected(self):
        with pytest.raises(PhaseError):
            saddle_points(params(alpha=0.7))

    def test_critical_degenerates_to_center(self):
        assert saddle_points(params(alpha=0.5)) == (0.5, 0.5)

    def test_alpha_zero_rejected(self):
        with pytest.raises(ConfigError):
            saddle_points(params(alpha=0.0))


class TestResidualEntropy:
    def test_frozen_one_mixed(self):
        val = residual_entropy(params(d=2, alpha=0.3), lambda x: 1 - x / 2)
        assert val == pytest.approx(0.268264, abs=1e-6)

    def test_default_profile_is_one_mixed(self):
        p = params(d=2, alpha=0.3)
        assert residual_entropy(p) == residual_entropy(p, one_mixed_profile(p))

    @pytest.mark.parametrize("d, alpha", [(2, 0.1), (2, 0.4), (3, 0.8), (5, 1.5)])
    def test_closed_form_identity(self, d, alpha):
        val = residual_entropy(params(d=d, alpha=alpha))
        assert val == pytest.approx(-math.log((1 + alpha) / (d - alpha)), abs=1e-12)

    def test_alpha_zero_recovers_initial_entropy(self):
        assert residual_entropy(params(d=2, alpha=0.0)) == pytest.approx(
            math.log(2), abs=1e-12
        )

    def test_smooth_phase_vanishes(self):
        assert residual_entropy(params(alpha=0.9)) == 0.0

    @pytest.mark.parametrize("d, alpha", [(2, 0.45), (3, 0.95)])
    def test_linear_near_transition(self, d, alpha):
        val = residual_entropy(params(d=d, alpha=alpha))
        lin = (4 / (d + 1)) * (critical_alpha(d) - alpha)
        assert val == pytest.approx(lin, rel=0.02)


class TestClosedForms:
    def test_cusp_slope_frozen(self):
        assert cusp_slope(params(d=2, alpha=0.2)) == pytest.approx(
            0.356675, abs=1e-6
        )

    def test_cusp_slope_vanishes_at_transition(self):
        assert cusp_slope(params(alpha=0.5)) == pytest.approx(0.0, abs=1e-15)

    def test_cusp_slope_phase_guard(self):
        with pytest.raises(PhaseError):
            cusp_slope(params(alpha=0.6))

    def test_curvature_frozen(self):
        assert curvature_smooth(params(d=2, alpha=0.7)) == pytest.approx(
            -0.4401835, abs=1e-6
        )

    def test_curvature_phase_guard(self):
        with pytest.raises(PhaseError):
            curvature_smooth(params(alpha=0.5))
        with pytest.raises(PhaseError):
            curvature_smooth(params(alpha=0.3))

    def test_critical_alpha(self):
        assert critical_alpha(2) == 0.5
        assert critical_alpha(3) == 1.0
        assert critical_alpha(5) == 2.0
        with pytest.raises(ConfigError):
            critical_alpha(1)

    def test_phase_labels(self):
        assert phase_of(params(alpha=0.2)) == "cusp"
        assert phase_of(params(alpha=0.5)) == "critical"
        assert phase_of(params(alpha=0.51)) == "smooth"


class TestCriticalObservables:
    def test_cusp_bundle(self):
        obs = critical_observables(params(d=2, alpha=0.3))
        assert obs.phase == "cusp"
        assert obs.alpha_c == 0.5
        assert obs.x_L == pytest.approx(0.3, abs=1e-6)
        assert obs.curvature_smooth is None
        assert obs.residual_entropy == pytest.approx(0.268264, abs=1e-6)
        assert 0 < obs.x_V_left < obs.x_L <= 0.5

    def test_smooth_bundle(self):
        obs = critical_observables(params(d=2, alpha=0.7))
        assert obs.phase == "smooth"
        assert obs.x_L is None and obs.cusp_slope is None
        assert obs.residual_entropy == 0.0
        assert obs.curvature_smooth == pytest.approx(-0.4401835, abs=1e-6)
        assert obs.x_V_left == 0.5
