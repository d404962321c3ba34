import math

import numpy as np
import pytest
from scipy import integrate

from chaosctrl.channel import ChannelParams, p_star
from chaosctrl.fokker_planck import (
    RefinedFPModel,
    critical_laws,
    moment_threshold_fp,
    moment_thresholds,
    predict_constants,
    refined_coefficients,
    steady_state_density,
    transient_density,
)


class TestConstants:
    def test_reference_point(self):
        model = predict_constants(ChannelParams(p=0.6, kappa=0.2, gamma=0.2))
        assert model.pc == pytest.approx(0.5)
        assert model.vbar == pytest.approx(-0.08)
        assert model.D == pytest.approx(0.0768)
        assert model.xi == pytest.approx(1.0416666666, rel=1e-9)

    def test_zero_drift_at_critical_rate(self):
        model = predict_constants(ChannelParams(p=0.25, kappa=1.0, gamma=3.0))
        assert model.vbar == pytest.approx(0.0, abs=1e-15)

    def test_drift_sign_tracks_phase(self):
        for p in (0.1, 0.3, 0.49):
            assert predict_constants(ChannelParams(p=p, kappa=0.3, gamma=0.3)).vbar > 0
        for p in (0.51, 0.7, 0.9):
            assert predict_constants(ChannelParams(p=p, kappa=0.3, gamma=0.3)).vbar < 0

    def test_diffusion_positive_and_degenerate_flag(self):
        assert predict_constants(ChannelParams(p=0.5, kappa=0.3, gamma=0.4)).D > 0
        assert predict_constants(ChannelParams(p=0.0, kappa=0.3, gamma=0.4)).degenerate
        assert predict_constants(ChannelParams(p=1.0, kappa=0.3, gamma=0.4)).degenerate

    def test_xi_increases_above_pc(self):
        ps = np.linspace(0.51, 0.95, 40)
        xi = [predict_constants(ChannelParams(p=p, kappa=0.2, gamma=0.2)).xi for p in ps]
        assert np.all(np.diff(xi) > 0)

    def test_rate_form_identity(self):
        # per-step constants equal the rate-based forms at unit step
        p, kappa, gamma = 0.37, 0.42, 0.13
        model = predict_constants(ChannelParams(p=p, kappa=kappa, gamma=gamma))
        assert model.vbar == pytest.approx(2 * kappa - 2 * p * (kappa + gamma))
        assert model.D == pytest.approx(2 * p * (1 - p) * (kappa + gamma) ** 2)


class TestSteadyState:
    def test_normalization_by_quadrature(self):
        model = predict_constants(ChannelParams(p=0.6, kappa=0.2, gamma=0.2))
        # map the improper upper limit to a finite interval with u = 1/sigma
        val, err = integrate.quad(
            lambda u: steady_state_density(model, 1.0 / u) / u**2,
            1e-12,
            2.0,
            epsabs=1e-12,
            limit=200,
        )
        assert err < 1e-10
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_loglog_slope(self):
        model = predict_constants(ChannelParams(p=0.6, kappa=0.2, gamma=0.2))
        sigma = np.exp(np.linspace(1.0, 10.0, 50))
        dens = steady_state_density(model, sigma)
        slope = np.polyfit(np.log(sigma), np.log(dens), 1)[0]
        assert slope == pytest.approx(-(1.0 + model.xi), abs=1e-10)

    def test_rejected_below_pc(self):
        model = predict_constants(ChannelParams(p=0.4, kappa=0.2, gamma=0.2))
        with pytest.raises(ValueError):
            steady_state_density(model, 1.0)
        with pytest.raises(ValueError):
            steady_state_density(
                predict_constants(ChannelParams(p=0.5, kappa=0.2, gamma=0.2)), 1.0
            )

    def test_support_starts_at_half(self):
        model = predict_constants(ChannelParams(p=0.7, kappa=0.2, gamma=0.2))
        with pytest.raises(ValueError):
            steady_state_density(model, 0.4)


class TestTransient:
    def test_mean_is_vbar_t(self):
        model = predict_constants(ChannelParams(p=0.4, kappa=0.05, gamma=0.05))
        t = 250.0
        y = np.linspace(-30, 40, 20001)
        dens = transient_density(model, y, t)
        mean = np.trapezoid(y * dens, y)
        assert mean == pytest.approx(model.vbar * t, abs=1e-8)

    def test_variance_grows_linearly(self):
        model = predict_constants(ChannelParams(p=0.4, kappa=0.05, gamma=0.05))
        y = np.linspace(-40, 50, 40001)
        out = []
        for t in (100.0, 400.0):
            dens = transient_density(model, y, t)
            mean = np.trapezoid(y * dens, y)
            out.append(np.trapezoid((y - mean) ** 2 * dens, y))
        assert out[1] / out[0] == pytest.approx(4.0, rel=1e-6)
        assert out[0] == pytest.approx(2.0 * model.D * 100.0, rel=1e-6)

    def test_requires_positive_time(self):
        model = predict_constants(ChannelParams(p=0.4, kappa=0.05, gamma=0.05))
        with pytest.raises(ValueError):
            transient_density(model, 0.0, 0.0)


class TestCriticalLaws:
    def test_exponents_at_pc(self):
        model = predict_constants(ChannelParams(p=0.5, kappa=0.3, gamma=0.3))
        laws = critical_laws(model)
        assert laws["rho00_time_exponent"] == 0.5
        assert laws["rho00_L_exponent"] == 1.0

    def test_rejects_off_critical(self):
        model = predict_constants(ChannelParams(p=0.6, kappa=0.3, gamma=0.3))
        with pytest.raises(ValueError):
            critical_laws(model)


class TestMomentThresholds:
    def test_ladders_increasing(self):
        params = ChannelParams(p=0.5, kappa=0.2, gamma=0.3)
        th = moment_thresholds(params, 6)
        assert np.all(np.diff(th.p_fp) > 0)
        assert np.all(np.diff(th.p_star) > 0)
        assert np.all(th.p_star > params.p_c)
        assert np.all(th.p_fp > params.p_c)

    def test_p_star_example(self):
        th = moment_thresholds(ChannelParams(p=0.5, kappa=0.2, gamma=0.2), 1)
        assert th.p_star[0] == pytest.approx(0.549834, abs=1e-6)

    def test_fp_inversion_solves_xi_equals_n(self):
        kappa, gamma = 0.2, 0.2
        for n in (1, 2, 3):
            p = moment_threshold_fp(n, kappa, gamma)
            model = predict_constants(ChannelParams(p=p, kappa=kappa, gamma=gamma))
            assert model.xi == pytest.approx(n, rel=1e-12)

    def test_weak_map_agreement_with_exact_thresholds(self):
        # order-2n thresholds agree with the moment ladder to O(kappa^2)
        kappa = gamma = 1e-3
        for n in range(1, 6):
            diff = abs(
                p_star(2 * n, kappa, gamma) - moment_threshold_fp(n, kappa, gamma)
            )
            assert diff <= 10.0 * kappa**2

    def test_linear_expansion(self):
        kappa = gamma = 1e-4
        pc = 0.5
        for n in (1, 3, 5):
            expected = pc + (1 - pc) * n * kappa
            assert moment_threshold_fp(n, kappa, gamma) == pytest.approx(
                expected, abs=1e-7
            )


class TestRefinedModel:
    def test_h_endpoint_values_exact(self):
        params = ChannelParams(p=0.6, kappa=0.37, gamma=0.81)
        out = refined_coefficients(params, 1.0)
        assert out["h_chaos"] == 0.0
        assert out["h_control"] == 1.0

    def test_r_at_origin_is_pc(self):
        params = ChannelParams(p=0.6, kappa=0.2, gamma=0.2)
        out = refined_coefficients(params, 0.0)
        assert out["r"] == pytest.approx(params.p_c)

    def test_drift_limit_at_large_x(self):
        params = ChannelParams(p=0.61, kappa=0.2, gamma=0.3)
        model = RefinedFPModel(kappa=0.2, gamma=0.3, p=0.61)
        assert model.v(60.0) == pytest.approx(model.vbar, rel=1e-12)
        assert model.r(60.0) == pytest.approx(1.0, rel=1e-12)

    def test_z_map_round_trip(self):
        model = RefinedFPModel(kappa=0.25, gamma=0.45, p=0.55)
        x = np.linspace(0.0, 30.0, 100)
        back = model.x_from_z(model.z(x))
        assert np.max(np.abs(back - x)) <= 1e-12

    def test_z_map_domain_error(self):
        model = RefinedFPModel(kappa=0.25, gamma=0.45, p=0.55)
        with pytest.raises(ValueError):
            model.z(math.log(model.lambda_par) - 0.1)

    def test_vbar_matches_rate_form(self):
        model = RefinedFPModel(kappa=0.2, gamma=0.3, p=0.4)
        fp = predict_constants(ChannelParams(p=0.4, kappa=0.2, gamma=0.3))
        assert model.vbar == pytest.approx(fp.vbar)
