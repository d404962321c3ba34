import numpy as np
import pytest

from chaosctrl.fitting import (
    CriticalFit,
    DynamicRangeError,
    collapse_residual,
    crossing_extrapolation,
    fit_beta,
    fit_exponents,
    fit_loglog_slope,
    fit_nu,
    fit_z,
)


def scaling_curves(p, Ls, p_c=0.5, beta=1.0, nu=1.0):
    """rho00 = L^-beta f((p - p_c) L^(1/nu)) with a smooth bounded master curve."""
    rho = np.empty((len(p), len(Ls)))
    for j, L in enumerate(Ls):
        x = (np.asarray(p) - p_c) * L ** (1.0 / nu)
        rho[:, j] = L**-beta * (1.2 + np.tanh(1.5 * x))
    return rho


class TestPowerLawFits:
    def test_exact_beta_recovered(self):
        Ls = np.array([5.0, 10.0, 20.0, 50.0])
        rho = 3.7 * Ls**-1.0
        beta, info = fit_beta(Ls, rho)
        assert beta == pytest.approx(1.0, abs=1e-6)
        assert info["rms_log_residual"] < 1e-12

    def test_exact_z_recovered(self):
        t = np.linspace(10, 500, 60)
        rho = 0.8 * t**-0.5
        z, _ = fit_z(t, rho)
        assert z == pytest.approx(2.0, abs=1e-9)

    def test_window_applies(self):
        t = np.arange(1, 1001, dtype=float)
        rho = 0.8 * t**-0.5
        rho[:20] = 0.9  # corrupted early times excluded by the window
        z, _ = fit_z(t, rho, t_window=(50, 900))
        assert z == pytest.approx(2.0, abs=1e-9)

    def test_insufficient_range_rejected(self):
        with pytest.raises(DynamicRangeError):
            fit_beta([10, 20, 50], [0.1, 0.05, 0.02])
        with pytest.raises(DynamicRangeError):
            fit_z([100, 200, 500], [0.1, 0.05, 0.02])

    def test_shared_definition_is_polyfit_on_logs(self):
        x = np.array([2.0, 7.0, 30.0, 90.0])
        y = 0.3 * x**-1.7
        slope, intercept = fit_loglog_slope(x, y)
        ref = np.polyfit(np.log(x), np.log(y), 1)
        assert slope == ref[0]
        assert intercept == ref[1]


class TestCollapse:
    def test_true_nu_minimizes_residual(self):
        p = np.linspace(0.40, 0.60, 21)
        Ls = [10, 20, 40]
        rho = scaling_curves(p, Ls, beta=0.95, nu=1.0)
        nu, info = fit_nu(p, Ls, rho, p_c=0.5, beta=0.95)
        assert nu == pytest.approx(1.0, abs=0.05)
        # residual at the optimum clearly beats a wrong exponent
        r_best = collapse_residual(p, Ls, rho, 0.5, 0.95, nu)
        r_off = collapse_residual(p, Ls, rho, 0.5, 0.95, 2.0)
        assert r_best < 0.1 * r_off

    def test_full_fit_exponents(self):
        Ls = [5, 10, 20, 50]
        p = np.linspace(0.4, 0.6, 21)
        t = np.linspace(20, 400, 40)
        fit = fit_exponents(
            (Ls, 2.0 * np.asarray(Ls, float) ** -0.96),
            (t, 0.5 * t**-0.5),
            (p, Ls, scaling_curves(p, Ls, beta=0.96, nu=1.0)),
            p_c=0.5,
            x_max=3.0,
        )
        assert isinstance(fit, CriticalFit)
        assert fit.beta == pytest.approx(0.96, abs=1e-6)
        assert fit.z == pytest.approx(2.0, abs=1e-6)
        assert fit.nu == pytest.approx(1.0, abs=0.05)


class TestCrossing:
    def test_synthetic_crossing_extrapolates_to_pc(self):
        p = np.linspace(0.40, 0.60, 21)
        Ls = [10, 20, 30, 40]
        rho = scaling_curves(p, Ls, p_c=0.5, beta=1.0, nu=1.0)
        est, crossings = crossing_extrapolation(p, Ls, rho, exponent=1.0)
        assert est == pytest.approx(0.5, abs=1e-3)
        assert len(crossings) == 3

    def test_no_crossing_raises(self):
        p = np.linspace(0.4, 0.6, 5)
        rho = np.ones((5, 2))
        rho[:, 1] = 2.0  # parallel curves never cross
        with pytest.raises(ValueError):
            crossing_extrapolation(p, [10, 20], rho)
