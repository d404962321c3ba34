import math
from fractions import Fraction

import numpy as np
import pytest

from chaosctrl.channel import ChannelParams, p_star
from chaosctrl.operators import (
    DegenerateSpectrumError,
    assemble_from_eigenbasis,
    build_Z,
    build_Z_exact,
    channel_matrix,
    eigen_residual,
    eigen_residual_exact,
    eigenvalue,
    expand_power,
    normal_order_entry,
    normal_order_matrix,
    spectral_crossing,
)

PARAMS = ChannelParams(p=0.5, kappa=math.log(2.0), gamma=math.log(2.0))


class TestNormalOrderTransform:
    def test_unit_diagonal(self):
        A, Ainv = normal_order_matrix(8)
        for k in range(9):
            assert A[k][k] == 1
            assert Ainv[k][k] == 1

    def test_known_low_order_entries(self):
        # (v+)^2 = :(v+)^2: + 1/2
        assert normal_order_entry(2, 1) == Fraction(1, 2)
        # (v+)^4 carries 3/4 on the identity
        assert normal_order_entry(4, 2) == Fraction(3, 4)

    def test_inverse_exact_to_degree_20(self):
        A, Ainv = normal_order_matrix(20)
        size = 21
        for i in range(size):
            for j in range(size):
                acc = sum(A[i][k] * Ainv[k][j] for k in range(size))
                assert acc == (1 if i == j else 0)


class TestChannelMatrix:
    def test_identity_row(self):
        T = channel_matrix(PARAMS, 4)
        assert np.allclose(T[0], [1.0, 0, 0, 0, 0])

    def test_degree_one_entry_is_lambda_1(self):
        T = channel_matrix(PARAMS, 4)
        lam1 = (1 - 0.5) * 2.0 + 0.5 * 0.5
        assert T[1, 1] == pytest.approx(lam1)

    def test_diagonal_holds_all_eigenvalues(self):
        params = ChannelParams(p=0.3, kappa=0.4, gamma=0.9)
        T = channel_matrix(params, 8)
        for k in range(9):
            assert T[k, k] == pytest.approx(eigenvalue(k, params), rel=1e-14)

    def test_lower_triangular_parity_structure(self):
        T = channel_matrix(PARAMS, 6)
        for k in range(7):
            for j in range(7):
                if j > k or (k - j) % 2 == 1:
                    assert T[k, j] == 0.0


class TestEigenvalues:
    def test_lambda_zero_is_one(self):
        assert eigenvalue(0, PARAMS) == 1.0

    def test_unit_eigenvalue_at_threshold(self):
        for n in (1, 2, 5):
            for kappa, gamma in ((0.2, 0.2), (0.7, 0.3)):
                params = ChannelParams(
                    p=p_star(n, kappa, gamma), kappa=kappa, gamma=gamma
                )
                assert eigenvalue(n, params) == pytest.approx(1.0, abs=1e-14)

    def test_monotone_decreasing_in_p(self):
        ps = np.linspace(0.0, 1.0, 21)
        for n in (1, 3):
            vals = [
                eigenvalue(n, ChannelParams(p=p, kappa=0.4, gamma=0.6)) for p in ps
            ]
            assert np.all(np.diff(vals) < 0)


class TestBuildZ:
    def test_base_cases(self):
        z0 = build_Z(0, PARAMS)
        z1 = build_Z(1, PARAMS)
        assert z0.coeffs == (1.0,)
        assert z1.coeffs == (0.0, 1.0)

    def test_degree_two_closed_form(self):
        # Z_2 = (v+)^2 + p (1 - e^{-2 gamma}) A_{2,0} / (lambda_2 - lambda_0)
        p, gamma = 0.5, math.log(2.0)
        lam2 = eigenvalue(2, PARAMS)
        expected = p * (1 - math.exp(-2 * gamma)) * 0.5 / (lam2 - 1.0)
        z2 = build_Z(2, PARAMS)
        assert z2.coeffs[0] == pytest.approx(expected, rel=1e-14)
        assert z2.coeffs[2] == 1.0
        assert eigen_residual(z2, PARAMS) <= 1e-14

    def test_monic_and_parity(self):
        rng = np.random.default_rng(5)
        for n in range(2, 11):
            params = ChannelParams(
                p=rng.uniform(0.05, 0.95),
                kappa=rng.uniform(0.1, 1.0),
                gamma=rng.uniform(0.1, 1.0),
            )
            z = build_Z(n, params)
            assert z.coeffs[n] == 1.0
            for k in range(n):
                if (n - k) % 2 == 1:
                    assert z.coeffs[k] == 0.0

    def test_eigen_residual_small_random_sample(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            params = ChannelParams(
                p=rng.uniform(0.05, 0.95),
                kappa=rng.uniform(0.05, 1.2),
                gamma=rng.uniform(0.05, 1.2),
            )
            n = int(rng.integers(2, 11))
            z = build_Z(n, params)
            assert eigen_residual(z, params) <= 1e-10

    def test_exact_mode_zero_residual(self):
        cases = [
            (Fraction(1, 2), Fraction(2), Fraction(1, 2)),
            (Fraction(1, 3), Fraction(3), Fraction(1, 4)),
            (Fraction(7, 10), Fraction(5, 2), Fraction(2, 5)),
        ]
        for p, stretch, loss in cases:
            for n in range(2, 13):
                z = build_Z_exact(n, p, stretch, loss)
                assert eigen_residual_exact(z, p, stretch, loss) == 0

    def test_degeneracy_detected(self):
        # engineer lambda_3 == lambda_1: (1-p) e^k (e^{2k} - 1) = p e^-g (1 - e^{-2g})
        kappa = gamma = 0.4
        a = math.exp(kappa) * (math.exp(2 * kappa) - 1)
        b = math.exp(-gamma) * (1 - math.exp(-2 * gamma))
        p_deg = a / (a + b)
        params = ChannelParams(p=p_deg, kappa=kappa, gamma=gamma)
        assert eigenvalue(3, params) == pytest.approx(eigenvalue(1, params), abs=1e-12)
        with pytest.raises(DegenerateSpectrumError):
            build_Z(3, params)


class TestEigenbasisExpansion:
    def test_degree_one_trivial(self):
        d = expand_power(1, PARAMS)
        assert np.allclose(d, [0.0, 1.0])

    def test_round_trip_identity(self):
        rng = np.random.default_rng(3)
        for n in range(1, 11):
            params = ChannelParams(
                p=rng.uniform(0.1, 0.9),
                kappa=rng.uniform(0.1, 0.8),
                gamma=rng.uniform(0.1, 0.8),
            )
            d = expand_power(n, params)
            back = assemble_from_eigenbasis(d, params)
            target = np.zeros(n + 1)
            target[n] = 1.0
            assert np.allclose(back, target, atol=1e-10)

    def test_exact_round_trip(self):
        from chaosctrl.operators import _build_tower

        p, s, c = Fraction(2, 5), Fraction(2), Fraction(1, 2)
        for n in range(1, 13):
            coeffs, alphas, _ = _build_tower(n, p, s, c, exact=True)
            d = {n: Fraction(1)}
            for l, a in alphas[n].items():
                d[n - 2 * l] = -a
            acc = [Fraction(0)] * (n + 1)
            for k, w in d.items():
                for j, cj in enumerate(coeffs[k]):
                    acc[j] += w * cj
            assert acc[n] == 1
            assert all(acc[j] == 0 for j in range(n))

    def test_two_path_evolution_agreement(self):
        params = ChannelParams(p=0.65, kappa=0.3, gamma=0.5)
        n, t_steps = 6, 7
        T = channel_matrix(params, n)
        c = np.zeros(n + 1)
        c[n] = 1.0
        via_matrix = c.copy()
        for _ in range(t_steps):
            via_matrix = via_matrix @ T
        d = expand_power(n, params)
        via_spectrum = np.zeros(n + 1)
        for k in range(n + 1):
            if d[k] != 0.0:
                zk = build_Z(k, params).as_array()
                via_spectrum[: k + 1] += d[k] * eigenvalue(k, params) ** t_steps * zk
        assert np.allclose(via_matrix, via_spectrum, rtol=1e-9, atol=1e-9)


class TestGaussianSectorCrossCheck:
    def test_degree_two_matrix_matches_ensemble_mean(self):
        # Heisenberg evolution of (v+)^2 through the coefficient matrix vs the
        # ensemble mean of sigma+ from sampled trajectories, at a rate where
        # the fourth moment is finite so the sample mean is well behaved
        from chaosctrl.gaussian import _LogEnsemble, vacuum_state
        from chaosctrl.rng import block_uniforms

        params = ChannelParams(p=0.75, kappa=0.2, gamma=0.2)
        n_traj, n_steps = 100_000, 20
        T = channel_matrix(params, 2)
        coeff = np.array([0.0, 0.0, 1.0])
        predicted = []
        for _ in range(n_steps):
            coeff = coeff @ T
            predicted.append(coeff[0] + 0.5 * coeff[2])  # vacuum moments

        sums = np.zeros(n_steps)
        sq_sums = np.zeros(n_steps)
        block = 20_000
        for start in range(0, n_traj, block):
            idx = np.arange(start, min(start + block, n_traj))
            draws = block_uniforms(3, idx, n_steps)[0]
            ens = _LogEnsemble(idx.size, vacuum_state())
            for t in range(n_steps):
                ens.step(draws[:, t] < params.p, params)
                sigma = np.exp(ens.y_plus)
                sums[t] += sigma.sum()
                sq_sums[t] += np.square(sigma).sum()
        mean = sums / n_traj
        sem = np.sqrt(np.maximum(sq_sums / n_traj - mean**2, 0.0) / n_traj)
        final_diff = abs(mean[-1] - predicted[-1])
        assert final_diff <= 3.0 * sem[-1]


class TestSpectralCrossing:
    def test_matches_closed_form(self):
        for n, kappa, gamma in ((1, 0.3, 0.7), (3, 0.2, 0.2), (6, 0.9, 0.4)):
            assert abs(
                spectral_crossing(n, kappa, gamma) - p_star(n, kappa, gamma)
            ) <= 1e-10

    def test_largest_eigenvalue_below_one_above_crossing(self):
        n, kappa, gamma = 4, 0.5, 0.5
        pc_n = spectral_crossing(n, kappa, gamma)
        above = ChannelParams(p=min(pc_n + 0.02, 1.0), kappa=kappa, gamma=gamma)
        T = channel_matrix(above, n)
        assert np.max(np.abs(np.diag(T)[1:])) < 1.0
