"""Spectral analysis and tuning tests against closed-form oracles."""

import math

import numpy as np
import pytest

from apc.errors import DegenerateSpectrum, TuningFailed
from apc.spectral import (
    admm_error_map,
    admm_radius,
    admm_tune,
    apc_optimal_params,
    apc_quadratic_coeffs,
    apc_spectral_radius,
    cimmino_params,
    compute_X,
    consensus_params,
    consensus_rate,
    convergence_time,
    dgd_params,
    dhbm_params,
    dnag_params,
    hbm_radius,
    nag_radius,
    summary_report,
)
from conftest import make_system

E1_MU = (0.146447, 0.853553)
E1_LAM = (0.381966, 2.618034)


class TestComputeX:
    def test_e1(self, e1):
        s = compute_X(e1)
        assert np.allclose(s.X, [[0.75, 0.25], [0.25, 0.25]], atol=1e-12)
        assert np.allclose(s.mu, E1_MU, atol=1e-6)
        assert abs(s.kappa_X - 5.828427) < 1e-6
        assert np.allclose(s.lambda_AtA, E1_LAM, atol=1e-6)
        assert abs(s.kappa_AtA - 6.854102) < 1e-6

    def test_spectrum_in_unit_interval(self):
        s = compute_X(make_system(8, 16, 4, 21))
        assert s.mu_min > 0.0
        assert s.mu_max <= 1.0 + 1e-12

    def test_trace_equals_rank_fraction(self):
        # trace X = sum of block ranks / m = N/m when blocks are full rank
        sys = make_system(8, 16, 2, 22)
        s = compute_X(sys)
        assert abs(np.trace(s.X) - sys.N / sys.m) < 1e-9


class TestApcQuadratic:
    def test_coeffs_at_unit_steps(self):
        b1, c0 = apc_quadratic_coeffs(1.0, 1.0, 0.25)
        assert b1 == -0.75 and c0 == 0.0

    def test_radius_at_optimum(self):
        v = apc_spectral_radius(4.0 - 2.0 * math.sqrt(2.0), 2.0, E1_MU)
        assert abs(v.spectral_radius - 0.414214) < 1e-6
        for m1, m2 in v.root_magnitudes:
            assert abs(m1 - 0.414214) < 1e-6 and abs(m2 - 0.414214) < 1e-6
        assert v.stable and v.in_S

    def test_unstable_pair(self):
        v = apc_spectral_radius(1.0, 30.0, E1_MU)
        assert v.spectral_radius > 1.0 and not v.stable

    def test_radius_covers_one_minus_gamma(self):
        v = apc_spectral_radius(1.9, 1.0, [0.5])
        assert v.spectral_radius >= abs(1.0 - 1.9)


class TestApcOptimal:
    def test_e1_values(self):
        mp = apc_optimal_params((2.0 - math.sqrt(2.0)) / 4.0,
                                (2.0 + math.sqrt(2.0)) / 4.0)
        assert abs(mp.rho_predicted - (math.sqrt(2.0) - 1.0)) < 1e-12
        assert abs(mp.params["gamma"] - (4.0 - 2.0 * math.sqrt(2.0))) < 1e-10
        assert abs(mp.params["eta"] - 2.0) < 1e-10
        rounded = apc_optimal_params(*E1_MU)
        assert abs(rounded.rho_predicted - 0.414214) < 1e-5

    def test_gamma_is_smaller_root(self):
        mp = apc_optimal_params(*E1_MU)
        assert mp.params["gamma"] < mp.params["eta"]

    def test_identity_system(self):
        mp = apc_optimal_params(1.0, 1.0)
        assert mp.rho_predicted == 0.0 and mp.T_predicted == 0.0

    def test_locally_optimal(self):
        # nudging (gamma, eta) by 1% never beats the closed form
        rng = np.random.default_rng(31)
        for _ in range(10):
            mu_min = rng.uniform(0.05, 0.5)
            mu_max = rng.uniform(mu_min + 0.05, 1.0)
            mu = np.sort(np.append(rng.uniform(mu_min, mu_max, 3), [mu_min, mu_max]))
            mp = apc_optimal_params(mu_min, mu_max)
            g, h = mp.params["gamma"], mp.params["eta"]
            base = apc_spectral_radius(g, h, mu).spectral_radius
            assert abs(base - mp.rho_predicted) < 1e-7
            for dg in (-0.01, 0.01):
                for dh in (-0.01, 0.01):
                    perturbed = apc_spectral_radius(
                        g * (1 + dg), h * (1 + dh), mu).spectral_radius
                    assert perturbed >= base - 1e-12

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateSpectrum):
            apc_optimal_params(0.0, 0.5)
        with pytest.raises(DegenerateSpectrum):
            apc_optimal_params(0.5, 1.5)


class TestBaselineParams:
    def test_dgd_e1(self):
        mp = dgd_params(E1_LAM)
        assert abs(mp.params["alpha"] - 0.666667) < 1e-6
        assert abs(mp.rho_predicted - 0.745356) < 1e-6

    def test_dgd_one_nine(self):
        mp = dgd_params([1.0, 9.0])
        assert mp.params["alpha"] == 0.2 and abs(mp.rho_predicted - 0.8) < 1e-12

    def test_dnag_e1(self):
        mp = dnag_params(E1_LAM)
        assert abs(mp.rho_predicted - 0.569293) < 1e-6
        achieved = nag_radius(mp.params["alpha"], mp.params["beta"],
                              np.array(E1_LAM))
        assert abs(achieved - mp.rho_predicted) < 1e-4

    def test_dhbm_e1(self):
        mp = dhbm_params(E1_LAM)
        assert abs(mp.rho_predicted - 0.447214) < 1e-6
        achieved = hbm_radius(mp.params["alpha"], mp.params["beta"],
                              np.array(E1_LAM))
        assert abs(achieved - mp.rho_predicted) < 1e-8

    def test_momentum_free_radii_reduce_to_gradient(self):
        lam = np.array([0.5, 2.0])
        alpha = 0.8
        expect = float(np.max(np.abs(1.0 - alpha * lam)))
        assert abs(nag_radius(alpha, 0.0, lam) - expect) < 1e-12
        assert abs(hbm_radius(alpha, 0.0, lam) - expect) < 1e-12

    def test_well_conditioned_spectrum(self):
        # kappa = 1 collapses every accelerated rate to zero
        assert dhbm_params([2.0, 2.0]).rho_predicted == 0.0
        assert dgd_params([2.0, 2.0]).rho_predicted == 0.0

    def test_degenerate(self):
        with pytest.raises(DegenerateSpectrum):
            dgd_params([0.0, 1.0])


class TestAdmm:
    def test_error_map_e1(self, e1):
        G = admm_error_map(e1, 1.0)
        assert np.allclose(G, [[7.0 / 12.0, -1.0 / 6.0],
                               [-1.0 / 6.0, 5.0 / 6.0]], atol=1e-12)
        assert abs(admm_radius(e1, 1.0) - 11.0 / 12.0) < 1e-12

    def test_inversion_lemma_matches_direct_inverse(self):
        sys = make_system(4, 8, 2, 41)
        xi = 0.7
        G = np.zeros((4, 4))
        for Ai, _ in sys.blocks:
            G += np.linalg.inv(Ai.T @ Ai + xi * np.eye(4))
        G *= xi / sys.m
        assert np.max(np.abs(admm_error_map(sys, xi) - G)) < 1e-10

    def test_radius_contracts_for_positive_xi(self):
        sys = make_system(4, 8, 2, 43)
        for xi in (0.01, 1.0, 100.0):
            assert 0.0 < admm_radius(sys, xi) < 1.0

    def test_tune_e1(self, e1):
        mp = admm_tune(e1)
        assert mp.params["xi"] > 0.0
        assert mp.rho_predicted <= 11.0 / 12.0
        assert mp.T_predicted <= 11.49

    def test_tune_bad_range(self, e1):
        with pytest.raises(TuningFailed):
            admm_tune(e1, xi_range=(0.0, 1.0))


class TestCimminoConsensus:
    def test_cimmino_e1(self):
        mp = cimmino_params(E1_MU, 2)
        assert abs(mp.params["nu"] - 1.0) < 1e-6
        assert abs(mp.rho_predicted - 0.707107) < 1e-5

    def test_cimmino_balanced(self):
        mp = cimmino_params([0.25, 0.75], 2)
        assert abs(mp.params["nu"] * 2 - 2.0) < 1e-12
        assert abs(mp.rho_predicted - 0.5) < 1e-12

    def test_consensus(self):
        assert abs(consensus_rate(0.146447) - 0.853553) < 1e-12
        mp = consensus_params(0.146447)
        assert mp.params == {"gamma": 1.0, "eta": 1.0}

    def test_consensus_domain(self):
        with pytest.raises(DegenerateSpectrum):
            consensus_rate(0.0)
        with pytest.raises(DegenerateSpectrum):
            consensus_rate(1.5)


class TestConvergenceTime:
    def test_values(self):
        assert abs(convergence_time(0.414214) - 1.134593) < 1e-5
        assert abs(convergence_time(0.707107) - 2.885390) < 1e-5
        assert abs(convergence_time(math.sqrt(2.0) - 1.0)
                   - 1.0 / 0.881374) < 1e-6

    def test_sentinels(self):
        assert convergence_time(0.0) == 0.0
        assert convergence_time(-0.5) == 0.0
        assert convergence_time(1.0) == math.inf


class TestSummaryReport:
    def test_shape(self, e1):
        s = compute_X(e1)
        payload = summary_report(s, [apc_optimal_params(s.mu_min, s.mu_max)])
        assert payload["n"] == 2
        assert abs(payload["kappa_X"] - 5.828427) < 1e-6
        assert "apc" in payload["methods"]
        assert abs(payload["methods"]["apc"]["rho"] - 0.414214) < 1e-6
