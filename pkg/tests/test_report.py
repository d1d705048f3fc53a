"""Block-matrix verification, rate fitting, and comparison table tests."""

import json
import math

import numpy as np
import pytest

from apc.errors import InsufficientData, TooLarge, VerificationFailed
from apc.report import (
    assemble_block_matrix,
    build_comparison,
    predicted_spectrum,
    tune_method,
    verify_spectrum,
)
from apc.solvers import Budget, init_worker, master_step_apc, worker_step_apc
from apc.spectral import compute_X
from apc.trace import IterationTrace, fit_rate
from conftest import make_system

GAMMA_STAR = 4.0 - 2.0 * math.sqrt(2.0)


class TestAssemble:
    def test_e1_shape(self, e1):
        bim = assemble_block_matrix(e1, GAMMA_STAR, 2.0)
        assert bim.B.shape == (6, 6)
        assert bim.m == 2 and bim.n == 2

    def test_zero_gamma_top_left_identity(self, e1):
        bim = assemble_block_matrix(e1, 0.0, 1.5)
        assert np.array_equal(bim.B[:4, :4], np.eye(4))

    def test_zero_eta_bottom_right_identity(self, e1):
        bim = assemble_block_matrix(e1, 0.7, 0.0)
        assert np.allclose(bim.M, np.eye(2), atol=1e-14)

    def test_action_matches_one_apc_step(self, e1):
        # B applied to stacked errors must equal one worker+master round
        gamma, eta = 0.9, 1.3
        bim = assemble_block_matrix(e1, gamma, eta)
        workers = [init_worker(Ai, bi, i) for i, (Ai, bi) in enumerate(e1.blocks)]
        rng = np.random.default_rng(91)
        xbar = rng.standard_normal(2)
        for w in workers:
            w.x = w.x + 0.5 * w.project_nullspace(rng.standard_normal(2))
        stacked = np.concatenate([w.x - e1.x_star for w in workers]
                                 + [xbar - e1.x_star])
        predicted = bim.B @ stacked
        iterates = [worker_step_apc(w, xbar, gamma) for w in workers]
        xbar_new = master_step_apc(xbar, iterates, eta)
        actual = np.concatenate([w.x - e1.x_star for w in workers]
                                + [xbar_new - e1.x_star])
        assert np.max(np.abs(predicted - actual)) < 1e-12

    def test_dimension_cap(self):
        # two single-row blocks over n = 667 give (m+1)n = 2001
        from apc.ingest import PartitionedSystem
        n = 667
        A = np.zeros((2, n))
        A[0, 0] = A[1, 1] = 1.0
        b = np.zeros(2)
        sys = PartitionedSystem(A=A, b=b, m=2, p=1,
                                blocks=[(A[:1], b[:1]), (A[1:], b[1:])])
        with pytest.raises(TooLarge):
            assemble_block_matrix(sys, 1.0, 1.0)


class TestPredictedSpectrum:
    def test_e1_optimal(self, e1):
        mu = compute_X(e1).mu
        vals = predicted_spectrum(GAMMA_STAR, 2.0, mu, 2, 2)
        assert len(vals) == 6
        copies = [v for v in vals if abs(v - (1.0 - GAMMA_STAR)) < 1e-12]
        assert len(copies) >= 2
        assert abs((1.0 - GAMMA_STAR) - (2.0 * math.sqrt(2.0) - 3.0)) < 1e-12
        roots = sorted(vals, key=lambda v: abs(abs(v) - 0.414214))[:4]
        for v in roots:
            assert abs(abs(v) - 0.414214) < 1e-6

    def test_unit_gamma_factorization(self, e1):
        mu = compute_X(e1).mu
        vals = predicted_spectrum(1.0, 1.7, mu, 2, 2)
        zeros = [v for v in vals if abs(v) < 1e-12]
        assert len(zeros) >= 2 + 2  # (m-1)n copies of 1-gamma=0 plus c0=0 roots

    def test_single_block_has_no_copies(self):
        vals = predicted_spectrum(0.8, 1.2, [0.5, 0.9], 1, 2)
        assert len(vals) == 4

    def test_length_check(self):
        with pytest.raises(ValueError):
            predicted_spectrum(1.0, 1.0, [0.5], 2, 2)


class TestVerify:
    def test_e1_all_accepted(self, e1):
        mu = compute_X(e1).mu
        bim = assemble_block_matrix(e1, GAMMA_STAR, 2.0)
        checks = verify_spectrum(bim, predicted_spectrum(GAMMA_STAR, 2.0, mu, 2, 2))
        assert len(checks) == 6 and all(c.accepted for c in checks)

    def test_random_system_accepted(self):
        sys = make_system(3, 3, 3, 93)
        mu = compute_X(sys).mu
        gamma, eta = 0.8, 1.1
        bim = assemble_block_matrix(sys, gamma, eta)
        checks = verify_spectrum(bim, predicted_spectrum(gamma, eta, mu, 3, 3))
        assert len(checks) == 12 and all(c.accepted for c in checks)

    def test_perturbed_eigenvalue_rejected(self, e1):
        mu = compute_X(e1).mu
        bim = assemble_block_matrix(e1, GAMMA_STAR, 2.0)
        bogus = [v + 0.1 for v in predicted_spectrum(GAMMA_STAR, 2.0, mu, 2, 2)]
        with pytest.raises(VerificationFailed) as exc:
            verify_spectrum(bim, bogus)
        assert any(not c.accepted for c in exc.value.report)


class TestFitRate:
    def test_exact_geometric(self):
        errs = [0.5 ** t for t in range(40)]
        assert abs(fit_rate(errs) - 0.5) < 1e-12

    def test_bounded_oscillation(self):
        errs = [0.5 ** t * (1.0 + 0.01 * (-1.0) ** t) for t in range(60)]
        assert abs(fit_rate(errs) - 0.5) < 0.01 * 0.5

    def test_constant_error(self):
        assert abs(fit_rate([0.7] * 30) - 1.0) < 1e-9

    def test_trailing_zeros_trimmed(self):
        errs = [0.5 ** t for t in range(40)] + [0.0, 0.0]
        assert abs(fit_rate(errs) - 0.5) < 1e-12

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            fit_rate([1.0, 0.5, 0.25])


class TestTraceSerialization:
    def test_csv_round_trip(self, tmp_path):
        trace = IterationTrace(method="apc", params={}, errors=[1.0, 0.5],
                               residuals=[0.9, 0.45])
        text = trace.to_csv(tmp_path / "t.csv")
        lines = text.splitlines()
        assert lines[0] == "iter,error,residual"
        assert lines[1] == "0,1.0,0.9"
        assert (tmp_path / "t.csv").read_text() == text

    def test_csv_without_residuals(self):
        trace = IterationTrace(method="apc", params={}, errors=[1.0])
        assert trace.to_csv().splitlines()[0] == "iter,error"


class TestComparison:
    def test_e1_predicted_times(self, e1):
        table = build_comparison(e1, ["dgd", "dnag", "dhbm", "admm",
                                      "cimmino", "apc"])
        times = {r.method: r.T_predicted for r in table.rows}
        assert abs(times["dgd"] - 3.402595) < 1e-3
        assert abs(times["dnag"] - 1.775061) < 1e-3
        assert abs(times["dhbm"] - 1.242670) < 1e-3
        assert abs(times["cimmino"] - 2.885390) < 1e-3
        assert abs(times["apc"] - 1.134593) < 1e-3
        assert times["admm"] <= 11.49

    def test_e1_apc_flagged_best(self, e1):
        table = build_comparison(e1, ["dgd", "dnag", "dhbm", "admm",
                                      "cimmino", "apc"])
        best = [r.method for r in table.rows if r.best]
        assert best == ["apc"]

    def test_single_method(self, e1):
        table = build_comparison(e1, ["dgd"])
        assert len(table.rows) == 1 and table.rows[0].method == "dgd"

    def test_empty_method_set(self, e1):
        with pytest.raises(ValueError):
            build_comparison(e1, [])

    def test_serialization(self, e1, tmp_path):
        table = build_comparison(e1, ["apc"], Budget(max_iters=200))
        csv_text = table.to_csv(tmp_path / "c.csv")
        assert csv_text.splitlines()[0] == "method,rho,T_predicted,T_empirical,iters"
        payload = json.loads(table.to_json(tmp_path / "c.json"))
        assert payload[0]["method"] == "apc" and payload[0]["best"] is True

    def test_simulated_matches_sequential(self, e1):
        budget = Budget(max_iters=25, tol=-1.0)
        seq = build_comparison(e1, ["apc", "dgd"], budget, simulate=False)
        sim = build_comparison(e1, ["apc", "dgd"], budget, simulate=True)
        for a, b in zip(seq.rows, sim.rows):
            assert a.method == b.method
            assert a.fitted_rate == b.fitted_rate

    def test_tune_method_pdhbm_has_concrete_params(self, e1):
        mp = tune_method(e1, "pdhbm")
        assert set(mp.params) == {"alpha", "beta"}
        assert abs(mp.rho_predicted - 0.414214) < 1e-6
