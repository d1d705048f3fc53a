"""Verification and benchmarking: block iteration matrix spectrum checks,
empirical-vs-analytic rate comparison, and convergence-time tables."""

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    Diverged,
    InsufficientData,
    NumericallySingular,
    TooLarge,
    TuningFailed,
    VerificationFailed,
)
from .linalg import cholesky_spd, solve_spd, solve_complex, sym_eigs
from .spectral import (
    MethodParams,
    admm_tune,
    apc_optimal_params,
    apc_quadratic_coeffs,
    cimmino_params,
    compute_X,
    consensus_params,
    dgd_params,
    dhbm_params,
    dnag_params,
)
from .linalg import quadratic_roots
from .solvers import build_preconditioned, make_engine, run_engine, run_precond_dhbm
from .simnet import run_simulated

MAX_VERIFY_DIM = 2000


@dataclass
class BlockIterationMatrix:
    """The (m+1)n x (m+1)n error-propagation matrix of one consensus round."""

    B: np.ndarray
    gamma: float
    eta: float
    m: int
    n: int
    M: np.ndarray  # bottom-right block (eta*gamma/m) sum P_i + (1-eta) I


def assemble_block_matrix(sys, gamma, eta):
    """Materialize the stacked error recursion (verification scale only).

    Layout: top-left (1-gamma) I_mn, top-right gamma [P_1; ...; P_m],
    bottom-left (eta(1-gamma)/m) [I ... I], bottom-right M.
    """
    m, n = sys.m, sys.n
    dim = (m + 1) * n
    if dim > MAX_VERIFY_DIM:
        raise TooLarge(f"block matrix dimension {dim} exceeds {MAX_VERIFY_DIM}")
    projectors = []
    for Ai, _ in sys.blocks:
        f = cholesky_spd(Ai @ Ai.T)
        projectors.append(np.eye(n) - Ai.T @ solve_spd(f, Ai))
    Msub = (eta * gamma / m) * sum(projectors) + (1.0 - eta) * np.eye(n)
    B = np.zeros((dim, dim))
    B[:m * n, :m * n] = (1.0 - gamma) * np.eye(m * n)
    for i, Pi in enumerate(projectors):
        B[i * n:(i + 1) * n, m * n:] = gamma * Pi
        B[m * n:, i * n:(i + 1) * n] = (eta * (1.0 - gamma) / m) * np.eye(n)
    B[m * n:, m * n:] = Msub
    return BlockIterationMatrix(B=B, gamma=gamma, eta=eta, m=m, n=n, M=Msub)


def predicted_spectrum(gamma, eta, mu, m, n):
    """Closed-form eigenvalue multiset of the block iteration matrix:
    (m-1)n copies of 1-gamma plus the two roots of each per-mu quadratic."""
    mu = np.asarray(mu, dtype=float)
    if len(mu) != n:
        raise ValueError(f"expected {n} eigenvalues of X, got {len(mu)}")
    values = [complex(1.0 - gamma)] * ((m - 1) * n)
    for mu_i in mu:
        b1, c0 = apc_quadratic_coeffs(gamma, eta, float(mu_i))
        values.extend(quadratic_roots(b1, c0))
    return values


@dataclass
class SpectrumCheck:
    eigenvalue: complex
    accepted: bool
    blowup: float  # ||z|| for the unit-rhs resolvent solve, inf on pivot collapse


def verify_spectrum(bim, predicted, seed=0, blowup_threshold=1e8):
    """Certify each predicted eigenvalue by near-singularity of B - lambda I.

    Solves (B - lambda I) z = r for a seeded random unit r; lambda is
    accepted when ||z|| >= blowup_threshold or elimination hits pivot
    collapse. Raises VerificationFailed listing any rejected eigenvalues.
    """
    B = bim.B
    dim = B.shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    r = rng.standard_normal(dim)
    r /= np.linalg.norm(r)
    checks = []
    for lam in predicted:
        try:
            z = solve_complex(B - lam * np.eye(dim), r)
            blowup = float(np.linalg.norm(z))
            accepted = blowup >= blowup_threshold
        except NumericallySingular:
            blowup = math.inf
            accepted = True
        checks.append(SpectrumCheck(eigenvalue=complex(lam), accepted=accepted,
                                    blowup=blowup))
    rejected = [c for c in checks if not c.accepted]
    if rejected:
        raise VerificationFailed(
            "rejected eigenvalues: "
            + ", ".join(f"{c.eigenvalue} (||z||={c.blowup:.3g})" for c in rejected),
            report=checks)
    return checks


@dataclass
class ComparisonRow:
    method: str
    params: dict
    rho_predicted: float
    T_predicted: float
    T_empirical: float
    fitted_rate: float
    iterations: int
    converged: bool
    best: bool = False
    error: str | None = None


@dataclass
class ComparisonTable:
    rows: list = field(default_factory=list)

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("method,rho,T_predicted,T_empirical,iters\n")
        for r in self.rows:
            if r.error is not None:
                buf.write(f"{r.method},,,,{r.error}\n")
            else:
                buf.write(f"{r.method},{r.rho_predicted!r},{r.T_predicted!r},"
                          f"{r.T_empirical!r},{r.iterations}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None):
        payload = []
        for r in self.rows:
            payload.append({
                "method": r.method, "params": r.params,
                "rho_predicted": r.rho_predicted, "T_predicted": r.T_predicted,
                "T_empirical": r.T_empirical, "fitted_rate": r.fitted_rate,
                "iterations": r.iterations, "converged": r.converged,
                "best": r.best, "error": r.error,
            })
        text = json.dumps(payload, indent=2, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


METHOD_ORDER = ["dgd", "dnag", "dhbm", "admm", "cimmino", "consensus", "apc", "pdhbm"]


def tune_method(sys, method, summary=None):
    """Optimal MethodParams for one method on a partitioned system."""
    if summary is None:
        summary = compute_X(sys)
    if method == "apc":
        return apc_optimal_params(summary.mu_min, summary.mu_max)
    if method == "consensus":
        return consensus_params(summary.mu_min)
    if method == "cimmino":
        return cimmino_params(summary.mu, sys.m)
    if method == "dgd":
        return dgd_params(summary.lambda_AtA)
    if method == "dnag":
        return dnag_params(summary.lambda_AtA)
    if method == "dhbm":
        return dhbm_params(summary.lambda_AtA)
    if method == "admm":
        return admm_tune(sys)
    if method == "pdhbm":
        # whitening hands heavy-ball the consensus-matrix condition number
        psys, _ = build_preconditioned(sys)
        CtC = psys.A.T @ psys.A
        mp = dhbm_params(sym_eigs(0.5 * (CtC + CtC.T)))
        return MethodParams(method="pdhbm", params=dict(mp.params),
                            rho_predicted=mp.rho_predicted,
                            T_predicted=mp.T_predicted)
    raise ValueError(f"unknown method '{method}'")


def build_comparison(sys, methods, budget=None, simulate=False, summary=None):
    """Tune, run, and fit every requested method; failures become table rows.

    The row with the smallest predicted convergence time is flagged best.
    """
    if not methods:
        raise ValueError("empty method set")
    if summary is None:
        summary = compute_X(sys)
    table = ComparisonTable()
    ordered = [mth for mth in METHOD_ORDER if mth in set(methods)]
    for method in ordered:
        try:
            mp = tune_method(sys, method, summary)
            params = dict(mp.params)
            params["T_predicted"] = mp.T_predicted
            if method == "pdhbm":
                trace = run_precond_dhbm(sys, budget)
            elif simulate:
                trace = run_simulated(sys, method, params, budget)
            else:
                trace = run_engine(make_engine(sys, method, params), budget,
                                   T_predicted=mp.T_predicted)
            try:
                fitted = trace.fitted_rate
                T_emp = trace.T_empirical
            except InsufficientData:
                fitted = math.nan
                T_emp = math.nan
            table.rows.append(ComparisonRow(
                method=method, params=dict(mp.params),
                rho_predicted=mp.rho_predicted, T_predicted=mp.T_predicted,
                T_empirical=T_emp, fitted_rate=fitted,
                iterations=trace.iterations, converged=trace.converged))
        except (TuningFailed, Diverged, VerificationFailed) as exc:
            table.rows.append(ComparisonRow(
                method=method, params={}, rho_predicted=math.nan,
                T_predicted=math.nan, T_empirical=math.nan,
                fitted_rate=math.nan, iterations=0, converged=False,
                error=str(exc)))
    ok = [r for r in table.rows if r.error is None and math.isfinite(r.T_predicted)]
    if ok:
        min(ok, key=lambda r: r.T_predicted).best = True
    return table
