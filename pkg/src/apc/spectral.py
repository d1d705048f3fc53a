"""Spectral analysis: the consensus matrix X, stability of the (gamma, eta)
iteration, closed-form optimal parameters, and tuned rates for every
comparison method.

All rates are expressed as the spectral radius rho of the relevant error
iteration; convergence time is T = 1 / (-ln rho).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrum, TuningFailed
from .linalg import cholesky_spd, quadratic_roots, solve_spd, sym_eigs

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SpectralSummary:
    X: np.ndarray
    mu: np.ndarray          # eigenvalues of X, ascending
    lambda_AtA: np.ndarray  # eigenvalues of A^T A, ascending

    @property
    def mu_min(self):
        return float(self.mu[0])

    @property
    def mu_max(self):
        return float(self.mu[-1])

    @property
    def kappa_X(self):
        return self.mu_max / self.mu_min if self.mu_min > 0 else math.inf

    @property
    def kappa_AtA(self):
        lmin = float(self.lambda_AtA[0])
        return float(self.lambda_AtA[-1]) / lmin if lmin > 0 else math.inf


@dataclass
class MethodParams:
    method: str
    params: dict = field(default_factory=dict)
    rho_predicted: float = math.nan
    T_predicted: float = math.nan

    def to_dict(self):
        out = dict(self.params)
        out["rho"] = self.rho_predicted
        out["T"] = self.T_predicted
        return out


@dataclass
class StabilityVerdict:
    gamma: float
    eta: float
    root_magnitudes: list   # per-mu (|lambda_1|, |lambda_2|)
    spectral_radius: float
    stable: bool
    in_S: bool              # gamma within [0, 2] on top of stability


def convergence_time(rho):
    """T = 1 / (-ln rho); 0 for rho <= 0 and +inf for rho >= 1."""
    if rho <= 0.0:
        return 0.0
    if rho >= 1.0:
        return math.inf
    return 1.0 / (-math.log(rho))


def compute_X(sys):
    """X = (1/m) sum_i A_i^T (A_i A_i^T)^{-1} A_i plus both spectra."""
    n = sys.n
    X = np.zeros((n, n))
    for Ai, _ in sys.blocks:
        f = cholesky_spd(Ai @ Ai.T)
        X += Ai.T @ solve_spd(f, Ai)
    X /= sys.m
    X = 0.5 * (X + X.T)  # kill accumulation asymmetry at roundoff level
    mu = sym_eigs(X)
    AtA = sys.A.T @ sys.A
    lam = sym_eigs(0.5 * (AtA + AtA.T))
    return SpectralSummary(X=X, mu=mu, lambda_AtA=lam)


def apc_quadratic_coeffs(gamma, eta, mu):
    """Coefficients (b1, c0) of the per-eigenvalue monic quadratic."""
    b1 = -eta * gamma * (1.0 - mu) + gamma - 1.0 + eta - 1.0
    c0 = (gamma - 1.0) * (eta - 1.0)
    return b1, c0


def apc_spectral_radius(gamma, eta, mu):
    """Stability verdict for a (gamma, eta) pair over the spectrum of X.

    The radius includes the |1 - gamma| eigenvalue of the full block
    iteration matrix alongside the per-mu quadratic roots.
    """
    mags = []
    radius = abs(1.0 - gamma)
    for m_i in np.atleast_1d(np.asarray(mu, dtype=float)):
        b1, c0 = apc_quadratic_coeffs(gamma, eta, float(m_i))
        r1, r2 = quadratic_roots(b1, c0)
        pair = (abs(r1), abs(r2))
        mags.append(pair)
        radius = max(radius, *pair)
    stable = radius < 1.0
    return StabilityVerdict(gamma=gamma, eta=eta, root_magnitudes=mags,
                            spectral_radius=radius, stable=stable,
                            in_S=stable and 0.0 <= gamma <= 2.0)


def apc_optimal_params(mu_min, mu_max):
    """Closed-form optimal (gamma*, eta*) and rate for the consensus iteration.

    rho = (sqrt(k) - 1) / (sqrt(k) + 1) with k = mu_max / mu_min; gamma and
    eta are recovered as the roots of z^2 - s z + prod where
    prod = (1 + rho)^2 / mu_max and s = prod + 1 - rho^2. Convention:
    gamma is the smaller root.
    """
    if mu_min <= 0.0:
        raise DegenerateSpectrum(f"mu_min={mu_min} must be positive")
    if not mu_min <= mu_max <= 1.0 + 1e-10:
        raise DegenerateSpectrum(f"invalid spectrum bounds ({mu_min}, {mu_max})")
    kappa = mu_max / mu_min
    sk = math.sqrt(kappa)
    rho = (sk - 1.0) / (sk + 1.0)
    prod = (1.0 + rho) ** 2 / mu_max
    ssum = prod + 1.0 - rho * rho
    r1, r2 = quadratic_roots(-ssum, prod)
    gamma, eta = sorted((r1.real, r2.real))
    for m_edge, sign in ((mu_max, 1.0), (mu_min, -1.0)):
        lhs = m_edge * eta * gamma
        rhs = (1.0 + sign * math.sqrt(max((gamma - 1.0) * (eta - 1.0), 0.0))) ** 2
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(rhs)):
            raise TuningFailed(f"optimality equations violated: {lhs} vs {rhs}")
    return MethodParams(method="apc", params={"gamma": gamma, "eta": eta},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def _check_lambda(lam):
    lam = np.sort(np.asarray(lam, dtype=float))
    if lam[0] <= 0.0:
        raise DegenerateSpectrum(f"lambda_min={lam[0]} must be positive")
    return lam


def dgd_params(lambda_AtA):
    """Optimal gradient step alpha = 2 / (l_max + l_min)."""
    lam = _check_lambda(lambda_AtA)
    lmin, lmax = float(lam[0]), float(lam[-1])
    alpha = 2.0 / (lmax + lmin)
    kappa = lmax / lmin
    rho = (kappa - 1.0) / (kappa + 1.0)
    assert abs(abs(1.0 - alpha * lmin) - rho) <= 1e-12 * max(rho, 1.0)
    return MethodParams(method="dgd", params={"alpha": alpha},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def nag_radius(alpha, beta, lam):
    """Exact spectral radius of the Nesterov error iteration at (alpha, beta).

    Per eigenvalue h of A^T A the two-step recursion reduces to
    z^2 - (1 - alpha h)(1 + beta) z + (1 - alpha h) beta = 0.
    """
    lam = np.asarray(lam, dtype=float)
    g = 1.0 - alpha * lam
    b1 = -g * (1.0 + beta)
    c0 = g * beta
    return float(np.max(_max_root_mag(b1, c0)))


def _max_root_mag(b1, c0):
    """Vectorized max root magnitude of z^2 + b1 z + c0."""
    b1 = np.atleast_1d(np.asarray(b1, dtype=float))
    c0 = np.broadcast_to(np.asarray(c0, dtype=float), b1.shape)
    disc = b1 * b1 - 4.0 * c0
    # a discriminant at rounding level is an analytic double root
    tiny = 64.0 * np.finfo(float).eps * (b1 * b1 + 4.0 * np.abs(c0))
    disc = np.where(np.abs(disc) <= tiny, 0.0, disc)
    out = np.empty_like(b1)
    neg = disc < 0.0
    out[neg] = np.sqrt(c0[neg])
    pos = ~neg
    out[pos] = (np.abs(b1[pos]) + np.sqrt(disc[pos])) / 2.0
    return out


def _golden_min(f, lo, hi, iters=80):
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def dnag_params(lambda_AtA, rtol=1e-4):
    """Tune Nesterov momentum by minimizing the exact iteration radius.

    The rate target is 1 - 2 / sqrt(3 kappa + 1); (alpha, beta) come from a
    grid-seeded golden-section search over beta nested in alpha. Raises
    TuningFailed if the achieved radius misses the target beyond rtol.
    """
    lam = _check_lambda(lambda_AtA)
    lmin, lmax = float(lam[0]), float(lam[-1])
    kappa = lmax / lmin
    rho = 1.0 - 2.0 / math.sqrt(3.0 * kappa + 1.0)
    edge = np.array([lmin, lmax])  # radius over h is extremal at the ends

    def best_beta(alpha):
        grid = np.linspace(0.0, 0.999, 61)
        vals = [nag_radius(alpha, b, edge) for b in grid]
        k = int(np.argmin(vals))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        return _golden_min(lambda b: nag_radius(alpha, b, edge), lo, hi)

    def outer(alpha):
        return best_beta(alpha)[1]

    agrid = np.linspace(1e-6 / lmax, 2.0 / lmax * (1.0 - 1e-9), 81)
    vals = [outer(a) for a in agrid]
    k = int(np.argmin(vals))
    lo = agrid[max(k - 1, 0)]
    hi = agrid[min(k + 1, len(agrid) - 1)]
    alpha, achieved = _golden_min(outer, lo, hi, iters=60)
    beta, achieved = best_beta(alpha)
    if abs(achieved - rho) > rtol * rho + 1e-8:
        raise TuningFailed(
            f"D-NAG search reached radius {achieved}, predicted {rho}")
    return MethodParams(method="dnag", params={"alpha": alpha, "beta": beta},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def hbm_radius(alpha, beta, lam):
    """Spectral radius of the heavy-ball companion iteration."""
    lam = np.asarray(lam, dtype=float)
    b1 = -(1.0 + beta - alpha * lam)
    return float(np.max(_max_root_mag(b1, beta)))


def dhbm_params(lambda_AtA):
    """Closed-form heavy-ball tuning: alpha = (2/(sqrt(l_max)+sqrt(l_min)))^2,
    beta = rho^2 with rho = (sqrt(k)-1)/(sqrt(k)+1)."""
    lam = _check_lambda(lambda_AtA)
    lmin, lmax = float(lam[0]), float(lam[-1])
    sk = math.sqrt(lmax / lmin)
    rho = (sk - 1.0) / (sk + 1.0)
    alpha = (2.0 / (math.sqrt(lmax) + math.sqrt(lmin))) ** 2
    beta = rho * rho
    achieved = hbm_radius(alpha, beta, np.array([lmin, lmax]))
    if abs(achieved - rho) > 1e-8 * rho + 1e-12:
        raise TuningFailed(f"heavy-ball radius {achieved} != predicted {rho}")
    return MethodParams(method="dhbm", params={"alpha": alpha, "beta": beta},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def admm_error_map(sys, xi):
    """G(xi) = (xi/m) sum_i (A_i^T A_i + xi I)^{-1}, the x-bar error map.

    Assembled through the inversion lemma: (A_i^T A_i + xi I)^{-1} =
    (I - A_i^T (A_i A_i^T + xi I)^{-1} A_i) / xi.
    """
    n = sys.n
    G = np.zeros((n, n))
    for Ai, _ in sys.blocks:
        f = cholesky_spd(Ai @ Ai.T + xi * np.eye(Ai.shape[0]))
        G += np.eye(n) - Ai.T @ solve_spd(f, Ai)
    G /= sys.m
    return 0.5 * (G + G.T)


def admm_radius(sys, xi):
    w = sym_eigs(admm_error_map(sys, xi))
    return float(np.max(np.abs(w)))


def _power_lambda_max(AtA, iters=200):
    v = np.ones(AtA.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = AtA @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def admm_tune(sys, xi_range=None):
    """Pick xi minimizing the spectral radius of G(xi).

    200-point log grid over the range (default [1e-4, 1e4] * lambda_max of
    A^T A) refined by golden-section in log space. Raises TuningFailed when
    no grid point is stable.
    """
    if xi_range is None:
        lmax = _power_lambda_max(sys.A.T @ sys.A)
        xi_range = (1e-4 * lmax, 1e4 * lmax)
    lo, hi = xi_range
    if lo <= 0.0:
        raise TuningFailed(f"xi range lower bound {lo} must be positive")
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), 200))
    vals = [admm_radius(sys, xi) for xi in grid]
    k = int(np.argmin(vals))
    if vals[k] >= 1.0:
        raise TuningFailed(f"ADMM unstable across [{lo}, {hi}]: best radius {vals[k]}")
    llo = math.log(grid[max(k - 1, 0)])
    lhi = math.log(grid[min(k + 1, len(grid) - 1)])
    lxi, rho = _golden_min(lambda t: admm_radius(sys, math.exp(t)), llo, lhi, iters=40)
    xi = math.exp(lxi)
    return MethodParams(method="admm", params={"xi": xi},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def cimmino_params(mu, m):
    """Block Cimmino at the optimal relaxation nu = eta* / m with
    eta* = 2 / (mu_max + mu_min)."""
    mu = np.sort(np.asarray(mu, dtype=float))
    mu_min, mu_max = float(mu[0]), float(mu[-1])
    if mu_min <= 0.0:
        raise DegenerateSpectrum(f"mu_min={mu_min} must be positive")
    eta = 2.0 / (mu_max + mu_min)
    kappa = mu_max / mu_min
    rho = (kappa - 1.0) / (kappa + 1.0)
    return MethodParams(method="cimmino", params={"nu": eta / m},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def consensus_rate(mu_min):
    """Plain-averaging consensus rate 1 - mu_min."""
    if not 0.0 < mu_min <= 1.0 + 1e-12:
        raise DegenerateSpectrum(f"mu_min={mu_min} outside (0, 1]")
    return 1.0 - mu_min


def consensus_params(mu_min):
    rho = consensus_rate(mu_min)
    return MethodParams(method="consensus", params={"gamma": 1.0, "eta": 1.0},
                        rho_predicted=rho, T_predicted=convergence_time(rho))


def summary_report(summary, methods):
    """JSON-ready dict combining a SpectralSummary and tuned method params."""
    return {
        "n": int(summary.X.shape[0]),
        "mu_min": summary.mu_min,
        "mu_max": summary.mu_max,
        "kappa_X": summary.kappa_X,
        "kappa_AtA": summary.kappa_AtA,
        "trace_X": float(np.trace(summary.X)),
        "methods": {mp.method: mp.to_dict() for mp in methods},
    }
