"""Iterative solver engines.

All seven methods are phrased as barrier-synchronous rounds: each worker
turns the master's broadcast vector into a per-block contribution, and the
master folds the m contributions (in ascending block index, so runs are
bit-reproducible) into the next broadcast. The sequential driver here and
the message-passing harness in simnet share these round functions, which
makes their traces bit-identical.

Per-iteration worker cost is 2pn: projections and pseudoinverse
applications go through the cached p x p Cholesky factor of A_i A_i^T and
never materialize the n x n projector.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import Diverged, NotPositiveDefinite, RankDeficientBlock
from .linalg import cholesky_spd, solve_spd, sym_eig_decomp
from .spectral import dhbm_params
from .trace import IterationTrace

DEFAULT_TOL = 1e-10
DIVERGENCE_FACTOR = 1e12
MAX_ITERS_CAP = 200_000


@dataclass
class Budget:
    max_iters: int | None = None   # default: ceil(100 * T_predicted)
    tol: float = DEFAULT_TOL
    x0: np.ndarray | None = None   # override the engine's initial estimate
    record_iterates: bool = False

    def resolve_iters(self, T_predicted):
        if self.max_iters is not None:
            return self.max_iters
        if T_predicted is None or not math.isfinite(T_predicted):
            return 1000
        return min(max(int(math.ceil(100.0 * T_predicted)), 50), MAX_ITERS_CAP)


class WorkerState:
    """Per-block state: cached factorization of A_i A_i^T and the local iterate."""

    def __init__(self, index, Ai, bi):
        self.index = index
        self.Ai = Ai
        self.bi = bi
        try:
            self.factor = cholesky_spd(Ai @ Ai.T)
        except NotPositiveDefinite as exc:
            raise RankDeficientBlock(index, str(exc)) from exc
        self.x = self.pinv_apply(bi)  # minimum-norm block solution

    def pinv_apply(self, v):
        """A_i^+ v = A_i^T (A_i A_i^T)^{-1} v."""
        return self.Ai.T @ solve_spd(self.factor, v)

    def project_nullspace(self, v):
        """P_i v = v - A_i^+ (A_i v), without forming P_i."""
        return v - self.pinv_apply(self.Ai @ v)


def init_worker(Ai, bi, index=0):
    return WorkerState(index, np.asarray(Ai, dtype=float), np.asarray(bi, dtype=float))


def worker_step_apc(w, x_bar, gamma):
    """x_i <- x_i + gamma * P_i (x_bar - x_i); returns the new local iterate."""
    v = x_bar - w.x
    w.x = w.x + gamma * w.project_nullspace(v)
    return w.x


def master_step_apc(x_bar, worker_iterates, eta):
    """x_bar <- (eta/m) sum x_i + (1 - eta) x_bar, fixed fold order."""
    m = len(worker_iterates)
    return (eta / m) * ordered_sum(worker_iterates) + (1.0 - eta) * x_bar


def ordered_sum(vectors):
    """Left fold in list order; keeps parallel schedules bit-reproducible."""
    acc = vectors[0].copy()
    for v in vectors[1:]:
        acc = acc + v
    return acc


class Engine:
    """Round-based engine interface shared by the sequential and simulated drivers."""

    method = ""

    def __init__(self, sys, params):
        self.sys = sys
        self.params = params

    def initial_broadcast(self, x0=None):
        raise NotImplementedError

    def worker_round(self, i, broadcast):
        raise NotImplementedError

    def master_round(self, broadcast, contributions):
        raise NotImplementedError

    def estimate(self, broadcast):
        """Current solution estimate implied by the broadcast vector."""
        return broadcast


class ApcEngine(Engine):
    method = "apc"

    def __init__(self, sys, params):
        super().__init__(sys, params)
        self.gamma = params["gamma"]
        self.eta = params["eta"]
        self.workers = [init_worker(Ai, bi, i) for i, (Ai, bi) in enumerate(sys.blocks)]

    def initial_broadcast(self, x0=None):
        if x0 is not None:
            return x0.copy()
        return ordered_sum([w.x for w in self.workers]) / self.sys.m

    def worker_round(self, i, broadcast):
        return worker_step_apc(self.workers[i], broadcast, self.gamma)

    def master_round(self, broadcast, contributions):
        return master_step_apc(broadcast, contributions, self.eta)


class CimminoEngine(Engine):
    method = "cimmino"

    def __init__(self, sys, params):
        super().__init__(sys, params)
        self.nu = params["nu"]
        self.workers = [init_worker(Ai, bi, i) for i, (Ai, bi) in enumerate(sys.blocks)]

    def initial_broadcast(self, x0=None):
        if x0 is not None:
            return x0.copy()
        return ordered_sum([w.x for w in self.workers]) / self.sys.m

    def worker_round(self, i, broadcast):
        w = self.workers[i]
        return w.pinv_apply(w.bi - w.Ai @ broadcast)

    def master_round(self, broadcast, contributions):
        return broadcast + self.nu * ordered_sum(contributions)


class AdmmEngine(Engine):
    """Consensus ADMM with dual variables pinned to zero (the fast variant).

    Set params["unmodified"] to run the textbook iteration with live y_i;
    the workers then fold the dual update into the start of the next round.
    """

    method = "admm"

    def __init__(self, sys, params):
        super().__init__(sys, params)
        self.xi = params["xi"]
        self.unmodified = bool(params.get("unmodified", False))
        self.workers = [init_worker(Ai, bi, i) for i, (Ai, bi) in enumerate(sys.blocks)]
        xi = self.xi
        for w in self.workers:
            w.shift_factor = cholesky_spd(w.Ai @ w.Ai.T + xi * np.eye(w.Ai.shape[0]))
            w.Atb = w.Ai.T @ w.bi
            w.y = np.zeros(sys.n)
            w.x_prev = None

    def initial_broadcast(self, x0=None):
        if x0 is not None:
            return x0.copy()
        return ordered_sum([w.x for w in self.workers]) / self.sys.m

    def _shift_solve(self, w, u):
        # (A_i^T A_i + xi I)^{-1} u via the matrix inversion lemma
        return (u - w.Ai.T @ solve_spd(w.shift_factor, w.Ai @ u)) / self.xi

    def worker_round(self, i, broadcast):
        w = self.workers[i]
        if self.unmodified and w.x_prev is not None:
            w.y = w.y + self.xi * (w.x_prev - broadcast)
        u = w.Atb - w.y + self.xi * broadcast
        xi_new = self._shift_solve(w, u)
        w.x_prev = xi_new
        return xi_new

    def master_round(self, broadcast, contributions):
        return ordered_sum(contributions) / len(contributions)


class DgdEngine(Engine):
    method = "dgd"

    def __init__(self, sys, params):
        super().__init__(sys, params)
        self.alpha = params["alpha"]

    def initial_broadcast(self, x0=None):
        if x0 is not None:
            return x0.copy()
        return np.zeros(self.sys.n)

    def worker_round(self, i, broadcast):
        Ai, bi = self.sys.blocks[i]
        return Ai.T @ (Ai @ broadcast - bi)

    def master_round(self, broadcast, contributions):
        return broadcast - self.alpha * ordered_sum(contributions)


class DnagEngine(DgdEngine):
    method = "dnag"

    def __init__(self, sys, params):
        Engine.__init__(self, sys, params)
        self.alpha = params["alpha"]
        self.beta = params["beta"]
        self.y = None

    def initial_broadcast(self, x0=None):
        x0 = np.zeros(self.sys.n) if x0 is None else x0.copy()
        self.y = x0.copy()
        return x0

    def master_round(self, broadcast, contributions):
        g = ordered_sum(contributions)
        y_new = broadcast - self.alpha * g
        x_new = (1.0 + self.beta) * y_new - self.beta * self.y
        self.y = y_new
        return x_new


class DhbmEngine(DgdEngine):
    method = "dhbm"

    def __init__(self, sys, params):
        Engine.__init__(self, sys, params)
        self.alpha = params["alpha"]
        self.beta = params["beta"]
        self.z = None

    def initial_broadcast(self, x0=None):
        self.z = np.zeros(self.sys.n)
        return np.zeros(self.sys.n) if x0 is None else x0.copy()

    def master_round(self, broadcast, contributions):
        self.z = self.beta * self.z + ordered_sum(contributions)
        return broadcast - self.alpha * self.z


ENGINES = {
    "apc": ApcEngine,
    "consensus": ApcEngine,
    "cimmino": CimminoEngine,
    "admm": AdmmEngine,
    "dgd": DgdEngine,
    "dnag": DnagEngine,
    "dhbm": DhbmEngine,
}


def make_engine(sys, method, params):
    if method == "pdhbm":
        psys, kappa_check = build_preconditioned(sys)
        engine = DhbmEngine(psys, params)
        engine.method = "pdhbm"
        return engine
    try:
        cls = ENGINES[method]
    except KeyError:
        raise ValueError(f"unknown method '{method}'") from None
    engine = cls(sys, params)
    engine.method = method
    return engine


def error_metric(sys, estimate):
    """Relative error vs x* when known, else relative residual."""
    if sys.x_star is not None:
        scale = np.linalg.norm(sys.x_star)
        return float(np.linalg.norm(estimate - sys.x_star) / (scale if scale else 1.0))
    scale = np.linalg.norm(sys.b)
    return float(np.linalg.norm(sys.A @ estimate - sys.b) / (scale if scale else 1.0))


def residual_metric(sys, estimate):
    scale = np.linalg.norm(sys.b)
    return float(np.linalg.norm(sys.A @ estimate - sys.b) / (scale if scale else 1.0))


def run_engine(engine, budget=None, T_predicted=None):
    """Sequential barrier-synchronous driver shared by all methods."""
    budget = budget or Budget()
    sys = engine.sys
    x0 = None if budget.x0 is None else np.asarray(budget.x0, dtype=float)
    xbar = engine.initial_broadcast(x0)
    max_iters = budget.resolve_iters(T_predicted)

    errors = [error_metric(sys, engine.estimate(xbar))]
    residuals = [residual_metric(sys, engine.estimate(xbar))]
    iterates = [engine.estimate(xbar).copy()] if budget.record_iterates else None
    err0 = max(errors[0], 1e-300)
    converged = errors[0] <= budget.tol

    t = 0
    while not converged and t < max_iters:
        contributions = [engine.worker_round(i, xbar) for i in range(sys.m)]
        xbar = engine.master_round(xbar, contributions)
        est = engine.estimate(xbar)
        errors.append(error_metric(sys, est))
        residuals.append(residual_metric(sys, est))
        if iterates is not None:
            iterates.append(est.copy())
        t += 1
        if errors[-1] <= budget.tol:
            converged = True
        if not math.isfinite(errors[-1]) or errors[-1] > DIVERGENCE_FACTOR * err0:
            trace = _build_trace(engine, errors, residuals, T_predicted, False, iterates)
            raise Diverged(
                f"{engine.method} diverged at iteration {t} "
                f"(error {errors[-1]:.3e} vs initial {err0:.3e})", trace=trace)
    return _build_trace(engine, errors, residuals, T_predicted, converged, iterates)


def _build_trace(engine, errors, residuals, T_predicted, converged, iterates):
    meta = {"m": engine.sys.m, "n": engine.sys.n}
    if iterates is not None:
        meta["iterates"] = iterates
    return IterationTrace(method=engine.method, params=dict(engine.params),
                          errors=errors, residuals=residuals,
                          T_predicted=T_predicted if T_predicted is not None else math.nan,
                          converged=converged, meta=meta)


def _run(sys, method, params, budget):
    mp_T = params.get("T_predicted")
    engine = make_engine(sys, method, params)
    return run_engine(engine, budget, T_predicted=mp_T)


def run_apc(sys, params, budget=None):
    return _run(sys, "apc", params, budget)


def run_dgd(sys, params, budget=None):
    return _run(sys, "dgd", params, budget)


def run_dnag(sys, params, budget=None):
    return _run(sys, "dnag", params, budget)


def run_dhbm(sys, params, budget=None):
    return _run(sys, "dhbm", params, budget)


def run_admm(sys, params, budget=None):
    return _run(sys, "admm", params, budget)


def run_cimmino(sys, params, budget=None):
    return _run(sys, "cimmino", params, budget)


def build_preconditioned(sys):
    """Left-multiply each block by (A_i A_i^T)^{-1/2}, whitening its rows.

    Returns the transformed PartitionedSystem (C, d) plus kappa(C^T C)
    computed from C itself. C^T C equals m * X, so the transformed normal
    matrix inherits the consensus matrix's condition number.
    """
    from .ingest import PartitionedSystem

    blocks = []
    C_rows, d_rows = [], []
    for idx, (Ai, bi) in enumerate(sys.blocks):
        try:
            w, V = sym_eig_decomp(Ai @ Ai.T)
        except Exception as exc:
            raise RankDeficientBlock(idx, str(exc)) from exc
        if w[0] <= 1e-10 * max(w[-1], 0.0):
            raise RankDeficientBlock(idx)
        inv_sqrt = V @ ((1.0 / np.sqrt(w))[:, None] * V.T)
        Ci = inv_sqrt @ Ai
        di = inv_sqrt @ bi
        blocks.append((Ci, di))
        C_rows.append(Ci)
        d_rows.append(di)
    C = np.vstack(C_rows)
    d = np.concatenate(d_rows)
    psys = PartitionedSystem(A=C, b=d, m=sys.m, p=sys.p, blocks=blocks,
                             x_star=sys.x_star)
    from .linalg import sym_eigs
    lam = sym_eigs(0.5 * ((C.T @ C) + (C.T @ C).T))
    kappa = float(lam[-1] / lam[0]) if lam[0] > 0 else math.inf
    return psys, kappa


def run_precond_dhbm(sys, budget=None, params=None):
    """Whiten the blocks, tune heavy-ball on the spectrum of C^T C, run it."""
    psys, _ = build_preconditioned(sys)
    if params is None:
        from .linalg import sym_eigs
        CtC = psys.A.T @ psys.A
        lam = sym_eigs(0.5 * (CtC + CtC.T))
        mp = dhbm_params(lam)
        params = dict(mp.params)
        params["T_predicted"] = mp.T_predicted
    engine = DhbmEngine(psys, params)
    engine.method = "pdhbm"
    return run_engine(engine, budget, T_predicted=params.get("T_predicted"))
