"""Barrier-synchronous master/worker simulation over in-process channels.

One long-lived thread per worker, each owning its block state across rounds
so factorizations are amortized. Per round the master broadcasts the shared
vector to every worker, blocks until all m responses arrive, reduces them
in ascending block index, and advances. Because the reduction order is
fixed and the workers reuse the sequential engines' round functions, the
simulated trace is bit-identical to the sequential one.
"""

import json
import math
import queue
import threading
from dataclasses import dataclass

import numpy as np

from .solvers import Budget, make_engine, error_metric, residual_metric
from .trace import IterationTrace

SCALAR_WIDTH = 8  # bytes per float64 payload scalar


@dataclass
class RoundMessage:
    kind: str          # "broadcast" | "response" | "halt"
    round: int
    worker: int        # -1 for master-originated broadcasts/halts
    payload: np.ndarray | None = None

    def log_entry(self):
        return {"kind": self.kind, "round": self.round, "worker": self.worker,
                "payload_length": 0 if self.payload is None else int(len(self.payload))}


def _worker_loop(engine, i, inbox, outbox, failures):
    while True:
        msg = inbox.get()
        if msg.kind == "halt":
            return
        try:
            contribution = engine.worker_round(i, msg.payload)
        except Exception as exc:  # surfaced by the master after the barrier
            failures.append(exc)
            contribution = None
        outbox.put(RoundMessage("response", msg.round, i, contribution))


def run_simulated(sys, method, params, budget=None, log_messages=None):
    """Run a method through the message-passing harness.

    Returns an IterationTrace equal to the sequential engine's, with round
    and message accounting in trace.meta. `log_messages` may be a path for
    JSON-lines message logging.
    """
    budget = budget or Budget()
    engine = make_engine(sys, method, params)
    esys = engine.sys  # pdhbm swaps in the preconditioned system
    m = esys.m
    T_predicted = params.get("T_predicted")
    max_iters = budget.resolve_iters(T_predicted)

    inboxes = [queue.Queue() for _ in range(m)]
    master_inbox = queue.Queue()
    failures = []
    threads = [threading.Thread(target=_worker_loop,
                                args=(engine, i, inboxes[i], master_inbox, failures),
                                daemon=True)
               for i in range(m)]
    for th in threads:
        th.start()

    log_fh = open(log_messages, "w") if log_messages else None
    messages = 0

    def send(inbox, msg):
        nonlocal messages
        messages += 1
        if log_fh:
            log_fh.write(json.dumps(msg.log_entry()) + "\n")
        inbox.put(msg)

    x0 = None if budget.x0 is None else np.asarray(budget.x0, dtype=float)
    xbar = engine.initial_broadcast(x0)
    errors = [error_metric(esys, engine.estimate(xbar))]
    residuals = [residual_metric(esys, engine.estimate(xbar))]
    iterates = [engine.estimate(xbar).copy()] if budget.record_iterates else None
    err0 = max(errors[0], 1e-300)
    converged = errors[0] <= budget.tol
    rounds = 0
    diverged_exc = None

    try:
        t = 0
        while not converged and t < max_iters:
            for i in range(m):
                send(inboxes[i], RoundMessage("broadcast", t, -1, xbar))
            responses = [master_inbox.get() for _ in range(m)]
            if failures:
                raise failures[0]
            responses.sort(key=lambda msg: msg.worker)
            contributions = [msg.payload for msg in responses]
            if log_fh:
                for msg in responses:
                    log_fh.write(json.dumps(msg.log_entry()) + "\n")
            messages += m
            xbar = engine.master_round(xbar, contributions)
            est = engine.estimate(xbar)
            errors.append(error_metric(esys, est))
            residuals.append(residual_metric(esys, est))
            if iterates is not None:
                iterates.append(est.copy())
            rounds = t = t + 1
            if errors[-1] <= budget.tol:
                converged = True
            if not math.isfinite(errors[-1]) or errors[-1] > 1e12 * err0:
                from .errors import Diverged
                diverged_exc = Diverged(
                    f"{method} diverged at simulated round {t}", trace=None)
                break
    finally:
        for inbox in inboxes:
            send(inbox, RoundMessage("halt", rounds, -1))
        for th in threads:
            th.join(timeout=10.0)
        if log_fh:
            log_fh.close()

    meta = {"m": m, "n": esys.n, "rounds": rounds, "messages": rounds * 2 * m,
            "bytes": rounds * 2 * m * esys.n * SCALAR_WIDTH}
    if iterates is not None:
        meta["iterates"] = iterates
    trace = IterationTrace(method=method, params=dict(params), errors=errors,
                           residuals=residuals,
                           T_predicted=T_predicted if T_predicted is not None else math.nan,
                           converged=converged, meta=meta)
    if diverged_exc is not None:
        diverged_exc.trace = trace
        raise diverged_exc
    return trace


def message_stats(run):
    """Exact round/message/byte accounting for a simulated run."""
    meta = run.meta if isinstance(run, IterationTrace) else run
    rounds = meta["rounds"]
    m = meta["m"]
    n = meta["n"]
    return {"rounds": rounds, "messages": rounds * 2 * m,
            "bytes": rounds * 2 * m * n * SCALAR_WIDTH}
