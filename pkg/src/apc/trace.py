"""Iteration traces and empirical rate fitting."""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData


@dataclass
class IterationTrace:
    method: str
    params: dict
    errors: list                 # relative error (or residual) per round, t = 0..
    residuals: list | None = None
    T_predicted: float = math.nan
    converged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.errors) - 1

    @property
    def fitted_rate(self):
        return fit_rate(self)

    @property
    def T_empirical(self):
        r = self.fitted_rate
        if r <= 0.0:
            return 0.0
        if r >= 1.0:
            return math.inf
        return 1.0 / (-math.log(r))

    def to_csv(self, path=None):
        """Serialize as `iter,error[,residual]` with a mandatory header."""
        buf = io.StringIO()
        if self.residuals is not None:
            buf.write("iter,error,residual\n")
            for t, (e, r) in enumerate(zip(self.errors, self.residuals)):
                buf.write(f"{t},{e!r},{r!r}\n")
        else:
            buf.write("iter,error\n")
            for t, e in enumerate(self.errors):
                buf.write(f"{t},{e!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def fit_rate(trace, min_points=20, discard=10):
    """Least-squares tail rate: exp(slope of ln(error) vs t).

    The window is the last 50% of recorded iterations, after discarding the
    first `discard` transient rounds. Exact zeros at the tail (error hit
    the floor) are trimmed before fitting.
    """
    errs = np.asarray(trace.errors if isinstance(trace, IterationTrace) else trace,
                      dtype=float)
    if len(errs) < min_points:
        raise InsufficientData(f"need >= {min_points} iterations, have {len(errs)}")
    while len(errs) > 0 and errs[-1] == 0.0:
        errs = errs[:-1]
    start = max(discard, len(errs) // 2)
    window = errs[start:]
    if len(window) < 2:
        raise InsufficientData("tail window too short after trimming")
    t = np.arange(start, start + len(window), dtype=float)
    y = np.log(window)
    slope = np.polyfit(t, y, 1)[0]
    return float(np.exp(slope))
