"""Dense real linear-algebra kernels.

Everything downstream (projections, spectral tuning, solver engines) is
built on the routines here: a Cholesky factorization for symmetric
positive-definite matrices, a cyclic-Jacobi symmetric eigensolver, monic
quadratic root finding, and a complex Gaussian elimination used for
eigenvalue certification.
"""

import numpy as np

from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    NumericallySingular,
)

_EPS = np.finfo(float).eps


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {M.shape}")
    return M


def check_symmetric(M, rtol=1e-12):
    """Raise NotSymmetric unless M equals its transpose within rtol."""
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"matrix is {M.shape[0]}x{M.shape[1]}, not square")
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return M
    if np.max(np.abs(M - M.T)) > rtol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    return M


class SpdFactor:
    """Lower-triangular Cholesky factor of a symmetric PD matrix."""

    def __init__(self, L):
        self.L = L
        self.dimension = L.shape[0]


def cholesky_spd(M):
    """Factor a symmetric positive-definite matrix as L @ L.T.

    Raises NotPositiveDefinite when a pivot falls below
    dimension * eps * ||M||_F.
    """
    M = check_symmetric(M)
    n = M.shape[0]
    floor = n * _EPS * np.linalg.norm(M)
    L = np.zeros_like(M)
    for j in range(n):
        d = M[j, j] - L[j, :j] @ L[j, :j]
        if d <= floor:
            raise NotPositiveDefinite(f"pivot {d:.3e} at column {j} (floor {floor:.3e})")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return SpdFactor(L)


def solve_spd(f, v):
    """Solve M @ w = v given the Cholesky factor of M.

    Accepts a vector or a matrix right-hand side (columns solved together).
    """
    v = np.asarray(v, dtype=float)
    n = f.dimension
    if v.shape[0] != n:
        raise DimensionMismatch(f"rhs has leading dimension {v.shape[0]}, factor is {n}")
    L = f.L
    y = np.zeros_like(v)
    for i in range(n):
        y[i] = (v[i] - L[i, :i] @ y[:i]) / L[i, i]
    w = np.zeros_like(v)
    for i in range(n - 1, -1, -1):
        w[i] = (y[i] - L[i + 1:, i] @ w[i + 1:]) / L[i, i]
    return w


def _round_robin_rounds(nn):
    """Pairings of 0..nn-1 (nn even) covering all pairs in nn-1 rounds."""
    players = list(range(nn))
    rounds = []
    for _ in range(nn - 1):
        pairs = [(players[i], players[nn - 1 - i]) for i in range(nn // 2)]
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def sym_eig_decomp(M, tol=1e-12, max_sweeps=100):
    """Full symmetric eigendecomposition by cyclic Jacobi sweeps.

    Rotations are applied in parallel round-robin order so each round is a
    handful of vectorized array updates. Returns (w, V) with eigenvalues w
    ascending and V[:, k] the eigenvector for w[k]. Terminates when the
    off-diagonal Frobenius norm drops below tol * ||M||_F.
    """
    M = check_symmetric(M)
    n = M.shape[0]
    if n == 1:
        return M.diagonal().copy(), np.eye(1)
    A = M.copy()
    V = np.eye(n)
    normF = np.linalg.norm(M)
    if normF == 0.0:
        return np.zeros(n), V

    nn = n if n % 2 == 0 else n + 1  # pad with a phantom index when odd
    rounds = _round_robin_rounds(nn)
    schedule = []
    for pairs in rounds:
        ps, qs = [], []
        for a, b in pairs:
            if a >= n or b >= n:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        schedule.append((np.array(ps), np.array(qs)))

    def offdiag():
        # Summing squares of the off-diagonal entries directly avoids the
        # cancellation that ||A||_F^2 - ||diag||_F^2 would suffer.
        off = A.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    for _ in range(max_sweeps):
        if offdiag() <= tol * normF:
            break
        for p, q in schedule:
            apq = A[p, q]
            active = np.abs(apq) > 0.0
            if not np.any(active):
                continue
            app = A[p, p]
            aqq = A[q, q]
            c = np.ones(len(p))
            s = np.zeros(len(p))
            idx = np.nonzero(active)[0]
            with np.errstate(over="ignore"):
                tau = (aqq[idx] - app[idx]) / (2.0 * apq[idx])
                t = np.sign(tau)
                t[t == 0.0] = 1.0
                t = t / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c[idx] = 1.0 / np.sqrt(1.0 + t * t)
            s[idx] = t * c[idx]
            # Disjoint pairs: the column and row updates do not interfere.
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Rp, Rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Rp - s[:, None] * Rq
            A[q, :] = s[:, None] * Rp + c[:, None] * Rq
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    else:
        raise RuntimeError("Jacobi sweeps did not converge")

    w = A.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eigs(M, tol=1e-12):
    """Eigenvalues of a symmetric matrix, ascending."""
    w, _ = sym_eig_decomp(M, tol=tol)
    return w


def quadratic_roots(b1, c0):
    """Roots of the monic quadratic z**2 + b1*z + c0.

    Returns a pair of complex numbers; real roots come back with zero
    imaginary part. Uses the numerically stable citardauq split for the
    real case so Vieta's identities hold to rounding.
    """
    disc = b1 * b1 - 4.0 * c0
    if disc < 0.0:
        re = -b1 / 2.0
        im = np.sqrt(-disc) / 2.0
        return complex(re, im), complex(re, -im)
    sq = np.sqrt(disc)
    if b1 >= 0.0:
        q = -(b1 + sq) / 2.0
    else:
        q = -(b1 - sq) / 2.0
    if q == 0.0:
        return complex(0.0), complex(-b1)
    return complex(q), complex(c0 / q)


def mat_vec(M, v):
    """Matrix-vector product M @ v."""
    M = _as_matrix(M)
    v = np.asarray(v, dtype=float)
    if M.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"{M.shape} @ {v.shape}")
    return M @ v


def transpose_mat_vec(M, v):
    """Matrix-vector product M.T @ v."""
    M = _as_matrix(M)
    v = np.asarray(v, dtype=float)
    if M.shape[0] != v.shape[0]:
        raise DimensionMismatch(f"{M.shape}.T @ {v.shape}")
    return M.T @ v


def solve_complex(B, r, pivot_floor=None):
    """Solve B @ z = r by Gaussian elimination with partial pivoting.

    B may be complex. Raises NumericallySingular when the selected pivot
    magnitude collapses below pivot_floor (default n * eps * max|B|).
    """
    B = np.array(B, dtype=complex)
    z = np.array(r, dtype=complex)
    n = B.shape[0]
    if B.shape != (n, n) or z.shape[0] != n:
        raise DimensionMismatch("incompatible shapes in solve_complex")
    if pivot_floor is None:
        pivot_floor = n * _EPS * max(np.max(np.abs(B)), 1e-300)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(B[k:, k])))
        if np.abs(B[piv, k]) < pivot_floor:
            raise NumericallySingular(f"pivot collapse at column {k}")
        if piv != k:
            B[[k, piv]] = B[[piv, k]]
            z[[k, piv]] = z[[piv, k]]
        factors = B[k + 1:, k] / B[k, k]
        B[k + 1:, k:] -= factors[:, None] * B[k, k:]
        z[k + 1:] -= factors * z[k]
    w = np.zeros(n, dtype=complex)
    for i in range(n - 1, -1, -1):
        w[i] = (z[i] - B[i, i + 1:] @ w[i + 1:]) / B[i, i]
    return w
