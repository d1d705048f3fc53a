"""System ingestion: Matrix Market I/O, synthetic Gaussian systems, and
even row partitioning across workers.

Randomness is pinned to numpy's PCG64 stream for uniforms with an explicit
Box-Muller transform for normals, so generated fixtures are reproducible
across platforms and numpy versions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    IndexOutOfBounds,
    IndivisibleRows,
    InvalidDimensions,
    MalformedEntry,
    RankDeficientBlock,
    UnsupportedFormat,
)
from .linalg import sym_eigs

_RANK_TOL = 1e-10


@dataclass
class PartitionedSystem:
    """The global system A x = b together with its m row blocks."""

    A: np.ndarray
    b: np.ndarray
    m: int
    p: int
    blocks: list  # [(A_i, b_i)] in stacking order
    x_star: np.ndarray | None = None

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def N(self):
        return self.A.shape[0]


def parse_matrix_market(stream):
    """Parse a Matrix Market file into a dense array.

    Supports coordinate real general, coordinate pattern general, and array
    real general. Pattern entries take value 1.0; unlisted coordinate
    entries are 0. Other qualifiers (complex, symmetric, ...) are rejected
    with an explicit message.
    """
    if isinstance(stream, (bytes, bytearray)):
        text = stream.decode("ascii")
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
        if isinstance(text, bytes):
            text = text.decode("ascii")

    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket matrix"):
        raise UnsupportedFormat("missing '%%MatrixMarket matrix' header")
    header = lines[0].split()
    if len(header) != 5:
        raise UnsupportedFormat(f"malformed header: {lines[0]!r}")
    _, _, fmt, fieldq, symq = (tok.lower() for tok in header)
    if fmt not in ("coordinate", "array"):
        raise UnsupportedFormat(f"unsupported format qualifier '{fmt}'")
    if fieldq not in ("real", "pattern"):
        raise UnsupportedFormat(f"unsupported field qualifier '{fieldq}'")
    if symq != "general":
        raise UnsupportedFormat(f"unsupported symmetry qualifier '{symq}'")
    if fmt == "array" and fieldq == "pattern":
        raise UnsupportedFormat("array format cannot be pattern")

    data = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not data:
        raise MalformedEntry("missing size line")

    size = data[0].split()
    if fmt == "coordinate":
        if len(size) != 3:
            raise MalformedEntry(f"coordinate size line needs 3 fields: {data[0]!r}")
        try:
            rows, cols, nnz = (int(tok) for tok in size)
        except ValueError as exc:
            raise MalformedEntry(f"bad size line: {data[0]!r}") from exc
        entries = data[1:]
        if len(entries) != nnz:
            raise MalformedEntry(f"expected {nnz} entries, found {len(entries)}")
        M = np.zeros((rows, cols))
        want = 2 if fieldq == "pattern" else 3
        for ln in entries:
            toks = ln.split()
            if len(toks) != want:
                raise MalformedEntry(f"expected {want} fields: {ln!r}")
            try:
                i, j = int(toks[0]), int(toks[1])
                v = 1.0 if fieldq == "pattern" else float(toks[2])
            except ValueError as exc:
                raise MalformedEntry(f"bad entry: {ln!r}") from exc
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise IndexOutOfBounds(f"entry ({i},{j}) outside {rows}x{cols}")
            M[i - 1, j - 1] += v
        return M

    if len(size) != 2:
        raise MalformedEntry(f"array size line needs 2 fields: {data[0]!r}")
    try:
        rows, cols = (int(tok) for tok in size)
    except ValueError as exc:
        raise MalformedEntry(f"bad size line: {data[0]!r}") from exc
    vals = data[1:]
    if len(vals) != rows * cols:
        raise MalformedEntry(f"expected {rows * cols} values, found {len(vals)}")
    M = np.zeros((rows, cols))
    k = 0
    for j in range(cols):  # array format is column-major
        for i in range(rows):
            try:
                M[i, j] = float(vals[k])
            except ValueError as exc:
                raise MalformedEntry(f"bad value: {vals[k]!r}") from exc
            k += 1
    return M


def write_matrix_market(M, path=None):
    """Serialize a dense matrix as coordinate real general.

    Values are written with shortest round-trip formatting, so parsing the
    output reproduces the matrix bit-exactly.
    """
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    ii, jj = np.nonzero(M)
    out = ["%%MatrixMarket matrix coordinate real general",
           f"{rows} {cols} {len(ii)}"]
    for i, j in zip(ii, jj):
        out.append(f"{i + 1} {j + 1} {float(M[i, j])!r}")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _box_muller(rng, k):
    """k standard normals from PCG64 uniforms via Box-Muller."""
    half = (k + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:k]


def synth_gaussian(n, N, mean, seed):
    """Synthesize A (N x n, iid Gaussian(mean, 1)), planted x*, and b = A x*."""
    if not (N >= n >= 1):
        raise InvalidDimensions(f"need N >= n >= 1, got N={N}, n={n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    A = mean + _box_muller(rng, N * n).reshape(N, n)
    x_star = _box_muller(rng, n)
    b = A @ x_star
    return A, b, x_star


def permute_rows(A, b, seed):
    """Seeded row permutation of (A, b), for pre-partition shuffling."""
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(A.shape[0])
    return A[perm], b[perm]


def partition_rows(A, b, m, x_star=None):
    """Split (A, b) into m contiguous blocks of p = N/m consecutive rows.

    Each block is validated to have full row rank via the smallest
    eigenvalue of A_i A_i^T.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    N = A.shape[0]
    if b.shape[0] != N:
        raise InvalidDimensions(f"A has {N} rows but b has {b.shape[0]}")
    if m < 1 or N % m != 0:
        raise IndivisibleRows(f"m={m} does not divide N={N}")
    p = N // m
    blocks = []
    for i in range(m):
        Ai = A[i * p:(i + 1) * p]
        bi = b[i * p:(i + 1) * p]
        G = Ai @ Ai.T
        w = sym_eigs(G)
        if w[0] <= _RANK_TOL * max(w[-1], 0.0):
            raise RankDeficientBlock(i)
        blocks.append((Ai, bi))
    return PartitionedSystem(A=A, b=b, m=m, p=p, blocks=blocks,
                             x_star=None if x_star is None else np.asarray(x_star, dtype=float))
