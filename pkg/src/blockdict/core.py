"""Shared data model: signals, dictionaries, block structures, coefficients.

Matrices are plain ``numpy.ndarray`` objects with signals stored as columns.
The only dedicated type is :class:`BlockStructure`, which carries the atom to
block assignment together with the maximal block size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

NORM_TOL = 1e-12
UNIT_NORM_TOL = 1e-10
ZERO_TOL = 1e-12

BINARY_MAGIC = b"BDL1"


class BlockDictError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(BlockDictError, ValueError):
    pass


class ZeroColumn(BlockDictError, ValueError):
    def __init__(self, index: int):
        super().__init__(f"column {index} has (near) zero norm")
        self.index = index


class InvalidStructure(BlockDictError, ValueError):
    pass


class InfeasibleConfig(BlockDictError, ValueError):
    pass


class SingularLeastSquares(BlockDictError, ArithmeticError):
    pass


class ZeroSignal(BlockDictError, ValueError):
    pass


class FormatError(BlockDictError, ValueError):
    pass


@dataclass(frozen=True)
class BlockStructure:
    """Assignment of ``K`` atoms to block labels with maximal block size ``s``.

    Labels are arbitrary non-negative integers; they need not be contiguous.
    """

    labels: tuple[int, ...]
    max_block_size: int

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        object.__setattr__(self, "labels", labels)
        if self.max_block_size < 1:
            raise InvalidStructure("max_block_size must be >= 1")
        if any(v < 0 for v in labels):
            raise InvalidStructure("block labels must be non-negative")
        counts: dict[int, int] = {}
        for v in labels:
            counts[v] = counts.get(v, 0) + 1
        too_big = {v: c for v, c in counts.items() if c > self.max_block_size}
        if too_big:
            raise InvalidStructure(
                f"blocks exceed max size {self.max_block_size}: {too_big}")

    @classmethod
    def singletons(cls, n_atoms: int, max_block_size: int = 1) -> BlockStructure:
        return cls(tuple(range(n_atoms)), max_block_size)

    @property
    def n_atoms(self) -> int:
        return len(self.labels)

    @property
    def n_blocks(self) -> int:
        return len(set(self.labels))

    def blocks(self) -> list[tuple[int, list[int]]]:
        return block_lists(self)

    def sizes(self) -> list[int]:
        return [len(idx) for _, idx in block_lists(self)]

    def canonicalize(self) -> BlockStructure:
        """Renumber labels 0, 1, 2, ... in order of first appearance."""
        mapping: dict[int, int] = {}
        out = []
        for v in self.labels:
            if v not in mapping:
                mapping[v] = len(mapping)
            out.append(mapping[v])
        return BlockStructure(tuple(out), self.max_block_size)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SingularLeastSquares(f"{name} contains NaN or Inf")
    return m


def check_signals(X) -> np.ndarray:
    X = as_matrix(X, "signal matrix")
    if X.shape[0] < 1:
        raise DimensionMismatch("signal dimension must be >= 1")
    return X


def check_dictionary(D, tol: float = UNIT_NORM_TOL) -> np.ndarray:
    D = as_matrix(D, "dictionary")
    if D.shape[1] < 1:
        raise DimensionMismatch("dictionary needs at least one atom")
    norms = np.linalg.norm(D, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        raise InvalidStructure(f"dictionary atoms not unit-norm: {bad[:10].tolist()}")
    return D


def normalize_columns(M) -> np.ndarray:
    """Scale each column of ``M`` to unit l2-norm."""
    M = as_matrix(M)
    norms = np.linalg.norm(M, axis=0)
    small = np.flatnonzero(norms < NORM_TOL)
    if small.size:
        raise ZeroColumn(int(small[0]))
    return M / norms


def block_lists(d: BlockStructure) -> list[tuple[int, list[int]]]:
    """Return ``(label, sorted atom indices)`` for each label, labels ascending."""
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(d.labels):
        groups.setdefault(v, []).append(i)
    return [(v, groups[v]) for v in sorted(groups)]


def _block_norms(theta: np.ndarray, d: BlockStructure) -> np.ndarray:
    if theta.shape[0] != d.n_atoms:
        raise DimensionMismatch(
            f"coefficients have {theta.shape[0]} rows, structure has {d.n_atoms} atoms")
    return np.stack([np.sqrt(np.sum(theta[idx] ** 2, axis=0))
                     for _, idx in block_lists(d)])


def block_sparsity(theta, d: BlockStructure, tol: float = 0.0) -> int:
    """Number of blocks of ``d`` on which ``theta`` is non-zero.

    The default is an exact zero test on stored values; pass ``tol`` (e.g.
    ``ZERO_TOL``) for coefficients loaded from elsewhere.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != d.n_atoms:
        raise DimensionMismatch(f"expected {d.n_atoms} coefficients, got {theta.shape[0]}")
    return int(np.count_nonzero(_block_norms(theta[:, None], d)[:, 0] > tol))


def block_sparsity_columns(Theta, d: BlockStructure, tol: float = 0.0) -> np.ndarray:
    """Per-column block sparsity of a coefficient matrix."""
    Theta = np.asarray(Theta, dtype=float)
    if Theta.ndim == 1:
        Theta = Theta[:, None]
    return np.count_nonzero(_block_norms(Theta, d) > tol, axis=0)


# ---------------------------------------------------------------------------
# I/O

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as f:
        for row in M:
            f.write(",".join(_fmt(v) for v in row))
            f.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        return np.zeros((0, 0))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    return np.array(rows, dtype=float)


def write_matrix_bin(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype="<f8"))
    rows, cols = M.shape
    with open(path, "wb") as f:
        f.write(BINARY_MAGIC)
        f.write(struct.pack("<QQ", rows, cols))
        f.write(M.tobytes(order="F"))


def read_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != BINARY_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 20:
        raise FormatError(f"{path}: truncated header")
    rows, cols = struct.unpack("<QQ", blob[4:20])
    payload = blob[20:]
    if len(payload) != 8 * rows * cols:
        raise FormatError(f"{path}: expected {rows}x{cols} doubles, got {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def write_matrix(path, M, fmt: str | None = None) -> None:
    fmt = fmt or _guess_format(path)
    (write_matrix_bin if fmt == "bin" else write_matrix_csv)(path, M)


def read_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = fmt or _guess_format(path)
    if fmt == "csv":
        return read_matrix_csv(path)
    return read_matrix_bin(path)


def _guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".bin", ".bdl"):
        return "bin"
    with open(path, "rb") as f:
        head = f.read(4)
    return "bin" if head == BINARY_MAGIC else "csv"


def write_structure(path, d: BlockStructure) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(str(v) for v in d.labels))
        f.write(f"\ns={d.max_block_size}\n")


def read_structure(path) -> BlockStructure:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if len(lines) != 2 or not lines[1].startswith("s="):
        raise FormatError(f"{path}: expected labels line and 's=<int>' line")
    try:
        labels = [int(v) for v in lines[0].split(",")]
        s = int(lines[1][2:])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return BlockStructure(tuple(labels), s)


def structure_from_sizes(sizes: Iterable[int], max_block_size: int | None = None) -> BlockStructure:
    sizes = list(sizes)
    labels: list[int] = []
    for j, n in enumerate(sizes):
        labels.extend([j] * n)
    return BlockStructure(tuple(labels), max_block_size or max(sizes))

