"""Sparse agglomerative clustering of dictionary atoms.

Atoms whose coefficient rows share non-zero patterns are merged into blocks,
greedily maximising the overlap of the signal sets they serve, subject to a
maximal block size.
"""

from __future__ import annotations

import numpy as np

from .core import BlockStructure, DimensionMismatch, block_lists


def _pattern(Theta, tol: float) -> np.ndarray:
    Theta = np.asarray(Theta, dtype=float)
    if Theta.ndim != 2:
        raise DimensionMismatch("coefficient matrix must be 2-D")
    return np.abs(Theta) > tol


def _block_usage(Theta, d: BlockStructure, tol: float) -> list[tuple[int, np.ndarray]]:
    P = _pattern(Theta, tol)
    if P.shape[0] != d.n_atoms:
        raise DimensionMismatch(
            f"coefficients have {P.shape[0]} rows, structure has {d.n_atoms} atoms")
    return [(label, P[idx].any(axis=0)) for label, idx in block_lists(d)]


def support_sets(Theta, d: BlockStructure, tol: float = 0.0) -> dict[int, list[int]]:
    """Map each block label to the sorted signal indices that use the block."""
    return {label: np.flatnonzero(used).tolist()
            for label, used in _block_usage(Theta, d, tol)}


def block_sparsity_objective(Theta, d: BlockStructure, tol: float = 0.0) -> int:
    """Total number of active blocks summed over all signals."""
    return int(sum(np.count_nonzero(used) for _, used in _block_usage(Theta, d, tol)))


def _best_pair(C: np.ndarray, sizes: np.ndarray, alive: np.ndarray, s: int):
    ok = alive[:, None] & alive[None, :] & (sizes[:, None] + sizes[None, :] <= s)
    ok = np.triu(ok, k=1)
    if not ok.any():
        return None
    scores = np.where(ok, C, -1)
    flat = int(np.argmax(scores))            # row-major: lexicographic tie-break
    return divmod(flat, C.shape[0])


def sac_cluster(Theta, s: int, tol: float = 0.0, incremental: bool = True,
                history: list | None = None) -> BlockStructure:
    """Cluster the atoms (rows of ``Theta``) into blocks of at most ``s`` atoms.

    Starts from singleton blocks labelled by atom index and repeatedly merges
    the feasible pair with the largest support intersection, even when that
    intersection is empty. The smaller label survives a merge.

    With ``incremental=False`` the intersection table is rebuilt from scratch
    after every merge; both modes return identical structures. If
    ``history`` is a list, ``(j1, j2, overlap)`` is appended for each merge.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    P = _pattern(Theta, tol)
    K = P.shape[0]
    labels = np.arange(K)
    if s == 1 or K < 2:
        return BlockStructure(tuple(labels.tolist()), s)

    Pi = P.astype(np.int64)
    usage = P.copy()
    C = Pi @ Pi.T
    sizes = np.ones(K, dtype=np.int64)
    alive = np.ones(K, dtype=bool)

    while True:
        pair = _best_pair(C, sizes, alive, s)
        if pair is None:
            break
        j1, j2 = pair
        if history is not None:
            history.append((j1, j2, int(C[j1, j2])))
        labels[labels == j2] = j1
        sizes[j1] += sizes[j2]
        sizes[j2] = 0
        alive[j2] = False
        usage[j1] |= usage[j2]
        usage[j2] = False
        if incremental:
            row = usage.astype(np.int64) @ usage[j1].astype(np.int64)
            C[j1, :] = row
            C[:, j1] = row
            C[j2, :] = 0
            C[:, j2] = 0
        else:
            U = usage.astype(np.int64)
            C = U @ U.T
    return BlockStructure(tuple(labels.tolist()), s)
