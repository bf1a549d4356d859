"""Evaluation metrics: normalised error, subspace distance between blocks,
block recovery percentage, and the known-dictionary oracle."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BlockDictError, BlockStructure, ZeroSignal, block_lists

RECOVERY_THRESHOLD = 0.01


class ZeroBlock(BlockDictError, ValueError):
    pass


def representation_error(X, D, Theta) -> float:
    """``||X - D Theta||_F / ||X||_F``."""
    X = np.asarray(X, dtype=float)
    nx = np.linalg.norm(X)
    if nx == 0:
        raise ZeroSignal("signal matrix is zero")
    return float(np.linalg.norm(X - np.asarray(D) @ np.asarray(Theta)) / nx)


def orthonormal_basis(S, rtol: float = 1e-10) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    U, sv, _ = np.linalg.svd(S, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        raise ZeroBlock("block has rank 0")
    return U[:, sv > sv[0] * rtol]


def block_distance(S1, S2) -> float:
    """Normalised subspace distance between two blocks of atoms.

    ``sqrt(1 - ||Q1' Q2||_F^2 / max(s1, s2))`` with ``Q1``, ``Q2``
    orthonormal bases of the blocks and ``s1``, ``s2`` their atom counts.
    """
    S1 = np.atleast_2d(np.asarray(S1, dtype=float).T).T
    S2 = np.atleast_2d(np.asarray(S2, dtype=float).T).T
    Q1 = orthonormal_basis(S1)
    Q2 = orthonormal_basis(S2)
    overlap = np.linalg.norm(Q1.T @ Q2) ** 2
    return float(np.sqrt(max(0.0, 1.0 - overlap / max(S1.shape[1], S2.shape[1]))))


def distance_matrix(D, d: BlockStructure, D_true, d_true: BlockStructure) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    D_true = np.asarray(D_true, dtype=float)
    learned = []
    for _, idx in block_lists(d):
        try:
            learned.append((orthonormal_basis(D[:, idx]), len(idx)))
        except ZeroBlock:
            learned.append((None, len(idx)))
    truth = [(orthonormal_basis(D_true[:, idx]), len(idx)) for _, idx in block_lists(d_true)]
    out = np.ones((len(learned), len(truth)))
    for a, (Q1, s1) in enumerate(learned):
        if Q1 is None:
            continue
        for b, (Q2, s2) in enumerate(truth):
            overlap = np.linalg.norm(Q1.T @ Q2) ** 2
            out[a, b] = np.sqrt(max(0.0, 1.0 - overlap / max(s1, s2)))
    return out


def recovery_percentage(D, d: BlockStructure, D_true, d_true: BlockStructure,
                        matching: str = "greedy",
                        threshold: float = RECOVERY_THRESHOLD) -> float:
    """Percentage of true blocks matched by a learned block closer than ``threshold``.

    ``matching="greedy"`` repeatedly pairs the globally closest unmatched
    (learned, true) blocks; ``"optimal"`` minimises the summed distance.
    """
    dist = distance_matrix(D, d, D_true, d_true)
    n_true = dist.shape[1]
    if matching == "optimal":
        rows, cols = linear_sum_assignment(dist)
        matched = dist[rows, cols]
    elif matching == "greedy":
        work = dist.copy()
        matched = []
        for _ in range(min(work.shape)):
            a, b = np.unravel_index(np.argmin(work), work.shape)
            matched.append(work[a, b])
            work[a, :] = np.inf
            work[:, b] = np.inf
        matched = np.asarray(matched)
    else:
        raise ValueError(f"unknown matching {matching!r}")
    return 100.0 * np.count_nonzero(matched < threshold) / n_true
