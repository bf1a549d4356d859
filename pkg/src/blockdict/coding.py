"""Greedy pursuit: OMP for plain sparsity and BOMP for block sparsity.

Both run on the same engine. OMP is BOMP over singleton groups, so the two
agree bit for bit when every block has one atom. All per-signal arithmetic is
done with stacked (batched) linear algebra, one small problem per signal, so a
column's result does not depend on which other columns share the batch.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    BlockStructure,
    DimensionMismatch,
    SingularLeastSquares,
    as_matrix,
    block_lists,
)

TIE_TOL = 1e-12
DEFAULT_RESIDUAL_TOL = 1e-12
CHUNK = 256
GRAM_RCOND = 1e-6           # cond(A) below ~1e3 uses the normal equations


@dataclass(frozen=True)
class CodingBudget:
    """Selection budget: atoms for OMP, blocks for BOMP."""

    max_atoms_or_blocks: int
    residual_tol: float = DEFAULT_RESIDUAL_TOL

    def __post_init__(self):
        if self.max_atoms_or_blocks < 1:
            raise ValueError("max_atoms_or_blocks must be >= 1")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be >= 0")


def _budget(b) -> CodingBudget:
    return b if isinstance(b, CodingBudget) else CodingBudget(int(b))


def _groups(d: BlockStructure | None, n_atoms: int) -> list[list[int]]:
    if d is None:
        return [[j] for j in range(n_atoms)]
    if d.n_atoms != n_atoms:
        raise DimensionMismatch(f"structure has {d.n_atoms} atoms, dictionary has {n_atoms}")
    return [idx for _, idx in block_lists(d)]


def _group_bases(D: np.ndarray, groups: list[list[int]]):
    """Orthonormal basis of every group, stacked side by side.

    Singletons are the atom scaled to unit norm. Larger blocks use the left
    singular vectors above a relative rank cutoff, so rank-deficient blocks
    are not credited with directions they do not span.
    """
    cols = []
    offsets = []
    pos = 0
    for idx in groups:
        offsets.append(pos)
        A = D[:, idx]
        if len(idx) == 1:
            nrm = np.linalg.norm(A)
            q = A / nrm if nrm > 0 else np.zeros_like(A)
        else:
            U, sv, _ = np.linalg.svd(A, full_matrices=False)
            keep = sv > sv[0] * max(A.shape) * np.finfo(float).eps if sv[0] > 0 else sv > 0
            q = U[:, keep]
            if q.shape[1] == 0:
                q = np.zeros((D.shape[0], 1))
        cols.append(q)
        pos += q.shape[1]
    return np.hstack(cols), np.asarray(offsets)


def _least_squares(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Stacked least squares ``argmin ||A_i c - x_i||``.

    Well-conditioned systems go through the normal equations; the rest get the
    minimum-norm solution from the pseudo-inverse. Each item's path depends
    only on that item.
    """
    AT = np.transpose(A, (0, 2, 1))
    G = np.matmul(AT, A)
    w = np.linalg.eigvalsh(G)
    ok = w[:, 0] > w[:, -1] * GRAM_RCOND
    coef = np.empty((A.shape[0], A.shape[2], 1))
    if ok.any():
        coef[ok] = np.linalg.solve(G[ok], np.matmul(AT[ok], x[ok]))
    if not ok.all():
        bad = ~ok
        coef[bad] = np.matmul(np.linalg.pinv(A[bad]), x[bad])
    return coef


def _pursuit(D: np.ndarray, groups: list[list[int]], X: np.ndarray,
             n_select: int, residual_tol: float) -> np.ndarray:
    N, L = X.shape
    K = D.shape[1]
    Theta = np.zeros((K, L))
    if L == 0:
        return Theta
    Q, offsets = _group_bases(D, groups)
    QT = np.ascontiguousarray(Q.T)
    DT = np.ascontiguousarray(D.T)
    G = len(groups)

    R = np.array(X.T, order="C")[:, :, None]            # (L, N, 1) residuals, owned
    taken = np.zeros((L, G), dtype=bool)
    support: list[list[int]] = [[] for _ in range(L)]
    active = np.linalg.norm(R[:, :, 0], axis=1) > residual_tol

    for _ in range(min(n_select, G)):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        proj = np.matmul(QT, R[idx])[:, :, 0]            # (n, M)
        energy = np.add.reduceat(proj * proj, offsets, axis=1)
        score = np.sqrt(energy)
        score[taken[idx]] = -np.inf
        best = score.max(axis=1)
        pick = np.argmax(score >= (best - TIE_TOL)[:, None], axis=1)
        taken[idx, pick] = True
        for i, g in zip(idx, pick):
            support[i].extend(groups[g])

        sizes = np.array([len(support[i]) for i in idx])
        for m in np.unique(sizes):
            sub = idx[sizes == m]
            S = np.array([support[i] for i in sub])           # (n, m)
            A = np.transpose(DT[S], (0, 2, 1))                # (n, N, m)
            x = np.ascontiguousarray(X.T[sub])[:, :, None]   # (n, N, 1)
            coef = _least_squares(A, x)                       # (n, m, 1)
            R[sub] = x - np.matmul(A, coef)
            Theta[S.T, sub] = coef[:, :, 0].T
        active[idx] = np.linalg.norm(R[idx, :, 0], axis=1) > residual_tol
    return Theta


def _check_finite_columns(X: np.ndarray) -> None:
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=0))
    if bad.size:
        raise SingularLeastSquares(f"signal column {int(bad[0])} contains NaN or Inf")


def _prepare(D, x):
    D = np.asarray(D, dtype=float)
    if not np.all(np.isfinite(D)):
        raise SingularLeastSquares("dictionary contains NaN or Inf")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        x = x.reshape(-1)
    if x.shape[0] != D.shape[0]:
        raise DimensionMismatch(f"signal has {x.shape[0]} entries, dictionary rows {D.shape[0]}")
    _check_finite_columns(x[:, None])
    return D, x


def omp(D, x, budget) -> np.ndarray:
    """Orthogonal matching pursuit of one signal with at most ``t`` atoms.

    ``budget`` is a :class:`CodingBudget` or a plain integer ``t``.
    """
    budget = _budget(budget)
    D, x = _prepare(D, x)
    groups = _groups(None, D.shape[1])
    return _pursuit(D, groups, x[:, None], budget.max_atoms_or_blocks,
                    budget.residual_tol)[:, 0]


def bomp(D, d: BlockStructure, x, budget) -> np.ndarray:
    """Block OMP: select up to ``k`` blocks of ``d`` by projected residual energy."""
    budget = _budget(budget)
    D, x = _prepare(D, x)
    groups = _groups(d, D.shape[1])
    return _pursuit(D, groups, x[:, None], budget.max_atoms_or_blocks,
                    budget.residual_tol)[:, 0]


def code_matrix(D, d: BlockStructure | None, X, budget, workers: int = 1) -> np.ndarray:
    """Code every column of ``X``: OMP when ``d`` is None, BOMP otherwise.

    Columns are processed in fixed-size chunks; with ``workers > 1`` chunks
    run on a thread pool. The result does not depend on ``workers``.
    """
    budget = _budget(budget)
    D = np.asarray(D, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != D.shape[0]:
        raise DimensionMismatch(f"signals have {X.shape[0]} rows, dictionary {D.shape[0]}")
    as_matrix(D, "dictionary")
    _check_finite_columns(X)
    groups = _groups(d, D.shape[1])
    L = X.shape[1]
    if L == 0:
        return np.zeros((D.shape[1], 0))

    def run(lo: int) -> np.ndarray:
        return _pursuit(D, groups, X[:, lo:lo + CHUNK],
                        budget.max_atoms_or_blocks, budget.residual_tol)

    starts = range(0, L, CHUNK)
    if workers > 1 and L > CHUNK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(lo) for lo in starts]
    return np.hstack(parts)
