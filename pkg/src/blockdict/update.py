"""Dictionary update steps and the inner learning loops.

``bksvd_block_update`` replaces a whole block by the best rank-|block|
approximation of the residual restricted to the signals that use the block.
The K-SVD atom update is the same operation on a one-atom block, and MOD is
the closed-form least-squares dictionary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coding import CodingBudget, code_matrix
from .core import (
    BlockDictError,
    BlockStructure,
    DimensionMismatch,
    InvalidStructure,
    NORM_TOL,
    block_lists,
)
from .metrics import representation_error

DEFAULT_TOL = 1e-6
COMPLETION_SEED = 0x5EED


class EmptySupport(BlockDictError, ValueError):
    def __init__(self, label):
        super().__init__(f"block {label} is not used by any signal")
        self.label = label


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    e_coded: float      # error right after the coding step
    e: float            # error after the dictionary update


def _check_shapes(D, Theta, X):
    N, K = D.shape
    if Theta.shape[0] != K:
        raise DimensionMismatch(f"Theta has {Theta.shape[0]} rows, D has {K} atoms")
    if X.shape != (N, Theta.shape[1]):
        raise DimensionMismatch(f"X has shape {X.shape}, expected {(N, Theta.shape[1])}")


def _usage(Theta: np.ndarray, atoms: list[int]) -> np.ndarray:
    return np.flatnonzero(np.any(Theta[atoms] != 0, axis=0))


def block_residual(D, Theta, X, atoms, omega) -> np.ndarray:
    """Residual of signals ``omega`` with every block except ``atoms`` removed."""
    others = np.ones(D.shape[1], dtype=bool)
    others[atoms] = False
    return X[:, omega] - D[:, others] @ Theta[np.ix_(others, omega)]


def _fix_signs(U, Vt):
    rows = np.argmax(np.abs(U), axis=0)
    flip = U[rows, np.arange(U.shape[1])] < 0
    U[:, flip] *= -1
    Vt[flip] *= -1


def _complete_basis(U: np.ndarray, width: int, seed) -> np.ndarray:
    N, r = U.shape
    if width > N:
        raise InvalidStructure(f"block of {width} atoms cannot be orthonormal in dimension {N}")
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((N, width - r))
    for _ in range(2):
        M = M - U @ (U.T @ M)
        M, _ = np.linalg.qr(M)
    return np.hstack([U, M])


def _update_block(D, Theta, X, atoms: list[int], omega: np.ndarray) -> None:
    """In-place rank-|atoms| update of one block over the signals ``omega``."""
    R = block_residual(D, Theta, X, atoms, omega)
    U, sv, Vt = np.linalg.svd(R, full_matrices=False)
    r = len(atoms)
    U = U[:, :r].copy()
    Vt = Vt[:r].copy()
    sv = sv[:r]
    _fix_signs(U, Vt)
    coef = sv[:, None] * Vt
    if U.shape[1] < r:
        U = _complete_basis(U, r, (COMPLETION_SEED, atoms[0]))
        coef = np.vstack([coef, np.zeros((r - coef.shape[0], len(omega)))])
    D[:, atoms] = U
    Theta[np.ix_(atoms, omega)] = coef


def bksvd_block_update(D, d: BlockStructure, Theta, X, j):
    """Update block ``j`` of ``d`` and its coefficients; returns new ``(D, Theta)``.

    Raises :class:`EmptySupport` when no signal uses the block.
    """
    D = np.array(D, dtype=float)
    Theta = np.array(Theta, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_shapes(D, Theta, X)
    atoms = dict(block_lists(d)).get(j)
    if atoms is None:
        raise KeyError(f"no block labelled {j}")
    omega = _usage(Theta, atoms)
    if omega.size == 0:
        raise EmptySupport(j)
    _update_block(D, Theta, X, atoms, omega)
    return D, Theta


def ksvd_atom_update(D, Theta, X, j: int):
    """K-SVD update of atom ``j`` and its row of coefficients."""
    D = np.array(D, dtype=float)
    Theta = np.array(Theta, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_shapes(D, Theta, X)
    omega = _usage(Theta, [j])
    if omega.size == 0:
        raise EmptySupport(j)
    _update_block(D, Theta, X, [j], omega)
    return D, Theta


def bksvd_pass(D, d: BlockStructure, Theta, X):
    """Sequentially update every block in ascending label order.

    Returns ``(D, Theta, skipped)`` where ``skipped`` lists the labels of
    blocks no signal uses; those blocks are left as they are.
    """
    D = np.array(D, dtype=float)
    Theta = np.array(Theta, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_shapes(D, Theta, X)
    skipped = []
    for label, atoms in block_lists(d):
        omega = _usage(Theta, atoms)
        if omega.size == 0:
            skipped.append(label)
            continue
        _update_block(D, Theta, X, atoms, omega)
    return D, Theta, skipped


def ksvd_pass(D, Theta, X):
    """One K-SVD dictionary sweep: every atom updated on its own."""
    D = np.asarray(D, dtype=float)
    return bksvd_pass(D, BlockStructure.singletons(D.shape[1]), Theta, X)


def mod_update(X, Theta, D_prev=None) -> np.ndarray:
    """Method of optimal directions: ``X Theta' (Theta Theta')^-1``, normalised.

    The product is computed as the minimum-norm least-squares solution, so a
    singular ``Theta Theta'`` is fine. Atoms that come out zero (unused rows)
    keep their ``D_prev`` value, or without ``D_prev`` are replaced by the
    largest-norm signals not yet used for that purpose.
    """
    X = np.asarray(X, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    if X.shape[1] != Theta.shape[1]:
        raise DimensionMismatch("X and Theta must have the same number of columns")
    Dt, *_ = np.linalg.lstsq(Theta.T, X.T, rcond=None)
    D = Dt.T
    norms = np.linalg.norm(D, axis=0)
    dead = np.flatnonzero(norms < NORM_TOL)
    if dead.size:
        if D_prev is not None:
            D[:, dead] = np.asarray(D_prev, dtype=float)[:, dead]
        else:
            order = np.argsort(-np.linalg.norm(X, axis=0), kind="stable")
            for n, j in enumerate(dead):
                D[:, j] = X[:, order[n % len(order)]]
        norms = np.linalg.norm(D, axis=0)
    return D / norms


def bksvd_learn(X, D0, d: BlockStructure, budget, iters: int, tol: float = DEFAULT_TOL,
                update: str = "block", workers: int = 1,
                callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None):
    """Alternate BOMP coding and dictionary sweeps for a fixed block structure.

    ``update="block"`` is BK-SVD; ``update="atom"`` keeps the BOMP coding
    but sweeps atoms one at a time (the K-SVD update). Stops after ``iters``
    iterations or when the relative change of the error falls below ``tol``.

    Returns ``(D, Theta, trace)`` with one :class:`IterationRecord` per
    iteration.
    """
    if update not in ("block", "atom"):
        raise ValueError(f"unknown update rule {update!r}")
    X = np.asarray(X, dtype=float)
    D = np.array(D0, dtype=float)
    sweep = d if update == "block" else BlockStructure.singletons(D.shape[1])
    trace: list[IterationRecord] = []
    Theta = np.zeros((D.shape[1], X.shape[1]))
    for it in range(1, iters + 1):
        Theta = code_matrix(D, d, X, budget, workers=workers)
        e_coded = representation_error(X, D, Theta)
        D, Theta, _ = bksvd_pass(D, sweep, Theta, X)
        e = representation_error(X, D, Theta)
        trace.append(IterationRecord(it, e_coded, e))
        if callback is not None:
            callback(it, D, Theta)
        if it > 1 and converged(trace[-2].e, e, tol):
            break
    return D, Theta, trace


def ksvd_learn(X, D0, t: int, iters: int, tol: float = DEFAULT_TOL, workers: int = 1,
               callback=None):
    """K-SVD: OMP with ``t`` non-zeros, then sequential atom updates."""
    D0 = np.asarray(D0, dtype=float)
    budget = t if isinstance(t, CodingBudget) else CodingBudget(int(t))
    return bksvd_learn(X, D0, BlockStructure.singletons(D0.shape[1]), budget, iters,
                       tol=tol, workers=workers, callback=callback)


def converged(prev: float, cur: float, tol: float) -> bool:
    return abs(cur - prev) / max(prev, 1e-15) < tol
