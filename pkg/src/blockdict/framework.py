"""Block-sparsifying dictionary learning: alternate block-structure recovery
(SAC) with one BK-SVD dictionary sweep, starting from a K-SVD dictionary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coding import CodingBudget, code_matrix
from .core import (
    BlockStructure,
    InfeasibleConfig,
    check_signals,
    normalize_columns,
)
from .metrics import recovery_percentage, representation_error
from .sac import block_sparsity_objective, sac_cluster
from .update import DEFAULT_TOL, bksvd_pass, converged, ksvd_learn


@dataclass(frozen=True)
class LearnConfig:
    n_atoms: int
    k: int
    s: int
    s_low: int | None = None
    outer_iters: int = 250
    ksvd_init_iters: int = 250
    init: str = "ksvd"              # or "signals"
    seed: int = 0
    tol: float = DEFAULT_TOL
    residual_tol: float = 1e-12
    workers: int = 1

    @property
    def omp_atoms(self) -> int:
        return self.k * (self.s_low or self.s)

    def validate(self, n_dim: int | None = None) -> None:
        if self.k < 1 or self.s < 1 or self.n_atoms < 1:
            raise InfeasibleConfig("k, s and n_atoms must be >= 1")
        if self.s_low is not None and not 1 <= self.s_low <= self.s:
            raise InfeasibleConfig(f"s_low={self.s_low} must lie in [1, s={self.s}]")
        if self.k * self.s > self.n_atoms:
            raise InfeasibleConfig(
                f"k*s = {self.k * self.s} exceeds the number of atoms {self.n_atoms}")
        if n_dim is not None and self.s > n_dim:
            raise InfeasibleConfig(f"blocks of {self.s} atoms cannot be orthonormal in dimension {n_dim}")
        if self.init not in ("ksvd", "signals"):
            raise InfeasibleConfig(f"unknown init {self.init!r}")
        if self.outer_iters < 1 or self.ksvd_init_iters < 0:
            raise InfeasibleConfig("iteration counts must be positive")


@dataclass(frozen=True)
class FrameworkRecord:
    iteration: int
    e: float
    num_blocks: int
    objective_b: float          # mean active blocks per signal
    p: float | None = None      # block recovery, only with ground truth


@dataclass
class LearnResult:
    D: np.ndarray
    d: BlockStructure
    Theta: np.ndarray
    trace: list[FrameworkRecord] = field(default_factory=list)


def signal_dictionary(X, n_atoms: int, seed=None) -> np.ndarray:
    """``n_atoms`` distinct random non-zero signals, normalised.

    When there are fewer usable signals than atoms the rest are random
    Gaussian atoms.
    """
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    usable = np.flatnonzero(np.linalg.norm(X, axis=0) > 1e-12)
    take = rng.permutation(usable)[:n_atoms]
    D = X[:, take]
    if D.shape[1] < n_atoms:
        D = np.hstack([D, rng.standard_normal((X.shape[0], n_atoms - D.shape[1]))])
    return normalize_columns(D)


def initial_dictionary(X, cfg: LearnConfig) -> np.ndarray:
    D = signal_dictionary(X, cfg.n_atoms, seed=cfg.seed)
    if cfg.init == "ksvd" and cfg.ksvd_init_iters > 0:
        D, _, _ = ksvd_learn(X, D, CodingBudget(cfg.omp_atoms, cfg.residual_tol),
                             cfg.ksvd_init_iters, tol=cfg.tol, workers=cfg.workers)
    return D


def learn_block_dictionary(X, cfg: LearnConfig, D0=None, truth=None,
                           callback: Callable[[int, np.ndarray, BlockStructure, np.ndarray], None] | None = None
                           ) -> LearnResult:
    """Learn a dictionary, its block structure and block-sparse codes.

    Every outer iteration OMP-codes the signals with ``k * s_low`` atoms,
    clusters the atoms with SAC (from singletons, max size ``s``), recodes
    with BOMP over the new structure, and runs a single BK-SVD sweep.

    ``truth=(D_star, d_star)`` adds the block recovery percentage to each
    trace record.
    """
    X = check_signals(X)
    cfg.validate(X.shape[0])
    D = initial_dictionary(X, cfg) if D0 is None else np.array(D0, dtype=float)
    if D.shape != (X.shape[0], cfg.n_atoms):
        raise InfeasibleConfig(f"initial dictionary has shape {D.shape}")

    omp_budget = CodingBudget(cfg.omp_atoms, cfg.residual_tol)
    block_budget = CodingBudget(cfg.k, cfg.residual_tol)
    L = X.shape[1]
    trace: list[FrameworkRecord] = []
    d = BlockStructure.singletons(cfg.n_atoms, cfg.s)
    Theta = np.zeros((cfg.n_atoms, L))
    for it in range(1, cfg.outer_iters + 1):
        Theta_omp = code_matrix(D, None, X, omp_budget, workers=cfg.workers)
        d = sac_cluster(Theta_omp, cfg.s)
        Theta = code_matrix(D, d, X, block_budget, workers=cfg.workers)
        D, Theta, _ = bksvd_pass(D, d, Theta, X)

        e = representation_error(X, D, Theta)
        b = block_sparsity_objective(Theta, d) / L
        p = None
        if truth is not None:
            p = recovery_percentage(D, d, truth[0], truth[1])
        trace.append(FrameworkRecord(it, e, d.n_blocks, b, p))
        if callback is not None:
            callback(it, D, d, Theta)
        if it > 1 and converged(trace[-2].e, e, cfg.tol):
            break
    return LearnResult(D, d.canonicalize(), Theta, trace)
