"""Synthetic ground truth: random dictionaries, block-sparse signals, noise."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coding import code_matrix
from .core import (
    BlockDictError,
    BlockStructure,
    ZeroSignal,
    block_lists,
    normalize_columns,
    read_matrix,
    read_structure,
    structure_from_sizes,
    write_matrix,
    write_structure,
)
from .metrics import representation_error


class SizeMismatch(BlockDictError, ValueError):
    pass


class InfeasibleSparsity(BlockDictError, ValueError):
    pass


@dataclass
class GroundTruth:
    D_star: np.ndarray
    d_star: BlockStructure
    Theta_star: np.ndarray


def generate_dictionary(N: int, K: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return normalize_columns(rng.standard_normal((N, K)))


def generate_block_structure(K: int, sizes) -> BlockStructure:
    sizes = [int(v) for v in sizes]
    if sum(sizes) != K or any(v < 1 for v in sizes):
        raise SizeMismatch(f"block sizes {sizes} do not partition {K} atoms")
    return structure_from_sizes(sizes)


def generate_signals(D_star, d_star: BlockStructure, k: int, L: int, seed=None):
    """Signals that are exactly ``k``-block-sparse over ``d_star``.

    Each signal draws ``k`` distinct blocks uniformly and fills their
    coefficients i.i.d. uniform on [-1, 1]. Returns ``(X, Theta_star)``.
    """
    blocks = [idx for _, idx in block_lists(d_star)]
    if not 1 <= k <= len(blocks):
        raise InfeasibleSparsity(f"k={k} but only {len(blocks)} blocks")
    rng = np.random.default_rng(seed)
    D_star = np.asarray(D_star, dtype=float)
    Theta = np.zeros((D_star.shape[1], L))
    for i in range(L):
        for b in rng.choice(len(blocks), size=k, replace=False):
            atoms = blocks[b]
            Theta[atoms, i] = rng.uniform(-1.0, 1.0, size=len(atoms))
    return D_star @ Theta, Theta


def add_noise(X, snr_db: float, seed=None) -> np.ndarray:
    """Add white Gaussian noise scaled to an exact SNR (in dB) for the matrix.

    ``snr_db = inf`` returns ``X`` unchanged.
    """
    X = np.asarray(X, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return X.copy()
    nx = np.linalg.norm(X)
    if nx == 0:
        raise ZeroSignal("cannot set the SNR of a zero signal")
    rng = np.random.default_rng(seed)
    E = rng.standard_normal(X.shape)
    E *= nx / (np.linalg.norm(E) * 10.0 ** (snr_db / 20.0))
    return X + E


def perturbed_dictionary(D_star, d_star: BlockStructure, seed=None, mix: int = 2) -> np.ndarray:
    """Initial dictionary whose every block mixes ``mix`` random true blocks.

    Each block of the result is ``c_1 B_1 + ... + c_mix B_mix`` for distinct,
    randomly chosen true blocks ``B_i`` and Gaussian scalars ``c_i``, with
    columns normalised afterwards. Blocks of unequal size contribute their
    first atoms only (or are zero padded) to match the target block.
    """
    rng = np.random.default_rng(seed)
    D_star = np.asarray(D_star, dtype=float)
    blocks = [idx for _, idx in block_lists(d_star)]
    mix = min(mix, len(blocks))
    D0 = np.zeros_like(D_star)
    for idx in blocks:
        chosen = rng.choice(len(blocks), size=mix, replace=False)
        weights = rng.standard_normal(mix)
        for w, b in zip(weights, chosen):
            src = D_star[:, blocks[b]]
            n = min(len(idx), src.shape[1])
            D0[:, idx[:n]] += w * src[:, :n]
    norms = np.linalg.norm(D0, axis=0)
    dead = norms < 1e-12
    if dead.any():
        D0[:, dead] = rng.standard_normal((D0.shape[0], int(dead.sum())))
    return normalize_columns(D0)


def oracle_run(D_star, d_star: BlockStructure, X, k: int, workers: int = 1):
    """BOMP with the true dictionary and structure; returns ``(Theta, e)``."""
    Theta = code_matrix(D_star, d_star, X, k, workers=workers)
    return Theta, representation_error(X, D_star, Theta)


def save_ground_truth(out_dir, X, gt: GroundTruth, manifest: dict, fmt: str = "csv") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt == "csv" else "bin"
    write_matrix(out / f"X.{ext}", X, fmt)
    write_matrix(out / f"D_star.{ext}", gt.D_star, fmt)
    write_matrix(out / f"theta_star.{ext}", gt.Theta_star, fmt)
    write_structure(out / "d_star.csv", gt.d_star)
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_ground_truth(in_dir):
    src = Path(in_dir)
    ext = "csv" if (src / "X.csv").exists() else "bin"
    X = read_matrix(src / f"X.{ext}")
    gt = GroundTruth(read_matrix(src / f"D_star.{ext}"),
                     read_structure(src / "d_star.csv"),
                     read_matrix(src / f"theta_star.{ext}"))
    with open(src / "manifest.json") as f:
        manifest = json.load(f)
    return X, gt, manifest
