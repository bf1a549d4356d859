import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockdict.core import ZeroSignal, block_lists, block_sparsity_columns
from blockdict.synth import (
    GroundTruth,
    InfeasibleSparsity,
    SizeMismatch,
    add_noise,
    generate_block_structure,
    generate_dictionary,
    generate_signals,
    load_ground_truth,
    oracle_run,
    perturbed_dictionary,
    save_ground_truth,
)


def test_dictionary_shape_norms_and_determinism():
    D = generate_dictionary(30, 60, seed=5)
    assert D.shape == (30, 60)
    assert np.max(np.abs(np.linalg.norm(D, axis=0) - 1)) < 1e-12
    assert np.array_equal(D, generate_dictionary(30, 60, seed=5))
    assert not np.array_equal(D, generate_dictionary(30, 60, seed=6))
    assert abs(generate_dictionary(1, 1, seed=0)[0, 0]) == 1


def test_block_structures():
    d = generate_block_structure(60, [3] * 20)
    assert d.n_blocks == 20 and d.sizes() == [3] * 20
    d = generate_block_structure(60, [2] * 12 + [3] * 12)
    assert sorted(d.sizes()) == [2] * 12 + [3] * 12 and d.max_block_size == 3
    with pytest.raises(SizeMismatch):
        generate_block_structure(60, [3] * 19)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_signals_are_exactly_k_block_sparse(seed, k):
    d = generate_block_structure(30, [3] * 10)
    D = generate_dictionary(12, 30, seed=seed)
    X, Theta = generate_signals(D, d, k, 40, seed=seed)
    assert np.all(block_sparsity_columns(Theta, d) == k)
    np.testing.assert_array_equal(X, D @ Theta)
    assert np.all(np.abs(Theta) <= 1)
    # a used block has every coefficient drawn (non-zero almost surely)
    for _, idx in block_lists(d):
        used = np.any(Theta[idx] != 0, axis=0)
        assert np.all(Theta[np.ix_(idx, np.flatnonzero(used))] != 0)


def test_all_blocks_active_and_infeasible():
    d = generate_block_structure(6, [2, 2, 2])
    D = generate_dictionary(4, 6, seed=1)
    _, Theta = generate_signals(D, d, 3, 5, seed=2)
    assert np.all(Theta != 0)
    with pytest.raises(InfeasibleSparsity):
        generate_signals(D, d, 4, 5, seed=2)
    with pytest.raises(InfeasibleSparsity):
        generate_signals(D, d, 0, 5, seed=2)


def test_noise_hits_exact_snr():
    X = np.random.default_rng(0).standard_normal((30, 600))
    for snr in (0.0, 10.0, 20.0, -5.0):
        Y = add_noise(X, snr, seed=3)
        measured = 20 * np.log10(np.linalg.norm(X) / np.linalg.norm(Y - X))
        assert abs(measured - snr) < 1e-10
    clean = add_noise(X, float("inf"))
    np.testing.assert_array_equal(clean, X)
    assert clean is not X
    with pytest.raises(ZeroSignal):
        add_noise(np.zeros((3, 3)), 10.0)


def test_oracle_error_shrinks_with_budget():
    d = generate_block_structure(60, [3] * 20)
    D = generate_dictionary(30, 60, seed=11)
    X, _ = generate_signals(D, d, 2, 200, seed=12)
    Y = add_noise(X, 20.0, seed=13)
    errs = [oracle_run(D, d, Y, k)[1] for k in (1, 2, 3)]
    assert errs[0] >= errs[1] >= errs[2]
    Theta, e = oracle_run(D, d, Y, 2)
    assert np.all(block_sparsity_columns(Theta, d) <= 2) and e < 0.2


def test_perturbed_dictionary_mixes_true_blocks():
    d = generate_block_structure(60, [3] * 20)
    D = generate_dictionary(30, 60, seed=4)
    D0 = perturbed_dictionary(D, d, seed=5)
    assert D0.shape == D.shape
    assert np.max(np.abs(np.linalg.norm(D0, axis=0) - 1)) < 1e-12
    assert np.array_equal(D0, perturbed_dictionary(D, d, seed=5))
    blocks = [idx for _, idx in block_lists(d)]
    for idx in blocks:
        # each perturbed block lies in the span of two true blocks
        residuals = []
        for a in range(20):
            for b in range(a + 1, 20):
                span = D[:, blocks[a] + blocks[b]]
                coef = np.linalg.lstsq(span, D0[:, idx], rcond=None)[0]
                residuals.append(np.linalg.norm(D0[:, idx] - span @ coef))
        assert min(residuals) < 1e-10


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_ground_truth_roundtrip(tmp_path, fmt):
    d = generate_block_structure(12, [3] * 4)
    D = generate_dictionary(6, 12, seed=0)
    X, Theta = generate_signals(D, d, 2, 9, seed=1)
    save_ground_truth(tmp_path, X, GroundTruth(D, d, Theta), {"seed": 0, "snr_db": "inf"}, fmt)
    X2, gt, manifest = load_ground_truth(tmp_path)
    np.testing.assert_array_equal(X2, X)
    np.testing.assert_array_equal(gt.D_star, D)
    np.testing.assert_array_equal(gt.Theta_star, Theta)
    assert gt.d_star == d and manifest == {"seed": 0, "snr_db": "inf"}
