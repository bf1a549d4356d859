import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blockdict.core import (
    BlockStructure,
    DimensionMismatch,
    FormatError,
    InvalidStructure,
    ZeroColumn,
    block_lists,
    block_sparsity,
    block_sparsity_columns,
    check_dictionary,
    normalize_columns,
    read_matrix,
    read_matrix_bin,
    read_structure,
    structure_from_sizes,
    write_matrix,
    write_structure,
)

from .conftest import random_structure


def test_normalize_scales_to_unit():
    out = normalize_columns(np.array([[3.0], [4.0]]))
    np.testing.assert_allclose(out[:, 0], [0.6, 0.8], rtol=0, atol=1e-15)


def test_normalize_identity_unchanged():
    np.testing.assert_array_equal(normalize_columns(np.eye(4)), np.eye(4))


def test_normalize_random_gaussian(rng):
    D = normalize_columns(rng.standard_normal((30, 60)))
    assert np.max(np.abs(np.linalg.norm(D, axis=0) - 1)) < 1e-12


def test_normalize_rejects_zero_column():
    M = np.ones((3, 4))
    M[:, 2] = 0
    with pytest.raises(ZeroColumn) as info:
        normalize_columns(M)
    assert info.value.index == 2


def test_check_dictionary_tolerance():
    D = np.eye(3)
    check_dictionary(D)
    with pytest.raises(InvalidStructure):
        check_dictionary(D * (1 + 1e-8))


def test_block_lists_interleaved():
    d = BlockStructure((1, 2, 1, 2), 2)
    assert block_lists(d) == [(1, [0, 2]), (2, [1, 3])]


def test_block_lists_singletons_and_single_block():
    assert block_lists(BlockStructure((1, 2, 3, 4), 1)) == [(1, [0]), (2, [1]), (3, [2]), (4, [3])]
    assert block_lists(BlockStructure((7, 7, 7), 3)) == [(7, [0, 1, 2])]


def test_structure_rejects_oversized_block():
    with pytest.raises(InvalidStructure):
        BlockStructure((0, 0, 0), 2)
    with pytest.raises(InvalidStructure):
        BlockStructure((0, -1), 2)


def test_canonicalize_first_appearance():
    d = BlockStructure((9, 4, 9, 0), 2).canonicalize()
    assert d.labels == (0, 1, 0, 2)


def test_block_sparsity_examples():
    d = BlockStructure((1, 2, 1, 2), 2)
    assert block_sparsity(np.zeros(4), d) == 0
    assert block_sparsity(np.array([1.0, 0, -2.0, 0]), d) == 1
    assert block_sparsity(np.ones(4), d) == 2
    with pytest.raises(DimensionMismatch):
        block_sparsity(np.ones(5), d)


def test_block_sparsity_tolerance_variant():
    d = BlockStructure((0, 1), 1)
    theta = np.array([1e-14, 1.0])
    assert block_sparsity(theta, d) == 2
    assert block_sparsity(theta, d, tol=1e-12) == 1


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 4))
def test_block_norm_at_most_plain_norm(seed, K, s):
    rng = np.random.default_rng(seed)
    d = random_structure(rng, K, s)
    theta = rng.standard_normal(K) * (rng.random(K) < 0.5)
    assert block_sparsity(theta, d) <= np.count_nonzero(theta)
    single = BlockStructure.singletons(K)
    assert block_sparsity(theta, single) == np.count_nonzero(theta)


@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 5))
def test_block_lists_is_partition(seed, K, s):
    d = random_structure(np.random.default_rng(seed), K, s)
    atoms = sorted(a for _, idx in block_lists(d) for a in idx)
    assert atoms == list(range(K))
    assert all(len(idx) <= s for _, idx in block_lists(d))


@given(arrays(np.float64, (5, 4), elements=st.floats(-1e3, 1e3)).filter(
    lambda M: np.all(np.linalg.norm(M, axis=0) > 1e-6)))
def test_normalize_idempotent(M):
    once = normalize_columns(M)
    np.testing.assert_allclose(normalize_columns(once), once, rtol=0, atol=1e-15)


def test_block_sparsity_columns_matches_scalar(rng):
    d = random_structure(rng, 10, 3)
    Theta = rng.standard_normal((10, 20)) * (rng.random((10, 20)) < 0.3)
    expect = [block_sparsity(Theta[:, i], d) for i in range(20)]
    assert block_sparsity_columns(Theta, d).tolist() == expect


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_matrix_roundtrip_is_exact(tmp_path, rng, fmt):
    M = rng.standard_normal((7, 5)) * 10.0 ** rng.integers(-30, 30, (7, 5))
    path = tmp_path / f"m.{fmt}"
    write_matrix(path, M, fmt)
    np.testing.assert_array_equal(read_matrix(path), M)


def test_binary_layout(tmp_path):
    M = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    path = tmp_path / "m.bin"
    write_matrix(path, M, "bin")
    blob = path.read_bytes()
    assert blob[:4] == b"BDL1"
    assert int.from_bytes(blob[4:12], "little") == 2
    assert int.from_bytes(blob[12:20], "little") == 3
    col_major = np.frombuffer(blob[20:], dtype="<f8")
    np.testing.assert_array_equal(col_major, [1, 4, 2, 5, 3, 6])


def test_binary_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(FormatError):
        read_matrix_bin(path)
    path.write_bytes(b"BDL1" + (2).to_bytes(8, "little") + (2).to_bytes(8, "little") + bytes(8))
    with pytest.raises(FormatError):
        read_matrix_bin(path)


def test_format_detected_from_content(tmp_path):
    path = tmp_path / "noext"
    write_matrix(path, np.eye(2), "bin")
    np.testing.assert_array_equal(read_matrix(path), np.eye(2))


def test_csv_ragged_and_garbage(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(FormatError):
        read_matrix(path)
    path.write_text("1,abc\n")
    with pytest.raises(FormatError):
        read_matrix(path)


def test_csv_uses_full_precision(tmp_path):
    path = tmp_path / "p.csv"
    write_matrix(path, np.array([[0.1, 1 / 3]]), "csv")
    assert path.read_text().strip() == "0.10000000000000001,0.33333333333333331"


def test_structure_roundtrip(tmp_path):
    d = BlockStructure((3, 0, 3, 5, 0), 2)
    path = tmp_path / "d.csv"
    write_structure(path, d)
    assert path.read_text() == "3,0,3,5,0\ns=2\n"
    assert read_structure(path) == d


def test_structure_file_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,1,2\n")
    with pytest.raises(FormatError):
        read_structure(path)
    path.write_text("0,x\ns=2\n")
    with pytest.raises(FormatError):
        read_structure(path)


def test_structure_from_sizes():
    d = structure_from_sizes([2, 1, 3])
    assert d.labels == (0, 0, 1, 2, 2, 2)
    assert d.max_block_size == 3
