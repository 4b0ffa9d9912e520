import gzip
import struct

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccgae import (
    Dataset,
    FormatError,
    binarize,
    load_idx_images,
    load_idx_labels,
    load_raw_dataset,
    minibatches,
    one_hot,
    save_raw_dataset,
    write_idx_images,
    write_idx_labels,
)
from ccgae.rng import RngStream


def idx_image_bytes(pixel_bytes, count, rows, cols):
    # independent byte-level encoder used as the round-trip oracle
    return struct.pack(">4I", 2051, count, rows, cols) + bytes(pixel_bytes)


def idx_label_bytes(labels):
    return struct.pack(">2I", 2049, len(labels)) + bytes(labels)


def test_idx_images_scaling_endpoints(tmp_path):
    path = tmp_path / "img"
    path.write_bytes(idx_image_bytes([0, 255, 128, 64], 1, 2, 2))
    out = load_idx_images(path)
    npt.assert_allclose(out, [[0.0, 1.0, 128 / 255, 64 / 255]])


def test_idx_images_reject_label_magic(tmp_path):
    path = tmp_path / "img"
    path.write_bytes(struct.pack(">4I", 2049, 1, 1, 1) + b"\x00")
    with pytest.raises(FormatError, match="wrong magic 2049"):
        load_idx_images(path)


def test_idx_images_reject_truncated_payload(tmp_path):
    path = tmp_path / "img"
    path.write_bytes(idx_image_bytes([1, 2, 3], 1, 2, 2))  # one byte short
    with pytest.raises(FormatError, match="truncated"):
        load_idx_images(path)


def test_idx_images_reject_dimension_overflow(tmp_path):
    path = tmp_path / "img"
    path.write_bytes(struct.pack(">4I", 2051, 2**31, 2**20, 2**20))
    with pytest.raises(FormatError, match="dimension overflow"):
        load_idx_images(path)


def test_idx_images_roundtrip_through_writer(tmp_path):
    raw = idx_image_bytes(range(8), 2, 2, 2)
    src = tmp_path / "in"
    src.write_bytes(raw)
    decoded = load_idx_images(src)
    out = tmp_path / "out"
    write_idx_images(out, decoded, 2, 2)
    assert out.read_bytes() == raw


def test_idx_images_accept_gzip(tmp_path):
    raw = idx_image_bytes(range(4), 1, 2, 2)
    path = tmp_path / "img.gz"
    path.write_bytes(gzip.compress(raw))
    npt.assert_array_equal(load_idx_images(path) * 255.0, [[0.0, 1.0, 2.0, 3.0]])


def test_idx_labels_roundtrip(tmp_path):
    raw = idx_label_bytes([0, 9, 3])
    src = tmp_path / "lab"
    src.write_bytes(raw)
    labels = load_idx_labels(src)
    npt.assert_array_equal(labels, [0, 9, 3])
    out = tmp_path / "out"
    write_idx_labels(out, labels)
    assert out.read_bytes() == raw


def test_idx_labels_reject_count_mismatch(tmp_path):
    path = tmp_path / "lab"
    path.write_bytes(struct.pack(">2I", 2049, 5) + bytes([1, 2, 3]))
    with pytest.raises(FormatError, match="truncated"):
        load_idx_labels(path)


def test_idx_labels_reject_wrong_magic(tmp_path):
    path = tmp_path / "lab"
    path.write_bytes(struct.pack(">2I", 2051, 0))
    with pytest.raises(FormatError, match="wrong magic 2051"):
        load_idx_labels(path)


def test_binarize_boundary_rule():
    npt.assert_array_equal(binarize([0.4, 0.5, 0.6], 0.5), [0.0, 1.0, 1.0])


def test_binarize_all_zero_unchanged():
    m = np.zeros((3, 4))
    npt.assert_array_equal(binarize(m), m)


def test_binarize_idempotent():
    rng = RngStream.from_seed(1)
    m = rng.random((10, 10))
    once = binarize(m)
    npt.assert_array_equal(binarize(once), once)


def test_one_hot_cases():
    npt.assert_array_equal(one_hot(2, 5), [0.0, 0.0, 1.0, 0.0, 0.0])
    npt.assert_array_equal(one_hot(0, 1), [1.0])


@given(st.integers(0, 30), st.integers(1, 31))
def test_one_hot_sums_to_one(label, n_classes):
    if label >= n_classes:
        with pytest.raises(ValueError):
            one_hot(label, n_classes)
    else:
        assert one_hot(label, n_classes).sum() == 1.0


def dataset_of(n, n_x=4, n_classes=3):
    rng = RngStream.from_seed(0)
    return Dataset(rng.random((n, n_x)), rng.gen.integers(n_classes, size=n), n_classes)


def test_minibatch_slice_sizes():
    slices = minibatches(dataset_of(10), 3, RngStream.from_seed(2))
    assert [len(s) for s in slices] == [3, 3, 3, 1]


def test_minibatch_single_slice_is_permutation():
    slices = minibatches(dataset_of(6), 10, RngStream.from_seed(2))
    assert len(slices) == 1
    npt.assert_array_equal(np.sort(slices[0]), np.arange(6))


def test_minibatch_fixed_seed_reproduces():
    a = minibatches(dataset_of(20), 7, RngStream.from_seed(5))
    b = minibatches(dataset_of(20), 7, RngStream.from_seed(5))
    for s, t in zip(a, b):
        npt.assert_array_equal(s, t)


@given(st.integers(1, 50), st.integers(1, 60))
def test_minibatches_cover_every_index_once(n, batch_size):
    slices = minibatches(dataset_of(n), batch_size, RngStream.from_seed(3))
    joined = np.concatenate(slices)
    npt.assert_array_equal(np.sort(joined), np.arange(n))


def test_minibatches_reject_empty_dataset():
    empty = Dataset(np.zeros((0, 4)), np.zeros(0, dtype=int), 2)
    with pytest.raises(ValueError, match="empty"):
        minibatches(empty, 5, RngStream.from_seed(0))


def test_dataset_validation():
    with pytest.raises(ValueError, match="labels must lie"):
        Dataset(np.zeros((2, 3)), np.array([0, 5]), n_classes=2)
    with pytest.raises(ValueError, match=r"in \[0, 1\]"):
        Dataset(np.full((1, 3), 1.5), np.array([0]), n_classes=1)
    with pytest.raises(ValueError, match="labels for"):
        Dataset(np.zeros((2, 3)), np.array([0]), n_classes=1)


def test_raw_dataset_roundtrip(tmp_path):
    rng = RngStream.from_seed(9)
    d = Dataset(rng.random((5, 7)), rng.gen.integers(4, size=5), n_classes=4)
    path = tmp_path / "d.ccraw"
    save_raw_dataset(path, d)
    loaded = load_raw_dataset(path)
    npt.assert_array_equal(loaded.examples, d.examples)
    npt.assert_array_equal(loaded.labels, d.labels)
    assert loaded.n_classes == 4


def test_raw_dataset_rejects_bad_magic_and_size(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"NOTRAW" + bytes(12))
    with pytest.raises(FormatError, match="wrong magic"):
        load_raw_dataset(bad)
    d = dataset_of(3)
    path = tmp_path / "d"
    save_raw_dataset(path, d)
    (tmp_path / "short").write_bytes(path.read_bytes()[:-2])
    with pytest.raises(FormatError, match="expected"):
        load_raw_dataset(tmp_path / "short")


def test_standard_digit_files_when_present():
    import os
    from pathlib import Path

    mnist_dir = os.environ.get("CCGAE_MNIST_DIR")
    if not mnist_dir:
        pytest.skip("CCGAE_MNIST_DIR not set")
    root = Path(mnist_dir)
    counts = {"train-images-idx3-ubyte": 60_000, "t10k-images-idx3-ubyte": 10_000}
    seen = 0
    for stem, expected in counts.items():
        for name in (stem + ".gz", stem):
            if (root / name).exists():
                images = binarize(load_idx_images(root / name), 0.5)
                assert images.shape == (expected, 784)
                assert set(np.unique(images)) <= {0.0, 1.0}
                seen += 1
                break
    if not seen:
        pytest.skip("no standard IDX files found")
