"""Dataset loaders, synthetic generator, split, label noise, CLAB format."""

import struct
from dataclasses import replace

import numpy as np
import pytest

from currlab import nn
from currlab.data import (Dataset, FormatError, NoiseSpec, SyntheticSpec,
                          gen_synthetic, horizontal_flip, inject_label_noise,
                          load_cifar_bin, load_clab, load_idx, save_clab,
                          split)


def write_idx(tmp_path, images, labels):
    n, rows, cols = images.shape
    img_path = tmp_path / "images.idx"
    lab_path = tmp_path / "labels.idx"
    with open(img_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, n, rows, cols))
        fh.write(images.astype(">u1").tobytes())
    with open(lab_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x801, len(labels)))
        fh.write(labels.astype(">u1").tobytes())
    return img_path, lab_path


def test_load_idx_roundtrip(tmp_path, rng):
    images = rng.integers(0, 256, size=(7, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=7, dtype=np.uint8)
    img, lab = write_idx(tmp_path, images, labels)
    ds = load_idx(img, lab)
    assert len(ds) == 7  # N comes from the file header
    assert ds.inputs.shape == (7, 12)
    assert np.allclose(ds.inputs, images.reshape(7, 12) / 255.0)
    assert np.array_equal(ds.labels, labels)
    assert np.array_equal(ds.ids, np.arange(7))
    assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0


def test_load_idx_count_mismatch(tmp_path, rng):
    images = rng.integers(0, 256, size=(5, 2, 2), dtype=np.uint8)
    img, lab = write_idx(tmp_path, images, np.zeros(4, dtype=np.uint8))
    with pytest.raises(FormatError):
        load_idx(img, lab)


def test_load_idx_truncated(tmp_path, rng):
    images = rng.integers(0, 256, size=(5, 2, 2), dtype=np.uint8)
    img, lab = write_idx(tmp_path, images, np.zeros(5, dtype=np.uint8))
    data = img.read_bytes()
    img.write_bytes(data[:-3])
    with pytest.raises(FormatError):
        load_idx(img, lab)


def test_load_idx_bad_magic(tmp_path):
    img = tmp_path / "bad.idx"
    img.write_bytes(struct.pack(">IIII", 0xDEAD, 0, 1, 1))
    lab = tmp_path / "lab.idx"
    lab.write_bytes(struct.pack(">II", 0x801, 0))
    with pytest.raises(FormatError):
        load_idx(img, lab)


def test_load_cifar_bin(tmp_path, rng):
    recs = []
    labels = []
    for i in range(6):
        lab = int(rng.integers(0, 10))
        pix = rng.integers(0, 256, size=3072, dtype=np.uint8)
        recs.append(bytes([lab]) + pix.tobytes())
        labels.append(lab)
    p1 = tmp_path / "batch1.bin"
    p2 = tmp_path / "batch2.bin"
    p1.write_bytes(b"".join(recs[:4]))
    p2.write_bytes(recs[4] + recs[5])
    ds = load_cifar_bin([p1, p2])
    assert len(ds) == 6
    assert ds.inputs.shape == (6, 3072)
    assert np.array_equal(ds.labels, labels)
    # record boundaries respected across files
    assert np.allclose(ds.inputs[4] * 255.0,
                       np.frombuffer(recs[4][1:], dtype=np.uint8))


def test_load_cifar_bin_partial_record(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x00" * 5000)  # not a multiple of 3073
    with pytest.raises(FormatError):
        load_cifar_bin([p])


def test_gen_synthetic_shape_and_determinism():
    spec = SyntheticSpec(5, 20, 8, (0.5, 2.0), seed=1)
    a = gen_synthetic(spec)
    b = gen_synthetic(spec)
    assert len(a) == 100
    assert a.inputs.shape == (100, 8)
    assert np.array_equal(a.inputs, b.inputs)
    counts = np.bincount(a.labels, minlength=5)
    assert np.all(counts == 20)
    assert a.oracle_difficulty is not None
    # harder examples have smaller margins, so difficulty = -margin
    assert a.oracle_difficulty.min() >= -2.0 - 1e-12
    assert a.oracle_difficulty.max() <= -0.5 + 1e-12


def test_gen_synthetic_learnable_by_logistic():
    """Wide-margin clusters must be nearly separable by a linear model."""
    ds = gen_synthetic(SyntheticSpec(4, 100, 16, (5.0, 5.0), seed=3,
                                     noise_sigma=0.5))
    model = nn.init_model(nn.ArchSpec("mlp", 4, layer_widths=(16, 4)), 0)
    opt = nn.OptimizerState.for_model(model)
    r = np.random.default_rng(0)
    for t in range(1, 201):
        rows = r.choice(len(ds), 64, replace=False)
        _, _, g = nn.loss_and_grad(model, nn.Batch(
            ds.ids[rows], ds.inputs[rows], ds.labels[rows]))
        nn.sgd_step(model, opt, g, nn.cosine_lr(t, 200, 0.1))
    acc, _, _, _ = nn.evaluate(model, ds)
    assert acc > 0.95


def test_split_stratified_and_disjoint(tiny_dataset):
    train, val, test = split(tiny_dataset, (0.6, 0.2, 0.2), seed=4)
    assert len(train) + len(val) + len(test) == len(tiny_dataset)
    all_ids = np.concatenate([train.ids, val.ids, test.ids])
    assert len(np.unique(all_ids)) == len(tiny_dataset)
    # per-class proportions held to within one example per class per part
    for part, frac in ((train, 0.6), (val, 0.2), (test, 0.2)):
        counts = np.bincount(part.labels, minlength=4)
        for c in range(4):
            total = int(np.sum(tiny_dataset.labels == c))
            assert abs(counts[c] - frac * total) <= 1


def test_split_deterministic(tiny_dataset):
    a = split(tiny_dataset, (0.8, 0.1, 0.1), seed=4)
    b = split(tiny_dataset, (0.8, 0.1, 0.1), seed=4)
    c = split(tiny_dataset, (0.8, 0.1, 0.1), seed=5)
    for x, y in zip(a, b):
        assert np.array_equal(x.ids, y.ids)
    assert any(not np.array_equal(x.ids, y.ids) for x, y in zip(a, c))


def test_split_bad_fractions(tiny_dataset):
    with pytest.raises(ValueError):
        split(tiny_dataset, (0.5, 0.2, 0.2), seed=0)


def test_inject_label_noise_exact_count(tiny_dataset):
    noisy = inject_label_noise(tiny_dataset, NoiseSpec(0.2, seed=0))
    n_target = int(0.2 * len(tiny_dataset))
    assert noisy.noise_mask.sum() == n_target
    # untouched rows keep their labels
    same = ~noisy.noise_mask
    assert np.array_equal(noisy.labels[same], tiny_dataset.labels[same])
    assert np.array_equal(noisy.inputs, tiny_dataset.inputs)


def test_inject_label_noise_deterministic_and_uniform(tiny_dataset):
    a = inject_label_noise(tiny_dataset, NoiseSpec(0.4, seed=1))
    b = inject_label_noise(tiny_dataset, NoiseSpec(0.4, seed=1))
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.noise_mask, b.noise_mask)
    # resampled labels stay in range
    assert a.labels.min() >= 0 and a.labels.max() < a.num_classes


def test_inject_label_noise_zero_fraction(tiny_dataset):
    a = inject_label_noise(tiny_dataset, NoiseSpec(0.0, seed=1))
    assert a.noise_mask.sum() == 0
    assert np.array_equal(a.labels, tiny_dataset.labels)


def test_horizontal_flip():
    imgs = np.arange(8 * 2 * 3 * 4, dtype=np.float64).reshape(8, 2, 3, 4)
    flipped = horizontal_flip(imgs, np.random.default_rng(0))
    for i in range(8):
        ok_same = np.array_equal(flipped[i], imgs[i])
        ok_flip = np.array_equal(flipped[i], imgs[i][..., ::-1])
        assert ok_same or ok_flip
    # with 8 images and seed 0 some of each occur
    assert not np.array_equal(flipped, imgs)
    with pytest.raises(ValueError):
        horizontal_flip(imgs.reshape(8, 24), np.random.default_rng(0))


def test_clab_roundtrip(tmp_path, tiny_dataset):
    noisy = inject_label_noise(tiny_dataset, NoiseSpec(0.2, seed=2))
    path = tmp_path / "ds.clab"
    save_clab(noisy, path)
    back = load_clab(path)
    assert np.allclose(back.inputs, noisy.inputs, atol=1e-6)  # f32 storage
    assert np.array_equal(back.labels, noisy.labels)
    assert np.array_equal(back.noise_mask, noisy.noise_mask)
    assert np.allclose(back.oracle_difficulty, noisy.oracle_difficulty)
    assert back.num_classes == noisy.num_classes


def test_clab_rejects_garbage(tmp_path):
    p = tmp_path / "bad.clab"
    p.write_bytes(b"NOPE" + b"\x00" * 30)
    with pytest.raises(FormatError):
        load_clab(p)
    p.write_bytes(b"CLAB")  # truncated header
    with pytest.raises(FormatError):
        load_clab(p)


def test_dataset_validation(tiny_dataset):
    with pytest.raises(ValueError):
        Dataset(tiny_dataset.inputs, tiny_dataset.labels[:-1],
                tiny_dataset.ids, 4)
    bad_labels = tiny_dataset.labels.copy()
    bad_labels[0] = 99
    with pytest.raises(ValueError):
        Dataset(tiny_dataset.inputs, bad_labels, tiny_dataset.ids, 4)
    dup_ids = tiny_dataset.ids.copy()
    dup_ids[1] = dup_ids[0]
    with pytest.raises(ValueError):
        Dataset(tiny_dataset.inputs, tiny_dataset.labels, dup_ids, 4)


def test_subset_preserves_ids(tiny_dataset):
    sub = tiny_dataset.subset([5, 1, 9])
    assert np.array_equal(sub.ids, tiny_dataset.ids[[5, 1, 9]])
    assert np.array_equal(sub.inputs, tiny_dataset.inputs[[5, 1, 9]])
