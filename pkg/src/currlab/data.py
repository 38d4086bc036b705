"""Datasets: binary loaders, synthetic generator, splitting, label noise.

A Dataset is an immutable bundle of arrays: inputs (N, ...), integer
labels (N,), and stable example ids (N,). Synthetic datasets carry an
oracle difficulty vector; noisy datasets carry a corruption mask.
"""

import struct
from dataclasses import dataclass, field, replace

import numpy as np

CLAB_MAGIC = b"CLAB"
CLAB_VERSION = 1


@dataclass(frozen=True)
class Example:
    id: int
    input: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    ids: np.ndarray
    num_classes: int
    name: str = "dataset"
    noise_mask: np.ndarray = None
    oracle_difficulty: np.ndarray = None

    def __post_init__(self):
        n = len(self.inputs)
        if len(self.labels) != n or len(self.ids) != n:
            raise ValueError("inputs/labels/ids length mismatch")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")
        if len(np.unique(self.ids)) != n:
            raise ValueError("example ids must be unique")
        for extra in (self.noise_mask, self.oracle_difficulty):
            if extra is not None and len(extra) != n:
                raise ValueError("per-example metadata length mismatch")

    def __len__(self):
        return len(self.inputs)

    def example(self, i):
        return Example(int(self.ids[i]), self.inputs[i], int(self.labels[i]))

    def subset(self, rows, name=None):
        """New Dataset from integer row positions (ids are preserved)."""
        rows = np.asarray(rows)
        return replace(
            self,
            inputs=self.inputs[rows],
            labels=self.labels[rows],
            ids=self.ids[rows],
            name=name or self.name,
            noise_mask=None if self.noise_mask is None else self.noise_mask[rows],
            oracle_difficulty=(None if self.oracle_difficulty is None
                               else self.oracle_difficulty[rows]),
        )


class FormatError(ValueError):
    """Malformed binary dataset file."""


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}")
    return buf


def load_idx(images_path, labels_path, name="idx"):
    """Load an MNIST-style IDX image/label pair, pixels scaled to [0,1]."""
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, "image header"))
        if magic != 0x00000803:
            raise FormatError(f"bad image magic 0x{magic:08x}")
        pixels = np.frombuffer(_read_exact(fh, n * rows * cols, "pixel data"), dtype=np.uint8)
    with open(labels_path, "rb") as fh:
        magic, nl = struct.unpack(">II", _read_exact(fh, 8, "label header"))
        if magic != 0x00000801:
            raise FormatError(f"bad label magic 0x{magic:08x}")
        labels = np.frombuffer(_read_exact(fh, nl, "label data"), dtype=np.uint8)
    if n != nl:
        raise FormatError(f"image count {n} != label count {nl}")
    if n == 0:
        raise FormatError("empty dataset")
    inputs = pixels.astype(np.float64).reshape(n, rows * cols) / 255.0
    return Dataset(inputs, labels.astype(np.int64), np.arange(n), 10, name=name)


def load_cifar_bin(paths, name="cifar"):
    """Load CIFAR-10 binary batches (3073-byte records, label + 3x32x32)."""
    if isinstance(paths, (str, bytes)) or not hasattr(paths, "__iter__"):
        paths = [paths]
    chunks, labels = [], []
    for path in paths:
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) == 0 or len(raw) % 3073:
            raise FormatError(f"{path}: size {len(raw)} not a multiple of 3073")
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3073)
        if rec[:, 0].max() >= 10:
            raise FormatError(f"{path}: label byte >= 10")
        labels.append(rec[:, 0].astype(np.int64))
        chunks.append(rec[:, 1:].astype(np.float64) / 255.0)
    inputs = np.concatenate(chunks)
    labels = np.concatenate(labels)
    return Dataset(inputs, labels, np.arange(len(labels)), 10, name=name)


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int
    examples_per_class: int
    input_dim: int
    margin_range: tuple
    seed: int
    noise_sigma: float = 1.0


def gen_synthetic(spec):
    """Gaussian clusters along random unit mean directions.

    Example = margin * class_direction + N(0, sigma^2 I); the margin is
    drawn from margin_range, and oracle_difficulty = -margin so larger
    means harder (smaller margin, heavier cluster overlap).
    """
    if spec.input_dim < 2:
        raise ValueError("input_dim must be >= 2")
    if spec.num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    lo, hi = spec.margin_range
    if lo <= 0 or hi < lo:
        raise ValueError("margin_range must be 0 < low <= high")
    rng = np.random.default_rng(spec.seed)
    dirs = rng.standard_normal((spec.num_classes, spec.input_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    n = spec.num_classes * spec.examples_per_class
    labels = np.repeat(np.arange(spec.num_classes), spec.examples_per_class)
    margins = rng.uniform(lo, hi, size=n)
    noise = rng.standard_normal((n, spec.input_dim)) * spec.noise_sigma
    inputs = margins[:, None] * dirs[labels] + noise
    return Dataset(inputs, labels, np.arange(n), spec.num_classes,
                   name=f"synthetic-{spec.seed}", oracle_difficulty=-margins)


def split(dataset, fractions, seed):
    """Stratified (train, val, test) split; disjoint cover of ids.

    Per-class rows are shuffled with `seed` and apportioned by largest
    remainder, so class proportions are preserved within +-1 example.
    """
    fractions = tuple(float(f) for f in fractions)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be nonnegative")
    rng = np.random.default_rng(seed)
    parts = [[], [], []]
    for c in range(dataset.num_classes):
        rows = np.flatnonzero(dataset.labels == c)
        rng.shuffle(rows)
        m = len(rows)
        counts = [int(np.floor(f * m)) for f in fractions]
        rem = m - sum(counts)
        # largest fractional remainder first; ties to earlier split
        order = sorted(range(3), key=lambda i: -(fractions[i] * m - counts[i]))
        for i in order[:rem]:
            counts[i] += 1
        off = 0
        for i in range(3):
            parts[i].append(rows[off:off + counts[i]])
            off += counts[i]
    names = ("train", "val", "test")
    out = []
    for i in range(3):
        rows = np.sort(np.concatenate(parts[i]))
        if fractions[i] > 0 and len(rows) == 0:
            raise ValueError(f"{names[i]} split is empty despite fraction > 0")
        out.append(dataset.subset(rows, name=f"{dataset.name}/{names[i]}"))
    return tuple(out)


@dataclass(frozen=True)
class NoiseSpec:
    fraction: float
    seed: int
    mode: str = "uniform_resample"


def inject_label_noise(dataset, spec):
    """Corrupt floor(p*N) labels by uniform resampling over all classes.

    The returned dataset's noise_mask marks exactly the selected rows;
    a resampled label may coincide with the original, so analyses should
    use the mask rather than p for the effective noise rate.
    """
    if not 0.0 <= spec.fraction <= 1.0:
        raise ValueError("noise fraction must be in [0, 1]")
    if spec.mode != "uniform_resample":
        raise ValueError(f"unknown noise mode {spec.mode!r}")
    n = len(dataset)
    k = int(np.floor(spec.fraction * n))
    rng = np.random.default_rng(spec.seed)
    picked = rng.choice(n, size=k, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[picked] = True
    labels = dataset.labels.copy()
    labels[picked] = rng.integers(0, dataset.num_classes, size=k)
    return replace(dataset, labels=labels, noise_mask=mask,
                   name=f"{dataset.name}+noise{spec.fraction:g}")


def horizontal_flip(inputs, rng):
    """Optional per-batch augmentation for (B,C,H,W) images: flip half."""
    if inputs.ndim != 4:
        raise ValueError("horizontal flip needs (B, C, H, W) inputs")
    out = inputs.copy()
    flip = rng.random(len(out)) < 0.5
    out[flip] = out[flip][..., ::-1]
    return out


def save_clab(dataset, path):
    """Write the flat binary format: CLAB header, f32 inputs, u16 labels,
    then optional mask/difficulty blocks behind one-byte presence flags.
    Little-endian throughout; inputs must be flat (N, dim)."""
    inputs = dataset.inputs.reshape(len(dataset), -1)
    with open(path, "wb") as fh:
        fh.write(CLAB_MAGIC)
        fh.write(struct.pack("<IQQI", CLAB_VERSION, len(dataset),
                             inputs.shape[1], dataset.num_classes))
        fh.write(inputs.astype("<f4").tobytes())
        fh.write(dataset.labels.astype("<u2").tobytes())
        fh.write(struct.pack("<B", int(dataset.noise_mask is not None)))
        if dataset.noise_mask is not None:
            fh.write(dataset.noise_mask.astype("<u1").tobytes())
        fh.write(struct.pack("<B", int(dataset.oracle_difficulty is not None)))
        if dataset.oracle_difficulty is not None:
            fh.write(dataset.oracle_difficulty.astype("<f8").tobytes())


def load_clab(path, name=None):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != CLAB_MAGIC:
            raise FormatError("bad CLAB magic")
        version, n, dim, c = struct.unpack("<IQQI", _read_exact(fh, 24, "header"))
        if version != CLAB_VERSION:
            raise FormatError(f"unsupported CLAB version {version}")
        inputs = np.frombuffer(_read_exact(fh, 4 * n * dim, "inputs"),
                               dtype="<f4").astype(np.float64).reshape(n, dim)
        labels = np.frombuffer(_read_exact(fh, 2 * n, "labels"),
                               dtype="<u2").astype(np.int64)
        mask = None
        if struct.unpack("<B", _read_exact(fh, 1, "mask flag"))[0]:
            mask = np.frombuffer(_read_exact(fh, n, "mask"), dtype="<u1").astype(bool)
        diff = None
        if struct.unpack("<B", _read_exact(fh, 1, "difficulty flag"))[0]:
            diff = np.frombuffer(_read_exact(fh, 8 * n, "difficulty"),
                                 dtype="<f8").copy()
    return Dataset(inputs, labels, np.arange(n), int(c),
                   name=name or "clab", noise_mask=mask, oracle_difficulty=diff)
