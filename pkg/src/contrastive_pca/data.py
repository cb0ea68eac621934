"""Dataset generators and loaders for labeled (positive/negative) samples.

Three sources mirror the experiments this package is built around: a
30-dimensional artificial set with bimodal structure hidden under
high-variance noise, a noisy-digits set built by superimposing handwritten
digits on natural-image patches, and a self-contained synthetic stand-in
for the latter (procedural glyphs on smoothed-noise backgrounds). Generic
ingestion is a labeled CSV; datasets round-trip through a JSON-lines file
with a metadata header line.
"""

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

DATASET_FORMAT = "cpca-dataset/1"
UNTAGGED = -1


class LabeledSample(NamedTuple):
    x: np.ndarray
    delta: int
    tag: int = UNTAGGED

    @property
    def label(self):
        return "positive" if self.delta == 1 else "negative"


@dataclass
class LabeledDataset:
    """Ordered labeled samples: x is (n, d), delta is (n,) in {0, 1}.

    ``tags`` carries an optional per-sample auxiliary label (cluster id,
    digit, condition); UNTAGGED marks samples without one. Tags are used
    only by evaluation, never by fitting.
    """

    x: np.ndarray
    delta: np.ndarray
    tags: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.delta = np.asarray(self.delta, dtype=np.int8)
        if self.x.ndim != 2:
            raise ValueError(f"x must be (n, d), got shape {self.x.shape}")
        if self.delta.shape != (len(self.x),):
            raise ValueError("delta length must match number of samples")
        if not np.all((self.delta == 0) | (self.delta == 1)):
            raise ValueError("delta entries must be 0 or 1")
        if not np.all(np.isfinite(self.x)):
            bad = int(np.flatnonzero(~np.isfinite(self.x).all(axis=1))[0])
            raise ValueError(f"sample {bad} contains non-finite entries")
        if self.tags is not None:
            self.tags = np.asarray(self.tags, dtype=int)
            if self.tags.shape != (len(self.x),):
                raise ValueError("tags length must match number of samples")

    def __len__(self):
        return len(self.x)

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def n_pos(self):
        return int(np.sum(self.delta == 1))

    @property
    def n_neg(self):
        return int(np.sum(self.delta == 0))

    def samples(self):
        """Iterate LabeledSample views in stream order."""
        tags = self.tags if self.tags is not None else np.full(len(self.x), UNTAGGED)
        for i in range(len(self.x)):
            yield LabeledSample(x=self.x[i], delta=int(self.delta[i]), tag=int(tags[i]))

    def positives_matrix(self):
        """Positive samples as columns, (d, n_pos)."""
        return self.x[self.delta == 1].T

    def positive_tags(self):
        if self.tags is None:
            raise ValueError("dataset has no tags")
        return self.tags[self.delta == 1]

    def masked_matrix(self):
        """(d, n) data matrix with negative samples zeroed out."""
        return (self.x * self.delta[:, None]).T

    def shuffled(self, rng):
        perm = rng.permutation(len(self.x))
        return LabeledDataset(
            x=self.x[perm],
            delta=self.delta[perm],
            tags=None if self.tags is None else self.tags[perm],
            meta=self.meta,
        )

    def save_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            header = {
                "format": DATASET_FORMAT,
                "d": int(self.d),
                "n_pos": self.n_pos,
                "n_neg": self.n_neg,
                "meta": self.meta,
            }
            fh.write(json.dumps(header) + "\n")
            tags = self.tags if self.tags is not None else np.full(len(self.x), UNTAGGED)
            for i in range(len(self.x)):
                tag = int(tags[i])
                row = {
                    "x": [float(v) for v in self.x[i]],
                    "label": int(self.delta[i]),
                    "tag": None if tag == UNTAGGED else tag,
                }
                fh.write(json.dumps(row) + "\n")

    @classmethod
    def load_jsonl(cls, path):
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != DATASET_FORMAT:
                raise ValueError(f"not a dataset file: format={header.get('format')!r}")
            xs, deltas, tags = [], [], []
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                xs.append(row["x"])
                deltas.append(int(row["label"]))
                tag = row.get("tag")
                tags.append(UNTAGGED if tag is None else int(tag))
        return cls(
            x=np.array(xs, dtype=float),
            delta=np.array(deltas),
            tags=np.array(tags),
            meta=header.get("meta", {}),
        )


def normalized(dataset, mode):
    """Apply flag-controlled preprocessing; 'rms' divides by the global RMS value."""
    if mode in (None, "none"):
        return dataset
    if mode != "rms":
        raise ValueError(f"unknown normalization mode {mode!r}")
    scale = float(np.sqrt(np.mean(dataset.x**2)))
    if scale <= 0.0:
        raise ValueError("cannot RMS-normalize an all-zero dataset")
    meta = dict(dataset.meta)
    meta["normalize"] = {"mode": "rms", "scale": scale}
    return LabeledDataset(
        x=dataset.x / scale, delta=dataset.delta, tags=dataset.tags, meta=meta
    )


def _balanced_signs(n, rng):
    s = np.ones(n)
    s[: n // 2] = -1.0
    return s[rng.permutation(n)]


def gen_artificial(
    seed,
    n_pos=200,
    n_neg=200,
    d=30,
    noise_std=3.0,
    signal_dims=10,
    cluster_mean=3.0,
    cluster_std=1.0,
    noise_factors=3,
    factor_std=6.0,
):
    """Artificial benchmark: bimodal structure hidden under louder noise.

    Both classes share a Gaussian noise model: standard deviation
    ``noise_std`` per coordinate on the leading d - signal_dims
    dimensions plus ``noise_factors`` strong shared factors confined to
    those dimensions (std ``factor_std`` each), and a quiet floor of
    ``cluster_std`` on the trailing ``signal_dims`` dimensions. Positive
    samples add cluster offsets of magnitude ``cluster_mean`` along two
    fixed orthogonal patterns in the signal dimensions; tags record
    membership in the first, which is the split evaluation scores
    against. The factors pin the top principal directions of either class
    to pure noise, so plain PCA misses the clusters while the contrastive
    methods recover them.
    """
    if not 1 <= signal_dims < d:
        raise ValueError(f"signal_dims must be in [1, d), got {signal_dims}")
    noise_dims = d - signal_dims
    if not 0 <= noise_factors <= noise_dims:
        raise ValueError(f"noise_factors must be in [0, {noise_dims}], got {noise_factors}")
    rng = np.random.default_rng(seed)
    scale = np.concatenate(
        [np.full(noise_dims, noise_std), np.full(signal_dims, cluster_std)]
    )
    factors = np.zeros((d, noise_factors))
    if noise_factors:
        q, _ = np.linalg.qr(rng.normal(size=(noise_dims, noise_factors)))
        factors[:noise_dims] = q

    def draw_noise(n):
        base = rng.normal(size=(n, d)) * scale
        if noise_factors:
            base += (rng.normal(size=(n, noise_factors)) * factor_std) @ factors.T
        return base

    x_pos = draw_noise(n_pos)
    x_neg = draw_noise(n_neg)

    u1 = np.zeros(d)
    u1[noise_dims:] = 1.0 / math.sqrt(signal_dims)
    u2 = np.zeros(d)
    alt = np.where(np.arange(signal_dims) % 2 == 0, 1.0, -1.0)
    u2[noise_dims:] = alt / math.sqrt(signal_dims)

    s1 = _balanced_signs(n_pos, rng)
    s2 = _balanced_signs(n_pos, rng)
    x_pos += cluster_mean * (s1[:, None] * u1 + s2[:, None] * u2)

    x = np.vstack([x_pos, x_neg])
    delta = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])
    tags = np.concatenate([(s1 > 0).astype(int), np.full(n_neg, UNTAGGED)])
    perm = rng.permutation(len(x))
    return LabeledDataset(
        x=x[perm],
        delta=delta[perm],
        tags=tags[perm],
        meta={
            "generator": "artificial",
            "seed": int(seed),
            "n_pos": int(n_pos),
            "n_neg": int(n_neg),
            "d": int(d),
            "noise_std": noise_std,
            "signal_dims": int(signal_dims),
            "cluster_mean": cluster_mean,
            "cluster_std": cluster_std,
            "noise_factors": int(noise_factors),
            "factor_std": factor_std,
        },
    )


_LABEL_VALUES = {
    "0": 0, "neg": 0, "negative": 0,
    "1": 1, "pos": 1, "positive": 1,
}


def load_csv(path, label_column, tag_column=None, drop_columns=()):
    """Load a labeled dataset from a headered CSV file.

    The label column must hold 0/1 or neg/pos values. Rows with missing
    (empty) cells are dropped; the count lands in meta["dropped_rows"].
    Non-empty cells that fail to parse raise with their row and column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        tag_idx = None
        if tag_column is not None:
            if tag_column not in header:
                raise ValueError(f"{path}: tag column {tag_column!r} not in header")
            tag_idx = header.index(tag_column)
        skip = {label_idx, tag_idx} if tag_idx is not None else {label_idx}
        for col in drop_columns:
            if col not in header:
                raise ValueError(f"{path}: drop column {col!r} not in header")
            skip.add(header.index(col))
        feat_idx = [i for i in range(len(header)) if i not in skip]
        if not feat_idx:
            raise ValueError(f"{path}: no feature columns left")

        xs, deltas, raw_tags = [], [], []
        dropped = 0
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_num} has {len(row)} columns, header has {len(header)}"
                )
            cells = [row[i].strip() for i in feat_idx]
            label_raw = row[label_idx].strip()
            tag_raw = row[tag_idx].strip() if tag_idx is not None else None
            if any(c == "" for c in cells) or label_raw == "" or tag_raw == "":
                dropped += 1
                continue
            label = _LABEL_VALUES.get(label_raw.lower())
            if label is None:
                raise ValueError(
                    f"{path}: row {row_num}, column {label_column!r}: "
                    f"bad label {label_raw!r} (expected 0/1 or neg/pos)"
                )
            feats = []
            for i, cell in zip(feat_idx, cells):
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_num}, column {header[i]!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
            xs.append(feats)
            deltas.append(label)
            raw_tags.append(tag_raw)
    if not xs:
        raise ValueError(f"{path}: no usable rows")

    meta = {"source": str(path), "dropped_rows": dropped, "label_column": label_column}
    tags = None
    if tag_idx is not None:
        try:
            tags = np.array([int(t) for t in raw_tags])
        except ValueError:
            levels = sorted(set(raw_tags))
            tags = np.array([levels.index(t) for t in raw_tags])
            meta["tag_levels"] = levels
        meta["tag_column"] = tag_column
    return LabeledDataset(x=np.array(xs), delta=np.array(deltas), tags=tags, meta=meta)


IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def read_idx_images(path):
    """Read a big-endian IDX image container into a (n, rows, cols) uint8 array."""
    buf = Path(path).read_bytes()
    if len(buf) < 16:
        raise ValueError(f"{path}: truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise ValueError(f"{path}: bad IDX image magic {magic:#010x}")
    expect = n * rows * cols
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16)
    if pixels.size != expect:
        raise ValueError(f"{path}: expected {expect} pixels, found {pixels.size}")
    return pixels.reshape(n, rows, cols)


def read_idx_labels(path):
    """Read a big-endian IDX label container into a (n,) uint8 array."""
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise ValueError(f"{path}: truncated IDX header")
    magic, n = struct.unpack(">II", buf[:8])
    if magic != IDX_LABELS_MAGIC:
        raise ValueError(f"{path}: bad IDX label magic {magic:#010x}")
    labels = np.frombuffer(buf, dtype=np.uint8, offset=8)
    if labels.size != n:
        raise ValueError(f"{path}: expected {n} labels, found {labels.size}")
    return labels


def read_pgm(path):
    """Read an 8-bit grayscale PGM (binary P5 or ascii P2) into (h, w) uint8."""
    buf = Path(path).read_bytes()

    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(buf):
        if buf[pos : pos + 1] == b"#":
            nl = buf.find(b"\n", pos)
            pos = len(buf) if nl < 0 else nl + 1
            continue
        if buf[pos : pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(buf) and not buf[end : end + 1].isspace() and buf[end : end + 1] != b"#":
            end += 1
        tokens.append(buf[pos:end])
        pos = end
    if len(tokens) < 4:
        raise ValueError(f"{path}: truncated PGM header")
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if magic == b"P5":
        data = np.frombuffer(buf, dtype=np.uint8, offset=pos + 1, count=width * height)
        if data.size != width * height:
            raise ValueError(f"{path}: truncated PGM pixel data")
    else:
        values = buf[pos:].split()
        if len(values) < width * height:
            raise ValueError(f"{path}: truncated PGM pixel data")
        data = np.array([int(v) for v in values[: width * height]], dtype=np.uint8)
    return data.reshape(height, width)


def _crop(image, patch, rng):
    h, w = image.shape
    r = rng.integers(0, h - patch + 1)
    c = rng.integers(0, w - patch + 1)
    return image[r : r + patch, c : c + patch]


def gen_noisy_digits(mnist_idx_images, mnist_idx_labels, background_image_dir, count, seed=0):
    """Superimpose handwritten 0/1 digits on natural-image patches.

    Positives are a random digit-0 or digit-1 image (scaled to [0, 1])
    added pixelwise to a random crop of a background image (scaled to
    [0, 1]), the sum clipped to [0, 2]; tags record the digit. Negatives
    are plain background crops. Output is row-major flattened.
    """
    images = read_idx_images(mnist_idx_images)
    labels = read_idx_labels(mnist_idx_labels)
    if len(images) != len(labels):
        raise ValueError(
            f"image/label counts differ: {len(images)} vs {len(labels)}"
        )
    keep = np.flatnonzero(labels <= 1)
    if keep.size == 0:
        raise ValueError("no digit-0 or digit-1 images in the label file")
    patch = images.shape[1]
    if images.shape[1] != images.shape[2]:
        raise ValueError(f"expected square digit images, got {images.shape[1:]}")

    bg_dir = Path(background_image_dir)
    backgrounds = []
    for f in sorted(bg_dir.iterdir()):
        if not f.is_file():
            continue
        try:
            img = read_pgm(f)
        except ValueError:
            continue
        if img.shape[0] >= patch and img.shape[1] >= patch:
            backgrounds.append(img.astype(float) / 255.0)
    if not backgrounds:
        raise ValueError(f"no usable background images (>= {patch}x{patch} PGM) in {bg_dir}")

    rng = np.random.default_rng(seed)
    xs, deltas, tags = [], [], []
    for _ in range(count):
        idx = keep[rng.integers(0, keep.size)]
        digit = images[idx].astype(float) / 255.0
        bg = _crop(backgrounds[rng.integers(0, len(backgrounds))], patch, rng)
        xs.append(np.clip(digit + bg, 0.0, 2.0).ravel())
        deltas.append(1)
        tags.append(int(labels[idx]))
    for _ in range(count):
        bg = _crop(backgrounds[rng.integers(0, len(backgrounds))], patch, rng)
        xs.append(bg.ravel())
        deltas.append(0)
        tags.append(UNTAGGED)

    x = np.array(xs)
    delta = np.array(deltas)
    tags = np.array(tags)
    perm = rng.permutation(len(x))
    return LabeledDataset(
        x=x[perm],
        delta=delta[perm],
        tags=tags[perm],
        meta={
            "generator": "noisy-digits",
            "seed": int(seed),
            "count": int(count),
            "patch": int(patch),
            "superposition": "add then clip to [0, 2]",
        },
    )


def _ring_glyph(size, rng, jitter):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    cy = size / 2 - 0.5 + rng.uniform(-jitter, jitter)
    cx = size / 2 - 0.5 + rng.uniform(-jitter, jitter)
    radius = size * 0.3 + rng.uniform(-0.5, 0.5)
    dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    return np.exp(-((dist - radius) ** 2) / (2 * 0.9**2))


def _bar_glyph(size, rng, jitter):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    cx = size / 2 - 0.5 + rng.uniform(-jitter, jitter)
    bar = np.exp(-((xx - cx) ** 2) / (2 * 1.1**2))
    top = size * 0.15
    bot = size * 0.85
    return bar * ((yy >= top) & (yy <= bot))


def gen_synthetic_digits(
    count, seed=0, size=16, bg_strength=1.0, glyph_strength=1.2, jitter=1.0, smooth=2.5
):
    """Self-contained stand-in for the noisy-digits set (no external files).

    Glyphs are two procedural templates (ring vs. vertical bar) with
    position jitter, normalized to equal energy so neither class carries
    more total intensity; backgrounds are smoothed white-noise fields
    rescaled to [0, 1], which concentrates their variance in the
    low-frequency modes the way natural images do. Superposition matches
    gen_noisy_digits: add, then clip to [0, 2].
    """
    rng = np.random.default_rng(seed)
    glyph_tags = _balanced_signs(count, rng) > 0

    def background():
        g = gaussian_filter(rng.normal(size=(size, size)), sigma=smooth)
        lo, hi = g.min(), g.max()
        return bg_strength * (g - lo) / (hi - lo)

    xs, deltas, tags = [], [], []
    for is_bar in glyph_tags:
        glyph = _bar_glyph(size, rng, jitter) if is_bar else _ring_glyph(size, rng, jitter)
        glyph = (glyph_strength / np.linalg.norm(glyph)) * glyph
        img = np.clip(glyph + background(), 0.0, 2.0)
        xs.append(img.ravel())
        deltas.append(1)
        tags.append(int(is_bar))
    for _ in range(count):
        xs.append(background().ravel())
        deltas.append(0)
        tags.append(UNTAGGED)

    x = np.array(xs)
    delta = np.array(deltas)
    tags = np.array(tags)
    perm = rng.permutation(len(x))
    return LabeledDataset(
        x=x[perm],
        delta=delta[perm],
        tags=tags[perm],
        meta={
            "generator": "synthetic-digits",
            "seed": int(seed),
            "count": int(count),
            "size": int(size),
            "bg_strength": bg_strength,
            "glyph_strength": glyph_strength,
            "jitter": jitter,
            "smooth": smooth,
            "superposition": "add then clip to [0, 2]",
        },
    )
