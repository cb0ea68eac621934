"""Shared fixtures: tiny IDX/PGM writers and a protein-panel-style CSV."""

import csv
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def write_idx_images(path, images):
    """Write (n, rows, cols) uint8 images in the big-endian IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(labels.tobytes())


def write_pgm(path, image, binary=True):
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(image.tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"P2\n{w} {h}\n255\n")
            for row in image:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


def make_protein_csv(path, seed=7, n_each=240, d=77, missing_rows=0):
    """Protein-panel-style CSV: 77 numeric columns, condition and genotype
    columns, an id column worth dropping, and optional rows with missing
    cells. Scaled near unit RMS so streaming at small step sizes is stable.
    """
    rng = np.random.default_rng(seed)
    n_factors = 4
    q, _ = np.linalg.qr(rng.normal(size=(d, n_factors + 2)))
    factors, v1, v2 = q[:, :n_factors], q[:, n_factors], q[:, n_factors + 1]

    def noise(n):
        base = rng.normal(size=(n, d)) * 0.4
        shared = (rng.normal(size=(n, n_factors)) * 1.2) @ factors.T
        return base + shared

    x_neg = noise(n_each)
    x_pos = noise(n_each)
    s1 = np.where(rng.permutation(n_each) < n_each // 2, -1.0, 1.0)
    s2 = np.where(rng.permutation(n_each) < n_each // 2, -1.0, 1.0)
    x_pos += 1.6 * (s1[:, None] * v1 + s2[:, None] * v2)

    header = [f"protein_{i}" for i in range(d)] + ["mouse_id", "condition", "genotype"]
    rows = []
    for i in range(n_each):
        rows.append([f"{v:.6f}" for v in x_pos[i]] + [f"m{i}", "pos", str(int(s1[i] > 0))])
    for i in range(n_each):
        rows.append([f"{v:.6f}" for v in x_neg[i]] + [f"c{i}", "neg", "0"])
    order = rng.permutation(len(rows))
    rows = [rows[i] for i in order]
    for i in range(missing_rows):
        rows[i][rng.integers(0, d)] = ""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture
def protein_csv(tmp_path):
    return make_protein_csv(tmp_path / "panel.csv")


@pytest.fixture
def tiny_idx(tmp_path):
    """Small digit IDX pair: 6 images of 0/1/2 at 12x12."""
    rng = np.random.default_rng(3)
    images = np.zeros((6, 12, 12), dtype=np.uint8)
    labels = np.array([0, 1, 0, 1, 2, 1], dtype=np.uint8)
    for i, lab in enumerate(labels):
        if lab == 0:
            images[i, 2:10, 2:10] = 200
            images[i, 4:8, 4:8] = 0
        elif lab == 1:
            images[i, 1:11, 5:7] = 220
        else:
            images[i] = rng.integers(0, 255, size=(12, 12), dtype=np.uint8)
    img_path = tmp_path / "images.idx"
    lab_path = tmp_path / "labels.idx"
    write_idx_images(img_path, images)
    write_idx_labels(lab_path, labels)
    return img_path, lab_path, images, labels


@pytest.fixture
def background_dir(tmp_path):
    rng = np.random.default_rng(5)
    bdir = tmp_path / "backgrounds"
    bdir.mkdir()
    for i in range(3):
        img = rng.integers(0, 255, size=(20, 24), dtype=np.uint8)
        write_pgm(bdir / f"bg{i}.pgm", img, binary=(i % 2 == 0))
    return bdir
