"""Generators, CSV/IDX/PGM loaders, JSON-lines round-trips, preprocessing."""

import numpy as np
import pytest

from contrastive_pca.data import (
    LabeledDataset,
    UNTAGGED,
    gen_artificial,
    gen_noisy_digits,
    gen_synthetic_digits,
    load_csv,
    normalized,
    read_idx_images,
    read_idx_labels,
    read_pgm,
)
from contrastive_pca.evaluation import lda_accuracy
from contrastive_pca.linalg import accumulate_moments
from contrastive_pca.offline import ContrastConfig, fit, project

from conftest import write_idx_images, write_idx_labels, write_pgm


def tag_accuracy(ds, method, contrast, k=2):
    model = fit(accumulate_moments(ds), ContrastConfig(method, contrast, k))
    return lda_accuracy(project(model, ds.positives_matrix()), ds.positive_tags())


class TestGenArtificial:
    def test_shape_and_counts(self):
        ds = gen_artificial(1)
        assert ds.n_pos == 200 and ds.n_neg == 200
        assert ds.d == 30
        assert np.all(np.isfinite(ds.x))

    def test_determinism(self):
        a = gen_artificial(3)
        b = gen_artificial(3)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.delta, b.delta)
        assert np.array_equal(a.tags, b.tags)

    def test_tags_only_on_positives(self):
        ds = gen_artificial(2)
        assert np.all(ds.tags[ds.delta == 0] == UNTAGGED)
        tagged = ds.tags[ds.delta == 1]
        assert set(np.unique(tagged)) == {0, 1}
        assert abs(np.sum(tagged == 0) - 100) <= 0

    def test_designed_contrast_property(self):
        ds = gen_artificial(0)
        assert tag_accuracy(ds, "cpca-star", 0.0) <= 0.65
        assert tag_accuracy(ds, "cpca-star", 0.9) >= 0.90

    def test_parameters_are_respected(self):
        ds = gen_artificial(0, n_pos=30, n_neg=20, d=12, signal_dims=4)
        assert ds.n_pos == 30 and ds.n_neg == 20 and ds.d == 12


class TestLoadCsv:
    def test_toy_file(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("a,b,label\n1,2,pos\n3,4,neg\n5,6,1\n")
        ds = load_csv(path, "label")
        assert len(ds) == 3
        np.testing.assert_array_equal(ds.delta, [1, 0, 1])
        np.testing.assert_array_equal(ds.x, [[1, 2], [3, 4], [5, 6]])

    def test_missing_cell_drops_row(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("a,b,label\n1,2,pos\n3,,neg\n5,6,0\n")
        ds = load_csv(path, "label")
        assert len(ds) == 2
        assert ds.meta["dropped_rows"] == 1

    def test_protein_panel_dimensions(self, protein_csv):
        ds = load_csv(
            protein_csv, "condition", tag_column="genotype", drop_columns=("mouse_id",)
        )
        assert ds.d == 77
        assert ds.n_pos == 240 and ds.n_neg == 240
        assert set(np.unique(ds.positive_tags())) == {0, 1}

    def test_unparseable_cell_reports_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n1,2,pos\n3,oops,neg\n")
        with pytest.raises(ValueError, match="row 3.*'b'"):
            load_csv(path, "label")

    def test_inconsistent_column_count(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b,label\n1,2,pos\n3,4\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(path, "label")

    def test_bad_label_value(self, tmp_path):
        path = tmp_path / "label.csv"
        path.write_text("a,label\n1,maybe\n")
        with pytest.raises(ValueError, match="bad label"):
            load_csv(path, "label")

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "nolabel.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="label column"):
            load_csv(path, "y")

    def test_string_tags_are_leveled(self, tmp_path):
        path = tmp_path / "strtag.csv"
        path.write_text("a,label,grp\n1,pos,wt\n2,pos,ds\n3,neg,wt\n")
        ds = load_csv(path, "label", tag_column="grp")
        assert ds.meta["tag_levels"] == ["ds", "wt"]
        np.testing.assert_array_equal(ds.tags, [1, 0, 1])


class TestIdxAndPgm:
    def test_idx_round_trip(self, tmp_path, tiny_idx):
        img_path, lab_path, images, labels = tiny_idx
        np.testing.assert_array_equal(read_idx_images(img_path), images)
        np.testing.assert_array_equal(read_idx_labels(lab_path), labels)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.idx"
        p.write_bytes(b"\x00\x00\x08\x05" + b"\x00" * 12)
        with pytest.raises(ValueError, match="magic"):
            read_idx_images(p)

    def test_truncated_pixels(self, tmp_path):
        import struct

        p = tmp_path / "short.idx"
        p.write_bytes(struct.pack(">IIII", 0x803, 2, 4, 4) + b"\x00" * 10)
        with pytest.raises(ValueError, match="pixels"):
            read_idx_images(p)

    def test_pgm_binary_and_ascii(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 255, size=(7, 9), dtype=np.uint8)
        p5 = tmp_path / "a.pgm"
        p2 = tmp_path / "b.pgm"
        write_pgm(p5, img, binary=True)
        write_pgm(p2, img, binary=False)
        np.testing.assert_array_equal(read_pgm(p5), img)
        np.testing.assert_array_equal(read_pgm(p2), img)

    def test_pgm_with_comment(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([1, 2, 3, 4]))
        np.testing.assert_array_equal(read_pgm(p), [[1, 2], [3, 4]])

    def test_pgm_bad_magic(self, tmp_path):
        p = tmp_path / "d.pgm"
        p.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        with pytest.raises(ValueError, match="PGM"):
            read_pgm(p)


class TestGenNoisyDigits:
    def test_counts_and_dimension(self, tiny_idx, background_dir):
        img_path, lab_path, _, _ = tiny_idx
        ds = gen_noisy_digits(img_path, lab_path, background_dir, 8, seed=1)
        assert ds.n_pos == 8 and ds.n_neg == 8
        assert ds.d == 144
        tags = ds.positive_tags()
        assert set(np.unique(tags)) <= {0, 1}

    def test_black_backgrounds_recover_digits(self, tmp_path, tiny_idx):
        img_path, lab_path, images, labels = tiny_idx
        bdir = tmp_path / "black"
        bdir.mkdir()
        write_pgm(bdir / "z.pgm", np.zeros((16, 16), dtype=np.uint8))
        ds = gen_noisy_digits(img_path, lab_path, bdir, 6, seed=2)
        digit_rows = {
            tuple(np.round(images[i].ravel() / 255.0, 12))
            for i in range(len(labels))
            if labels[i] <= 1
        }
        for row in ds.x[ds.delta == 1]:
            assert tuple(np.round(row, 12)) in digit_rows

    def test_determinism(self, tiny_idx, background_dir):
        img_path, lab_path, _, _ = tiny_idx
        a = gen_noisy_digits(img_path, lab_path, background_dir, 5, seed=3)
        b = gen_noisy_digits(img_path, lab_path, background_dir, 5, seed=3)
        assert np.array_equal(a.x, b.x)

    def test_no_usable_backgrounds(self, tmp_path, tiny_idx):
        img_path, lab_path, _, _ = tiny_idx
        bdir = tmp_path / "small"
        bdir.mkdir()
        write_pgm(bdir / "tiny.pgm", np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError, match="background"):
            gen_noisy_digits(img_path, lab_path, bdir, 3)

    def test_no_zero_one_digits(self, tmp_path, background_dir):
        img = tmp_path / "img.idx"
        lab = tmp_path / "lab.idx"
        write_idx_images(img, np.zeros((2, 12, 12), dtype=np.uint8))
        write_idx_labels(lab, np.array([5, 7], dtype=np.uint8))
        with pytest.raises(ValueError, match="digit"):
            gen_noisy_digits(img, lab, background_dir, 3)


class TestGenSyntheticDigits:
    def test_split_and_dimension(self):
        ds = gen_synthetic_digits(1000, seed=1)
        assert ds.n_pos == 1000 and ds.n_neg == 1000
        assert ds.d == 256

    def test_designed_separability(self):
        ds = gen_synthetic_digits(1000, seed=0)
        assert tag_accuracy(ds, "cpca-star", 0.9) >= 0.90
        assert tag_accuracy(ds, "cpca-star", 0.0) < 0.80

    def test_determinism(self):
        a = gen_synthetic_digits(50, seed=9)
        b = gen_synthetic_digits(50, seed=9)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.tags, b.tags)

    def test_values_in_superposition_range(self):
        ds = gen_synthetic_digits(40, seed=2)
        assert ds.x.min() >= 0.0
        assert ds.x.max() <= 2.0


class TestJsonl:
    def test_round_trip_exact(self, tmp_path):
        ds = gen_artificial(4, n_pos=20, n_neg=15, d=8, signal_dims=3)
        path = tmp_path / "ds.jsonl"
        ds.save_jsonl(path)
        back = LabeledDataset.load_jsonl(path)
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.delta, ds.delta)
        assert np.array_equal(back.tags, ds.tags)
        assert back.meta == ds.meta

    def test_header_line(self, tmp_path):
        import json

        ds = gen_artificial(4, n_pos=5, n_neg=5, d=6, signal_dims=2)
        path = tmp_path / "ds.jsonl"
        ds.save_jsonl(path)
        first = json.loads(path.read_text().splitlines()[0])
        assert first["format"] == "cpca-dataset/1"
        assert first["n_pos"] == 5 and first["n_neg"] == 5 and first["d"] == 6

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text('{"format": "nope"}\n')
        with pytest.raises(ValueError, match="format"):
            LabeledDataset.load_jsonl(path)


class TestNormalize:
    def test_rms_mode(self):
        ds = gen_artificial(5, n_pos=20, n_neg=20, d=10, signal_dims=3)
        out = normalized(ds, "rms")
        assert np.sqrt(np.mean(out.x**2)) == pytest.approx(1.0)
        assert out.meta["normalize"]["mode"] == "rms"

    def test_none_mode_is_identity(self):
        ds = gen_artificial(5, n_pos=10, n_neg=10, d=6, signal_dims=2)
        assert normalized(ds, "none") is ds
        assert normalized(ds, None) is ds

    def test_unknown_mode(self):
        ds = gen_artificial(5, n_pos=10, n_neg=10, d=6, signal_dims=2)
        with pytest.raises(ValueError, match="normalization"):
            normalized(ds, "zscore")


class TestDatasetValidation:
    def test_bad_delta_values(self):
        with pytest.raises(ValueError, match="0 or 1"):
            LabeledDataset(x=np.zeros((3, 2)), delta=np.array([0, 1, 2]))

    def test_non_finite_sample_named(self):
        x = np.zeros((3, 2))
        x[1, 0] = np.inf
        with pytest.raises(ValueError, match="sample 1"):
            LabeledDataset(x=x, delta=np.array([0, 1, 0]))

    def test_masked_matrix_zeroes_negatives(self):
        ds = LabeledDataset(x=np.ones((4, 3)), delta=np.array([1, 0, 1, 0]))
        xm = ds.masked_matrix()
        assert xm.shape == (3, 4)
        np.testing.assert_array_equal(xm[:, 1], 0.0)
        np.testing.assert_array_equal(xm[:, 0], 1.0)
