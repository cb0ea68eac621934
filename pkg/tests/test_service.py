"""HTTP surface: command endpoints, error mapping, streaming sessions."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from contrastive_pca.online import OnlineState
from contrastive_pca.service import create_app


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def small_dataset(client, tmp_path):
    out = tmp_path / "data.jsonl"
    resp = client.post(
        "/gen",
        json={
            "kind": "artificial",
            "out_path": str(out),
            "seed": 1,
            "n_pos": 80,
            "n_neg": 80,
            "dim": 12,
            "signal_dims": 4,
        },
    )
    assert resp.status_code == 200, resp.text
    return out


def fit_model(client, data, out, method="cpca-star", contrast=0.9, k=2, **extra):
    resp = client.post(
        "/fit",
        json={
            "data_path": str(data),
            "method": method,
            "contrast": contrast,
            "k": k,
            "out_model_path": str(out),
            **extra,
        },
    )
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestHealth:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestGenEndpoint:
    def test_gen_writes_file(self, client, small_dataset):
        assert small_dataset.exists()

    def test_gen_is_reproducible_bytes(self, client, tmp_path):
        payload = {
            "kind": "synthetic-digits",
            "out_path": str(tmp_path / "a.jsonl"),
            "seed": 4,
            "count": 20,
        }
        client.post("/gen", json=payload)
        payload["out_path"] = str(tmp_path / "b.jsonl")
        client.post("/gen", json=payload)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_unknown_kind_is_usage(self, client, tmp_path):
        resp = client.post(
            "/gen", json={"kind": "nope", "out_path": str(tmp_path / "x.jsonl")}
        )
        assert resp.status_code == 400
        assert resp.json()["detail"]["kind"] == "usage"

    def test_noisy_digits_without_files_is_usage(self, client, tmp_path):
        resp = client.post(
            "/gen", json={"kind": "noisy-digits", "out_path": str(tmp_path / "x.jsonl")}
        )
        assert resp.status_code == 400

    def test_malformed_body_is_422(self, client):
        resp = client.post("/gen", json={"kind": 3})
        assert resp.status_code == 422


class TestFitEndpoint:
    def test_fit_and_metrics(self, client, small_dataset, tmp_path):
        result = fit_model(client, small_dataset, tmp_path / "m.json")
        assert result["d"] == 12
        assert result["values"] == sorted(result["values"], reverse=True)
        assert result["lda_accuracy"] is not None
        assert (tmp_path / "m.json").exists()

    def test_missing_dataset_is_io(self, client, tmp_path):
        resp = client.post(
            "/fit",
            json={
                "data_path": str(tmp_path / "absent.jsonl"),
                "method": "cpca",
                "contrast": 0.5,
                "k": 2,
                "out_model_path": str(tmp_path / "m.json"),
            },
        )
        assert resp.status_code == 404
        assert resp.json()["detail"]["kind"] == "io"

    def test_bad_contrast_is_usage(self, client, small_dataset, tmp_path):
        resp = client.post(
            "/fit",
            json={
                "data_path": str(small_dataset),
                "method": "cpca",
                "contrast": 1.5,
                "k": 2,
                "out_model_path": str(tmp_path / "m.json"),
            },
        )
        assert resp.status_code == 400

    def test_singular_background_is_domain(self, client, tmp_path):
        out = tmp_path / "thin.jsonl"
        client.post(
            "/gen",
            json={
                "kind": "artificial",
                "out_path": str(out),
                "seed": 2,
                "n_pos": 40,
                "n_neg": 5,
                "dim": 12,
                "signal_dims": 4,
            },
        )
        resp = client.post(
            "/fit",
            json={
                "data_path": str(out),
                "method": "cpca-star",
                "contrast": 1.0,
                "k": 2,
                "out_model_path": str(tmp_path / "m.json"),
            },
        )
        assert resp.status_code == 409
        assert resp.json()["detail"]["kind"] == "domain"
        assert "beta < 1" in resp.json()["detail"]["message"]

    def test_projections_out(self, client, small_dataset, tmp_path):
        result = fit_model(
            client, small_dataset, tmp_path / "m.json",
            projections_out=str(tmp_path / "proj.json"),
        )
        doc = json.loads((tmp_path / "proj.json").read_text())
        assert doc["format"] == "cpca-projections/1"
        assert len(doc["coords"]) == 80


class TestEvalEndpoint:
    def test_model_against_itself(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json")
        resp = client.post(
            "/eval",
            json={"model_a": str(tmp_path / "m.json"), "model_b": str(tmp_path / "m.json")},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["metric_name"] == "projector_alignment"
        assert body["alignment"] == pytest.approx(1.0)

    def test_model_against_data(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json")
        resp = client.post(
            "/eval",
            json={"model_a": str(tmp_path / "m.json"), "data_path": str(small_dataset)},
        )
        body = resp.json()
        assert body["metric_name"] == "projection_separation"
        assert 0.0 <= body["lda_accuracy"] <= 1.0

    def test_both_or_neither_is_usage(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json")
        resp = client.post("/eval", json={"model_a": str(tmp_path / "m.json")})
        assert resp.status_code == 400


class TestSweepEndpoint:
    def test_sweep_writes_reports(self, client, small_dataset, tmp_path):
        resp = client.post(
            "/sweep",
            json={
                "data_path": str(small_dataset),
                "method": "cpca-star",
                "grid_spec": "0:1:5",
                "k": 2,
                "metric": "lda",
                "threshold": 0.9,
                "out_json": str(tmp_path / "r.json"),
                "out_csv": str(tmp_path / "r.csv"),
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["grid_points"] == 5
        assert 0.0 <= body["good_range_width"] <= 1.0
        assert len((tmp_path / "r.csv").read_text().strip().splitlines()) == 5

    def test_bad_grid_is_usage(self, client, small_dataset, tmp_path):
        resp = client.post(
            "/sweep",
            json={
                "data_path": str(small_dataset),
                "method": "cpca",
                "grid_spec": "0::5",
                "k": 2,
                "metric": "lda",
            },
        )
        assert resp.status_code == 400


class TestStreamEndpoint:
    def test_stream_with_oracle(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json", normalize="rms")
        resp = client.post(
            "/stream",
            json={
                "data_path": str(small_dataset),
                "beta": 0.9,
                "k": 2,
                "eta": 0.01,
                "tau": 1.0,
                "epochs": 5,
                "seeds": [0, 1],
                "oracle_model_path": str(tmp_path / "m.json"),
                "out_report_path": str(tmp_path / "traj.csv"),
                "record_every": 100,
                "normalize": "rms",
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["steps"] == 5 * 160
        assert len(body["final_alignments"]) == 2
        lines = (tmp_path / "traj.csv").read_text().strip().splitlines()
        assert lines[0] == "t,seed0,seed1,mean,std"
        assert len(lines) == 1 + 8

    def test_oracle_mismatch_is_domain(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json", k=3)
        resp = client.post(
            "/stream",
            json={
                "data_path": str(small_dataset),
                "beta": 0.9,
                "k": 2,
                "eta": 0.01,
                "epochs": 1,
                "seeds": [0],
                "oracle_model_path": str(tmp_path / "m.json"),
                "out_report_path": str(tmp_path / "traj.csv"),
            },
        )
        assert resp.status_code == 409

    def test_zero_epochs_is_empty_trajectory(self, client, small_dataset, tmp_path):
        resp = client.post(
            "/stream",
            json={
                "data_path": str(small_dataset),
                "beta": 0.5,
                "k": 2,
                "eta": 0.01,
                "epochs": 0,
                "seeds": [0],
                "out_report_path": str(tmp_path / "traj.csv"),
            },
        )
        assert resp.status_code == 200
        assert resp.json()["steps"] == 0
        assert (tmp_path / "traj.csv").read_text().startswith("t,seed0")


class TestPlotEndpoint:
    def test_all_kinds(self, client, small_dataset, tmp_path):
        fit_model(
            client, small_dataset, tmp_path / "m.json",
            projections_out=str(tmp_path / "proj.json"),
        )
        client.post(
            "/sweep",
            json={
                "data_path": str(small_dataset),
                "method": "cpca-star",
                "grid_spec": "0:1:5",
                "k": 2,
                "metric": "lda",
                "threshold": 0.9,
                "out_json": str(tmp_path / "r.json"),
                "out_csv": str(tmp_path / "r.csv"),
            },
        )
        for kind, source in [
            ("scatter", "proj.json"),
            ("curve", "r.json"),
            ("barcode", "r.json"),
        ]:
            resp = client.post(
                "/plot",
                json={
                    "input_path": str(tmp_path / source),
                    "out_svg_path": str(tmp_path / f"{kind}.svg"),
                    "kind": kind,
                },
            )
            assert resp.status_code == 200, resp.text
            assert (tmp_path / f"{kind}.svg").read_text().startswith("<svg")

    def test_wrong_input_format_is_usage(self, client, small_dataset, tmp_path):
        fit_model(client, small_dataset, tmp_path / "m.json")
        resp = client.post(
            "/plot",
            json={
                "input_path": str(tmp_path / "m.json"),
                "out_svg_path": str(tmp_path / "x.svg"),
                "kind": "curve",
            },
        )
        assert resp.status_code == 400


class TestSessions:
    def create(self, client, **over):
        payload = {"d": 6, "k": 2, "beta": 0.8, "eta": 0.01, "tau": 1.0, "seed": 3}
        payload.update(over)
        resp = client.post("/sessions", json=payload)
        assert resp.status_code == 200, resp.text
        return resp.json()

    def test_lifecycle(self, client):
        info = self.create(client)
        sid = info["session_id"]
        assert info["t"] == 0 and info["p"] == 0.5

        rng = np.random.default_rng(0)
        samples = [
            {"x": list(rng.normal(size=6)), "delta": int(i % 2)} for i in range(40)
        ]
        resp = client.post(f"/sessions/{sid}/samples", json={"samples": samples})
        assert resp.status_code == 200
        body = resp.json()
        assert body["t"] == 40
        assert len(body["last_z"]) == 2

        resp = client.get(f"/sessions/{sid}/subspace")
        assert resp.status_code == 200
        sub = resp.json()
        assert sub["method"] == "cpca-star-online"
        assert len(sub["basis"]) == 2 and len(sub["basis"][0]) == 6

        resp = client.get(f"/sessions/{sid}/checkpoint")
        checkpoint = resp.json()
        state = OnlineState.from_dict(checkpoint)
        assert state.t == 40

        resp = client.post("/sessions/restore", json=checkpoint)
        sid2 = resp.json()["session_id"]
        assert resp.json()["t"] == 40
        ck2 = client.get(f"/sessions/{sid2}/checkpoint").json()
        assert ck2 == checkpoint

        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_invalid_step_size_is_usage(self, client):
        resp = client.post(
            "/sessions", json={"d": 6, "k": 2, "beta": 0.8, "eta": 1.0, "tau": 1.0}
        )
        assert resp.status_code == 400

    def test_empty_feed_is_usage(self, client):
        sid = self.create(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/samples", json={"samples": []})
        assert resp.status_code == 400

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/zzz").status_code == 404
        assert client.delete("/sessions/zzz").status_code == 404
