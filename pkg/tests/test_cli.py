"""End-to-end tests for the command-line interface."""

import csv
import json

import pytest

from ppcard.cli import main
from ppcard.ldp import read_exchange


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    assert run("datagen", "--entities", "12", "--duplicates", "1", "--providers", "2",
               "--seed", "3", "--out-dir", str(out)) == 0
    return out


@pytest.fixture(scope="module")
def exchange_files(bundle_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("exchange")
    paths, sidecars = [], []
    for pid in ("p0", "p1"):
        bf = out / f"{pid}.bf"
        sc = out / f"{pid}.truth.json"
        assert run("encode", "--schema", str(bundle_dir / "schema.json"),
                   "--input", str(bundle_dir / f"{pid}.csv"), "--provider", pid,
                   "--epsilon", "3.0", "--seed", "1", "--out", str(bf),
                   "--truth-sidecar", str(sc)) == 0
        paths.append(bf)
        sidecars.append(sc)
    return paths, sidecars


class TestDatagen:
    def test_outputs(self, bundle_dir):
        manifest = json.loads((bundle_dir / "manifest.json").read_text())
        assert manifest["k_true"] == 12
        assert (bundle_dir / "p0.csv").exists()
        assert (bundle_dir / "p1.csv").exists()
        assert (bundle_dir / "schema.json").exists()

    def test_missing_out_dir_is_config_error(self):
        assert run("datagen", "--entities", "5") == 2


class TestEncode:
    def test_exchange_readable(self, exchange_files):
        paths, sidecars = exchange_files
        ds = read_exchange(paths[0])
        assert ds.provider_id == "p0"
        assert ds.epsilon == 3.0
        assert ds.ell == 200
        truth = json.loads(sidecars[0].read_text())
        assert len(truth) == len(ds)

    def test_missing_epsilon_is_config_error(self, bundle_dir, tmp_path):
        assert run("encode", "--schema", str(bundle_dir / "schema.json"),
                   "--input", str(bundle_dir / "p0.csv"),
                   "--out", str(tmp_path / "x.bf")) == 2

    def test_missing_input_is_data_error(self, bundle_dir, tmp_path):
        assert run("encode", "--schema", str(bundle_dir / "schema.json"),
                   "--input", str(tmp_path / "nope.csv"), "--epsilon", "3",
                   "--out", str(tmp_path / "x.bf")) == 3

    def test_bad_schema_is_data_error(self, bundle_dir, tmp_path):
        bad = tmp_path / "schema.json"
        bad.write_text("{not json")
        assert run("encode", "--schema", str(bad),
                   "--input", str(bundle_dir / "p0.csv"), "--epsilon", "3",
                   "--out", str(tmp_path / "x.bf")) == 3


class TestCluster:
    def test_assignments_csv(self, exchange_files, tmp_path):
        paths, _ = exchange_files
        out = tmp_path / "assign.csv"
        assert run("cluster", "--inputs", *map(str, paths), "--k", "8",
                   "--seed", "0", "--out", str(out)) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 24
        assert {r["provider"] for r in rows} == {"p0", "p1"}
        assert all(0 <= int(r["cluster"]) < 8 for r in rows)

    def test_bad_k_is_config_error(self, exchange_files, tmp_path):
        paths, _ = exchange_files
        assert run("cluster", "--inputs", *map(str, paths), "--k", "999",
                   "--out", str(tmp_path / "a.csv")) == 2

    def test_corrupt_exchange_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.bf"
        bad.write_text("not an exchange file\n")
        assert run("cluster", "--inputs", str(bad), "--k", "2",
                   "--out", str(tmp_path / "a.csv")) == 3


class TestEstimate:
    def test_report_shape(self, exchange_files, tmp_path):
        paths, sidecars = exchange_files
        out = tmp_path / "est"
        assert run("estimate", "--inputs", *map(str, paths),
                   "--truth-sidecars", *map(str, sidecars),
                   "--method", "B", "--p-flip", "0.1", "--k-min", "2",
                   "--k-max", "20", "--seed", "0", "--out-dir", str(out)) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["k_true"] == 12
        assert 2 <= report["k_star"] <= 20
        assert report["error"] == abs(report["k_star"] - 12)
        with open(out / "sweep.csv") as fh:
            sweep = list(csv.DictReader(fh))
        assert [int(r["k"]) for r in sweep] == list(range(2, 21))

    def test_without_truth(self, exchange_files, tmp_path):
        paths, _ = exchange_files
        out = tmp_path / "est"
        assert run("estimate", "--inputs", *map(str, paths), "--k-max", "15",
                   "--out-dir", str(out)) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["k_true"] is None
        assert report["error"] is None

    def test_sidecar_count_mismatch_is_config_error(self, exchange_files, tmp_path):
        paths, sidecars = exchange_files
        assert run("estimate", "--inputs", *map(str, paths),
                   "--truth-sidecars", str(sidecars[0]),
                   "--out-dir", str(tmp_path)) == 2


class TestGrid:
    def test_grid_outputs(self, bundle_dir, tmp_path):
        out = tmp_path / "grid"
        assert run("grid", "--bundle-dir", str(bundle_dir), "--epsilons", "3",
                   "--p-flip-start", "0.1", "--p-flip-stop", "0.2",
                   "--p-flip-step", "0.1", "--methods", "B", "--k-max", "20",
                   "--seed", "5", "--out-dir", str(out)) == 0
        with open(out / "grid.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2  # one method x one epsilon x two p_flips
        assert set(rows[0]) == {"method", "epsilon", "p_flip", "rep", "k_star",
                                "error", "error_rate", "k_silhouette",
                                "silhouette_error_rate"}
        manifest = json.loads((out / "grid_manifest.json").read_text())
        assert manifest["failures"] == []
        assert sorted(p.name for p in (out / "exchange").iterdir()) == [
            "eps3.0_rep0_p0.bf", "eps3.0_rep0_p1.bf"
        ]

    def test_missing_bundle_is_data_error(self, tmp_path):
        assert run("grid", "--bundle-dir", str(tmp_path / "nope"),
                   "--out-dir", str(tmp_path)) == 3


class TestTheoryCurves:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "curves.csv"
        assert run("theory-curves", "--epsilons", "1,2", "--r-start", "0",
                   "--r-stop", "5", "--r-step", "1", "--out", str(out)) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 12
        assert float(rows[0]["p_closed"]) <= float(rows[5]["p_closed"])

    def test_bad_step_is_config_error(self, tmp_path):
        assert run("theory-curves", "--r-start", "0", "--r-stop", "5",
                   "--r-step", "-1", "--out", str(tmp_path / "c.csv")) == 2


class TestConfigFile:
    def test_config_merge_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"entities": 7, "providers": 3, "seed": 11}))
        out = tmp_path / "bundle"
        assert run("datagen", "--config", str(cfg), "--providers", "2",
                   "--out-dir", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["k_true"] == 7  # from config file
        assert manifest["num_providers"] == 2  # flag wins over config

    def test_missing_config_is_config_error(self, tmp_path):
        assert run("datagen", "--config", str(tmp_path / "nope.json"),
                   "--out-dir", str(tmp_path)) == 2
