import json

import numpy as np
import pytest

from unifilter.basis import BasisSet, homophily_basis
from unifilter.cli import main, sub_seed
from unifilter.graph import homophily_ratio
from unifilter.io import load_graph, load_labels, save_features, save_graph, save_labels
from unifilter.synth import planted_partition_graph


@pytest.fixture()
def data(tmp_path):
    g, labels = planted_partition_graph([40, 40, 40], 480, 0.7, seed=0)
    x = np.random.default_rng(0).normal(size=(g.n, 6))
    paths = {"graph": tmp_path / "edges.txt", "labels": tmp_path / "labels.txt", "features": tmp_path / "x.txt"}
    save_graph(g, paths["graph"])
    save_labels(labels, paths["labels"])
    save_features(x, paths["features"])
    return g, labels, x, {k: str(v) for k, v in paths.items()}


def run(*argv):
    return main([str(a) for a in argv])


def test_sub_seeds_are_named_and_stable():
    assert sub_seed(0, "split") == sub_seed(0, "split")
    assert sub_seed(0, "split") != sub_seed(0, "train")
    assert sub_seed(0, "split") != sub_seed(1, "split")


class TestEstimateH:
    def test_full_label_split(self, data, tmp_path, capsys):
        g, labels, _, p = data
        split = tmp_path / "split.json"
        split.write_text(json.dumps({"train": list(range(g.n)), "val": [], "test": []}))
        assert run("estimate-h", "--graph", p["graph"], "--labels", p["labels"], "--split", split,
                   "--out", tmp_path / "est") == 0
        h = float(capsys.readouterr().out.split("\t")[1])
        assert h == pytest.approx(homophily_ratio(g, labels), abs=1e-6)
        saved = json.loads((tmp_path / "est" / "estimate.json").read_text())
        assert saved["h_hat"] == homophily_ratio(g, labels)

    def test_missing_file_exit_code(self, tmp_path, capsys):
        assert run("estimate-h", "--graph", tmp_path / "nope.txt", "--labels", tmp_path / "nope2.txt") == 2
        assert "error" in capsys.readouterr().err

    def test_malformed_graph_exit_code(self, data, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("0 1\n1 two\n")
        assert run("estimate-h", "--graph", bad, "--labels", data[3]["labels"]) == 2
        assert ":2:" in capsys.readouterr().err

    def test_missing_required_option(self, data):
        assert run("estimate-h", "--graph", data[3]["graph"]) == 2


class TestBuildBasis:
    def test_heterophily_export(self, data, tmp_path):
        p = data[3]
        out = tmp_path / "het"
        assert run("build-basis", "--graph", p["graph"], "--features", p["features"], "--kind", "heterophily",
                   "-K", 10, "--h-hat", 0.3, "--out", out) == 0
        hops = sorted(out.glob("hop_*.txt"))
        assert len(hops) == 11
        meta = json.loads((out / "manifest.json").read_text())
        assert meta["kind"] == "heterophily" and meta["h_used"] == 0.3
        assert json.loads((out / "config.json").read_text())["hops"] == 10

    def test_rerun_is_byte_identical(self, data, tmp_path):
        p = data[3]
        args = ["build-basis", "--graph", p["graph"], "--features", p["features"], "--labels", p["labels"],
                "--kind", "unibasis", "-K", 4, "--seed", 3]
        assert run(*args, "--out", tmp_path / "a") == 0
        assert run(*args, "--out", tmp_path / "b") == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_unibasis_tau_one(self, data, tmp_path):
        g, _, x, p = data
        out = tmp_path / "uni"
        assert run("build-basis", "--graph", p["graph"], "--features", p["features"], "--kind", "unibasis",
                   "-K", 3, "--tau", 1, "--h-hat", 0.5, "--out", out) == 0
        basis = BasisSet.load(out)
        assert basis.kind == "unibasis"
        np.testing.assert_allclose(basis.stacked(), homophily_basis(g, x, 3).normalized().stacked(), atol=1e-15)

    def test_numeric_failure_names_hop_and_column(self, tmp_path, capsys):
        g, _ = planted_partition_graph([100, 100], 800, 0.3, seed=0)
        save_graph(g, tmp_path / "g.txt")
        save_features(np.random.default_rng(0).random((g.n, 2)), tmp_path / "x.txt")
        code = run("build-basis", "--graph", tmp_path / "g.txt", "--features", tmp_path / "x.txt",
                   "--kind", "heterophily", "-K", 150, "--h-hat", 0.3, "--out", tmp_path / "o")
        assert code == 1
        err = capsys.readouterr().err
        assert "hop" in err and "column" in err
        assert not (tmp_path / "o" / "manifest.json").exists()

    def test_config_file_and_flag_precedence(self, data, tmp_path):
        p = data[3]
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"kind": "heterophily", "hops": 7, "h-hat": 0.4}))
        out = tmp_path / "c"
        assert run("build-basis", "--config", cfg, "--graph", p["graph"], "--features", p["features"],
                   "-K", 5, "--out", out) == 0
        meta = json.loads((out / "manifest.json").read_text())
        assert (meta["kind"], meta["K"], meta["h_used"]) == ("heterophily", 5, 0.4)

    def test_unknown_config_key(self, data, tmp_path):
        p = data[3]
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"learning_rate": 1}))
        assert run("build-basis", "--config", cfg, "--graph", p["graph"], "--features", p["features"],
                   "--out", tmp_path / "o") == 2


class TestTrain:
    def test_outputs(self, data, tmp_path):
        p = data[3]
        out = tmp_path / "run"
        args = ["train", "--graph", p["graph"], "--features", p["features"], "--labels", p["labels"],
                "--max-epochs", 80, "--patience", 30, "--seed", 2, "--out", out]
        assert run(*args) == 0
        report = json.loads((out / "report.json").read_text())
        for key in ("best_val_accuracy", "test_accuracy", "train_accuracy"):
            assert 0.0 <= report[key] <= 1.0
        ckpt = json.loads((out / "checkpoint.json").read_text())
        assert len(ckpt["w"]) == 11
        spectrum = json.loads((out / "spectrum.json").read_text())
        assert [r["hop"] for r in spectrum] == list(range(11))
        assert [r["weight"] for r in spectrum] == ckpt["w"]
        assert all(0 <= r["frequency"] <= 1 for r in spectrum)
        assert (out / "spectrum.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

        assert run(*args[:-1], tmp_path / "again") == 0
        assert (tmp_path / "again" / "report.json").read_bytes() == (out / "report.json").read_bytes()

    def test_no_plot(self, data, tmp_path):
        p = data[3]
        out = tmp_path / "run"
        assert run("train", "--graph", p["graph"], "--features", p["features"], "--labels", p["labels"],
                   "--max-epochs", 5, "--no-plot", "--out", out) == 0
        assert not (out / "spectrum.png").exists()

    def test_spectrum_from_checkpoint(self, data, tmp_path):
        p = data[3]
        common = ["--graph", p["graph"], "--features", p["features"], "--labels", p["labels"], "--h-hat", 0.6]
        assert run("train", *common, "--max-epochs", 10, "--out", tmp_path / "run") == 0
        assert run("spectrum", *common, "--checkpoint", tmp_path / "run" / "checkpoint.json",
                   "--out", tmp_path / "spec") == 0
        a = json.loads((tmp_path / "run" / "spectrum.json").read_text())
        b = json.loads((tmp_path / "spec" / "spectrum.json").read_text())
        assert a == b


class TestAngles:
    @pytest.mark.parametrize("kind, expected", [("orthonormal", 90.0), ("heterophily", 70.2)])
    def test_constant_angle_bases(self, data, tmp_path, kind, expected):
        p = data[3]
        out = tmp_path / kind
        assert run("angles", "--graph", p["graph"], "--features", p["features"], "--kind", kind,
                   "-K", 60, "--h-hat", 0.22, "--out", out) == 0
        rows = (out / "angles.tsv").read_text().splitlines()
        assert rows[0] == "hop\tdegrees\tskipped_columns" and len(rows) == 61
        degrees = np.array([float(r.split("\t")[1]) for r in rows[1:]])
        np.testing.assert_allclose(degrees, expected, atol=1e-6)
        assert (out / "angles.png").exists()
        assert json.loads((out / "config.json").read_text())["reorthogonalize"] is True


class TestSynth:
    def test_dataset_files(self, tmp_path, capsys):
        out = tmp_path / "ds"
        assert run("synth", "--target-h", 0.4, "--feature-dim", 16, "--seed", 5, "--out", out) == 0
        meta = json.loads((out / "manifest.json").read_text())
        g = load_graph(out / "edges.txt", n_hint=meta["n"])
        labels = load_labels(out / "labels.txt", n=g.n)
        x = np.loadtxt(out / "features.txt")
        assert x.shape == (g.n, 16) and np.all(x.sum(axis=1) == 1)
        assert homophily_ratio(g, labels) == pytest.approx(meta["achieved_h"], abs=1e-12)
        assert abs(meta["achieved_h"] - 0.4) <= 0.02
        split = json.loads((out / "split.json").read_text())
        assert sum(len(v) for v in split.values()) == g.n

    def test_idempotent(self, tmp_path):
        for name in ("a", "b"):
            assert run("synth", "--target-h", 0.6, "--feature-dim", 4, "--seed", 1, "--out", tmp_path / name) == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_from_supplied_graph(self, data, tmp_path):
        p = data[3]
        assert run("synth", "--graph", p["graph"], "--labels", p["labels"], "--target-h", 0.5,
                   "--feature-dim", 3, "--out", tmp_path / "s") == 0

    def test_unreachable_target(self, tmp_path, capsys):
        assert run("synth", "--target-h", 0.0, "--out", tmp_path / "s") == 1
        assert "closest" in capsys.readouterr().err
