import csv
import json

import numpy as np
import pytest

import gsfa
from gsfa.cli import main


def _run(*argv):
    return main([str(a) for a in argv])


def _write_labels(path, values):
    path.write_text("\n".join(repr(float(v)) for v in values) + "\n")


# ---------------------------------------------------------------------------
# build-graph

def test_build_graph_serial(tmp_path):
    labels = tmp_path / "labels.txt"
    _write_labels(labels, np.arange(30.0))
    out = tmp_path / "serial.json"
    assert _run("build-graph", "--kind", "serial", "--labels", labels,
                "--k", "15", "--out", out) == 0
    graph = gsfa.load_graph(out)
    assert gsfa.check_consistency(graph).ok
    report = json.loads((tmp_path / "serial.json.report.json").read_text())
    assert report["consistent"] is True


def test_build_graph_ell_nonnegative(tmp_path):
    labels = tmp_path / "labels.txt"
    _write_labels(labels, np.linspace(-2, 2, 24))
    out = tmp_path / "ell.json"
    assert _run("build-graph", "--kind", "ell", "--labels", labels,
                "--auxiliary", "4", "--nonnegative", "--out", out) == 0
    graph = gsfa.load_graph(out)
    assert graph.gamma_min() >= -1e-15


def test_build_graph_ell_label_set_round_trip(tmp_path):
    labels = tmp_path / "labels.txt"
    _write_labels(labels, np.linspace(-1, 1, 16))
    out1 = tmp_path / "ell1.json"
    ls_path = tmp_path / "prepared.json"
    assert _run("build-graph", "--kind", "ell", "--labels", labels,
                "--auxiliary", "3", "--save-label-set", ls_path,
                "--out", out1) == 0
    out2 = tmp_path / "ell2.json"
    assert _run("build-graph", "--kind", "ell", "--label-set", ls_path,
                "--out", out2) == 0
    g1, g2 = gsfa.load_graph(out1), gsfa.load_graph(out2)
    np.testing.assert_allclose(g2.gamma_dense(), g1.gamma_dense(), atol=1e-15)


def test_build_graph_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        _run("build-graph", "--kind", "bogus", "--out", "x.json")
    assert exc.value.code == 2


def test_build_graph_domain_error_exit_1(tmp_path):
    labels = tmp_path / "labels.txt"
    _write_labels(labels, np.arange(7.0))
    assert _run("build-graph", "--kind", "serial", "--labels", labels,
                "--k", "3", "--out", tmp_path / "g.json") == 1


# ---------------------------------------------------------------------------
# spectrum

@pytest.mark.parametrize("kind,flags,expected", [
    ("linear", ["--n", "30"], 14),
])
def test_spectrum_counts(tmp_path, kind, flags, expected):
    out = tmp_path / "graph.json"
    assert _run("build-graph", "--kind", kind, *flags, "--out", out) == 0
    assert _run("spectrum", "--graph", out, "--out-dir", tmp_path / "spec") == 0
    summary = json.loads((tmp_path / "spec" / "summary.json").read_text())
    assert summary["slow_count"] == expected
    assert (tmp_path / "spec" / "spectrum.csv").exists()
    assert (tmp_path / "spec" / "responses.csv").exists()


# ---------------------------------------------------------------------------
# gen-data / train / evaluate

def _make_dataset(tmp_path, n=240, values=12, noise=0.05):
    data_dir = tmp_path / "data"
    assert _run("gen-data", "--kind", "regression", "--out-dir", data_dir,
                "--n", n, "--label-values", values, "--input-dim", 4,
                "--noise", noise) == 0
    return data_dir


def test_train_and_evaluate_flow(tmp_path):
    data_dir = _make_dataset(tmp_path)
    graph_path = tmp_path / "ell.json"
    assert _run("build-graph", "--kind", "ell", "--labels",
                data_dir / "labels.txt", "--auxiliary", "3",
                "--out", graph_path) == 0
    model_path = tmp_path / "model.json"
    assert _run("train", "--data", data_dir / "data.csv", "--graph", graph_path,
                "--out", model_path) == 0
    report = json.loads((tmp_path / "model.json.report.json").read_text())
    deltas = report["deltas"]
    assert deltas == sorted(deltas)

    eval_dir = tmp_path / "eval"
    assert _run("evaluate", "--model", model_path,
                "--train-data", data_dir / "data.csv",
                "--train-labels", data_dir / "labels.txt",
                "--test-data", data_dir / "data.csv",
                "--test-labels", data_dir / "labels.txt",
                "--estimators", "linear_scaling,linear_regression",
                "--d-min", "1", "--d-max", "3",
                "--out-dir", eval_dir) == 0
    with open(eval_dir / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6  # 2 estimators x 3 d values
    for row in rows:
        assert float(row["rmse_train"]) <= float(row["chance_rmse_train"]) + 1e-9
    with open(eval_dir / "metrics_long.csv") as fh:
        long_rows = list(csv.DictReader(fh))
    assert len(long_rows) == 24  # 4 metrics per (estimator, d) pair
    assert {r["metric"] for r in long_rows} == {
        "rmse_train", "rmse_test", "chance_rmse_train", "chance_rmse_test"}


def test_train_mismatched_sizes_exit_1(tmp_path):
    data_dir = _make_dataset(tmp_path)
    graph_path = tmp_path / "g.json"
    assert _run("build-graph", "--kind", "linear", "--n", "10",
                "--out", graph_path) == 0
    assert _run("train", "--data", data_dir / "data.csv", "--graph", graph_path,
                "--out", tmp_path / "m.json") == 1


def test_evaluate_rows_per_estimator(tmp_path):
    data_dir = _make_dataset(tmp_path)
    graph_path = tmp_path / "serial.json"
    assert _run("build-graph", "--kind", "serial", "--labels",
                data_dir / "labels.txt", "--k", "12", "--out", graph_path) == 0
    model_path = tmp_path / "model.json"
    assert _run("train", "--data", data_dir / "data.csv", "--graph", graph_path,
                "--out", model_path, "--features", "4") == 0
    eval_dir = tmp_path / "eval"
    assert _run("evaluate", "--model", model_path,
                "--train-data", data_dir / "data.csv",
                "--train-labels", data_dir / "labels.txt",
                "--test-data", data_dir / "data.csv",
                "--test-labels", data_dir / "labels.txt",
                "--estimators", "linear_regression",
                "--d-min", "1", "--d-max", "4",
                "--out-dir", eval_dir) == 0
    with open(eval_dir / "metrics.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_train_with_pca_and_expansion_then_evaluate(tmp_path):
    data_dir = _make_dataset(tmp_path)
    graph_path = tmp_path / "serial.json"
    assert _run("build-graph", "--kind", "serial", "--labels",
                data_dir / "labels.txt", "--k", "12", "--out", graph_path) == 0
    model_path = tmp_path / "model.json"
    assert _run("train", "--data", data_dir / "data.csv", "--graph", graph_path,
                "--out", model_path, "--pca", "3", "--expansion", "quadratic",
                "--features", "2") == 0
    eval_dir = tmp_path / "eval"
    assert _run("evaluate", "--model", model_path,
                "--train-data", data_dir / "data.csv",
                "--train-labels", data_dir / "labels.txt",
                "--test-data", data_dir / "data.csv",
                "--test-labels", data_dir / "labels.txt",
                "--estimators", "linear_scaling",
                "--d-min", "1", "--d-max", "1",
                "--out-dir", eval_dir) == 0
    with open(eval_dir / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["rmse_train"]) <= float(rows[0]["chance_rmse_train"])


def test_train_hierarchy_network_dir(tmp_path, rng=np.random.default_rng(0)):
    n = 60
    labels = np.repeat(np.linspace(-1, 1, 10), 6)
    images = (np.outer(np.linspace(0.2, 1.0, 16), labels)
              + 0.05 * rng.normal(size=(16, n)))
    data_path = tmp_path / "data.csv"
    gsfa.save_matrix_csv(images, data_path)
    labels_path = tmp_path / "labels.txt"
    _write_labels(labels_path, labels)
    graph_path = tmp_path / "g.json"
    assert _run("build-graph", "--kind", "serial", "--labels", labels_path,
                "--k", "10", "--out", graph_path) == 0
    arch_path = tmp_path / "arch.json"
    gsfa.hierarchy.save_architecture([
        gsfa.LayerSpec(grid=(2, 2), receptive_field=(2, 2), out_dims=3),
        gsfa.LayerSpec(grid=(1, 1), receptive_field=(2, 2), out_dims=3),
    ], arch_path)
    net_dir = tmp_path / "net"
    assert _run("train", "--data", data_path, "--graph", graph_path,
                "--hierarchy", arch_path, "--image-shape", "4x4",
                "--out", net_dir) == 0
    network = gsfa.load_network(net_dir)
    feats = gsfa.network_extract(network, images.T.reshape(n, 4, 4))
    assert feats.shape == (3, n)


def test_spectrum_edge_percentile(tmp_path):
    labels = tmp_path / "labels.txt"
    _write_labels(labels, np.linspace(0, 1, 20))
    out = tmp_path / "ell.json"
    assert _run("build-graph", "--kind", "ell", "--labels", labels,
                "--out", out) == 0
    assert _run("spectrum", "--graph", out, "--out-dir", tmp_path / "s",
                "--edge-percentile", "30") == 0
    assert (tmp_path / "s" / "edges.csv").exists()


# ---------------------------------------------------------------------------
# reproduce

def test_reproduce_unknown_name_exit_2(tmp_path):
    assert _run("reproduce", "no-such-pipeline", "--out-dir", tmp_path) == 2


def test_reproduce_fig6_passes(tmp_path):
    assert _run("reproduce", "fig6-spectra", "--out-dir", tmp_path / "r") == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["counts"] == {"reordering": 14, "serial": 6, "ell4": 4}


def test_rerun_overwrites_byte_identical(tmp_path):
    data_dir = tmp_path / "d1"
    assert _run("gen-data", "--kind", "classification", "--out-dir", data_dir,
                "--classes", "4", "--per-class", "5") == 0
    first = {p.name: p.read_bytes() for p in data_dir.iterdir()
             if p.name != "run_meta.json"}
    assert _run("gen-data", "--kind", "classification", "--out-dir", data_dir,
                "--classes", "4", "--per-class", "5") == 0
    second = {p.name: p.read_bytes() for p in data_dir.iterdir()
              if p.name != "run_meta.json"}
    assert first == second
