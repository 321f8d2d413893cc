"""Command-line front end: reproducible experiment commands.

Subcommands build graphs, export spectra, train and evaluate models,
generate synthetic data, and run named end-to-end pipelines. Every
command is deterministic given its flags and seed; reruns overwrite
outputs byte-identically. The only volatile file is ``run_meta.json``
(wall-clock timestamp), written separately so artifact directories stay
diffable.

Exit codes: 0 success, 1 numerical or contract failure, 2 usage error.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import builders, datagen, estimators, hierarchy, matrixio, solver, spectrum
from .errors import GsfaError, ParameterError
from .graph import load_graph, save_graph

_REPRODUCE_NAMES = ("fig6-spectra", "ell-roundtrip", "compact-vs-clustered")


# ---------------------------------------------------------------------------
# small deterministic I/O helpers

def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _echo_config(out_dir, command, params):
    _write_json(Path(out_dir) / "config.json",
                {"command": command, "params": params})


def _write_run_meta(out_dir, command):
    _write_json(Path(out_dir) / "run_meta.json",
                {"command": command, "timestamp": time.time()})


def _read_label_file(path):
    """One float per line; '#' lines are comments."""
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            values.append(float(line))
    if not values:
        raise ParameterError(f"{path}: no label values found")
    return np.asarray(values)


def _write_label_file(path, values):
    Path(path).write_text(
        "\n".join(repr(float(x)) for x in np.asarray(values).ravel()) + "\n")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# ---------------------------------------------------------------------------
# build-graph

def _parse_float_list(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _build_ell_from_flags(args):
    if args.label_set:
        label_set, v = builders.load_labels(args.label_set)
    else:
        if not args.labels:
            raise ParameterError("ell graphs need --labels or --label-set")
        labels = _read_label_file(args.labels)
        n = labels.shape[0]
        rows = [labels]
        if args.auxiliary > 1:
            rows.extend(builders.auxiliary_labels(labels, args.auxiliary))
        raw = np.vstack(rows)
        v = np.ones(n)
        label_set = builders.decorrelate_labels(
            builders.normalize_labels(raw, v), v)
        if args.eigenvalues:
            lams = np.asarray(_parse_float_list(args.eigenvalues))
            if lams.shape[0] != label_set.n_labels:
                raise ParameterError(
                    f"{label_set.n_labels} labels but {lams.shape[0]} eigenvalues")
        else:
            # full weight for the original label, linearly decreasing for
            # the cosine auxiliaries, scaled to unit sum
            n_labels = label_set.n_labels
            lams = np.ones(n_labels)
            if n_labels > 1:
                lams[1:] = np.arange(n_labels - 1, 0, -1) / n_labels
            lams = lams / lams.sum()
        label_set = label_set.with_eigenvalues(lams)
    if args.save_label_set:
        builders.save_labels(label_set, v, args.save_label_set)
    return builders.build_ell_graph(label_set, v, nonnegative=args.nonnegative)


def cmd_build_graph(args):
    if args.kind == "linear":
        graph = builders.build_linear_graph(args.n, variant=args.variant)
    elif args.kind == "clustered":
        sizes = [int(x) for x in _parse_float_list(args.class_sizes)]
        graph = builders.build_clustered_graph(sizes)
    elif args.kind == "serial":
        if not args.labels:
            raise ParameterError("serial graphs need --labels")
        labels = _read_label_file(args.labels)
        graph = builders.build_serial_graph(labels, args.k, policy=args.policy)
    else:
        graph = _build_ell_from_flags(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out)
    report = builders.graph_consistency_report(graph)
    _write_json(out.with_suffix(out.suffix + ".report.json"), report)
    _write_json(out.with_suffix(out.suffix + ".config.json"),
                {"command": "build-graph", "params": _public_args(args)})
    print(f"wrote {out} (n={graph.n_samples}, consistent={report['consistent']}, "
          f"min edge weight={report['min_edge_weight']:.3g})")
    return 0


# ---------------------------------------------------------------------------
# spectrum

def cmd_spectrum(args):
    graph = load_graph(args.graph)
    spec = spectrum.optimal_free_responses(graph)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spectrum.export_spectrum(spec, out_dir / "spectrum.csv",
                             out_dir / "responses.csv")
    if args.edge_percentile is not None:
        spectrum.export_edges(graph, out_dir / "edges.csv",
                              percentile=args.edge_percentile)
    summary = {
        "n": graph.n_samples,
        "q_sum": graph.q_sum,
        "r_sum": graph.r_sum,
        "slow_count": spec.slow_count(),
        "expected_noise_delta": spectrum.expected_noise_delta(graph),
    }
    _write_json(out_dir / "summary.json", summary)
    _echo_config(out_dir, "spectrum", _public_args(args))
    _write_run_meta(out_dir, "spectrum")
    print(f"responses with delta < 2: {summary['slow_count']}")
    return 0


# ---------------------------------------------------------------------------
# train / evaluate

def cmd_train(args):
    data = matrixio.load_matrix(args.data)
    graph = load_graph(args.graph)
    out = Path(args.out)

    if args.hierarchy:
        if not args.image_shape:
            raise ParameterError("--hierarchy requires --image-shape HxW")
        specs = hierarchy.load_architecture(args.hierarchy)
        shape = tuple(int(x) for x in args.image_shape.split("x"))
        images = data.T.reshape(graph.n_samples, *shape)
        network = hierarchy.train_hgsfa(images, graph, specs)
        hierarchy.save_network(network, out)
        deltas = network.layers[-1][(0, 0)].gsfa.deltas.tolist()
        report_path = out / "report.json"
        config_path = out / "config.json"
    else:
        pca = None
        if args.pca:
            pca, data = solver.pca_reduce(data, graph.vertex_weights, args.pca)
        expansion = solver.ExpansionSpec(kind=args.expansion, degree=args.degree)
        expanded = solver.expand(data, expansion)
        model = solver.train_gsfa(expanded, graph, n_features=args.features)
        out.parent.mkdir(parents=True, exist_ok=True)
        solver.save_model(model, out, expansion=expansion, pca=pca)
        deltas = model.deltas.tolist()
        report_path = out.with_suffix(out.suffix + ".report.json")
        config_path = out.with_suffix(out.suffix + ".config.json")

    _write_json(report_path, {"deltas": deltas, "graph": graph.fingerprint()})
    _write_json(config_path, {"command": "train", "params": _public_args(args)})
    print(f"wrote {out}; first deltas: "
          + ", ".join(f"{d:.4f}" for d in deltas[:5]))
    return 0


_REGRESSION_ESTIMATORS = ("linear_scaling", "linear_regression", "soft_gc")


def _fit_and_score(name, feats_train, feats_test, labels_train, labels_test):
    if name == "linear_scaling":
        est = estimators.fit_linear_scaling(feats_train[0], labels_train)
        pred_train = est.predict(feats_train[0])
        pred_test = est.predict(feats_test[0])
    elif name == "linear_regression":
        est = estimators.fit_linear_regression(feats_train, labels_train)
        pred_train = est.predict(feats_train)
        pred_test = est.predict(feats_test)
    elif name == "soft_gc":
        est = estimators.fit_soft_gc(feats_train, labels_train)
        pred_train = est.predict(feats_train)
        pred_test = est.predict(feats_test)
    else:
        raise ParameterError(f"unknown estimator {name!r}")
    return (estimators.rmse(pred_train, labels_train),
            estimators.rmse(pred_test, labels_test))


def cmd_evaluate(args):
    model, expansion, pca = solver.load_model(args.model)
    feats_train = solver.pipeline_extract(
        model, matrixio.load_matrix(args.train_data), expansion=expansion, pca=pca)
    feats_test = solver.pipeline_extract(
        model, matrixio.load_matrix(args.test_data), expansion=expansion, pca=pca)
    labels_train = _read_label_file(args.train_labels)
    labels_test = _read_label_file(args.test_labels)

    names = [s.strip() for s in args.estimators.split(",") if s.strip()]
    d_max = min(args.d_max, feats_train.shape[0])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph_id = model.trained_on.get("checksum", "unknown")
    chance_train = estimators.chance_rmse(labels_train)
    chance_test = estimators.chance_rmse(labels_test)

    rows = []
    long_rows = []
    for name in names:
        for d in range(args.d_min, d_max + 1):
            if name == "nearest_centroid":
                clf = estimators.fit_nearest_centroid(feats_train[:d], labels_train)
                err_train = estimators.error_rate(
                    estimators.classify(clf, feats_train[:d]), labels_train)
                err_test = estimators.error_rate(
                    estimators.classify(clf, feats_test[:d]), labels_test)
                rows.append([graph_id, name, d, "", "", "", "",
                             repr(err_train), repr(err_test)])
                scores = [("error_rate_train", err_train),
                          ("error_rate_test", err_test)]
            else:
                r_train, r_test = _fit_and_score(
                    name, feats_train[:d], feats_test[:d],
                    labels_train, labels_test)
                rows.append([graph_id, name, d, repr(r_train), repr(r_test),
                             repr(chance_train), repr(chance_test), "", ""])
                scores = [("rmse_train", r_train), ("rmse_test", r_test),
                          ("chance_rmse_train", chance_train),
                          ("chance_rmse_test", chance_test)]
            long_rows.extend([name, d, metric, repr(value)]
                             for metric, value in scores)
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["graph", "estimator", "d", "rmse_train", "rmse_test",
                         "chance_rmse_train", "chance_rmse_test",
                         "error_rate_train", "error_rate_test"])
        writer.writerows(rows)
    with open(out_dir / "metrics_long.csv", "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["estimator", "features_used", "metric", "value"])
        writer.writerows(long_rows)
    _echo_config(out_dir, "evaluate", _public_args(args))
    _write_run_meta(out_dir, "evaluate")
    print(f"wrote {out_dir / 'metrics.csv'} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# gen-data

def cmd_gen_data(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "regression":
        spec = datagen.SyntheticRegressionSpec(
            n_samples=args.n, input_dim=args.input_dim,
            n_label_values=args.label_values,
            nonlinearity=args.nonlinearity, noise=args.noise, seed=args.seed)
        data, labels, meta = datagen.gen_regression(spec)
    else:
        spec = datagen.SyntheticClassificationSpec(
            n_classes=args.classes, per_class=args.per_class,
            input_dim=args.input_dim, noise=args.noise, seed=args.seed)
        data, labels, meta = datagen.gen_classification(spec)
    matrixio.save_matrix_csv(data, out_dir / "data.csv")
    matrixio.save_matrix_binary(data, out_dir / "data.bin")
    _write_label_file(out_dir / "labels.txt", labels)
    _write_json(out_dir / "meta.json", meta)
    _echo_config(out_dir, "gen-data", _public_args(args))
    _write_run_meta(out_dir, "gen-data")
    print(f"wrote {out_dir} (I={data.shape[0]}, N={data.shape[1]})")
    return 0


# ---------------------------------------------------------------------------
# reproduce pipelines

def _fig6_label(n):
    """Strictly increasing reference label with a non-uniform shape."""
    idx = np.arange(n, dtype=float)
    return idx + 2.0 * np.sin(idx / 3.0)


def _reproduce_fig6(out_dir, seed):
    label = _fig6_label(30)
    v = np.ones(30)
    graphs = {
        "reordering": builders.build_linear_graph(30, variant="self_loop_extended"),
        "serial": builders.build_serial_graph(label, 15),
    }
    raw = np.vstack([label, builders.auxiliary_labels(label, 4)])
    label_set = builders.decorrelate_labels(builders.normalize_labels(raw, v), v)
    label_set = label_set.with_eigenvalues([0.4, 0.3, 0.2, 0.1])
    graphs["ell4"] = builders.build_ell_graph(label_set, v)

    expected = {"reordering": 14, "serial": 6, "ell4": 4}
    counts = {}
    for name, graph in graphs.items():
        sub = out_dir / name
        sub.mkdir(parents=True, exist_ok=True)
        save_graph(graph, sub / "graph.json")
        spec = spectrum.optimal_free_responses(graph)
        spectrum.export_spectrum(spec, sub / "spectrum.csv", sub / "responses.csv")
        spectrum.export_edges(graph, sub / "edges.csv")
        counts[name] = spec.slow_count()
    checks = {name: counts[name] == expected[name] for name in expected}
    return {"counts": counts, "expected": expected, "checks": checks,
            "passed": all(checks.values())}


def _random_label_set(seed, trial, n, n_labels):
    raw = datagen.counter_normal(seed, 100 + trial, 0, n_labels * n)
    raw = raw.reshape(n_labels, n)
    v = np.ones(n)
    label_set = builders.decorrelate_labels(builders.normalize_labels(raw, v), v)
    lams = np.linspace(1.0, 0.3, n_labels)  # distinct, positive
    return label_set.with_eigenvalues(lams / lams.sum()), v


def _roundtrip_trial(label_set, v):
    graph = builders.build_ell_graph(label_set, v)
    spec = spectrum.optimal_free_responses(graph)
    responses, deltas = spec.feasible_responses()
    n_labels = label_set.n_labels
    label_err = 0.0
    delta_err = 0.0
    targets = builders.deltas_from_eigenvalues(
        label_set.eigenvalues, graph.q_sum, graph.r_sum)
    for j in range(n_labels):
        err = min(float(np.max(np.abs(responses[:, j] - label_set.labels[j]))),
                  float(np.max(np.abs(responses[:, j] + label_set.labels[j]))))
        label_err = max(label_err, err)
        delta_err = max(delta_err, abs(deltas[j] - targets[j]))

    shifted = builders.eliminate_negative_weights(graph)
    min_weight = shifted.gamma_min()
    r_change = abs(shifted.r_sum - graph.r_sum) / graph.r_sum
    spec2 = spectrum.optimal_free_responses(shifted)
    responses2, deltas2 = spec2.feasible_responses()
    # ordering: response j of the shifted graph must match label j
    order_ok = True
    affine_err = 0.0
    c = max(0.0, float(np.max(-graph.gamma_dense()
                              / np.outer(v, v))))
    k = c * graph.q_sum ** 2 / graph.r_sum
    for j in range(n_labels):
        err = min(float(np.max(np.abs(responses2[:, j] - label_set.labels[j]))),
                  float(np.max(np.abs(responses2[:, j] + label_set.labels[j]))))
        if err > 1e-6:
            order_ok = False
        affine_err = max(affine_err,
                         abs(deltas2[j] - (deltas[j] + 2 * k) / (1 + k)))
    return {"max_label_err": label_err, "max_delta_err": delta_err,
            "min_weight_after": min_weight, "r_rel_change": r_change,
            "order_preserved": order_ok, "max_affine_err": affine_err}


def _reproduce_roundtrip(out_dir, seed):
    n_trials = 20
    rows = []
    passed = True
    for trial in range(n_trials):
        n = 8 + int(datagen.counter_uniform(seed, 90, trial, 1)[0] * 57)  # 8..64
        n_labels = 1 + int(datagen.counter_uniform(seed, 91, trial, 1)[0] * 5)
        n_labels = min(n_labels, 5, n - 2)
        label_set, v = _random_label_set(seed, trial, n, n_labels)
        result = _roundtrip_trial(label_set, v)
        ok = (result["max_label_err"] <= 1e-8
              and result["max_delta_err"] <= 1e-10
              and result["min_weight_after"] >= -1e-12
              and result["r_rel_change"] <= 1e-9
              and result["order_preserved"]
              and result["max_affine_err"] <= 1e-9)
        passed = passed and ok
        rows.append([trial, n, n_labels, repr(result["max_label_err"]),
                     repr(result["max_delta_err"]),
                     repr(result["min_weight_after"]),
                     repr(result["r_rel_change"]),
                     int(result["order_preserved"]),
                     repr(result["max_affine_err"]), int(ok)])
    with open(out_dir / "roundtrip.csv", "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["trial", "n", "n_labels", "max_label_err",
                         "max_delta_err", "min_weight_after", "r_rel_change",
                         "order_preserved", "max_affine_err", "ok"])
        writer.writerows(rows)
    return {"trials": n_trials, "passed": passed}


def _canonical_correlations(a, b):
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return np.linalg.svd(qa.T @ qb, compute_uv=False)


def _reproduce_compact(out_dir, seed):
    rows = []
    passed = True
    for n_classes in (2, 4, 8):
        report = builders.clustered_equivalence_check(n_classes, per_class=3)
        ok = report.max_abs_diff <= 1e-10 and report.max_interclass <= 1e-12
        passed = passed and ok
        rows.append([n_classes, 3, repr(report.max_abs_diff),
                     repr(report.max_interclass), int(ok)])
    with open(out_dir / "equivalence.csv", "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["classes", "per_class", "max_abs_diff",
                         "max_interclass", "ok"])
        writer.writerows(rows)

    # subspace agreement of the two feature families on one-hot inputs
    n_classes, per_class = 8, 4
    n = n_classes * per_class
    clustered = builders.build_clustered_graph([per_class] * n_classes)
    compact = builders.compact_binary_labels(n_classes, n_classes - 1)
    label_set = compact.expand([per_class] * n_classes)
    ell = builders.build_ell_graph(label_set, np.ones(n))
    one_hot = np.eye(n)
    feats_c = solver.extract_features(
        solver.train_gsfa(one_hot, clustered, n_features=n_classes - 1), one_hot)
    feats_e = solver.extract_features(
        solver.train_gsfa(one_hot, ell, n_features=n_classes - 1), one_hot)
    correlations = _canonical_correlations(feats_c.T, feats_e.T)
    min_corr = float(correlations.min())
    subspace_ok = min_corr >= 1.0 - 1e-8
    passed = passed and subspace_ok
    return {"passed": passed, "min_canonical_correlation": min_corr,
            "subspace_ok": subspace_ok}


def cmd_reproduce(args):
    if args.name not in _REPRODUCE_NAMES:
        print(f"unknown pipeline {args.name!r}; choose from "
              f"{', '.join(_REPRODUCE_NAMES)}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.name == "fig6-spectra":
        summary = _reproduce_fig6(out_dir, args.seed)
    elif args.name == "ell-roundtrip":
        summary = _reproduce_roundtrip(out_dir, args.seed)
    else:
        summary = _reproduce_compact(out_dir, args.seed)
    summary["pipeline"] = args.name
    summary["seed"] = args.seed
    _write_json(out_dir / "summary.json", summary)
    _echo_config(out_dir, "reproduce", _public_args(args))
    _write_run_meta(out_dir, "reproduce")
    status = "pass" if summary["passed"] else "FAIL"
    print(f"{args.name}: {status}")
    return 0 if summary["passed"] else 1


# ---------------------------------------------------------------------------
# parser

def _public_args(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gsfa",
        description="Graph-based slow feature analysis experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build a training graph file")
    p.add_argument("--kind", required=True,
                   choices=["linear", "clustered", "serial", "ell"])
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=30, help="linear graph size")
    p.add_argument("--variant", default="self_loop_extended",
                   choices=["self_loop_extended", "endpoint_halved_vertex_weights"])
    p.add_argument("--class-sizes", default="", help="clustered: e.g. '4,4,4'")
    p.add_argument("--labels", default=None,
                   help="label file (one value per line) for serial/ell")
    p.add_argument("--k", type=int, default=10, help="serial group count")
    p.add_argument("--policy", default="strict", choices=["strict", "truncate"])
    p.add_argument("--auxiliary", type=int, default=1,
                   help="ell: total labels incl. cosine auxiliaries")
    p.add_argument("--eigenvalues", default=None,
                   help="ell: comma-separated eigenvalue list")
    p.add_argument("--nonnegative", action="store_true",
                   help="ell: eliminate negative edge weights")
    p.add_argument("--label-set", default=None,
                   help="ell: load a prepared label-set container instead")
    p.add_argument("--save-label-set", default=None,
                   help="ell: also write the prepared label-set container")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("spectrum", help="free responses of a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--edge-percentile", type=float, default=None,
                   help="also export the strongest X%% of edges")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("train", help="train a model on data + graph")
    p.add_argument("--data", required=True, help="matrix file (.csv or binary)")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--expansion", default="identity",
                   choices=["identity", "zero_eight_expo", "quadratic",
                            "polynomial"])
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--pca", type=int, default=None,
                   help="PCA dimensions before expansion")
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--hierarchy", default=None,
                   help="architecture config file; trains a network directory")
    p.add_argument("--image-shape", default=None, help="HxW, with --hierarchy")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="sweep estimators over features")
    p.add_argument("--model", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--estimators", default="linear_scaling,linear_regression")
    p.add_argument("--d-min", type=int, default=1)
    p.add_argument("--d-max", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--kind", required=True, choices=["regression", "classification"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--input-dim", type=int, default=8)
    p.add_argument("--label-values", type=int, default=60)
    p.add_argument("--nonlinearity", default="identity")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("reproduce", help="run a named end-to-end pipeline")
    p.add_argument("name", help="|".join(_REPRODUCE_NAMES))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GsfaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
