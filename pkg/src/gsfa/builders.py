"""Constructors for training graphs.

Pre-defined graphs (linear/reordering, clustered, serial) plus the
exact-label pipeline: normalize labels, decorrelate them, synthesize an
edge matrix whose leading free responses equal the labels, eliminate
negative edge weights, derive auxiliary cosine labels, and generate
compact binary per-class labels.

The exact-label construction places each normalized, decorrelated label
l_j as an eigenvector u_j = Q^{-1/2} Diag(v^{1/2}) l_j of the scaled
edge matrix, with a chosen eigenvalue lambda_j, alongside the
consistency eigenvector u_0 = Q^{-1/2} v^{1/2} with eigenvalue R/Q.
Eigenvalues translate to delta values via delta = 2 - (2Q/R) * lambda.
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import (
    ContractError,
    DegenerateLabelError,
    DependentLabelError,
    DimensionError,
    NegativeEigenvalueWarning,
    ParameterError,
    RankError,
    TruncationWarning,
)
from .graph import GraphStructure, TrainingGraph, check_consistency
from .serialize import read_container, write_container

LABELSET_FILE_KIND = "label-set"
LABELSET_FILE_VERSION = 1

#: Tolerance used to verify normalization/decorrelation contracts.
LABEL_CONTRACT_TOL = 1e-9


@dataclass(frozen=True)
class LabelSet:
    """L target labels over N samples plus their eigenvalue weights.

    ``label_stats`` records (mu, sigma) per label at normalization time
    so estimates can be mapped back to the original label range.
    ``mixing`` records the invertible transform applied by
    :func:`decorrelate_labels` (decorrelated = mixing @ normalized).
    """

    labels: np.ndarray
    eigenvalues: np.ndarray
    normalized: bool = False
    decorrelated: bool = False
    label_stats: np.ndarray = field(default=None)
    mixing: np.ndarray = field(default=None)

    def __post_init__(self):
        labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        lams = np.asarray(self.eigenvalues, dtype=float).ravel()
        if lams.shape[0] != labels.shape[0]:
            raise DimensionError("need one eigenvalue per label")
        if np.any(lams < 0):
            warnings.warn("negative eigenvalues correspond to delta > 2 targets",
                          NegativeEigenvalueWarning, stacklevel=2)
        stats = self.label_stats
        if stats is None:
            stats = np.column_stack([np.zeros(labels.shape[0]),
                                     np.ones(labels.shape[0])])
        stats = np.asarray(stats, dtype=float)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "eigenvalues", lams)
        object.__setattr__(self, "label_stats", stats)

    @property
    def n_labels(self):
        return self.labels.shape[0]

    @property
    def n_samples(self):
        return self.labels.shape[1]

    def with_eigenvalues(self, eigenvalues):
        return replace(self, eigenvalues=np.asarray(eigenvalues, dtype=float))


# ---------------------------------------------------------------------------
# pre-defined graphs

def build_linear_graph(n, variant="self_loop_extended"):
    """Chain graph over n samples with unit edge weights.

    variant "endpoint_halved_vertex_weights": interior vertices get
    weight 2, the two endpoints weight 1. variant "self_loop_extended":
    all vertex weights 1 and unit self-loops on both endpoints. Both
    satisfy the consistency restriction.
    """
    if n < 2:
        raise ParameterError(f"linear graph needs n >= 2, got {n}")
    if variant not in ("endpoint_halved_vertex_weights", "self_loop_extended"):
        raise ParameterError(f"unknown linear-graph variant {variant!r}")
    idx = np.arange(n - 1)
    rows = np.concatenate([idx, idx + 1])
    cols = np.concatenate([idx + 1, idx])
    vals = np.ones(2 * (n - 1))
    if variant == "self_loop_extended":
        rows = np.concatenate([rows, [0, n - 1]])
        cols = np.concatenate([cols, [0, n - 1]])
        vals = np.concatenate([vals, [1.0, 1.0]])
        v = np.ones(n)
    else:
        v = np.full(n, 2.0)
        v[0] = v[-1] = 1.0
    gamma = sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(n, n)))
    return TrainingGraph(v, gamma)


def build_clustered_graph(class_sizes):
    """Per-class fully connected graph with weights 1/(N_c - 1).

    Vertex weights are 1; there are no inter-class edges. Solving on
    this graph is the discriminant-analysis setting: the first C-1 free
    responses are constant within classes with delta 0.
    """
    sizes = [int(s) for s in class_sizes]
    if not sizes:
        raise ParameterError("need at least one class")
    if any(s < 2 for s in sizes):
        raise ParameterError(f"every class needs >= 2 samples, got {sizes}")
    n = sum(sizes)
    rows, cols, vals = [], [], []
    start = 0
    groups = []
    for size in sizes:
        members = np.arange(start, start + size)
        groups.append(members)
        w = 1.0 / (size - 1)
        for a in members:
            for b in members:
                if a != b:
                    rows.append(a)
                    cols.append(b)
                    vals.append(w)
        start += size
    gamma = sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(n, n)))
    structure = GraphStructure("clustered", tuple(groups))
    return TrainingGraph(np.ones(n), gamma, structure=structure)


def serial_groups(labels, k, policy="strict"):
    """Group assignment for the serial graph.

    Samples are stable-sorted by (label, original index) and split into
    k equal groups. Returns (group_index, kept) where ``group_index``
    maps each original sample to its group (-1 if dropped) and ``kept``
    lists the retained sample indices in sorted-label order.

    policy "strict" errors when k does not divide N; "truncate" drops
    the N mod k largest-label samples with a warning.
    """
    labels = np.asarray(labels, dtype=float).ravel()
    n = labels.shape[0]
    if k < 2 or k > n:
        raise ParameterError(f"need 2 <= k <= N, got k={k}, N={n}")
    remainder = n % k
    if remainder and policy == "strict":
        raise ParameterError(
            f"N={n} not divisible by k={k}; use policy='truncate' to drop samples")
    if remainder and policy != "truncate":
        raise ParameterError(f"unknown remainder policy {policy!r}")
    order = np.argsort(labels, kind="stable")
    kept = order[:n - remainder]
    if remainder:
        warnings.warn(f"dropped {remainder} largest-label samples to make "
                      f"N divisible by k={k}", TruncationWarning, stacklevel=2)
    group_index = np.full(n, -1, dtype=int)
    size = (n - remainder) // k
    for g in range(k):
        group_index[kept[g * size:(g + 1) * size]] = g
    return group_index, kept


def build_serial_graph(labels, k, policy="strict"):
    """Label-sorted group graph: consecutive groups fully interconnected.

    All edge weights are 1; vertices of the two extreme groups weigh 1,
    interior vertices weigh 2, which makes the graph consistent. Under
    policy "truncate" the returned graph covers only the kept samples
    (N - N mod k of them, in original order).
    """
    group_index, _ = serial_groups(labels, k, policy=policy)
    group_index = group_index[group_index >= 0]  # kept samples, original order
    n = group_index.shape[0]
    groups = [np.flatnonzero(group_index == g) for g in range(k)]
    rows, cols, vals = [], [], []
    for g in range(k - 1):
        for a in groups[g]:
            for b in groups[g + 1]:
                rows.extend((a, b))
                cols.extend((b, a))
                vals.extend((1.0, 1.0))
    gamma = sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(n, n)))
    v = np.full(n, 2.0)
    v[groups[0]] = 1.0
    v[groups[-1]] = 1.0
    structure = GraphStructure("serial", tuple(groups))
    return TrainingGraph(v, gamma, structure=structure)


# ---------------------------------------------------------------------------
# label pipeline

def normalize_labels(raw, vertex_weights):
    """Scale each label row to weighted zero mean and unit variance.

    Records (mu, sigma) per label for the inverse mapping. Eigenvalues
    default to the uniform schedule 1/L.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    v = np.asarray(vertex_weights, dtype=float)
    if raw.shape[1] != v.shape[0]:
        raise DimensionError("labels and vertex weights differ in length")
    q = v.sum()
    out = np.empty_like(raw)
    stats = np.empty((raw.shape[0], 2))
    for j, row in enumerate(raw):
        mu = float(v @ row) / q
        centered = row - mu
        var = float(centered @ (v * centered)) / q
        if var <= 0 or not np.isfinite(var):
            raise DegenerateLabelError(f"label {j} has zero weighted variance")
        sigma = math.sqrt(var)
        out[j] = centered / sigma
        stats[j] = (mu, sigma)
    n_labels = raw.shape[0]
    return LabelSet(out, np.full(n_labels, 1.0 / n_labels),
                    normalized=True, decorrelated=(n_labels == 1),
                    label_stats=stats)


def decorrelate_labels(label_set, vertex_weights):
    """Project each label out of the later ones, then renormalize.

    Sequential weighted Gram-Schmidt under the (1/Q) Diag(v) inner
    product. The applied transform is invertible and recorded in
    ``mixing``. Labels that become (numerically) zero raise
    :class:`DependentLabelError`.
    """
    if not label_set.normalized:
        raise ContractError("labels must be normalized before decorrelation")
    v = np.asarray(vertex_weights, dtype=float)
    q = v.sum()
    labels = label_set.labels.copy()
    n_labels = labels.shape[0]
    mixing = np.eye(n_labels)
    for jp in range(1, n_labels):
        for j in range(jp):
            coeff = float(labels[jp] @ (v * labels[j])) / q
            labels[jp] -= coeff * labels[j]
            mixing[jp] -= coeff * mixing[j]
        var = float(labels[jp] @ (v * labels[jp])) / q
        if var < 1e-12:
            raise DependentLabelError(
                f"label {jp} is weighted-linearly dependent on labels 0..{jp - 1}")
        sigma = math.sqrt(var)
        labels[jp] /= sigma
        mixing[jp] /= sigma
    return replace(label_set, labels=labels, decorrelated=True, mixing=mixing)


def _check_label_contracts(label_set, v, q):
    labels = label_set.labels
    means = (labels @ v) / q
    if np.max(np.abs(means)) > LABEL_CONTRACT_TOL:
        raise ContractError(
            f"labels are not weight-normalized (max mean {np.max(np.abs(means)):.2e})")
    gram = (labels * v) @ labels.T / q
    if np.max(np.abs(gram - np.eye(labels.shape[0]))) > LABEL_CONTRACT_TOL:
        raise ContractError("labels are not weighted-decorrelated/unit-variance")


def build_ell_graph(label_set, vertex_weights, nonnegative=False,
                    target_r_sum=None):
    """Edge matrix whose leading free responses are the given labels.

    Eigenvalue lambda_j of label j sets its delta value through
    delta_j = 2 - (2Q/R) lambda_j; all unused directions get eigenvalue
    0 (delta exactly 2). R defaults to Q so that the consistency
    eigenvalue R/Q is 1; pass ``target_r_sum`` to choose another scale.
    With ``nonnegative=True`` the negative-weight elimination step is
    applied to the result.
    """
    if not (label_set.normalized and label_set.decorrelated):
        raise ContractError("exact-label graphs need normalized, decorrelated labels")
    v = np.asarray(vertex_weights, dtype=float)
    if v.shape[0] != label_set.n_samples:
        raise DimensionError("vertex weights and labels differ in length")
    n = v.shape[0]
    if label_set.n_labels > n - 1:
        raise RankError(f"at most N-1={n - 1} labels fit, got {label_set.n_labels}")
    lams = label_set.eigenvalues
    if np.sum(lams) <= 0:
        raise ContractError("eigenvalues must have positive sum")
    if np.any(lams < 0):
        warnings.warn("building with negative eigenvalues (delta > 2 targets)",
                      NegativeEigenvalueWarning, stacklevel=2)
    q = float(v.sum())
    _check_label_contracts(label_set, v, q)
    r = q if target_r_sum is None else float(target_r_sum)
    if r <= 0:
        raise ParameterError("target edge-weight sum must be > 0")
    sqrt_v = np.sqrt(v)
    # columns: u_0 then one u_j per label; M = sum lambda_j u_j u_j^T
    u = np.column_stack([sqrt_v] + [sqrt_v * row for row in label_set.labels])
    u /= math.sqrt(q)
    weights = np.concatenate([[r / q], lams])
    m = (u * weights) @ u.T
    gamma = sqrt_v[:, None] * m * sqrt_v[None, :]
    gamma = (gamma + gamma.T) / 2.0
    graph = TrainingGraph(v, gamma)
    if nonnegative:
        graph = eliminate_negative_weights(graph)
    return graph


def eigenvalues_from_deltas(deltas, q_sum, r_sum):
    """lambda_j = (R / 2Q) * (2 - delta_j); delta > 2 gives lambda < 0."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas > 2):
        warnings.warn("delta targets above 2 produce negative eigenvalues",
                      NegativeEigenvalueWarning, stacklevel=2)
    return r_sum / (2.0 * q_sum) * (2.0 - deltas)


def deltas_from_eigenvalues(eigenvalues, q_sum, r_sum):
    """Inverse of :func:`eigenvalues_from_deltas`."""
    return 2.0 - (2.0 * q_sum / r_sum) * np.asarray(eigenvalues, dtype=float)


def eliminate_negative_weights(graph):
    """Shift edge weights to be non-negative without changing solutions.

    With c = max(-gamma_{n,n'} / (v_n v_n')), the new weights are
    (gamma + c v v^T) / (1 + c Q^2 / R). R and the consistency property
    are preserved; every delta value maps affinely through
    delta' = (delta + 2cQ^2/R) / (1 + cQ^2/R), keeping order and the
    fixed point delta = 2. Graphs without negative weights are returned
    unchanged.
    """
    v = graph.vertex_weights
    if np.any(v <= 0):
        raise ContractError("elimination requires strictly positive vertex weights")
    gamma = graph.gamma_dense()
    c = float(np.max(-gamma / np.outer(v, v)))
    if c <= 0:
        return graph
    scale = 1.0 + c * graph.q_sum ** 2 / graph.r_sum
    shifted = (gamma + c * np.outer(v, v)) / scale
    shifted = np.maximum(shifted, 0.0)  # clamp -0.0/rounding at the arg max
    shifted = (shifted + shifted.T) / 2.0
    return TrainingGraph(v, shifted, structure=graph.structure)


def auxiliary_labels(first_label, k):
    """Cosine harmonics of the span of the first label.

    Row k-2 holds cos((l1 - min) / (max - min) * pi * k / 2) for
    k = 2..K, so the cosine argument spans [0, pi] at k=2, [0, 3pi/2]
    at k=3, and so on: progressively higher-frequency companions of the
    original label. Rows are raw; normalize and decorrelate afterwards.
    """
    l1 = np.asarray(first_label, dtype=float).ravel()
    if k < 2:
        raise ParameterError(f"need k >= 2, got {k}")
    lo, hi = float(np.min(l1)), float(np.max(l1))
    if hi <= lo:
        raise DegenerateLabelError("constant label has no harmonics")
    t = (l1 - lo) / (hi - lo)
    return np.array([np.cos(t * math.pi * kk / 2.0) for kk in range(2, k + 1)])


# ---------------------------------------------------------------------------
# compact binary class labels

@dataclass(frozen=True)
class CompactLabels:
    """Per-class binary (+-1) codes and their default eigenvalues."""

    per_class: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_labels(self):
        return self.per_class.shape[0]

    @property
    def n_classes(self):
        return self.per_class.shape[1]

    def expand(self, class_sizes):
        """Per-sample LabelSet for samples grouped by class.

        Classes must be balanced: the codes are exactly normalized and
        decorrelated only under equal class sizes.
        """
        sizes = np.asarray(class_sizes, dtype=int)
        if sizes.shape[0] != self.n_classes:
            raise DimensionError("need one class size per class")
        if np.any(sizes < 1):
            raise ParameterError("class sizes must be >= 1")
        if np.unique(sizes).size != 1:
            raise ContractError("compact binary labels require balanced classes")
        labels = np.repeat(self.per_class, sizes[0], axis=1)
        return LabelSet(labels, self.eigenvalues, normalized=True,
                        decorrelated=True)


def compact_binary_labels(n_classes, n_labels=None):
    """Binary class codes packing discrimination into few labels.

    For C = 2^B classes, label j <= B is the j-th bit of the class
    index mapped to {-1, +1}; the remaining labels are signed products
    of two or more of the first B (the full B-fold product first, then
    all (B-1)-fold products, ..., down to the 2-fold products, each
    flipped if needed so class 1 receives -1). Over balanced classes
    the rows are exactly zero-mean, unit-variance, and decorrelated.

    Default eigenvalues: equal for the first B labels, then linearly
    decreasing toward 0 for the product labels, scaled to sum 1.
    """
    c = int(n_classes)
    b = c.bit_length() - 1
    if c < 2 or 2 ** b != c:
        raise ParameterError(f"number of classes must be a power of two, got {c}")
    if n_labels is None:
        n_labels = c - 1
    if n_labels > c - 1:
        raise RankError(f"at most C-1={c - 1} decorrelated labels exist, got {n_labels}")
    if n_labels < b:
        raise ParameterError(
            f"need at least log2(C)={b} labels to separate {c} classes")
    cls = np.arange(1, c + 1)
    base = [2.0 * (((cls - 1) // 2 ** (b - j)) % 2) - 1.0 for j in range(1, b + 1)]
    labels = list(base)
    for size in range(b, 1, -1):
        for combo in itertools.combinations(range(b), size):
            if len(labels) >= n_labels:
                break
            prod = np.ones(c)
            for i in combo:
                prod = prod * base[i]
            if prod[0] > 0:
                prod = -prod
            labels.append(prod)
        if len(labels) >= n_labels:
            break
    labels = np.array(labels[:n_labels])

    n_aux = n_labels - b
    pre = np.ones(n_labels)
    if n_aux:
        pre[b:] = (np.arange(n_aux, 0, -1)) / (n_aux + 1)
    return CompactLabels(labels, pre / pre.sum())


@dataclass(frozen=True)
class EquivalenceReport:
    """Comparison of a compact+(C-1) graph against the clustered graph."""

    n_classes: int
    per_class: int
    max_abs_diff: float
    max_interclass: float
    equivalent: bool
    tol: float


def clustered_equivalence_check(n_classes, per_class, eigenvalues=None,
                                tol=1e-10):
    """Test that compact+(C-1) with equal eigenvalues is the clustered graph.

    Builds the exact-label graph from all C-1 binary codes with
    eigenvalues 1/(C-1) each (and the matching consistency eigenvalue,
    i.e. edge-weight sum Q/(C-1)), removes self-loops, rescales both
    edge matrices to unit sum, and reports the maximum absolute
    difference plus the largest surviving inter-class entry. Unequal
    eigenvalues leave inter-class transitions uncancelled and are
    reported as non-equivalent.
    """
    if per_class < 2:
        raise ParameterError("need per_class >= 2")
    compact = compact_binary_labels(n_classes, n_classes - 1)
    if eigenvalues is None:
        eigenvalues = np.full(n_classes - 1, 1.0 / (n_classes - 1))
    else:
        eigenvalues = np.asarray(eigenvalues, dtype=float)
    label_set = compact.expand([per_class] * n_classes).with_eigenvalues(eigenvalues)
    n = n_classes * per_class
    v = np.ones(n)
    # lambda_0 must match the common label eigenvalue for inter-class
    # transitions to cancel; R = Q * lambda is that choice.
    common = float(np.mean(eigenvalues))
    ell = build_ell_graph(label_set, v, target_r_sum=n * common)
    gamma = ell.gamma_dense()
    np.fill_diagonal(gamma, 0.0)

    clustered = build_clustered_graph([per_class] * n_classes).gamma_dense()
    gamma_n = gamma / np.abs(gamma).sum()
    clustered_n = clustered / clustered.sum()
    inter = gamma.copy()
    for cidx in range(n_classes):
        sl = slice(cidx * per_class, (cidx + 1) * per_class)
        inter[sl, sl] = 0.0
    max_diff = float(np.max(np.abs(gamma_n - clustered_n)))
    max_inter = float(np.max(np.abs(inter)))
    return EquivalenceReport(n_classes, per_class, max_diff, max_inter,
                             equivalent=max_diff <= tol, tol=tol)


# ---------------------------------------------------------------------------
# label-set file format

def save_labels(label_set, vertex_weights, path):
    payload = {
        "labels": np.asarray(label_set.labels).tolist(),
        "eigenvalues": np.asarray(label_set.eigenvalues).tolist(),
        "vertex_weights": np.asarray(vertex_weights, dtype=float).tolist(),
        "mu_sigma": np.asarray(label_set.label_stats).tolist(),
        "normalized": bool(label_set.normalized),
        "decorrelated": bool(label_set.decorrelated),
    }
    if label_set.mixing is not None:
        payload["mixing"] = np.asarray(label_set.mixing).tolist()
    write_container(path, LABELSET_FILE_KIND, LABELSET_FILE_VERSION, payload)


def load_labels(path):
    """Read a label-set container; returns (LabelSet, vertex_weights)."""
    data = read_container(path, LABELSET_FILE_KIND, {LABELSET_FILE_VERSION})
    mixing = np.asarray(data["mixing"]) if "mixing" in data else None
    label_set = LabelSet(
        np.asarray(data["labels"], dtype=float),
        np.asarray(data["eigenvalues"], dtype=float),
        normalized=data["normalized"],
        decorrelated=data["decorrelated"],
        label_stats=np.asarray(data["mu_sigma"], dtype=float),
        mixing=mixing,
    )
    return label_set, np.asarray(data["vertex_weights"], dtype=float)


def graph_consistency_report(graph, tol=None):
    """Consistency summary dict for reports written next to graph files."""
    report = check_consistency(graph, tol=tol)
    return {
        "consistent": report.ok,
        "max_residual": report.max_residual,
        "tol": report.tol,
        "q_sum": graph.q_sum,
        "r_sum": graph.r_sum,
        "n": graph.n_samples,
        "min_edge_weight": graph.gamma_min(),
    }
