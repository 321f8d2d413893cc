"""Linear graph-based SFA: moment matrices, training, extraction.

Training solves the two-step problem: find a sphering matrix S with
S^T C S = I for the weighted sample covariance C, then a rotation
diagonalizing the sphered edge-difference second-moment matrix. The
projection W = S * rotation yields features y(n) = W^T (x(n) - mean)
with weighted zero mean, unit variance, mutual decorrelation, and
minimal delta values in the linear span of the inputs.

Also houses the nonlinear expansion functions and weighted PCA used as
node-level preprocessing.
"""

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

from .errors import (
    ContractError,
    DimensionError,
    InconsistentGraphWarning,
    ParameterError,
    SingularityError,
)
from .graph import check_consistency
from .serialize import read_container, write_container

MODEL_FILE_KIND = "gsfa-model"
MODEL_FILE_VERSION = 1

MAX_EXPANSION_DEGREE = 6


# ---------------------------------------------------------------------------
# expansions

@dataclass(frozen=True)
class ExpansionSpec:
    """Nonlinear expansion applied sample-wise before linear training.

    kinds: "identity"; "zero_eight_expo" appends |x_i|^0.8 terms,
    doubling the dimensionality; "quadratic" appends all monomials
    x_i x_j with i <= j; "polynomial" appends all monomials of total
    degree 2..degree. Monomial order is fixed (degree-major, then
    lexicographic index tuples) so models are reproducible.
    """

    kind: str = "identity"
    degree: int = 2

    def __post_init__(self):
        if self.kind not in ("identity", "zero_eight_expo", "quadratic",
                             "polynomial"):
            raise ParameterError(f"unknown expansion kind {self.kind!r}")
        if self.kind == "polynomial":
            if self.degree < 1:
                raise ParameterError("polynomial degree must be >= 1")
            if self.degree > MAX_EXPANSION_DEGREE:
                raise ParameterError(
                    f"polynomial degree capped at {MAX_EXPANSION_DEGREE}")

    def output_dim(self, input_dim):
        if self.kind == "identity":
            return input_dim
        if self.kind == "zero_eight_expo":
            return 2 * input_dim
        degree = 2 if self.kind == "quadratic" else self.degree
        return sum(math.comb(input_dim + d - 1, d) for d in range(1, degree + 1))

    def to_dict(self):
        return {"kind": self.kind, "degree": self.degree}

    @classmethod
    def from_dict(cls, data):
        return cls(kind=data["kind"], degree=data.get("degree", 2))


def expand(data, spec):
    """Apply an expansion to an I x N matrix; returns I' x N."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if spec.kind == "identity":
        return data.copy()
    if spec.kind == "zero_eight_expo":
        return np.vstack([data, np.abs(data) ** 0.8])
    degree = 2 if spec.kind == "quadratic" else spec.degree
    n_in = data.shape[0]
    parts = [data]
    for d in range(2, degree + 1):
        for combo in combinations_with_replacement(range(n_in), d):
            mono = data[combo[0]].copy()
            for i in combo[1:]:
                mono = mono * data[i]
            parts.append(mono[None, :])
    return np.vstack(parts)


# ---------------------------------------------------------------------------
# moment matrices

def weighted_mean(data, vertex_weights):
    """(1/Q) * sum_n v_n x(n)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    v = np.asarray(vertex_weights, dtype=float)
    if data.shape[1] != v.shape[0]:
        raise DimensionError("data columns and vertex weights differ in length")
    return data @ v / v.sum()


def sample_covariance(data, vertex_weights):
    """Weighted sample covariance around the weighted mean."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    v = np.asarray(vertex_weights, dtype=float)
    if data.shape[1] != v.shape[0]:
        raise DimensionError("data columns and vertex weights differ in length")
    centered = data - weighted_mean(data, v)[:, None]
    cov = (centered * v) @ centered.T / v.sum()
    return (cov + cov.T) / 2.0


def derivative_covariance(data, graph, path="pairwise"):
    """Edge-weighted second moment of sample differences.

    (1/R) * sum_{n,n'} gamma_{n,n'} (x(n') - x(n)) (x(n') - x(n))^T.

    path "pairwise" evaluates the sum edge by edge (works for any
    graph); "consistent_form" uses
    (2/Q) X Diag(v) X^T - (2/R) X gamma X^T, valid only on consistent
    graphs; "structured" uses group sums, valid only for graphs built
    with clustered or serial structure.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != graph.n_samples:
        raise DimensionError("data columns and graph size differ")
    if path == "pairwise":
        return _dcov_pairwise(data, graph)
    if path == "consistent_form":
        report = check_consistency(graph)
        if not report.ok:
            raise ContractError(
                "consistent_form path requires a consistent graph "
                f"(max residual {report.max_residual:.3e})")
        return _dcov_consistent(data, graph)
    if path == "structured":
        return _dcov_structured(data, graph)
    raise ParameterError(f"unknown derivative-covariance path {path!r}")


def _dcov_pairwise(data, graph):
    gamma = graph.edge_weights
    coo = sp.coo_array(gamma) if graph.is_sparse else None
    if coo is not None:
        diffs = data[:, coo.col] - data[:, coo.row]
        dcov = (diffs * coo.data) @ diffs.T
    else:
        dcov = np.zeros((data.shape[0], data.shape[0]))
        dense = graph.edge_weights
        for n in range(graph.n_samples):
            row = dense[n]
            nz = np.flatnonzero(row)
            if nz.size == 0:
                continue
            diffs = data[:, nz] - data[:, n:n + 1]
            dcov += (diffs * row[nz]) @ diffs.T
    dcov /= graph.r_sum
    return (dcov + dcov.T) / 2.0


def _dcov_consistent(data, graph):
    v = graph.vertex_weights
    centered = data - weighted_mean(data, v)[:, None]
    part_v = (centered * v) @ centered.T * (2.0 / graph.q_sum)
    part_g = centered @ (graph.edge_weights @ centered.T) * (2.0 / graph.r_sum)
    dcov = part_v - part_g
    return (dcov + dcov.T) / 2.0


def _dcov_structured(data, graph):
    structure = graph.structure
    if structure is None or structure.kind not in ("clustered", "serial"):
        raise ContractError(
            "structured path requires a graph built with clustered or "
            "serial structure")
    n_feat = data.shape[0]
    dcov = np.zeros((n_feat, n_feat))
    if structure.kind == "clustered":
        for members in structure.groups:
            block = data[:, members]
            size = members.shape[0]
            w = 1.0 / (size - 1)
            psum = block @ block.T
            ssum = block.sum(axis=1)
            dcov += w * (2.0 * size * psum - 2.0 * np.outer(ssum, ssum))
    else:
        groups = structure.groups
        psums = [data[:, g] @ data[:, g].T for g in groups]
        ssums = [data[:, g].sum(axis=1) for g in groups]
        sizes = [g.shape[0] for g in groups]
        for g in range(len(groups) - 1):
            cross = np.outer(ssums[g], ssums[g + 1])
            dcov += 2.0 * (sizes[g + 1] * psums[g] + sizes[g] * psums[g + 1]
                           - cross - cross.T)
    dcov /= graph.r_sum
    return (dcov + dcov.T) / 2.0


# ---------------------------------------------------------------------------
# training

@dataclass
class GsfaModel:
    """Trained linear extractor: centering mean, projection, deltas."""

    weighted_mean: np.ndarray
    projection: np.ndarray
    deltas: np.ndarray
    trained_on: dict = field(default_factory=dict)

    @property
    def input_dim(self):
        return self.projection.shape[0]

    @property
    def n_features(self):
        return self.projection.shape[1]


def _sign_fix_columns(w, tol_factor=1e-8):
    """First significantly nonzero coordinate of each column positive."""
    w = w.copy()
    for j in range(w.shape[1]):
        col = w[:, j]
        scale = np.max(np.abs(col))
        if scale == 0:
            continue
        idx = np.flatnonzero(np.abs(col) > tol_factor * scale)
        if idx.size and col[idx[0]] < 0:
            w[:, j] = -col
    return w


def train_gsfa(data, graph, n_features=None, regularization=None,
               dcov_path="auto"):
    """Train linear GSFA on an I x N matrix with a training graph.

    Sphering directions with covariance eigenvalues below the
    regularization floor are dropped (their count capping the number of
    extractable features); requesting more raises
    :class:`SingularityError`. Inconsistent graphs are allowed with a
    warning, forcing the pairwise difference-covariance path.

    Returns a :class:`GsfaModel` with features ordered by ascending
    delta; the model deltas are the diagonal of the rotated sphered
    difference covariance.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n_in, n_samples = data.shape
    if n_samples != graph.n_samples:
        raise DimensionError(
            f"data has {n_samples} samples but graph has {graph.n_samples}")

    consistent = bool(check_consistency(graph))
    if dcov_path == "auto":
        if graph.structure is not None and consistent:
            dcov_path = "structured"
        elif consistent:
            dcov_path = "consistent_form"
        else:
            dcov_path = "pairwise"
    if not consistent:
        warnings.warn("training on an inconsistent graph; using the pairwise "
                      "difference-covariance path", InconsistentGraphWarning,
                      stacklevel=2)
        dcov_path = "pairwise"

    mean = weighted_mean(data, graph.vertex_weights)
    cov = sample_covariance(data, graph.vertex_weights)
    dcov = derivative_covariance(data, graph, path=dcov_path)

    if regularization is None:
        regularization = 1e-10 * float(np.trace(cov)) / n_in
    if regularization > 0:
        cov = cov + regularization * np.eye(n_in)

    eigval, eigvec = np.linalg.eigh(cov)
    # ridge-only directions sit at ~regularization; genuinely informative
    # ones must clear both that level and the relative fp floor
    floor = max(2.0 * regularization, 1e-12 * float(max(eigval[-1], 0.0)))
    keep = eigval > floor
    rank = int(np.sum(keep))
    if rank == 0:
        raise SingularityError("covariance has no usable directions",
                               null_dim=n_in)
    if n_features is None:
        n_features = rank
    if n_features > rank:
        raise SingularityError(
            f"requested {n_features} features but covariance rank is {rank} "
            f"(null-space dimension {n_in - rank})", null_dim=n_in - rank)
    sphering = eigvec[:, keep][:, ::-1] / np.sqrt(eigval[keep][::-1])
    reduced = sphering.T @ dcov @ sphering
    reduced = (reduced + reduced.T) / 2.0
    lam, rotation = np.linalg.eigh(reduced)  # ascending = slowest first
    projection = _sign_fix_columns(sphering @ rotation[:, :n_features])
    deltas = lam[:n_features].copy()
    return GsfaModel(mean, projection, deltas, trained_on=graph.fingerprint())


def extract_features(model, data):
    """y(n) = W^T (x(n) - mean); returns J x N."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] != model.input_dim:
        raise DimensionError(
            f"data has {data.shape[0]} rows, model expects {model.input_dim}")
    return model.projection.T @ (data - model.weighted_mean[:, None])


def pipeline_extract(model, data, expansion=None, pca=None):
    """Apply the full node pipeline: optional PCA, expansion, extraction."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if pca is not None:
        data = pca.transform(data)
    if expansion is not None:
        data = expand(data, expansion)
    return extract_features(model, data)


# ---------------------------------------------------------------------------
# weighted PCA

@dataclass
class PcaModel:
    """Weighted-mean-centered principal directions (columns, orthonormal)."""

    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray

    def transform(self, data):
        data = np.atleast_2d(np.asarray(data, dtype=float))
        return self.components.T @ (data - self.mean[:, None])

    def reconstruct(self, reduced):
        return self.components @ np.atleast_2d(reduced) + self.mean[:, None]

    def to_dict(self):
        return {"mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["mean"], dtype=float),
                   np.asarray(data["components"], dtype=float),
                   np.asarray(data["variances"], dtype=float))


def pca_reduce(data, vertex_weights, out_dims):
    """Weighted PCA; returns (PcaModel, reduced out_dims x N matrix)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n_in, n_samples = data.shape
    if not 1 <= out_dims <= min(n_in, n_samples - 1):
        raise ParameterError(
            f"out_dims must be in [1, min(I, N-1)] = "
            f"[1, {min(n_in, n_samples - 1)}], got {out_dims}")
    cov = sample_covariance(data, vertex_weights)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval, kind="stable")[::-1][:out_dims]
    components = _sign_fix_columns(eigvec[:, order])
    model = PcaModel(weighted_mean(data, vertex_weights), components,
                     np.maximum(eigval[order], 0.0))
    return model, model.transform(data)


# ---------------------------------------------------------------------------
# model files

def save_model(model, path, expansion=None, pca=None):
    payload = {
        "weighted_mean": model.weighted_mean.tolist(),
        "projection": model.projection.tolist(),
        "deltas": model.deltas.tolist(),
        "trained_on": model.trained_on,
        "expansion": (expansion.to_dict() if expansion is not None else None),
        "pca": (pca.to_dict() if pca is not None else None),
    }
    write_container(path, MODEL_FILE_KIND, MODEL_FILE_VERSION, payload)


def load_model(path):
    """Read a model container; returns (GsfaModel, ExpansionSpec|None, PcaModel|None)."""
    data = read_container(path, MODEL_FILE_KIND, {MODEL_FILE_VERSION})
    model = GsfaModel(
        np.asarray(data["weighted_mean"], dtype=float),
        np.asarray(data["projection"], dtype=float),
        np.asarray(data["deltas"], dtype=float),
        trained_on=data.get("trained_on", {}),
    )
    expansion = (ExpansionSpec.from_dict(data["expansion"])
                 if data.get("expansion") else None)
    pca = PcaModel.from_dict(data["pca"]) if data.get("pca") else None
    return model, expansion, pca
