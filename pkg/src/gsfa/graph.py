"""Weighted training graphs and their elementary operations.

A training graph holds strictly positive vertex weights ``v`` over N
samples and a symmetric edge-weight matrix ``gamma``. The normalization
sums Q = sum(v) and R = sum(gamma) are cached at construction. Edge
weights can be stored densely (numpy array) or sparsely (scipy CSR);
both forms expose the same operations.

The delta value of a feature y is the edge-weighted mean squared output
difference, (1/R) * sum_{n,n'} gamma_{n,n'} (y(n') - y(n))^2. For
consistent graphs and normalized features it reduces to
2 - (2/R) * y^T gamma y, which :func:`weighted_delta_fast` exploits.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    ContractError,
    DegenerateFeatureError,
    DegenerateGraphError,
    DimensionError,
    FormatError,
    IsolatedVertexError,
    UnsupportedGraphError,
)
from .serialize import read_container, write_container

#: Default consistency tolerance, relative to max(v).
DEFAULT_CONSISTENCY_RTOL = 1e-9

GRAPH_FILE_KIND = "training-graph"
GRAPH_FILE_VERSION = 1


@dataclass(frozen=True)
class GraphStructure:
    """Optional builder-provided structure enabling fast solver paths.

    ``kind`` is "clustered" or "serial"; ``groups`` lists the member
    sample indices of each cluster (clustered) or of each label group in
    order (serial).
    """

    kind: str
    groups: tuple


@dataclass(frozen=True)
class ConsistencyReport:
    ok: bool
    residual: np.ndarray
    tol: float

    def __bool__(self):
        return self.ok

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residual)))


class TrainingGraph:
    """Immutable weighted graph over N samples.

    Parameters
    ----------
    vertex_weights : array of N strictly positive reals.
    edge_weights : symmetric N x N matrix, dense ndarray or scipy sparse.
        Must already be exactly symmetric (use :func:`symmetrize` first
        for raw directed weights). Absent edges are zeros.
    structure : optional :class:`GraphStructure` set by builders.
    """

    __slots__ = ("vertex_weights", "_gamma", "_sparse", "n_samples",
                 "q_sum", "r_sum", "structure")

    def __init__(self, vertex_weights, edge_weights, structure=None):
        v = np.asarray(vertex_weights, dtype=float).copy()
        if v.ndim != 1:
            raise DimensionError("vertex_weights must be a 1-D vector")
        n = v.shape[0]
        if n < 1:
            raise DegenerateGraphError("graph needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise DegenerateGraphError("vertex weights must be finite")
        if np.any(v <= 0):
            raise DegenerateGraphError("all vertex weights must be > 0")

        sparse = sp.issparse(edge_weights)
        if sparse:
            g = sp.csr_array(edge_weights, dtype=float)
            if g.shape != (n, n):
                raise DimensionError(
                    f"edge matrix shape {g.shape} does not match N={n}")
            asym = (g - g.T)
            if asym.nnz and np.max(np.abs(asym.data)) != 0.0:
                raise ContractError("edge weights must be exactly symmetric")
            if not np.all(np.isfinite(g.data)):
                raise DegenerateGraphError("edge weights must be finite")
            r = float(g.sum())
        else:
            g = np.asarray(edge_weights, dtype=float).copy()
            if g.shape != (n, n):
                raise DimensionError(
                    f"edge matrix shape {g.shape} does not match N={n}")
            if not np.all(np.isfinite(g)):
                raise DegenerateGraphError("edge weights must be finite")
            if not np.array_equal(g, g.T):
                raise ContractError("edge weights must be exactly symmetric")
            g.setflags(write=False)
            r = float(g.sum())
        if r <= 0:
            raise DegenerateGraphError(f"sum of edge weights must be > 0, got {r}")

        v.setflags(write=False)
        self.vertex_weights = v
        self._gamma = g
        self._sparse = sparse
        self.n_samples = n
        self.q_sum = float(v.sum())
        self.r_sum = r
        self.structure = structure

    # -- storage-neutral access ------------------------------------------

    @property
    def is_sparse(self):
        return self._sparse

    @property
    def edge_weights(self):
        """Edge weights in their stored form (dense ndarray or CSR)."""
        return self._gamma

    def gamma_dense(self):
        if self._sparse:
            return self._gamma.toarray()
        return np.array(self._gamma)

    def gamma_row_sums(self):
        if self._sparse:
            return np.asarray(self._gamma.sum(axis=1)).ravel()
        return self._gamma.sum(axis=1)

    def gamma_diagonal(self):
        if self._sparse:
            return self._gamma.diagonal()
        return np.diagonal(self._gamma).copy()

    def gamma_matvec(self, y):
        return self._gamma @ y

    def gamma_quad(self, y):
        """y^T gamma y."""
        return float(y @ (self._gamma @ y))

    def gamma_min(self):
        if self._sparse:
            if self._gamma.nnz == 0:
                return 0.0
            m = float(self._gamma.data.min())
            full = self._gamma.nnz >= self.n_samples * self.n_samples
            return m if full else min(m, 0.0)
        return float(self._gamma.min())

    def gamma_triplets(self):
        """Upper-triangle triplets (i, j, gamma) with i <= j, nonzero."""
        if self._sparse:
            coo = sp.coo_array(self._gamma)
            mask = (coo.row <= coo.col) & (coo.data != 0)
            return list(zip(coo.row[mask].tolist(), coo.col[mask].tolist(),
                            coo.data[mask].tolist()))
        i, j = np.nonzero(np.triu(self._gamma))
        return list(zip(i.tolist(), j.tolist(), self._gamma[i, j].tolist()))

    def fingerprint(self):
        """Stable identity of the graph: (n, Q, R, content checksum)."""
        h = hashlib.sha256()
        h.update(np.int64(self.n_samples).tobytes())
        h.update(self.vertex_weights.tobytes())
        for i, j, g in self.gamma_triplets():
            h.update(np.int64(i).tobytes())
            h.update(np.int64(j).tobytes())
            h.update(np.float64(g).tobytes())
        return {"n": self.n_samples, "q_sum": self.q_sum, "r_sum": self.r_sum,
                "checksum": h.hexdigest()[:16]}

    def __repr__(self):
        kind = "sparse" if self._sparse else "dense"
        return (f"TrainingGraph(n={self.n_samples}, Q={self.q_sum:g}, "
                f"R={self.r_sum:g}, {kind})")


def symmetrize(gamma_raw):
    """Return (gamma + gamma^T) / 2 for a square matrix."""
    if sp.issparse(gamma_raw):
        if gamma_raw.shape[0] != gamma_raw.shape[1]:
            raise DimensionError("edge matrix must be square")
        return (sp.csr_array(gamma_raw, dtype=float) + gamma_raw.T.astype(float)) * 0.5
    g = np.asarray(gamma_raw, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError("edge matrix must be square")
    return (g + g.T) / 2.0


def check_consistency(graph, tol=None):
    """Check v = (Q/R) * gamma * 1 and return (ok, residual).

    The restriction links vertex and edge weights; it is required by the
    fast delta form and the free-response analysis. ``tol`` defaults to
    1e-9 relative to max(v).
    """
    if tol is None:
        tol = DEFAULT_CONSISTENCY_RTOL * float(np.max(graph.vertex_weights))
    if graph.r_sum == 0:
        raise DegenerateGraphError("R = 0: consistency undefined")
    residual = graph.vertex_weights - (graph.q_sum / graph.r_sum) * graph.gamma_row_sums()
    ok = bool(np.max(np.abs(residual)) <= tol)
    return ConsistencyReport(ok, residual, float(tol))


def weighted_delta(graph, y):
    """Delta value by direct summation over all edges.

    This is the definition; it needs neither consistency nor feature
    normalization.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (graph.n_samples,):
        raise DimensionError(
            f"feature length {y.shape} does not match N={graph.n_samples}")
    if graph.is_sparse:
        coo = sp.coo_array(graph.edge_weights)
        diffs = y[coo.col] - y[coo.row]
        return float(np.sum(coo.data * diffs * diffs) / graph.r_sum)
    diff = y[None, :] - y[:, None]
    return float(np.sum(graph.edge_weights * diff * diff) / graph.r_sum)


def weighted_delta_fast(graph, y, tol=1e-6):
    """Delta value via 2 - (2/R) y^T gamma y.

    Valid only for consistent graphs and features with weighted zero
    mean and weighted unit variance; violations raise
    :class:`ContractError` naming the failed constraint.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (graph.n_samples,):
        raise DimensionError(
            f"feature length {y.shape} does not match N={graph.n_samples}")
    report = check_consistency(graph)
    if not report.ok:
        raise ContractError(
            f"graph fails the consistency restriction "
            f"(max residual {report.max_residual:.3e})")
    v, q = graph.vertex_weights, graph.q_sum
    mean = float(v @ y) / q
    if abs(mean) > tol:
        raise ContractError(f"feature violates weighted zero mean ({mean:.3e})")
    var = float(y @ (v * y)) / q
    if abs(var - 1.0) > tol:
        raise ContractError(f"feature violates weighted unit variance ({var:.6f})")
    return 2.0 - 2.0 / graph.r_sum * graph.gamma_quad(y)


def normalize_feature(y, vertex_weights):
    """Rescale y to weighted zero mean and weighted unit variance."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(vertex_weights, dtype=float)
    if y.shape != v.shape:
        raise DimensionError("feature and vertex weights differ in length")
    q = v.sum()
    centered = y - (v @ y) / q
    var = float(centered @ (v * centered)) / q
    if var <= 0 or not np.isfinite(var):
        raise DegenerateFeatureError("feature has zero weighted variance")
    return centered / np.sqrt(var)


def remove_self_loops(graph):
    """Zero the diagonal of the edge matrix; Q stays, R is recomputed.

    Free responses are unchanged up to the rescaling of delta values
    implied by the new R; the consistency restriction may break.
    """
    if graph.is_sparse:
        g = sp.lil_array(graph.edge_weights.copy())
        g.setdiag(0.0)
        g = sp.csr_array(g)
    else:
        g = graph.gamma_dense()
        np.fill_diagonal(g, 0.0)
    return TrainingGraph(graph.vertex_weights, g, structure=graph.structure)


def markov_transition_matrix(graph):
    """Row-normalized edge weights, P[n, n'] = gamma_{n,n'} / sum_n' gamma.

    Requires non-negative edge weights and no isolated vertex.
    Self-loops are accepted and simply become nonzero staying
    probabilities. The chain's stationary distribution matches v/Q only
    when the graph satisfies the consistency restriction; that is the
    caller's lookout, not a hard gate here.
    """
    if graph.gamma_min() < 0:
        raise UnsupportedGraphError(
            "negative edge weights have no probabilistic interpretation")
    rows = graph.gamma_row_sums()
    if np.any(rows <= 0):
        bad = int(np.argmin(rows))
        raise IsolatedVertexError(f"vertex {bad} has zero total edge weight")
    return graph.gamma_dense() / rows[:, None]


def save_graph(graph, path):
    """Write the versioned graph container (JSON, upper-triangle edges)."""
    payload = {
        "n": graph.n_samples,
        "vertex_weights": graph.vertex_weights.tolist(),
        "edges": [[int(i), int(j), float(g)] for i, j, g in graph.gamma_triplets()],
    }
    if graph.structure is not None:
        payload["structure"] = {
            "kind": graph.structure.kind,
            "groups": [np.asarray(grp).tolist() for grp in graph.structure.groups],
        }
    write_container(path, GRAPH_FILE_KIND, GRAPH_FILE_VERSION, payload)


def load_graph(path):
    data = read_container(path, GRAPH_FILE_KIND, {GRAPH_FILE_VERSION})
    n = data["n"]
    v = np.asarray(data["vertex_weights"], dtype=float)
    rows, cols, vals = [], [], []
    for i, j, g in data["edges"]:
        if not 0 <= i <= j < n:
            raise FormatError(f"edge ({i}, {j}) outside 0 <= i <= j < {n}")
        rows.append(i)
        cols.append(j)
        vals.append(g)
        if i != j:
            rows.append(j)
            cols.append(i)
            vals.append(g)
    gamma = sp.csr_array(
        sp.coo_array((vals, (rows, cols)), shape=(n, n), dtype=float))
    structure = None
    if "structure" in data:
        structure = GraphStructure(
            kind=data["structure"]["kind"],
            groups=tuple(np.asarray(grp, dtype=int)
                         for grp in data["structure"]["groups"]))
    return TrainingGraph(v, gamma, structure=structure)
