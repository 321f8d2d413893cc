"""Spectral analysis of training graphs: optimal free responses.

With an unrestricted function space, the slowest features a graph
admits are eigenvectors of M = Diag(v^{-1/2}) gamma Diag(v^{-1/2}),
rescaled to response vectors y_j = Q^{1/2} Diag(v^{-1/2}) u_j. Their
delta values follow the eigenvalues through delta = 2 - (2Q/R) lambda,
so larger eigenvalues mean slower responses. The eigenvector aligned
with v^{1/2} (eigenvalue R/Q on consistent graphs) corresponds to the
constant pseudo-response, which violates the zero-mean constraint and
is flagged infeasible.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateGraphError, ParameterError
from .graph import check_consistency

#: Counting threshold: responses with delta < 2 - SLOW_COUNT_TOL are "slow".
SLOW_COUNT_TOL = 1e-9


@dataclass
class FreeResponseSpectrum:
    """Full response spectrum of a graph, sorted by descending eigenvalue.

    ``responses[:, j]`` is the j-th response vector. ``feasible`` marks
    responses satisfying the weighted zero-mean constraint (all but the
    constant pseudo-response). ``blocks`` lists (start, stop) index
    ranges of degenerate eigenvalue groups, within which any rotation
    of the responses is equivalent.
    """

    eigenvalues: np.ndarray
    deltas: np.ndarray
    responses: np.ndarray
    feasible: np.ndarray
    blocks: list
    q_sum: float
    r_sum: float

    @property
    def n_samples(self):
        return self.responses.shape[0]

    def feasible_responses(self):
        """Feasible responses ordered by ascending delta."""
        idx = np.flatnonzero(self.feasible)
        order = idx[np.argsort(self.deltas[idx], kind="stable")]
        return self.responses[:, order], self.deltas[order]

    def slow_count(self, threshold=2.0, tol=SLOW_COUNT_TOL):
        """Number of feasible responses with delta strictly below threshold."""
        return int(np.sum(self.feasible & (self.deltas < threshold - tol)))


def build_m_matrix(graph):
    """M = Diag(v^{-1/2}) gamma Diag(v^{-1/2}), symmetric."""
    v = graph.vertex_weights
    if np.any(v <= 0):
        raise ContractError("vertex weights must be strictly positive")
    inv_sqrt = 1.0 / np.sqrt(v)
    m = graph.gamma_dense() * np.outer(inv_sqrt, inv_sqrt)
    return (m + m.T) / 2.0


def _degenerate_blocks(eigenvalues, tie_rtol):
    """(start, stop) ranges of eigenvalues closer than the tie threshold."""
    thresh = tie_rtol * max(1.0, float(np.max(np.abs(eigenvalues))))
    blocks = []
    start = 0
    for i in range(1, eigenvalues.size + 1):
        if i == eigenvalues.size or abs(eigenvalues[i] - eigenvalues[i - 1]) > thresh:
            blocks.append((start, i))
            start = i
    return blocks


def _rotate_u0_into_block(u_block, u0):
    """Rotate an eigenvector block so its first column is the u0 direction.

    Returns the rotated block; the remaining columns form an orthonormal
    completion of u0's projection within the block span (Householder
    construction, deterministic).
    """
    w = u_block.T @ u0
    norm = np.linalg.norm(w)
    w = w / norm
    b = w.shape[0]
    e1 = np.zeros(b)
    e1[0] = 1.0
    p = w - e1
    pn = p @ p
    if pn < 1e-30:
        rot = np.eye(b)
    else:
        rot = np.eye(b) - 2.0 * np.outer(p, p) / pn
        rot[:, 0] = w  # exact alignment of the first column
    return u_block @ rot


def _apply_sign_rule(y, tol_factor=1e-8):
    """Flip sign so the first significantly nonzero entry is negative."""
    scale = np.max(np.abs(y))
    if scale == 0:
        return y
    idx = np.flatnonzero(np.abs(y) > tol_factor * scale)
    if idx.size and y[idx[0]] > 0:
        return -y
    return y


def optimal_free_responses(graph, consistency_tol=None, tie_rtol=1e-9,
                           max_n=4096):
    """Full eigendecomposition of M, rescaled to response vectors.

    Requires a consistent graph (the analysis relies on v^{1/2} being an
    eigenvector of M). Within the degenerate block containing that
    direction, the basis is rotated so exactly one response is the
    constant pseudo-response; it is flagged infeasible, everything else
    feasible. Responses are sign-adjusted to be negative at their first
    significantly nonzero sample.
    """
    n = graph.n_samples
    if n > max_n:
        raise ParameterError(
            f"dense spectrum capped at N={max_n}; got N={n}")
    report = check_consistency(graph, tol=consistency_tol)
    if not report.ok:
        raise ContractError(
            "free responses need a consistent graph "
            f"(max residual {report.max_residual:.3e})")
    m = build_m_matrix(graph)
    eigenvalues, u = np.linalg.eigh(m)
    eigenvalues = eigenvalues[::-1].copy()
    u = u[:, ::-1].copy()

    v = graph.vertex_weights
    q = graph.q_sum
    u0 = np.sqrt(v) / np.sqrt(q)
    blocks = _degenerate_blocks(eigenvalues, tie_rtol)

    # locate the block holding the u0 direction and canonicalize it
    proj = [float(np.linalg.norm(u[:, s:e].T @ u0)) for s, e in blocks]
    k0 = int(np.argmax(proj))
    if proj[k0] < 1.0 - 1e-6:
        raise ContractError(
            "could not identify the constant-direction eigenvector; "
            f"best block alignment {proj[k0]:.6f}")
    s, e = blocks[k0]
    if e - s > 1:
        u[:, s:e] = _rotate_u0_into_block(u[:, s:e], u0)
    else:
        cos = abs(float(u[:, s] @ u0))
        if cos < 1.0 - 1e-6:
            raise ContractError(
                f"constant-direction match too weak (cos={cos:.6f})")
    feasible = np.ones(n, dtype=bool)
    feasible[s] = False

    deltas = 2.0 - (2.0 * q / graph.r_sum) * eigenvalues
    responses = np.sqrt(q) * (u / np.sqrt(v)[:, None])
    for j in range(n):
        responses[:, j] = _apply_sign_rule(responses[:, j])
    return FreeResponseSpectrum(eigenvalues, deltas, responses, feasible,
                                blocks, q, graph.r_sum)


def expected_noise_delta(graph):
    """Expected delta of i.i.d. zero-mean unit-variance noise.

    Closed form 2 (R - trace(gamma)) / R: exactly 2 whenever the graph
    has no self-loops.
    """
    if graph.r_sum == 0:
        raise DegenerateGraphError("R = 0: expected delta undefined")
    return 2.0 * (graph.r_sum - float(np.sum(graph.gamma_diagonal()))) / graph.r_sum


def export_spectrum(spectrum, csv_path, responses_path=None):
    """Write the spectrum table (j, lambda, delta, feasible) as CSV.

    Optionally writes the response matrix as a companion CSV with one
    column per response (header resp_0, resp_1, ...).
    """
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["j", "lambda", "delta", "feasible"])
        for j in range(spectrum.eigenvalues.size):
            writer.writerow([j, repr(float(spectrum.eigenvalues[j])),
                             repr(float(spectrum.deltas[j])),
                             int(spectrum.feasible[j])])
    if responses_path is not None:
        from .matrixio import save_matrix_csv
        names = [f"resp_{j}" for j in range(spectrum.responses.shape[1])]
        save_matrix_csv(spectrum.responses.T, responses_path, feature_names=names)


def export_edges(graph, path, percentile=None):
    """Write edge triplets (i, j, gamma) as CSV for plotting.

    ``percentile`` keeps only the strongest edges by |gamma|: e.g. 30.0
    keeps the top 30 percent. All edges are written by default.
    """
    triplets = graph.gamma_triplets()
    if percentile is not None:
        if not 0 < percentile <= 100:
            raise ParameterError("percentile must be in (0, 100]")
        mags = np.array([abs(g) for _, _, g in triplets])
        cutoff = np.quantile(mags, 1.0 - percentile / 100.0) if mags.size else 0.0
        triplets = [t for t in triplets if abs(t[2]) >= cutoff]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "gamma"])
        for i, j, g in triplets:
            writer.writerow([i, j, repr(float(g))])
