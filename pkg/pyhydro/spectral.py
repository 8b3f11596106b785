import logging

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .exceptions import ConfigurationError, DomainError, NumericalError
from .graphs import normalize_matrix
from .helper import SelectionResult, SimilarityScores, SpectralCache, SpectralSource
from .numerics import Rng

log = logging.getLogger(__name__)

DENSE_THRESHOLD = 3000
FOLD_THRESHOLD = 20000
RESIDUAL_FACTOR = 1e-6
SIMILARITIES = ("cosine-eigen",)


def default_k_eig(num_classes, num_nodes):
    return min(num_classes + 1, num_nodes)


def laplacian(g):
    """
    Unnormalized Laplacian L = D - A.

    Args:
        g (Graph): A bundle or weighted graph.

    Returns:
        scipy.sparse.csr_matrix: Symmetric, rows sum to zero.
    """
    adjacency = sp.csr_matrix(g.adjacency_matrix(), dtype=np.float64)
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    return sp.csr_matrix(sp.diags(degree) - adjacency)


def _fix_signs(vectors):
    # largest-magnitude entry of each column becomes positive
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _residuals(matrix, values, vectors):
    return np.linalg.norm(matrix @ vectors - vectors * values, axis=0)


def smallest_eigenvectors(L, k_eig, dense_threshold=DENSE_THRESHOLD, max_iter=None):
    """
    The ``k_eig`` algebraically smallest eigenpairs of a symmetric matrix.

    Graphs up to ``dense_threshold`` nodes use a full symmetric eigensolve, larger
    ones ARPACK's implicitly restarted Lanczos with a fixed start vector.

    Args:
        L (scipy.sparse matrix): Symmetric matrix, usually a Laplacian.
        k_eig (int): Number of eigenpairs, 1 <= k_eig <= n.
        dense_threshold (int): Largest n solved densely.
        max_iter (int, optional): Lanczos iteration cap.

    Returns:
        SpectralCache: Ascending eigenvalues, sign-fixed orthonormal eigenvectors.

    Raises:
        ConfigurationError: If k_eig is out of range.
        NumericalError: If Lanczos does not converge or a residual exceeds
            1e-6 * ||L||_1. The error carries the residual norms.
    """
    n = L.shape[0]
    if not 1 <= k_eig <= n:
        raise ConfigurationError(f"k_eig must lie in [1, {n}], got {k_eig}")

    if n <= dense_threshold or k_eig >= n - 1:
        dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
        values, vectors = eigh(dense, subset_by_index=[0, k_eig - 1])
    else:
        v0 = Rng(0).stream("lanczos-v0").standard_normal(n)
        try:
            values, vectors = eigsh(sp.csr_matrix(L), k=k_eig, which="SA", v0=v0, maxiter=max_iter)
        except ArpackNoConvergence as e:
            residuals = _residuals(L, e.eigenvalues, e.eigenvectors) if e.eigenvalues.size else None
            raise NumericalError(
                f"Lanczos did not converge for k_eig={k_eig} on {n} nodes", residuals=residuals
            ) from e
        order = np.argsort(values, kind="stable")
        values, vectors = values[order], vectors[:, order]

    vectors = _fix_signs(vectors)
    residuals = _residuals(L, values, vectors)
    norm1 = float(abs(L).sum(axis=0).max()) if sp.issparse(L) else float(np.abs(L).sum(axis=0).max())
    bound = RESIDUAL_FACTOR * max(norm1, 1.0)
    if np.any(residuals > bound):
        raise NumericalError(
            f"Eigenpair residual {residuals.max():.3e} exceeds {bound:.3e}", residuals=residuals
        )
    log.debug(f"Computed {k_eig} eigenpairs on {n} nodes, max residual {residuals.max():.3e}")
    return SpectralCache(values, vectors, SpectralSource.UNNORMALIZED_LAPLACIAN, residuals)


def algebraic_jaccard_scores(cache, epsilon=1e-10, fold_threshold=FOLD_THRESHOLD, block_size=1024):
    """
    Mean algebraic Jaccard similarity of every node.

    S_ij = v_i . v_j / (|v_i| |v_j| + epsilon) over the eigenvector rows v_i,
    averaged over j. Up to ``fold_threshold`` nodes the definition is evaluated
    exactly in row blocks; above it the sum is folded into
    z = sum_j v_j / (|v_j| + epsilon) so the cost is linear in n. Neither path
    materializes the n x n similarity matrix.

    Args:
        cache (SpectralCache): Rows of ``eigenvectors`` are the node embeddings.
        epsilon (float): Denominator guard; zero rows score exactly 0.
        fold_threshold (int): Largest n evaluated exactly.
        block_size (int): Rows per block on the exact path.

    Returns:
        SimilarityScores
    """
    V = np.asarray(cache.eigenvectors, dtype=np.float64)
    n = V.shape[0]
    norms = np.linalg.norm(V, axis=1)

    if n > fold_threshold:
        unit = V / (norms + epsilon)[:, None]
        folded = unit.sum(axis=0)
        mean = unit @ folded / n
    else:
        mean = np.empty(n)
        for start in range(0, n, block_size):
            stop = min(start + block_size, n)
            dots = V[start:stop] @ V.T
            mean[start:stop] = (dots / (np.outer(norms[start:stop], norms) + epsilon)).mean(axis=1)

    if not np.all(np.isfinite(mean)):
        raise NumericalError("Non-finite similarity scores")
    return SimilarityScores(mean, epsilon)


def select_nodes(g, scores, budget):
    """
    Picks, per class, the train nodes with the highest mean similarity.

    Ties are broken by ascending node id. The result lists class 0's nodes first,
    each class in descending score order.

    Raises:
        ConfigurationError: If a class has fewer train nodes than its budget.
    """
    budget = np.asarray(budget, dtype=np.int64)
    similarity = scores.mean_similarity if isinstance(scores, SimilarityScores) else np.asarray(scores)
    selected = []
    for cls in range(g.num_classes):
        candidates = g.train_nodes_of_class(cls)
        if budget[cls] > candidates.size:
            raise ConfigurationError(
                f"Class {cls} needs {budget[cls]} nodes but has only {candidates.size} in the train split"
            )
        order = np.lexsort((candidates, -similarity[candidates]))
        selected.append(candidates[order[: budget[cls]]])
    selected = np.concatenate(selected) if selected else np.zeros(0, dtype=np.int64)
    log.info(f"Selected {selected.size} nodes for {g.name or 'graph'}")
    return SelectionResult(
        selected,
        budget,
        np.asarray(g.features[selected], dtype=np.float64),
        method="jaccard",
        scores=scores if isinstance(scores, SimilarityScores) else None,
    )


def random_selection(g, budget, rng):
    """Seeded class-stratified random selection of train nodes."""
    budget = np.asarray(budget, dtype=np.int64)
    generator = rng.stream("select/random") if isinstance(rng, Rng) else rng
    selected = []
    for cls in range(g.num_classes):
        candidates = g.train_nodes_of_class(cls)
        if budget[cls] > candidates.size:
            raise ConfigurationError(
                f"Class {cls} needs {budget[cls]} nodes but has only {candidates.size} in the train split"
            )
        selected.append(generator.choice(candidates, size=int(budget[cls]), replace=False))
    selected = np.concatenate(selected).astype(np.int64)
    return SelectionResult(selected, budget, np.asarray(g.features[selected], dtype=np.float64), method="random")


def select(g, budget, method="jaccard", k_eig=None, epsilon=1e-10, dense_threshold=DENSE_THRESHOLD, rng=None):
    """
    Runs the selection stage end to end.

    Args:
        g (GraphBundle): The original (observed) graph.
        budget (array-like): Per-class node counts.
        method (str): "jaccard" or "random".
        k_eig (int, optional): Defaults to min(num_classes + 1, num_nodes).
        epsilon (float): Similarity guard.
        dense_threshold (int): Dense eigensolver cut-off.
        rng (Rng, optional): Needed by the random method.

    Returns:
        SelectionResult
    """
    if method == "random":
        return random_selection(g, budget, rng if rng is not None else Rng(0))
    if method != "jaccard":
        raise ConfigurationError(f"Unknown selection method {method!r}")
    k_eig = k_eig or default_k_eig(g.num_classes, g.num_nodes)
    cache = smallest_eigenvectors(laplacian(g), min(k_eig, g.num_nodes), dense_threshold=dense_threshold)
    scores = algebraic_jaccard_scores(cache, epsilon)
    return select_nodes(g, scores, budget)


def spectral_gap(w, dense_threshold=DENSE_THRESHOLD):
    """
    1 - lambda_2 of the self-loop-free normalized adjacency.

    Raises:
        DomainError: For graphs with fewer than 2 nodes.
        NumericalError: If Lanczos does not converge.
    """
    if w.num_nodes < 2:
        raise DomainError(f"Spectral gap needs at least 2 nodes, got {w.num_nodes}")
    normalized = normalize_matrix(w.adjacency_matrix())
    if sp.issparse(normalized) and w.num_nodes > dense_threshold:
        v0 = Rng(0).stream("lanczos-v0").standard_normal(w.num_nodes)
        try:
            values = eigsh(normalized, k=2, which="LA", v0=v0, return_eigenvectors=False)
        except ArpackNoConvergence as e:
            raise NumericalError(f"Lanczos did not converge for the spectral gap on {w.num_nodes} nodes") from e
        lam2 = float(np.sort(values)[0])
    else:
        dense = normalized.toarray() if sp.issparse(normalized) else normalized
        values = np.linalg.eigvalsh(0.5 * (dense + dense.T))
        lam2 = float(values[-2])
    return 1.0 - lam2
