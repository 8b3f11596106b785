import logging

import numpy as np

from ..exceptions import DomainError
from . import ops
from .tape import as_tensor, primitive

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-8


def normalize_symmetric(adjacency, add_self_loops=False, min_degree=1e-12):
    """
    D^-1/2 A D^-1/2 on the tape. Rows with zero degree stay zero.

    Args:
        adjacency (Tensor or array): Square weighted adjacency.
        add_self_loops (bool): Use A + I instead of A.
        min_degree (float): Degree clamp; only affects isolated rows.
    """
    adjacency = as_tensor(adjacency)
    if add_self_loops:
        adjacency = ops.add(adjacency, np.eye(adjacency.shape[0]))
    degree = ops.sum(adjacency, axis=1, keepdims=True)
    inv_sqrt = ops.power(ops.clip(degree, lo=min_degree), -0.5)
    return ops.mul(ops.mul(inv_sqrt, adjacency), ops.transpose(inv_sqrt))


def eigh_second_largest(matrix, degeneracy_tol=DEGENERACY_TOL):
    """
    Second-largest eigenvalue of the symmetric part of ``matrix``.

    The backward rule is the simple-eigenvalue derivative u u^T. When the
    eigenvalue is repeated within ``degeneracy_tol`` the average projector over
    the repeated cluster is used as a sub-gradient.
    """
    mv = ops.value_of(matrix)
    if mv.shape[0] < 2:
        raise DomainError(f"Second eigenvalue needs at least 2 nodes, got {mv.shape[0]}")
    sym = 0.5 * (mv + mv.T)
    values, vectors = np.linalg.eigh(sym)
    lam2 = values[-2]
    cluster = np.flatnonzero(np.abs(values - lam2) < degeneracy_tol)
    if cluster.size > 1:
        log.debug(f"Degenerate second eigenvalue {lam2:.3e} with multiplicity {cluster.size}")
    basis = vectors[:, cluster]
    projector = basis @ basis.T / cluster.size

    return primitive("eigh_second_largest", lam2, (matrix,), lambda g: (g * projector,))


def second_largest_eigenvalue_diff(adjacency):
    """
    Differentiable lambda_2 of the self-loop-free normalized adjacency.

    Args:
        adjacency (Tensor): Symmetric synthetic adjacency A'.

    Returns:
        Tensor: Scalar lambda_2, recorded on the adjacency's tape.

    Raises:
        DomainError: If the graph has fewer than 2 nodes.
    """
    if ops.value_of(adjacency).shape[0] < 2:
        raise DomainError("Second eigenvalue needs at least 2 nodes")
    return eigh_second_largest(normalize_symmetric(adjacency))
