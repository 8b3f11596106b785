import numpy as np
import scipy.sparse as sp


def normalize_matrix(matrix, add_self_loops=False):
    """
    Symmetric normalization D^-1/2 A D^-1/2 of a sparse or dense matrix.

    Args:
        matrix: scipy sparse matrix or dense ndarray.
        add_self_loops (bool): Normalize A + I instead of A.

    Returns:
        Same kind as the input. Isolated nodes keep a zero row.
    """
    if sp.issparse(matrix):
        matrix = sp.csr_matrix(matrix, dtype=np.float64)
        if add_self_loops:
            matrix = matrix + sp.identity(matrix.shape[0], dtype=np.float64, format="csr")
        degree = np.asarray(matrix.sum(axis=1)).ravel()
        with np.errstate(divide="ignore"):
            inv_sqrt = 1.0 / np.sqrt(degree)
        inv_sqrt[~np.isfinite(inv_sqrt)] = 0.0
        scale = sp.diags(inv_sqrt)
        return sp.csr_matrix(scale @ matrix @ scale)

    matrix = np.asarray(matrix, dtype=np.float64)
    if add_self_loops:
        matrix = matrix + np.eye(matrix.shape[0])
    degree = matrix.sum(axis=1)
    with np.errstate(divide="ignore"):
        inv_sqrt = 1.0 / np.sqrt(degree)
    inv_sqrt[~np.isfinite(inv_sqrt)] = 0.0
    return inv_sqrt[:, None] * matrix * inv_sqrt[None, :]


class Graph:
    """
    Represents a graph handled by pyhydro.

    Attributes:
        name (str): Dataset or artifact name.
        num_nodes (int): Number of nodes.
        is_weighted (bool): Whether edge weights are real-valued.
    """

    name = ""
    num_nodes = 0
    is_weighted = False

    def adjacency_matrix(self):
        """
        Returns the adjacency (sparse for binary graphs, dense for weighted ones).

        This method needs to be re-defined in all sub-classes.
        """
        raise NotImplementedError

    def count_edges(self, threshold=0.5):
        """
        Counts undirected edges; weighted graphs count pairs above ``threshold``.

        This method needs to be re-defined in all sub-classes.
        """
        raise NotImplementedError

    def normalized_adjacency(self, add_self_loops=False):
        return normalize_matrix(self.adjacency_matrix(), add_self_loops)

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, num_nodes={self.num_nodes})"
