"""Structural operators on sparse adjacencies.

All functions accept either a Graph or a scipy CSR matrix and return
scipy CSR. Normalizations leave zero-degree rows untouched rather than
dividing by zero.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .graph import Graph


def as_csr(g_or_a):
    if isinstance(g_or_a, Graph):
        return g_or_a.adjacency()
    a = sp.csr_matrix(g_or_a, dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise DataError(f"adjacency must be square, got {a.shape}")
    return a


def add_self_loops(g_or_a):
    """A + I, forcing unit diagonal (existing diagonal entries are overwritten)."""
    a = as_csr(g_or_a).tolil()
    a.setdiag(1.0)
    return a.tocsr()


def row_normalize(g_or_a):
    """D^-1 A; zero rows pass through unchanged."""
    a = as_csr(g_or_a)
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg != 0)
    return sp.diags(inv).dot(a).tocsr()


def sym_normalize(g_or_a):
    """D^-1/2 A D^-1/2 with D from row sums; requires non-negative entries."""
    a = as_csr(g_or_a)
    if a.nnz and a.data.min() < 0:
        raise DataError("symmetric normalization requires non-negative entries")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg != 0)
    d = sp.diags(inv_sqrt)
    return d.dot(a).dot(d).tocsr()


def _binary(a):
    """Copy with every stored nonzero set to 1.0."""
    b = sp.csr_matrix(a, dtype=np.float64, copy=True)
    b.eliminate_zeros()
    b.data = np.ones_like(b.data)
    return b


def _drop_diagonal(a):
    out = (a - sp.diags(a.diagonal())).tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def khop_adjacency(g_or_a, k, exactly=False):
    """Binary indicator of nodes within (or exactly at) k hops, excluding self.

    Hop distance is BFS distance along stored edge direction. `exactly`
    keeps only nodes whose shortest distance is k.
    """
    if k < 2:
        raise DataError(f"k-hop neighborhood needs k >= 2, got {k}")
    a1 = _binary(as_csr(g_or_a))
    acc = a1
    prev = a1
    reach = a1
    for _ in range(2, k + 1):
        prev = acc
        reach = _binary(reach @ a1)
        acc = _binary(acc + reach)
    if exactly:
        out = (_drop_diagonal(acc) - _drop_diagonal(prev)).tocsr()
        out.eliminate_zeros()
        out.sort_indices()
        return out
    return _drop_diagonal(acc)


def knn_feature_graph(g_or_x, k):
    """Directed k-nearest-neighbor indicator under cosine feature similarity.

    Row i holds ones at i's k most similar other nodes. Ties break toward
    the lower node index; zero-norm feature rows score 0 against everything.
    """
    x = g_or_x.features if isinstance(g_or_x, Graph) else np.asarray(g_or_x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise DataError(f"knn graph needs k >= 1, got {k}")
    if k >= n:
        raise DataError(f"k={k} must be smaller than n_nodes={n}")
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms == 0, 1.0, norms)
    xn = x / safe[:, None]
    sim = xn @ xn.T
    np.fill_diagonal(sim, -np.inf)
    # stable argsort on -sim => equal similarities resolve to the lower index
    order = np.argsort(-sim, axis=1, kind="stable")
    cols = order[:, :k]
    rows = np.repeat(np.arange(n), k)
    data = np.ones(n * k)
    out = sp.csr_matrix((data, (rows, cols.ravel())), shape=(n, n))
    out.sort_indices()
    return out


def csr_to_graph_structure(a):
    """Canonical (indptr, indices) from a scipy CSR matrix."""
    a = sp.csr_matrix(a)
    a.sort_indices()
    return a.indptr.astype(np.int64), a.indices.astype(np.int64)
