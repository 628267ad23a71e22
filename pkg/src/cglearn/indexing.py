"""Canonical linear indexing of undirected edges.

Every module in this package stores edge weights as a flat vector of
length v(v-1)/2.  Entry k (1-based) corresponds to the unordered pair
(i, j) with i > j, enumerated column-by-column over the lower triangle:
(2,1), (3,1), ..., (v,1), (3,2), (4,2), ..., (v,v-1).  Node indices are
1-based throughout the public API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def edge_count(v: int) -> int:
    """Number of unordered node pairs for ``v`` nodes."""
    return v * (v - 1) // 2


def edge_index(i: int, j: int, v: int) -> int:
    """Map a node pair (i, j) with i > j to its 1-based linear index.

    Parameters
    ----------
    i, j : int
        Node indices with 1 <= j < i <= v.
    v : int
        Number of nodes.

    Returns
    -------
    int
        Linear index k in [1, v(v-1)/2].
    """
    if v < 2:
        raise ValueError(f"need at least two nodes, got v={v}")
    if not (1 <= j < i <= v):
        raise ValueError(f"invalid pair (i={i}, j={j}) for v={v}; need 1 <= j < i <= v")
    # (j - 1) * (2v - j) is even for every integer j, so // is exact.
    return i - j + ((j - 1) * (2 * v - j)) // 2


def edge_endpoints(k: int, v: int) -> tuple[int, int]:
    """Inverse of :func:`edge_index`: recover (i, j) from the linear index."""
    m = edge_count(v)
    if not (1 <= k <= m):
        raise ValueError(f"index k={k} out of range [1, {m}] for v={v}")
    # Column j holds v - j consecutive indices; walk columns until k falls inside.
    offset = 0
    for j in range(1, v):
        width = v - j
        if k <= offset + width:
            return k - offset + j, j
        offset += width
    raise AssertionError("unreachable")


def edge_pairs(v: int) -> np.ndarray:
    """All node pairs in canonical order as an (m, 2) int array of (i, j), i > j."""
    jj, ii = np.triu_indices(v, k=1)
    return np.column_stack((ii + 1, jj + 1))


@dataclass(frozen=True)
class EdgeIndexMap:
    """Bijection between ordered pairs (i, j), i > j, and linear edge indices.

    A single instance per node count is the source of truth for weight-vector
    layout; all operators and serializers route through it.
    """

    v: int

    def __post_init__(self) -> None:
        if self.v < 2:
            raise ValueError(f"need at least two nodes, got v={self.v}")

    def __len__(self) -> int:
        return edge_count(self.v)

    def index(self, i: int, j: int) -> int:
        return edge_index(i, j, self.v)

    def endpoints(self, k: int) -> tuple[int, int]:
        return edge_endpoints(k, self.v)

    def pairs(self) -> np.ndarray:
        return edge_pairs(self.v)
