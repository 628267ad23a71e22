"""Connection-graph data model and Kronecker-structured Laplacian operators.

A connection graph attaches a copy of R^n to each node and an orthogonal
n x n map to each weighted edge.  Its connection Laplacian is the block
matrix with diagonal blocks (weighted degree) * I_n and off-diagonal blocks
-w_ij O_ij.  The operator pair (kron_laplacian, kron_laplacian_adjoint)
maps edge weights to L(w) (x) I_n and back; it is the workhorse of the
solver's weight updates.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .indexing import EdgeIndexMap, edge_count, edge_pairs

ORTHOGONALITY_TOL = 1e-10
SYMMETRY_TOL = 1e-10
PSD_REL_TOL = 1e-8
DEFAULT_ZERO_TOL = 1e-8


class DisconnectedGraphError(ValueError):
    """Raised when an operation requires a connected graph."""

    def __init__(self, components: list[list[int]]):
        self.components = components
        sizes = ", ".join(str(sorted(c)) for c in components)
        super().__init__(f"graph is disconnected; components: {sizes}")


class SynchronizationError(ValueError):
    """Raised when a Laplacian has no usable n-dimensional near-kernel."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ConnectionGraph:
    """Weighted graph with an orthogonal map per edge.

    Parameters
    ----------
    v : int
        Number of nodes (1-based node indices).
    n : int
        Stalk dimension, i.e. the size of the vector space at each node.
    edges : tuple of (i, j, weight)
        Unordered pairs with i > j >= 1 and nonnegative weight.
    maps : tuple of (n, n) arrays
        One orthogonal matrix per edge, aligned with ``edges``.
    """

    v: int
    n: int
    edges: tuple[tuple[int, int, float], ...]
    maps: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if self.v < 1 or self.n < 1:
            raise ValueError(f"v and n must be positive, got v={self.v}, n={self.n}")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        if len(self.maps) != len(edges):
            raise ValueError(f"{len(edges)} edges but {len(self.maps)} maps")
        seen: set[tuple[int, int]] = set()
        for i, j, w in edges:
            if not (1 <= j < i <= self.v):
                raise ValueError(f"edge ({i}, {j}) invalid for v={self.v}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if w < 0:
                raise ValueError(f"negative weight {w} on edge ({i}, {j})")
            seen.add((i, j))
        maps = []
        eye = np.eye(self.n)
        for e, o in zip(edges, self.maps):
            o = np.asarray(o, dtype=float)
            if o.shape != (self.n, self.n):
                raise ValueError(f"map for edge {e[:2]} has shape {o.shape}, want ({self.n}, {self.n})")
            if np.linalg.norm(o.T @ o - eye) >= ORTHOGONALITY_TOL:
                raise ValueError(f"map for edge {e[:2]} is not orthogonal")
            maps.append(_as_readonly(o))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "maps", tuple(maps))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def weight_vector(self) -> np.ndarray:
        """Weights as a full-length v(v-1)/2 vector (zeros on non-edges)."""
        idx = EdgeIndexMap(self.v)
        w = np.zeros(len(idx))
        for i, j, weight in self.edges:
            w[idx.index(i, j) - 1] = weight
        return w

    def map_dict(self) -> dict[tuple[int, int], np.ndarray]:
        return {(i, j): o for (i, j, _), o in zip(self.edges, self.maps)}

    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {u: [] for u in range(1, self.v + 1)}
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


@dataclass(frozen=True)
class ConnectionLaplacian:
    """Dense symmetric PSD block matrix of size vn x vn."""

    matrix: np.ndarray
    v: int
    n: int

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        d = self.v * self.n
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match v*n={d}")
        if np.max(np.abs(m - m.T)) >= SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric")
        eigs = np.linalg.eigvalsh(m)
        scale = max(abs(eigs[0]), abs(eigs[-1]), 1e-300)
        if eigs[0] < -PSD_REL_TOL * scale:
            raise ValueError(f"matrix is not PSD (min eigenvalue {eigs[0]:g})")
        # Diagonal blocks must be nonnegative multiples of the identity.
        for i in range(self.v):
            blk = m[i * self.n : (i + 1) * self.n, i * self.n : (i + 1) * self.n]
            c = np.mean(np.diag(blk))
            if np.max(np.abs(blk - c * np.eye(self.n))) >= 1e-8 * max(1.0, abs(c)):
                raise ValueError(f"diagonal block {i + 1} is not a multiple of the identity")
            if c < -1e-10:
                raise ValueError(f"diagonal block {i + 1} has negative degree {c:g}")
        object.__setattr__(self, "matrix", _as_readonly(m))

    def block(self, i: int, j: int) -> np.ndarray:
        """The (i, j) block with 1-based node indices."""
        n = self.n
        return self.matrix[(i - 1) * n : i * n, (j - 1) * n : j * n]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class NodeBases:
    """Per-node special-orthogonal bases; conceptually blkdiag({O_v})."""

    blocks: np.ndarray  # shape (v, n, n)

    def __post_init__(self) -> None:
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"blocks must have shape (v, n, n), got {b.shape}")
        n = b.shape[1]
        eye = np.eye(n)
        for k, blk in enumerate(b):
            if np.linalg.norm(blk.T @ blk - eye) >= ORTHOGONALITY_TOL:
                raise ValueError(f"basis block {k + 1} is not orthogonal")
            if np.linalg.det(blk) < 0:
                raise ValueError(f"basis block {k + 1} has determinant -1")
        object.__setattr__(self, "blocks", _as_readonly(b))

    @property
    def v(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @classmethod
    def identity(cls, v: int, n: int) -> "NodeBases":
        return cls(np.broadcast_to(np.eye(n), (v, n, n)).copy())

    def as_block_diagonal(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.blocks)

    def edge_product(self, i: int, j: int) -> np.ndarray:
        """The induced edge map O_i^T O_j (1-based node indices)."""
        return self.blocks[i - 1].T @ self.blocks[j - 1]


def combinatorial_laplacian(w: np.ndarray, v: int) -> np.ndarray:
    """Weighted graph Laplacian from the canonical flat weight vector."""
    w = np.asarray(w, dtype=float)
    if w.shape != (edge_count(v),):
        raise ValueError(f"weight vector has length {w.size}, want {edge_count(v)} for v={v}")
    lap = np.zeros((v, v))
    lap[np.triu_indices(v, k=1)] = -w
    lap += lap.T
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def kron_laplacian(w: np.ndarray, v: int, n: int) -> np.ndarray:
    """Kronecker-structured Laplacian L(w) (x) I_n.

    Parameters
    ----------
    w : array of length v(v-1)/2
        Nonnegative edge weights in canonical order.
    v, n : int
        Node count and stalk dimension.

    Returns
    -------
    (vn, vn) array, symmetric PSD with zero block-row sums.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return np.kron(combinatorial_laplacian(w, v), np.eye(n))


def kron_laplacian_adjoint(y: np.ndarray, v: int, n: int) -> np.ndarray:
    """Adjoint of :func:`kron_laplacian` under the Frobenius inner product.

    The k-th entry, for the pair (i, j) of index k, is
    Tr(Y_ii + Y_jj - Y_ij - Y_ji) over n x n blocks, so that
    <kron_laplacian(w), Y>_F = <w, kron_laplacian_adjoint(Y)> for all w, Y.
    """
    y = np.asarray(y, dtype=float)
    d = v * n
    if y.shape != (d, d):
        raise ValueError(f"matrix shape {y.shape} does not match v*n={d}")
    # Block traces: t[a, b] = Tr(Y_ab).
    t = np.einsum("aibi->ab", y.reshape(v, n, v, n))
    jj, ii = np.triu_indices(v, k=1)
    return t[ii, ii] + t[jj, jj] - t[ii, jj] - t[jj, ii]


def kron_gram_operator(v: int, n: int) -> np.ndarray:
    """Matrix of the composition L_K* o L_K on weight space.

    Entry (k, l) is <L_K(e_k), L_K(e_l)>_F: 4n on the diagonal, n when the
    two edges share exactly one endpoint, 0 otherwise.  Its largest
    eigenvalue is the Lipschitz constant tau = 2nv reached on the complete
    graph.
    """
    pairs = edge_pairs(v)
    i, j = pairs[:, 0], pairs[:, 1]
    share = (
        (i[:, None] == i[None, :]).astype(float)
        + (i[:, None] == j[None, :])
        + (j[:, None] == i[None, :])
        + (j[:, None] == j[None, :])
    )
    np.fill_diagonal(share, 4.0)
    return n * share


def assemble_from_bases(w: np.ndarray, bases: NodeBases) -> ConnectionLaplacian:
    """Connection Laplacian O^T (L(w) (x) I_n) O for block-diagonal bases O.

    Edge blocks equal -w_ij O_i^T O_j; the spectrum equals the spectrum of
    L(w) with multiplicity n.
    """
    v, n = bases.v, bases.n
    big = bases.as_block_diagonal()
    m = big.T @ kron_laplacian(w, v, n) @ big
    return ConnectionLaplacian(0.5 * (m + m.T), v, n)


def build_connection_laplacian(cg: ConnectionGraph) -> ConnectionLaplacian:
    """Assemble the block Laplacian of a connection graph edge by edge."""
    v, n = cg.v, cg.n
    m = np.zeros((v * n, v * n))
    for (i, j, w), o in zip(cg.edges, cg.maps):
        bi, bj = (i - 1) * n, (j - 1) * n
        m[bi : bi + n, bj : bj + n] = -w * o
        m[bj : bj + n, bi : bi + n] = -w * o.T
        m[bi : bi + n, bi : bi + n] += w * np.eye(n)
        m[bj : bj + n, bj : bj + n] += w * np.eye(n)
    return ConnectionLaplacian(m, v, n)


def connected_components(v: int, pairs: list[tuple[int, int]]) -> list[list[int]]:
    """Connected components (lists of 1-based nodes) of an undirected edge list."""
    adj: dict[int, list[int]] = {u: [] for u in range(1, v + 1)}
    for i, j in pairs:
        adj[i].append(j)
        adj[j].append(i)
    unseen = set(range(1, v + 1))
    comps = []
    while unseen:
        root = min(unseen)
        comp = [root]
        unseen.remove(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for nb in adj[u]:
                if nb in unseen:
                    unseen.remove(nb)
                    comp.append(nb)
                    queue.append(nb)
        comps.append(comp)
    return comps


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    max_cycle_defect: float
    spectral_defect: float


def check_consistency(cg: ConnectionGraph, tol: float = DEFAULT_ZERO_TOL) -> ConsistencyReport:
    """Verify that edge maps compose to the identity around every cycle.

    Two independent checks are run.  The cycle check synchronizes node
    potentials along a BFS spanning tree and measures, for each non-tree
    edge, how far the fundamental-cycle product deviates from I_n (covering
    all cycles is equivalent to covering a fundamental basis).  The spectral
    check compares the eigenvalues of the connection Laplacian, grouped in
    runs of n, against the eigenvalues of the combinatorial Laplacian.

    Raises
    ------
    DisconnectedGraphError
        If the underlying graph is not connected.
    """
    pairs = [(i, j) for i, j, _ in cg.edges]
    comps = connected_components(cg.v, pairs)
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)

    maps = cg.map_dict()

    def transport(a: int, b: int) -> np.ndarray:
        # Map associated with traversing a -> b; equals O_a^T O_b when consistent.
        return maps[(a, b)] if a > b else maps[(b, a)].T

    adj = cg.neighbors()
    potentials: dict[int, np.ndarray] = {1: np.eye(cg.n)}
    parent_edge: set[frozenset[int]] = set()
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for nb in adj[u]:
            if nb not in potentials:
                potentials[nb] = potentials[u] @ transport(u, nb)
                parent_edge.add(frozenset((u, nb)))
                queue.append(nb)

    max_defect = 0.0
    eye = np.eye(cg.n)
    for i, j, _ in cg.edges:
        if frozenset((i, j)) in parent_edge:
            continue
        cycle = maps[(i, j)] @ potentials[j].T @ potentials[i]
        max_defect = max(max_defect, float(np.linalg.norm(cycle - eye)))

    lap_eigs = np.sort(build_connection_laplacian(cg).eigenvalues())
    comb_eigs = np.sort(np.linalg.eigvalsh(combinatorial_laplacian(cg.weight_vector(), cg.v)))
    spectral_defect = float(np.max(np.abs(lap_eigs.reshape(cg.v, cg.n) - comb_eigs[:, None])))

    return ConsistencyReport(
        consistent=bool(max_defect < tol and spectral_defect < tol),
        max_cycle_defect=max_defect,
        spectral_defect=spectral_defect,
    )


def project_special_orthogonal(m: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Nearest special-orthogonal matrix in Frobenius norm.

    SVD projection; if the orthogonal Procrustes solution has determinant -1,
    the sign of the smallest singular direction is flipped.
    """
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float))
    if rank_tol is not None and s[-1] <= rank_tol * max(s[0], 1e-300):
        raise ValueError("projection is degenerate: smallest singular value is numerically zero")
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] *= -1
        r = u @ vt
    return r


def synchronize_blocks(matrix: np.ndarray, v: int, n: int, tol: float) -> np.ndarray:
    """Core of spectral synchronization on a raw symmetric PSD matrix.

    Returns the (v, n, n) stack of special-orthogonal blocks; see
    :func:`synchronize` for the contract.
    """
    eigvals, eigvecs = np.linalg.eigh(matrix)
    scale = max(abs(eigvals[-1]), 1.0)
    kernel_dim = int(np.sum(eigvals < tol * scale))
    if kernel_dim < n:
        raise SynchronizationError(
            f"kernel dimension {kernel_dim} < stalk dimension {n} at relative tolerance {tol:g}"
        )
    basis = eigvecs[:, :n].copy()
    blocks = basis.reshape(v, n, n)
    # The kernel basis is determined only up to an orthogonal n x n gauge; a
    # reflection gauge would make every block projection degenerate, so flip
    # one kernel column when the best-conditioned block orients negatively.
    dets = np.linalg.det(blocks)
    if dets[int(np.argmax(np.abs(dets)))] < 0:
        basis[:, -1] *= -1
        blocks = basis.reshape(v, n, n)
    return np.stack([project_special_orthogonal(b.T) for b in blocks])


def synchronize(laplacian: ConnectionLaplacian, tol: float = DEFAULT_ZERO_TOL) -> NodeBases:
    """Recover node bases from a (near-)consistent connection Laplacian.

    The n eigenvectors of smallest eigenvalue are stacked into v blocks of
    size n x n and each block is projected to the nearest special-orthogonal
    matrix.  For an exactly consistent input the returned bases reproduce
    every edge block through O_i^T O_j, up to one global rotation shared by
    all nodes.

    Parameters
    ----------
    laplacian : ConnectionLaplacian
    tol : float
        Relative eigenvalue threshold below which a direction counts as
        kernel; fewer than n such directions raises SynchronizationError.
    """
    return NodeBases(synchronize_blocks(laplacian.matrix, laplacian.v, laplacian.n, tol))


def log_gdet(eigenvalues: np.ndarray, zero_tol: float | None = None) -> float:
    """Log generalized determinant: sum of logs over eigenvalues above the kernel cut.

    ``zero_tol`` defaults to 1e-8 times the largest eigenvalue (scale-invariant
    rank decision).  Returns -inf when no eigenvalue clears the cut.
    """
    eigs = np.asarray(eigenvalues, dtype=float)
    if eigs.size == 0:
        return float("-inf")
    if zero_tol is None:
        zero_tol = DEFAULT_ZERO_TOL * max(float(np.max(eigs)), 0.0)
    if np.any(eigs < -max(zero_tol, 0.0)):
        raise ValueError("eigenvalues must be nonnegative up to the zero tolerance")
    positive = eigs[eigs > zero_tol]
    if positive.size == 0:
        return float("-inf")
    return float(np.sum(np.log(positive)))
