"""Ground-truth generators and the Gaussian signal sampler.

Two experiment families are supported: consistent Erdos-Renyi connection
graphs with random SO(n) node bases, and geometric connection graphs over a
Fibonacci-lattice sphere whose edge maps come from aligned tangent frames
and are made exactly consistent through spectral synchronization.  Signals
are drawn from the degenerate Gaussian N(0, pinv(L)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    ConnectionGraph,
    ConnectionLaplacian,
    NodeBases,
    build_connection_laplacian,
    check_consistency,
    connected_components,
    project_special_orthogonal,
    synchronize,
)
from .indexing import edge_pairs

# Relative eigenvalue threshold for the near-kernel of the raw (curved)
# sphere Laplacian; it only needs to reject inputs whose bottom-n directions
# are not separated from the bulk.
SPHERE_SYNC_TOL = 0.9


@dataclass(frozen=True)
class GroundTruth:
    """A consistent connection graph together with its Laplacian and bases."""

    cg: ConnectionGraph
    laplacian: ConnectionLaplacian
    bases: NodeBases
    provenance: dict
    seed: int

    def __post_init__(self) -> None:
        rebuilt = build_connection_laplacian(self.cg)
        if np.max(np.abs(rebuilt.matrix - self.laplacian.matrix)) >= 1e-12:
            raise ValueError("stored Laplacian does not match the connection graph")
        report = check_consistency(self.cg, tol=1e-8)
        if not report.consistent:
            raise ValueError(
                f"ground truth is not consistent (cycle defect {report.max_cycle_defect:g}, "
                f"spectral defect {report.spectral_defect:g})"
            )

    @property
    def v(self) -> int:
        return self.cg.v

    @property
    def n(self) -> int:
        return self.cg.n


@dataclass(frozen=True)
class SignalMatrix:
    """M stacked observations in R^{vn}, one per column."""

    X: np.ndarray
    v: int
    n: int
    M: int
    seed: int

    def __post_init__(self) -> None:
        x = np.asarray(self.X, dtype=float)
        if self.M < 1 or x.shape != (self.v * self.n, self.M):
            raise ValueError(f"signal matrix shape {x.shape} does not match (v*n, M)=({self.v * self.n}, {self.M})")
        object.__setattr__(self, "X", x)

    def covariance(self) -> np.ndarray:
        """Empirical covariance with the 1/(M-1) normalization."""
        if self.M < 2:
            raise ValueError("need at least two samples for a covariance")
        return self.X @ self.X.T / (self.M - 1)


def samples_for_ratio(r: float, v: int) -> int:
    """Sample count for a sampling ratio r = M / (2 v)."""
    return int(round(2 * v * r))


def random_special_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform SO(n) sample: QR of a Gaussian matrix with sign fix, det corrected to +1."""
    if n == 1:
        return np.eye(1)
    if n == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]])
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, -1] *= -1
    return q


def default_er_edge_probability(v: int, scale: float = 1.1) -> float:
    return min(1.0, scale * np.log(v) / v)


def sample_er_cg(
    v: int,
    n: int = 2,
    p: float | None = None,
    w_lo: float = 0.2,
    w_hi: float = 3.0,
    seed: int = 0,
) -> GroundTruth:
    """Consistent connection graph over an Erdos-Renyi topology.

    Edges are kept with probability p (default 1.1 log(v)/v); connectivity is
    enforced by adding uniformly random edges between distinct components,
    one at a time, until the graph is connected.  Node bases are uniform on
    SO(n), edge maps are O_ij = O_i^T O_j, weights are Unif(w_lo, w_hi).
    """
    if v < 2:
        raise ValueError(f"need at least two nodes, got v={v}")
    if p is None:
        p = default_er_edge_probability(v)
    if not (0 < p <= 1):
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    if not (0 < w_lo < w_hi):
        raise ValueError(f"need 0 < w_lo < w_hi, got ({w_lo}, {w_hi})")

    rng = np.random.default_rng(seed)
    pairs = edge_pairs(v)
    selected = rng.random(len(pairs)) < p

    def components():
        chosen = [(int(i), int(j)) for (i, j), keep in zip(pairs, selected) if keep]
        return connected_components(v, chosen)

    comps = components()
    while len(comps) > 1:
        label = np.empty(v + 1, dtype=int)
        for c, comp in enumerate(comps):
            for node in comp:
                label[node] = c
        crossing = np.flatnonzero(
            (label[pairs[:, 0]] != label[pairs[:, 1]]) & ~selected
        )
        selected[crossing[rng.integers(len(crossing))]] = True
        comps = components()

    chosen_idx = np.flatnonzero(selected)
    weights = rng.uniform(w_lo, w_hi, size=len(chosen_idx))
    bases = NodeBases(np.stack([random_special_orthogonal(n, rng) for _ in range(v)]))

    edges = tuple(
        (int(pairs[k, 0]), int(pairs[k, 1]), float(weights[t])) for t, k in enumerate(chosen_idx)
    )
    maps = tuple(bases.edge_product(int(pairs[k, 0]), int(pairs[k, 1])) for k in chosen_idx)
    cg = ConnectionGraph(v=v, n=n, edges=edges, maps=maps)
    return GroundTruth(
        cg=cg,
        laplacian=build_connection_laplacian(cg),
        bases=bases,
        provenance={"family": "er", "p": float(p), "w_lo": float(w_lo), "w_hi": float(w_hi)},
        seed=seed,
    )


def fibonacci_sphere(count: int) -> np.ndarray:
    """Quasi-uniform points on the unit sphere via the golden-angle lattice."""
    if count < 4:
        raise ValueError(f"need at least four points, got {count}")
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    azimuth = 2.0 * np.pi * i / golden**2
    radial = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    return np.column_stack((radial * np.cos(azimuth), radial * np.sin(azimuth), z))


def knn_graph(points: np.ndarray, k: int) -> list[tuple[int, int]]:
    """Union-symmetrized k-nearest-neighbor edges, 1-based (i, j) with i > j.

    Ties in distance are broken by node index (stable argsort).
    """
    points = np.asarray(points, dtype=float)
    count = len(points)
    if not (1 <= k < count):
        raise ValueError(f"need 1 <= k < number of points, got k={k}, count={count}")
    sq = np.sum(points**2, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    edges: set[tuple[int, int]] = set()
    for a in range(count):
        for b in order[a]:
            i, j = max(a, int(b)) + 1, min(a, int(b)) + 1
            edges.add((i, j))
    return sorted(edges, key=lambda e: (e[1], e[0]))


def tangent_frames(points: np.ndarray, edges: list[tuple[int, int]]) -> np.ndarray:
    """Per-node orthonormal tangent frame (3 x 2) from neighbor directions.

    Neighbor difference vectors are projected off the radial direction and
    the top-2 right singular directions are kept; each frame is oriented
    right-handed with respect to the outward normal.
    """
    points = np.asarray(points, dtype=float)
    count = len(points)
    neighbors: dict[int, list[int]] = {a: [] for a in range(count)}
    for i, j in edges:
        neighbors[i - 1].append(j - 1)
        neighbors[j - 1].append(i - 1)
    frames = np.empty((count, 3, 2))
    for a in range(count):
        nbrs = neighbors[a]
        if len(nbrs) < 2:
            raise ValueError(f"node {a + 1} has fewer than two neighbors")
        normal = points[a]
        diffs = points[nbrs] - normal
        diffs = diffs - np.outer(diffs @ normal, normal)
        _, svals, vt = np.linalg.svd(diffs, full_matrices=True)
        if len(svals) < 2 or svals[1] <= 1e-10 * svals[0]:
            raise ValueError(f"degenerate neighborhood at node {a + 1}: tangent rank < 2")
        frame = vt[:2].T
        if np.dot(np.cross(frame[:, 0], frame[:, 1]), normal) < 0:
            frame = frame[:, ::-1].copy()
        frames[a] = frame
    return frames


def vdm_edge_maps(frames: np.ndarray, edges: list[tuple[int, int]]) -> list[np.ndarray]:
    """Per-edge SO(2) alignment: nearest rotation to F_i^T F_j."""
    maps = []
    for i, j in edges:
        cross = frames[i - 1].T @ frames[j - 1]
        maps.append(project_special_orthogonal(cross, rank_tol=1e-8))
    return maps


def spherical_cg(count: int = 50, k: int = 4, seed: int = 0) -> GroundTruth:
    """Consistent connection graph over a discretized sphere.

    Pipeline: Fibonacci lattice -> k-NN graph -> tangent frames -> aligned
    edge maps -> raw connection Laplacian -> spectral synchronization ->
    consistent rebuild with O_ij = O_i^T O_j and unit weights.  The raw maps
    carry curvature and are only approximately consistent; the synchronized
    graph is consistent by construction.
    """
    if count < 8:
        raise ValueError(f"need at least eight points, got {count}")
    points = fibonacci_sphere(count)
    edges = knn_graph(points, k)
    comps = connected_components(count, [(i, j) for i, j in edges])
    if len(comps) > 1:
        raise ValueError(f"k-NN graph with k={k} over {count} points is disconnected: {comps}")
    frames = tangent_frames(points, edges)
    raw_maps = vdm_edge_maps(frames, edges)
    raw_cg = ConnectionGraph(
        v=count,
        n=2,
        edges=tuple((i, j, 1.0) for i, j in edges),
        maps=tuple(raw_maps),
    )
    raw_lap = build_connection_laplacian(raw_cg)
    bases = synchronize(raw_lap, tol=SPHERE_SYNC_TOL)
    cg = ConnectionGraph(
        v=count,
        n=2,
        edges=raw_cg.edges,
        maps=tuple(bases.edge_product(i, j) for i, j in edges),
    )
    return GroundTruth(
        cg=cg,
        laplacian=build_connection_laplacian(cg),
        bases=bases,
        provenance={"family": "sphere", "count": count, "k": k},
        seed=seed,
    )


def sample_signals(gt: GroundTruth, m: int, seed: int = 0) -> SignalMatrix:
    """Draw M i.i.d. columns from N(0, pinv(L)).

    Standard normal draws are colored through the pseudo-inverse square root
    of the Laplacian, so every sample is orthogonal to the kernel.
    """
    if m < 1:
        raise ValueError(f"need at least one sample, got M={m}")
    rng = np.random.default_rng(seed)
    vals, vecs = np.linalg.eigh(gt.laplacian.matrix)
    keep = vals > 1e-8 * max(vals[-1], 0.0)
    coloring = vecs[:, keep] / np.sqrt(vals[keep])
    x = coloring @ rng.standard_normal((int(np.sum(keep)), m))
    return SignalMatrix(X=x, v=gt.v, n=gt.n, M=m, seed=seed)
