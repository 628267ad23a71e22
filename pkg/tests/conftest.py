import numpy as np
import pytest

from cglearn.graphs import ConnectionGraph, NodeBases


def random_special_orthogonal(n, rng):
    """Haar-ish SO(n) sample: QR with sign fix, determinant corrected to +1."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, -1] *= -1
    return q


def random_consistent_cg(v, n, rng, density=0.6):
    """Connected CG with edge maps factored through random node bases."""
    from cglearn.indexing import edge_pairs

    pairs = edge_pairs(v)
    # Path edges guarantee connectivity, extras are sampled.
    chosen = {(i + 1, i) for i in range(1, v)}
    for i, j in pairs:
        if rng.random() < density:
            chosen.add((int(i), int(j)))
    bases = NodeBases(np.stack([random_special_orthogonal(n, rng) for _ in range(v)]))
    edges = []
    maps = []
    for i, j in sorted(chosen, key=lambda e: (e[1], e[0])):
        edges.append((i, j, float(rng.uniform(0.2, 3.0))))
        maps.append(bases.edge_product(i, j))
    return ConnectionGraph(v=v, n=n, edges=tuple(edges), maps=tuple(maps)), bases


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
