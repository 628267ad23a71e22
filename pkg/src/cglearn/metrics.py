"""Evaluation metrics comparing an estimated connection Laplacian to ground truth."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .datagen import SignalMatrix
from .graphs import ConnectionLaplacian

DEFAULT_EDGE_EPS = 1e-4

# Column order of one results-CSV row; metadata first, then EvalReport fields.
RESULTS_CSV_COLUMNS = [
    "seed",
    "method",
    "family",
    "v",
    "n",
    "M",
    "r",
    "alpha",
    "beta",
    "f1",
    "weight_mse",
    "empirical_tv",
    "spectral_dist",
    "heat_dist",
    "kernel_dim_est",
    "kernel_dim_true",
    "wall_time_s",
]


@dataclass(frozen=True)
class EvalReport:
    f1: float
    weight_mse: float
    empirical_tv: float
    spectral_distance: float
    heat_distance: float
    kernel_dim_est: int
    kernel_dim_true: int

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ValueError(f"metric {f.name} is not finite: {value}")
        if not (0.0 <= self.f1 <= 1.0):
            raise ValueError(f"f1 must be in [0, 1], got {self.f1}")

    def as_dict(self) -> dict:
        return {
            "f1": self.f1,
            "weight_mse": self.weight_mse,
            "empirical_tv": self.empirical_tv,
            "spectral_dist": self.spectral_distance,
            "heat_dist": self.heat_distance,
            "kernel_dim_est": self.kernel_dim_est,
            "kernel_dim_true": self.kernel_dim_true,
        }


def f1_sparsity(w_hat: np.ndarray, w_true: np.ndarray, eps: float = DEFAULT_EDGE_EPS) -> float:
    """F1 score of the recovered sparsity pattern.

    An edge is predicted when its learned weight exceeds ``eps``; learned
    Laplacians undergo no other post-processing.  Returns 1 when both edge
    sets are empty.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if w_hat.shape != w_true.shape:
        raise ValueError(f"weight vectors differ in length: {w_hat.shape} vs {w_true.shape}")
    predicted = w_hat > eps
    actual = w_true > 0
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def weight_mse(w_hat: np.ndarray, w_true: np.ndarray) -> float:
    """Mean squared error over all v(v-1)/2 weight entries (zeros included)."""
    w_hat = np.asarray(w_hat, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if w_hat.shape != w_true.shape:
        raise ValueError(f"weight vectors differ in length: {w_hat.shape} vs {w_true.shape}")
    return float(np.mean((w_hat - w_true) ** 2))


def empirical_tv(l_hat: ConnectionLaplacian | np.ndarray, y: SignalMatrix | np.ndarray) -> float:
    """Empirical total variation Tr(L Y Y^T) / M on test signals."""
    mat = l_hat.matrix if isinstance(l_hat, ConnectionLaplacian) else np.asarray(l_hat, dtype=float)
    cols = y.X if isinstance(y, SignalMatrix) else np.asarray(y, dtype=float)
    if cols.ndim != 2 or cols.shape[1] == 0:
        raise ValueError("test signals must be a nonempty (vn, M) matrix")
    if cols.shape[0] != mat.shape[0]:
        raise ValueError(f"dimension mismatch: L is {mat.shape}, Y is {cols.shape}")
    return float(np.sum(cols * (mat @ cols)) / cols.shape[1])


def _as_matrix(lap: ConnectionLaplacian | np.ndarray) -> np.ndarray:
    return lap.matrix if isinstance(lap, ConnectionLaplacian) else np.asarray(lap, dtype=float)


def spectral_distance(l_a: ConnectionLaplacian | np.ndarray, l_b: ConnectionLaplacian | np.ndarray) -> float:
    """Mean absolute difference of ascending eigenvalues."""
    a, b = _as_matrix(l_a), _as_matrix(l_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(np.linalg.eigvalsh(a) - np.linalg.eigvalsh(b))))


def kernel_dimension(lap: ConnectionLaplacian | np.ndarray, zero_tol: float = 1e-8) -> int:
    """Number of eigenvalues below zero_tol * max(largest eigenvalue, 1)."""
    eigs = np.linalg.eigvalsh(_as_matrix(lap))
    return int(np.sum(eigs < zero_tol * max(eigs[-1], 1.0)))


def _kernel_basis(mat: np.ndarray, zero_tol: float) -> np.ndarray:
    eigs, vecs = np.linalg.eigh(mat)
    scale = max(eigs[-1], 1.0)
    if eigs[0] < -zero_tol * scale:
        raise ValueError(f"matrix is not PSD (min eigenvalue {eigs[0]:g})")
    return vecs[:, eigs < zero_tol * scale]


def heat_distance(
    l_a: ConnectionLaplacian | np.ndarray,
    l_b: ConnectionLaplacian | np.ndarray,
    zero_tol: float = 1e-8,
) -> float:
    """Long-run average of || exp(-t A) - exp(-t B) ||_F^2 in closed form.

    Every strictly-positive eigenvalue contributes a vanishing term to the
    Cesaro limit, leaving the squared Frobenius distance of the kernel
    projectors: k_a + k_b - 2 ||V_a^T V_b||_F^2 for kernel bases V.
    """
    a, b = _as_matrix(l_a), _as_matrix(l_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    va = _kernel_basis(a, zero_tol)
    vb = _kernel_basis(b, zero_tol)
    return float(va.shape[1] + vb.shape[1] - 2.0 * np.sum((va.T @ vb) ** 2))


def evaluate(
    w_hat: np.ndarray,
    l_hat: ConnectionLaplacian,
    gt_weights: np.ndarray,
    gt_laplacian: ConnectionLaplacian,
    test_signals: SignalMatrix | np.ndarray,
    eps: float = DEFAULT_EDGE_EPS,
    zero_tol: float = 1e-8,
) -> EvalReport:
    """All metrics of one estimate against one ground truth."""
    return EvalReport(
        f1=f1_sparsity(w_hat, gt_weights, eps=eps),
        weight_mse=weight_mse(w_hat, gt_weights),
        empirical_tv=empirical_tv(l_hat, test_signals),
        spectral_distance=spectral_distance(l_hat, gt_laplacian),
        heat_distance=heat_distance(l_hat, gt_laplacian, zero_tol=zero_tol),
        kernel_dim_est=kernel_dimension(l_hat, zero_tol=zero_tol),
        kernel_dim_true=kernel_dimension(gt_laplacian, zero_tol=zero_tol),
    )
