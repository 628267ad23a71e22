"""Metric values against hand computations and the heat-kernel quadrature oracle."""

import numpy as np
import pytest

from cglearn.datagen import sample_er_cg, sample_signals
from cglearn.graphs import kron_laplacian
from cglearn.metrics import (
    EvalReport,
    empirical_tv,
    evaluate,
    f1_sparsity,
    heat_distance,
    kernel_dimension,
    spectral_distance,
    weight_mse,
)
from conftest import random_special_orthogonal


class TestF1:
    def test_exact_match(self):
        assert f1_sparsity(np.array([1.0, 0.0, 2.0]), np.array([0.5, 0.0, 1.0])) == 1.0

    def test_half_recall(self):
        assert f1_sparsity(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(2 / 3)

    def test_all_below_threshold(self):
        assert f1_sparsity(np.array([1e-6, 1e-5]), np.array([1.0, 1.0])) == 0.0

    def test_both_empty(self):
        assert f1_sparsity(np.zeros(3), np.zeros(3)) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1_sparsity(np.zeros(3), np.zeros(4))


class TestWeightMse:
    def test_zero_for_identical(self):
        w = np.array([1.0, 2.0, 0.0])
        assert weight_mse(w, w) == 0.0

    def test_absent_edges_count(self):
        assert weight_mse(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == 0.5

    def test_doubling(self):
        w = np.array([1.0, 0.5, 0.0, 2.0])
        assert weight_mse(2 * w, w) == pytest.approx(np.mean(w**2))


class TestEmpiricalTv:
    def test_constant_signal(self):
        lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert empirical_tv(lap, np.array([[1.0], [1.0]])) == 0.0

    def test_alternating_signal(self):
        lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert empirical_tv(lap, np.array([[1.0], [-1.0]])) == 4.0

    def test_approaches_rank(self):
        gt = sample_er_cg(v=6, n=2, seed=4)
        sig = sample_signals(gt, m=40_000, seed=4)
        rank = gt.n * (gt.v - 1)
        assert abs(empirical_tv(gt.laplacian, sig) - rank) / rank < 0.05

    def test_empty_signals(self):
        with pytest.raises(ValueError):
            empirical_tv(np.eye(2), np.zeros((2, 0)))


class TestSpectralDistance:
    def test_identical(self):
        assert spectral_distance(np.diag([0.0, 2.0]), np.diag([0.0, 2.0])) == 0.0

    def test_hand_value(self):
        assert spectral_distance(np.diag([0.0, 2.0]), np.diag([0.0, 4.0])) == 1.0

    def test_conjugation_invariance(self, rng):
        a = rng.standard_normal((6, 6))
        a = a @ a.T
        b = rng.standard_normal((6, 6))
        b = b @ b.T
        q = random_special_orthogonal(6, rng)
        base = spectral_distance(a, b)
        assert spectral_distance(q @ a @ q.T, q @ b @ q.T) == pytest.approx(base, abs=1e-10)

    def test_triangle_inequality(self, rng):
        for _ in range(10):
            mats = []
            for _ in range(3):
                m = rng.standard_normal((5, 5))
                mats.append(m @ m.T)
            a, b, c = mats
            assert spectral_distance(a, c) <= spectral_distance(a, b) + spectral_distance(b, c) + 1e-12


def random_psd_with_kernel(dim, kernel_dim, rng):
    q = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
    eigs = np.concatenate([np.zeros(kernel_dim), rng.uniform(0.1, 3.0, size=dim - kernel_dim)])
    return q @ np.diag(eigs) @ q.T


def quadrature_heat_distance(a, b, horizon=1e4):
    """Independent oracle: composite-Simpson time average of the squared
    Frobenius distance of the two heat kernels."""
    ea, ua = np.linalg.eigh(a)
    eb, ub = np.linalg.eigh(b)
    cross = (ua.T @ ub) ** 2

    def integrand(ts):
        ts = ts[:, None]
        terms_a = np.sum(np.exp(-2.0 * ts * ea), axis=1)
        terms_b = np.sum(np.exp(-2.0 * ts * eb), axis=1)
        mixed = np.exp(-ts * ea)[:, :, None] * np.exp(-ts[:, None] * eb[None, None, :])
        return terms_a + terms_b - 2.0 * np.sum(cross[None] * mixed, axis=(1, 2))

    def simpson(lo, hi, count):
        ts = np.linspace(lo, hi, 2 * count + 1)
        vals = integrand(ts)
        h = (hi - lo) / (2 * count)
        return h / 3.0 * (vals[0] + vals[-1] + 4 * np.sum(vals[1:-1:2]) + 2 * np.sum(vals[2:-2:2]))

    positive = np.concatenate([ea[ea > 1e-12], eb[eb > 1e-12]])
    knee = min(horizon, 60.0 / positive.min()) if positive.size else horizon
    total = simpson(0.0, knee, 3000)
    if knee < horizon:
        total += simpson(knee, horizon, 400)
    return total / horizon


class TestHeatDistance:
    def test_identical(self):
        a = np.diag([0.0, 1.0, 2.0])
        assert heat_distance(a, a) == 0.0

    def test_orthogonal_kernels(self):
        assert heat_distance(np.diag([0.0, 3.0]), np.diag([3.0, 0.0])) == pytest.approx(2.0)

    def test_matches_quadrature_oracle(self, rng):
        for trial in range(20):
            dim = 4
            ka = int(rng.integers(0, 3))
            kb = int(rng.integers(0, 3))
            a = random_psd_with_kernel(dim, ka, rng)
            b = random_psd_with_kernel(dim, kb, rng)
            closed = heat_distance(a, b)
            quad = quadrature_heat_distance(a, b)
            assert abs(closed - quad) < 1e-2, f"trial {trial}: closed {closed} vs quadrature {quad}"

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError):
            heat_distance(np.diag([-1.0, 1.0]), np.eye(2))


class TestKernelDimension:
    def test_kron_of_connected_graph(self, rng):
        w = rng.uniform(0.5, 2.0, size=10)
        for n in (1, 2, 3):
            assert kernel_dimension(kron_laplacian(w, 5, n)) == n

    def test_zero_matrix(self):
        assert kernel_dimension(np.zeros((4, 4))) == 4

    def test_two_components(self):
        w = np.zeros(6)  # v = 4; edges (2,1) and (4,3) only
        w[0] = 1.0
        w[5] = 1.0
        assert kernel_dimension(kron_laplacian(w, 4, 2)) == 4


class TestEvalReport:
    def test_self_evaluation(self):
        gt = sample_er_cg(v=6, n=2, seed=8)
        sig = sample_signals(gt, m=200, seed=8)
        report = evaluate(
            gt.cg.weight_vector(), gt.laplacian, gt.cg.weight_vector(), gt.laplacian, sig
        )
        assert report.f1 == 1.0
        assert report.weight_mse == 0.0
        assert report.spectral_distance == pytest.approx(0.0, abs=1e-12)
        assert report.heat_distance == pytest.approx(0.0, abs=1e-10)
        assert report.kernel_dim_est == report.kernel_dim_true == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            EvalReport(
                f1=1.5,
                weight_mse=0.0,
                empirical_tv=0.0,
                spectral_distance=0.0,
                heat_distance=0.0,
                kernel_dim_est=2,
                kernel_dim_true=2,
            )
        with pytest.raises(ValueError):
            EvalReport(
                f1=float("nan"),
                weight_mse=0.0,
                empirical_tv=0.0,
                spectral_distance=0.0,
                heat_distance=0.0,
                kernel_dim_est=2,
                kernel_dim_true=2,
            )
