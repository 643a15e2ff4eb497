"""Finite differences and the gradient-variance probe."""
import numpy as np
import pytest

from qffn.circuits import Ansatz, PqcConfig, init_pqc_params, pqc_forward
from qffn.diagnostics import (
    ProbeEntry,
    finite_diff,
    grad_variance_probe,
    probe_csv,
    single_qubit_ry_variance,
)


class TestFiniteDiff:
    def test_quadratic(self):
        grad = finite_diff(lambda p: float(p[0] ** 2), np.array([3.0]))
        assert abs(grad[0] - 6.0) < 1e-8

    def test_constant(self):
        grad = finite_diff(lambda p: 1.5, np.zeros(4))
        np.testing.assert_array_equal(grad, np.zeros(4))

    def test_multivariate(self):
        f = lambda p: float(np.sin(p[0]) + p[1] ** 3)
        grad = finite_diff(f, np.array([0.3, 2.0]))
        np.testing.assert_allclose(grad, [np.cos(0.3), 12.0], atol=1e-7)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            finite_diff(lambda p: float("nan"), np.zeros(2))

    def test_matrix_shaped_params(self):
        f = lambda p: float(np.sum(p * p))
        params = np.arange(6.0).reshape(2, 3)
        np.testing.assert_allclose(finite_diff(f, params), 2 * params, atol=1e-7)


class TestProbe:
    def test_reduced_case_variance_is_half(self):
        var = single_qubit_ry_variance(1000, seed=7)
        # MC error of the variance estimator: sqrt((mu4 - mu2^2)/N) with
        # mu2 = 1/2, mu4 = 3/8 for -sin(t), t ~ U(-pi, pi)
        sigma = np.sqrt((3 / 8 - 1 / 4) / 1000)
        assert abs(var - 0.5) <= 3 * sigma

    def test_single_depth_entry_is_sane(self):
        result = grad_variance_probe("optimized", [1], num_samples=40, seed=1)
        (entry,) = result.entries
        assert entry == ProbeEntry(1, "optimized", entry.variance, 40)
        assert np.isfinite(entry.variance)
        assert 0.0 <= entry.variance <= 1.0

    def test_deterministic_under_seed(self):
        a = grad_variance_probe("vanilla", [1, 2], num_samples=35, seed=9)
        b = grad_variance_probe("vanilla", [1, 2], num_samples=35, seed=9)
        assert a.entries == b.entries

    def test_seed_changes_values(self):
        a = grad_variance_probe("vanilla", [1], num_samples=35, seed=9)
        b = grad_variance_probe("vanilla", [1], num_samples=35, seed=10)
        assert a.entries != b.entries

    def test_minimum_samples_enforced(self):
        with pytest.raises(ValueError):
            grad_variance_probe("optimized", [1], num_samples=10, seed=0)

    def test_csv_rendering(self):
        result = grad_variance_probe("optimized", [1, 2], num_samples=30, seed=3)
        text = probe_csv(result)
        lines = text.strip().split("\n")
        assert lines[0] == "depth,variant,variance,num_samples,seed"
        assert len(lines) == 3
        assert lines[1].startswith("1,optimized,") and lines[1].endswith(",30,3")

    @pytest.mark.parametrize("variant", ["optimized", "vanilla"])
    def test_variances_match_finite_difference_rerun(self, variant):
        # replay the probe's documented draw stream, replacing the shift rule
        # with central finite differences on the first trainable angle
        depths = [1, 2]
        num_samples = 30
        seed = 21
        probed = grad_variance_probe(variant, depths, num_samples, seed)

        rng = np.random.default_rng(seed)
        rerun = []
        for depth in depths:
            config = PqcConfig(Ansatz(variant), depth)
            grads = np.empty(num_samples)
            for i in range(num_samples):
                theta = init_pqc_params(config, rng)
                x = rng.uniform(-np.pi, np.pi, config.num_qubits)
                grads[i] = finite_diff(lambda t: pqc_forward(config, t, x)[0], theta)[0]
            rerun.append(float(np.var(grads)))

        for entry, fd_variance in zip(probed.entries, rerun):
            assert abs(entry.variance - fd_variance) <= 1e-6
