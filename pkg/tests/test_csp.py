import numpy as np
import pytest

from neuroplane.csp import (
    DegenerateDataError,
    SingularCovarianceError,
    SpatialFilterPair,
    apply_filters,
    average_filters,
    class_covariance,
    compute_filters,
    jacobi_eigh,
    rayleigh_grid_argmax,
)
from neuroplane.signal_core import Window


def random_spd_pair(rng, n=2):
    def one():
        a = rng.normal(size=(n, n))
        m = a @ a.T + 0.05 * np.eye(n)
        return m / np.trace(m)
    return one(), one()


def random_window(rng, c=2, t=5):
    return Window(data=rng.normal(size=(c, t)), start_ts=0)


class TestJacobiEigh:
    def test_matches_numpy_eigh(self):
        rng = np.random.default_rng(3)
        for n in (2, 3, 4, 6):
            for _ in range(25):
                a = rng.normal(size=(n, n))
                s = a + a.T
                vals, vecs = jacobi_eigh(s)
                ref_vals = np.linalg.eigvalsh(s)
                np.testing.assert_allclose(vals, ref_vals, atol=1e-10)
                # columns are eigenvectors: S v = lambda v
                for j in range(n):
                    np.testing.assert_allclose(
                        s @ vecs[:, j], vals[j] * vecs[:, j], atol=1e-9
                    )
                np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestClassCovariance:
    def test_single_active_channel(self):
        w = Window(data=np.array([[1, -1, 1, -1, 1], [0, 0, 0, 0, 0]], dtype=float), start_ts=0)
        np.testing.assert_allclose(class_covariance([w]), [[1, 0], [0, 0]], atol=1e-15)

    def test_two_symmetric_windows(self):
        w1 = Window(data=np.array([[1, 1, 1, 1, 1], [0, 0, 0, 0, 0]], dtype=float), start_ts=0)
        w2 = Window(data=np.array([[0, 0, 0, 0, 0], [1, 1, 1, 1, 1]], dtype=float), start_ts=0)
        np.testing.assert_allclose(class_covariance([w1, w2]), [[0.5, 0], [0, 0.5]], atol=1e-15)

    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(11)
        windows = [random_window(rng) for _ in range(100)]
        # brute-force oracle: literal loop over entries
        acc = np.zeros((2, 2))
        for w in windows:
            x = w.data
            prod = np.zeros((2, 2))
            for i in range(2):
                for j in range(2):
                    prod[i, j] = sum(x[i, k] * x[j, k] for k in range(5))
            acc += prod / (prod[0, 0] + prod[1, 1])
        oracle = acc / len(windows)
        oracle /= np.trace(oracle)
        np.testing.assert_allclose(class_covariance(windows), oracle, atol=1e-10)

    def test_invariants_hold(self):
        rng = np.random.default_rng(12)
        cov = class_covariance([random_window(rng) for _ in range(30)])
        assert np.max(np.abs(cov - cov.T)) < 1e-12
        assert np.trace(cov) == pytest.approx(1.0, abs=1e-12)
        assert np.min(np.linalg.eigvalsh(cov)) > -1e-12

    def test_empty_and_degenerate(self):
        with pytest.raises(ValueError):
            class_covariance([])
        zero = Window(data=np.zeros((2, 5)), start_ts=0)
        with pytest.raises(DegenerateDataError):
            class_covariance([zero])


class TestComputeFilters:
    def test_axis_aligned(self):
        p = compute_filters(np.diag([0.8, 0.2]), np.diag([0.2, 0.8]))
        np.testing.assert_allclose(p.w_t, [1, 0], atol=1e-12)
        np.testing.assert_allclose(p.w_r, [0, 1], atol=1e-12)
        assert p.discriminative

    def test_identical_classes_flagged(self):
        rng = np.random.default_rng(4)
        cov, _ = random_spd_pair(rng)
        p1 = compute_filters(cov, cov)
        p2 = compute_filters(cov, cov)
        assert not p1.discriminative
        np.testing.assert_array_equal(p1.w_t, p2.w_t)
        np.testing.assert_array_equal(p1.w_r, p2.w_r)

    def test_singular_composite_raises(self):
        cov = np.array([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(SingularCovarianceError) as exc:
            compute_filters(cov, cov)
        assert "eigenvalue" in str(exc.value)

    def test_matches_rayleigh_grid_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            cov_t, cov_r = random_spd_pair(rng)
            pair = compute_filters(cov_t, cov_r)
            best = rayleigh_grid_argmax(cov_t, cov_r)
            cos = abs(pair.w_t @ best)
            assert cos > 0.999

    def test_whitened_orthogonality(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            cov_t, cov_r = random_spd_pair(rng)
            p = compute_filters(cov_t, cov_r)
            assert abs(p.w_t @ (cov_t + cov_r) @ p.w_r) < 1e-8

    def test_rayleigh_optimality_over_grid(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            cov_t, cov_r = random_spd_pair(rng)
            p = compute_filters(cov_t, cov_r)
            ours = (p.w_t @ cov_t @ p.w_t) / (p.w_t @ cov_r @ p.w_t)
            angles = np.deg2rad(np.arange(3601) * 0.05)
            dirs = np.stack([np.cos(angles), np.sin(angles)])
            quots = np.einsum("in,ij,jn->n", dirs, cov_t, dirs) / np.einsum(
                "in,ij,jn->n", dirs, cov_r, dirs
            )
            assert ours >= np.max(quots) - 1e-6

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        windows_t = [random_window(rng) for _ in range(20)]
        windows_r = [random_window(rng) for _ in range(20)]
        p1 = compute_filters(class_covariance(windows_t), class_covariance(windows_r))
        scaled_t = [Window(data=3.7 * w.data, start_ts=w.start_ts) for w in windows_t]
        scaled_r = [Window(data=3.7 * w.data, start_ts=w.start_ts) for w in windows_r]
        p2 = compute_filters(class_covariance(scaled_t), class_covariance(scaled_r))
        np.testing.assert_allclose(p1.w_t, p2.w_t, atol=1e-9)
        np.testing.assert_allclose(p1.w_r, p2.w_r, atol=1e-9)


class TestAverageFilters:
    def test_idempotent_on_identical_pairs(self):
        rng = np.random.default_rng(8)
        p = compute_filters(*random_spd_pair(rng))
        avg = average_filters([p, p])
        np.testing.assert_allclose(avg.w_t, p.w_t, atol=1e-12)
        np.testing.assert_allclose(avg.w_r, p.w_r, atol=1e-12)

    def test_negated_pair_aligns(self):
        rng = np.random.default_rng(9)
        p = compute_filters(*random_spd_pair(rng))
        negated = SpatialFilterPair(w_t=-p.w_t, w_r=-p.w_r)
        avg = average_filters([p, negated])
        np.testing.assert_allclose(avg.w_t, p.w_t, atol=1e-12)
        np.testing.assert_allclose(avg.w_r, p.w_r, atol=1e-12)

    def test_three_random_pairs_match_explicit_oracle(self):
        rng = np.random.default_rng(10)
        pairs = [compute_filters(*random_spd_pair(rng)) for _ in range(3)]
        avg = average_filters(pairs)
        for attr in ("w_t", "w_r"):
            ref = getattr(pairs[0], attr)
            vecs = []
            for p in pairs:
                v = getattr(p, attr)
                vecs.append(-v if float(np.dot(v, ref)) < 0 else v)
            expect = np.mean(vecs, axis=0)
            expect = expect / np.linalg.norm(expect)
            np.testing.assert_allclose(getattr(avg, attr), expect, atol=1e-12)

    def test_aligned_average_never_cancels(self):
        # sign alignment to the first pair keeps a component of at least 1/n
        # along the reference, so the norm guard cannot fire from this path
        a = SpatialFilterPair(w_t=np.array([1.0, 0.0]), w_r=np.array([0.0, 1.0]))
        b = SpatialFilterPair(w_t=np.array([-1.0, 0.0]), w_r=np.array([0.0, -1.0]))
        c = SpatialFilterPair(w_t=np.array([0.0, 1.0]), w_r=np.array([1.0, 0.0]))
        avg = average_filters([a, b, c])
        assert np.linalg.norm(avg.w_t) == pytest.approx(1.0)
        assert avg.w_t @ a.w_t > 0

    def test_empty_list_raises(self):
        with pytest.raises(ValueError):
            average_filters([])


class TestApplyFilters:
    def test_selector_filters(self):
        p = SpatialFilterPair(w_t=np.array([1.0, 0.0]), w_r=np.array([0.0, 1.0]))
        w = Window(data=np.array([[1, 2, 3, 4, 5], [6, 7, 8, 9, 10]], dtype=float), start_ts=0)
        np.testing.assert_allclose(apply_filters(p, w), [1, 2, 3, 4, 5, 6, 7, 8, 9, 10])

    def test_feature_length_is_2t(self):
        rng = np.random.default_rng(13)
        p = compute_filters(*random_spd_pair(rng))
        assert apply_filters(p, random_window(rng)).shape == (10,)

    def test_matches_naive_product_oracle(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            p = compute_filters(*random_spd_pair(rng))
            w = random_window(rng)
            feat = apply_filters(p, w)
            naive = np.empty(10)
            for k in range(5):
                naive[k] = sum(p.w_t[c] * w.data[c, k] for c in range(2))
                naive[5 + k] = sum(p.w_r[c] * w.data[c, k] for c in range(2))
            np.testing.assert_allclose(feat, naive, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(15)
        p = compute_filters(*random_spd_pair(rng))
        x, y = random_window(rng), random_window(rng)
        a, b = 1.7, -0.6
        combined = Window(data=a * x.data + b * y.data, start_ts=0)
        np.testing.assert_allclose(
            apply_filters(p, combined),
            a * apply_filters(p, x) + b * apply_filters(p, y),
            atol=1e-10,
        )

    def test_dimension_mismatch(self):
        p = SpatialFilterPair(w_t=np.array([1.0, 0.0]), w_r=np.array([0.0, 1.0]))
        w = Window(data=np.zeros((3, 5)) + np.eye(3, 5), start_ts=0)
        with pytest.raises(ValueError):
            apply_filters(p, w)
