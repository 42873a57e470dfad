import itertools

import numpy as np
import pytest

from mkvsim.core import EmpiricalMeasure
from mkvsim.wasserstein import wp_1d, wp_assignment, wp_pairing_bound


def brute_force_wp(x, y, p):
    """Independent oracle: minimum over all N! pairings."""
    n = x.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = np.mean(np.linalg.norm(x - y[list(perm)], axis=1) ** p)
        best = min(best, cost)
    return best ** (1.0 / p)


def random_clouds(rng, n, d):
    return (
        EmpiricalMeasure(rng.normal(size=(n, d)) * rng.uniform(0.5, 3)),
        EmpiricalMeasure(rng.normal(size=(n, d)) * rng.uniform(0.5, 3)),
    )


class TestWp1d:
    def test_identical_clouds(self):
        mu = EmpiricalMeasure(np.array([[0.3], [1.7], [-2.0]]))
        assert wp_1d(mu, mu, 2.0) == 0.0

    def test_two_point_example(self):
        x = EmpiricalMeasure(np.array([[0.0], [2.0]]))
        y = EmpiricalMeasure(np.array([[1.0], [3.0]]))
        # brute force over both pairings: identity cost 1, swap cost 5
        assert wp_1d(x, y, 2.0) == pytest.approx(1.0)

    def test_single_point(self):
        x = EmpiricalMeasure(np.array([[5.0]]))
        y = EmpiricalMeasure(np.array([[2.0]]))
        assert wp_1d(x, y, 3.0) == pytest.approx(3.0)

    def test_dimension_mismatch(self):
        x = EmpiricalMeasure(np.zeros((2, 2)))
        y = EmpiricalMeasure(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            wp_1d(x, y, 2.0)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            wp_1d(EmpiricalMeasure(np.zeros((2, 1))), EmpiricalMeasure(np.zeros((3, 1))), 2.0)


class TestWpAssignment:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            d = int(rng.integers(1, 4))
            p = float(rng.choice([1.0, 2.0, 3.0]))
            x, y = random_clouds(rng, n, d)
            expected = brute_force_wp(x.points, y.points, p)
            assert wp_assignment(x, y, p) == pytest.approx(expected, abs=1e-12)

    def test_matches_sorted_pairing_in_1d(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            x, y = random_clouds(rng, n, 1)
            for p in (1.0, 2.0, 3.0):
                assert wp_assignment(x, y, p) == pytest.approx(wp_1d(x, y, p), abs=1e-12)

    def test_permuted_point_sets(self):
        x = EmpiricalMeasure(np.array([[0.0, 0.0], [1.0, 1.0]]))
        y = EmpiricalMeasure(np.array([[1.0, 1.0], [0.0, 0.0]]))
        assert wp_assignment(x, y, 2.0) == 0.0

    def test_parallel_shift_2d(self):
        x = EmpiricalMeasure(np.array([[0.0, 0.0], [2.0, 0.0]]))
        y = EmpiricalMeasure(np.array([[0.0, 1.0], [2.0, 1.0]]))
        assert wp_assignment(x, y, 2.0) == pytest.approx(1.0)

    def test_refuses_large_clouds(self):
        big = EmpiricalMeasure(np.zeros((1000, 1)))
        with pytest.raises(ValueError):
            wp_assignment(big, big, 2.0)

    def test_p_out_of_range(self):
        mu = EmpiricalMeasure(np.zeros((2, 1)))
        with pytest.raises(ValueError):
            wp_assignment(mu, mu, 0.5)
        with pytest.raises(ValueError):
            wp_assignment(mu, mu, 17.0)


class TestPairingBound:
    def test_identical_clouds(self):
        mu = EmpiricalMeasure(np.array([[1.0], [2.0]]))
        assert wp_pairing_bound(mu, mu, 2.0) == 0.0

    def test_dominates_exact(self):
        x = EmpiricalMeasure(np.array([[0.0], [2.0]]))
        y = EmpiricalMeasure(np.array([[3.0], [1.0]]))
        bound = wp_pairing_bound(x, y, 2.0)
        assert bound == pytest.approx(np.sqrt(5.0))
        assert wp_1d(x, y, 2.0) == pytest.approx(1.0)
        assert bound >= wp_1d(x, y, 2.0)

    def test_translation_is_tight(self):
        rng = np.random.default_rng(3)
        x = EmpiricalMeasure(rng.normal(size=(6, 2)))
        c = np.array([0.7, -1.3])
        y = EmpiricalMeasure(x.points + c)
        for p in (1.0, 2.0, 4.0):
            assert wp_pairing_bound(x, y, p) == pytest.approx(np.linalg.norm(c))

    def test_always_above_assignment(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(1, 9))
            d = int(rng.integers(1, 4))
            x, y = random_clouds(rng, n, d)
            p = float(rng.choice([1.0, 2.0, 3.0]))
            assert wp_pairing_bound(x, y, p) >= wp_assignment(x, y, p) - 1e-12


class TestMetricProperties:
    def test_axioms_on_random_instances(self):
        rng = np.random.default_rng(101)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            d = int(rng.integers(1, 4))
            p = float(rng.choice([1.0, 2.0]))
            x, y = random_clouds(rng, n, d)
            z, _ = random_clouds(rng, n, d)
            dxy = wp_assignment(x, y, p)
            assert dxy >= 0
            assert dxy == pytest.approx(wp_assignment(y, x, p), abs=1e-12)
            assert wp_assignment(x, y, p) <= (
                wp_assignment(x, z, p) + wp_assignment(z, y, p) + 1e-10
            )
        # zero iff the multisets coincide
        pts = rng.normal(size=(5, 2))
        same = EmpiricalMeasure(pts)
        shuffled = EmpiricalMeasure(pts[::-1].copy())
        assert wp_assignment(same, shuffled, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_scaling(self):
        rng = np.random.default_rng(5)
        x, y = random_clouds(rng, 5, 2)
        base = wp_assignment(x, y, 2.0)
        for a in (0.5, 2.0, -3.0):
            xs = EmpiricalMeasure(a * x.points)
            ys = EmpiricalMeasure(a * y.points)
            assert wp_assignment(xs, ys, 2.0) == pytest.approx(abs(a) * base, rel=1e-10)

    def test_coupling_inequality(self):
        # the identity-index coupling never beats the optimal one
        rng = np.random.default_rng(13)
        for _ in range(30):
            x, y = random_clouds(rng, int(rng.integers(2, 8)), int(rng.integers(1, 3)))
            p = float(rng.choice([1.0, 2.0, 3.0]))
            assert wp_assignment(x, y, p) <= wp_pairing_bound(x, y, p) + 1e-12
