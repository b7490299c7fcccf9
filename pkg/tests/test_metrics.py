"""Alignment, uniformity, and Spearman against brute-force oracles."""

import math

import numpy as np
import pytest
import scipy.stats

from wcse.errors import DegenerateInputError, InsufficientDataError, ShapeError
from wcse.linalg import l2_normalize_rows
from wcse.metrics import alignment_loss, spearman, uniformity_loss


def alignment_oracle(pairs):
    total = 0.0
    for a, b in pairs:
        total += sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
    return total / len(pairs)


def uniformity_oracle(points):
    acc = 0.0
    count = 0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d2 = sum((float(x) - float(y)) ** 2 for x, y in zip(points[i], points[j]))
            acc += math.exp(-2.0 * d2)
            count += 1
    return math.log(acc / count)


def spearman_oracle_no_ties(x, y):
    """1 - 6*sum(d^2)/(n(n^2-1)); valid when all values are distinct."""
    n = len(x)
    rx = np.argsort(np.argsort(x)) + 1
    ry = np.argsort(np.argsort(y)) + 1
    d2 = float(np.sum((rx - ry) ** 2))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def unit_rows(rng, n, d):
    return l2_normalize_rows(rng.normal(size=(n, d)))


class TestAlignment:
    def test_identical_pairs(self):
        rng = np.random.default_rng(0)
        x = unit_rows(rng, 4, 5)
        assert alignment_loss([(row, row.copy()) for row in x]) == 0.0

    def test_antipodal_pair(self):
        v = np.zeros(6)
        v[2] = 1.0
        assert alignment_loss([(v, -v)]) == pytest.approx(4.0, abs=1e-12)

    def test_against_scalar_oracle(self):
        rng = np.random.default_rng(1)
        pairs = [(unit_rows(rng, 1, 8)[0], unit_rows(rng, 1, 8)[0]) for _ in range(10)]
        assert abs(alignment_loss(pairs) - alignment_oracle(pairs)) <= 1e-12

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        pairs = [(unit_rows(rng, 1, 4)[0], unit_rows(rng, 1, 4)[0]) for _ in range(20)]
        assert alignment_loss(pairs) >= 0.0

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            alignment_loss([])

    def test_non_unit_rejected(self):
        with pytest.raises(DegenerateInputError):
            alignment_loss([(np.array([1.0, 1.0]), np.array([1.0, 0.0]))])


class TestUniformity:
    def test_collapsed_points(self):
        v = np.zeros(4)
        v[0] = 1.0
        assert uniformity_loss([v, v.copy(), v.copy()]) == pytest.approx(0.0, abs=1e-12)

    def test_two_antipodal_points(self):
        v = np.zeros(3)
        v[1] = 1.0
        assert uniformity_loss([v, -v]) == pytest.approx(-8.0, abs=1e-12)

    def test_against_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        pts = unit_rows(rng, 20, 6)
        assert abs(uniformity_loss(pts) - uniformity_oracle(pts)) <= 1e-12

    def test_bounds_and_spread_response(self):
        rng = np.random.default_rng(4)
        spread = unit_rows(rng, 30, 8)
        tight = l2_normalize_rows(spread[0] + 0.01 * rng.normal(size=(30, 8)))
        u_spread = uniformity_loss(spread)
        u_tight = uniformity_loss(tight)
        assert -8.0 <= u_spread <= 0.0
        assert -8.0 <= u_tight <= 0.0
        assert u_spread < u_tight

    def test_single_point_rejected(self):
        with pytest.raises(InsufficientDataError):
            uniformity_loss([np.array([1.0, 0.0])])


class TestSpearman:
    def test_perfect_monotone(self):
        x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
        assert spearman(x, x.copy()) == pytest.approx(1.0, abs=1e-15)

    def test_perfect_inverse(self):
        x = np.array([1.0, 2.0, 5.0, 7.0])
        assert spearman(x, -x) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_case_exact(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        y = [2.0, 1.0, 4.0, 3.0, 5.0]
        expected = spearman_oracle_no_ties(np.array(x), np.array(y))
        assert expected == 0.8  # 1 - 6*4/(5*24)
        assert spearman(x, y) == expected

    def test_matches_rank_formula_on_distinct_values(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            x = rng.permutation(12).astype(float)
            y = rng.normal(size=12)
            assert abs(spearman(x, y) - spearman_oracle_no_ties(x, y)) <= 1e-12

    def test_tie_handling_matches_scipy(self):
        x = np.array([1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 4.0])
        y = np.array([2.0, 1.0, 1.0, 5.0, 4.0, 4.0, 6.0])
        expected = scipy.stats.spearmanr(x, y).statistic
        assert spearman(x, y) == pytest.approx(expected, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        base = spearman(x, y)
        assert spearman(np.exp(x), y) == pytest.approx(base, abs=1e-12)
        assert spearman(x, 3.0 * y + 10.0) == pytest.approx(base, abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            rho = spearman(rng.normal(size=15), rng.normal(size=15))
            assert -1.0 <= rho <= 1.0

    def test_constant_input_rejected(self):
        with pytest.raises(DegenerateInputError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            spearman([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            spearman([1.0], [2.0])
