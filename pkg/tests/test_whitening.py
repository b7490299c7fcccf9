"""Whitening transforms, momentum statistics, group plans, SGW views."""

import numpy as np
import pytest

from wcse.errors import ConfigError, ShapeError, SingularCovarianceError
from wcse.linalg import covariance, sym_eig
from wcse.whitening import (
    PCA,
    ZCA,
    GroupPlan,
    WhiteningStats,
    apply_whitening,
    auto_ridge,
    derive_whitening,
    group_stats_from_batch,
    group_whiten,
    make_group_plan,
    sgw_augment,
    stats_from_batch,
    update_stats,
    view_seed,
)


def unrolled_stats_oracle(batches, beta):
    """Scalar unrolled momentum recurrence; first update adopts directly."""
    mean = None
    cov = None
    for batch in batches:
        xbar = batch.mean(axis=0)
        centered = batch - xbar
        sigma = centered.T @ centered / batch.shape[0]
        sigma = (sigma + sigma.T) / 2.0
        if mean is None:
            mean, cov = xbar, sigma
        else:
            mean = beta * mean + (1.0 - beta) * xbar
            cov = beta * cov + (1.0 - beta) * sigma
    return mean, cov


def fold_batches(batches, beta):
    stats = WhiteningStats.empty(batches[0].shape[1], beta)
    for b in batches:
        stats = update_stats(stats, b)
    return stats


class TestUpdateStats:
    def test_momentum_zero_tracks_latest_batch(self):
        rng = np.random.default_rng(0)
        batches = [rng.normal(size=(16, 4)) for _ in range(3)]
        stats = fold_batches(batches, 0.0)
        xbar = batches[-1].mean(axis=0)
        assert np.max(np.abs(stats.mean - xbar)) <= 1e-15
        assert np.max(np.abs(stats.cov - covariance(batches[-1], xbar))) <= 1e-15

    def test_identical_batch_fixed_point(self):
        rng = np.random.default_rng(1)
        batch = rng.normal(size=(12, 5))
        stats = fold_batches([batch, batch], 0.5)
        xbar = batch.mean(axis=0)
        assert np.max(np.abs(stats.mean - xbar)) <= 1e-15
        assert np.max(np.abs(stats.cov - covariance(batch, xbar))) <= 1e-15

    def test_matches_unrolled_oracle(self):
        rng = np.random.default_rng(2)
        batches = [rng.normal(size=(20, 6)) * rng.uniform(0.5, 2.0) for _ in range(3)]
        stats = fold_batches(batches, 0.9)
        mean, cov = unrolled_stats_oracle(batches, 0.9)
        assert np.max(np.abs(stats.mean - mean)) <= 1e-12
        assert np.max(np.abs(stats.cov - cov)) <= 1e-12
        assert stats.update_count == 3

    def test_first_update_ignores_momentum(self):
        rng = np.random.default_rng(3)
        batch = rng.normal(size=(8, 3))
        stats = update_stats(WhiteningStats.empty(3, 0.95), batch)
        xbar = batch.mean(axis=0)
        assert np.array_equal(stats.mean, xbar)

    def test_cov_symmetric(self):
        rng = np.random.default_rng(4)
        stats = fold_batches([rng.normal(size=(10, 7)) for _ in range(4)], 0.9)
        assert np.max(np.abs(stats.cov - stats.cov.T)) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            update_stats(WhiteningStats.empty(3, 0.9), np.ones((4, 2)))


class TestDeriveWhitening:
    def test_identity_covariance(self):
        stats = WhiteningStats(np.zeros(4), np.eye(4), 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        assert np.max(np.abs(w.w - np.eye(4))) <= 1e-12

    def test_diagonal_closed_form(self):
        stats = WhiteningStats(np.zeros(2), np.diag([4.0, 1.0]), 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        assert np.max(np.abs(w.w - np.diag([0.5, 1.0]))) <= 1e-12

    def test_whitens_its_own_covariance(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
        stats = stats_from_batch(z)
        for kind in (PCA, ZCA):
            w = derive_whitening(stats, kind, 0.0)
            prod = w.w @ stats.cov @ w.w.T
            assert np.max(np.abs(prod - np.eye(6))) <= 1e-6

    def test_rotation_times_pca_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            d = int(rng.integers(2, 12))
            b = rng.normal(size=(3 * d, d))
            stats = stats_from_batch(b)
            w_zca = derive_whitening(stats, ZCA, 0.0)
            w_pca = derive_whitening(stats, PCA, 0.0)
            u = sym_eig((stats.cov + stats.cov.T) / 2.0).eigenvectors
            assert np.max(np.abs(w_zca.w - u @ w_pca.w)) <= 1e-9
            assert np.max(np.abs(w_zca.w - w_zca.w.T)) <= 1e-9

    def test_singular_covariance_names_eigenvalue(self):
        stats = WhiteningStats(np.zeros(3), np.diag([1.0, 1.0, 0.0]), 0.9, update_count=1)
        with pytest.raises(SingularCovarianceError) as exc:
            derive_whitening(stats, ZCA, 0.0)
        assert exc.value.eigenvalue <= 1e-10
        assert "eigenvalue" in str(exc.value)

    def test_untouched_stats_rejected(self):
        with pytest.raises(ConfigError):
            derive_whitening(WhiteningStats.empty(3, 0.9), ZCA, 0.0)

    def test_tiny_negative_eigenvalue_clamped(self):
        # delta below the 1e-9 clamp window keeps the matrix derivable
        # once a ridge lifts it above the floor
        stats = WhiteningStats(
            np.zeros(2), np.diag([1.0, -0.5e-9]), 0.9, update_count=1
        )
        w = derive_whitening(stats, ZCA, 1e-3)
        assert np.all(np.isfinite(w.w))


class TestApplyWhitening:
    def test_identity_transform(self):
        rng = np.random.default_rng(7)
        z = rng.normal(size=(9, 4))
        stats = WhiteningStats(np.zeros(4), np.eye(4), 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        assert np.max(np.abs(apply_whitening(z, stats, w) - z)) <= 1e-12

    def test_output_covariance_identity(self):
        rng = np.random.default_rng(8)
        z = rng.normal(size=(500, 2)) @ np.diag([2.0, 1.0])
        stats = stats_from_batch(z)
        h = apply_whitening(z, stats, derive_whitening(stats, ZCA, 0.0))
        emp = covariance(h, h.mean(axis=0))
        assert np.max(np.abs(emp - np.eye(2))) <= 1e-6

    def test_constant_rows_center_to_zero(self):
        row = np.array([2.0, -1.0, 0.5])
        z = np.tile(row, (5, 1))
        stats = WhiteningStats(row, np.eye(3), 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        assert np.array_equal(apply_whitening(z, stats, w), np.zeros((5, 3)))


class TestGroupPlan:
    def test_single_group_identity_even_when_shuffled(self):
        for shuffled in (False, True):
            plan = make_group_plan(8, 8, shuffled, seed=3)
            assert np.array_equal(plan.permutation, np.arange(8))

    def test_contiguous_split(self):
        plan = make_group_plan(6, 2, shuffled=False)
        assert np.array_equal(plan.permutation, np.arange(6))
        assert plan.num_groups == 3

    def test_deterministic_in_seed(self):
        p1 = make_group_plan(768, 384, shuffled=True, seed=42)
        p2 = make_group_plan(768, 384, shuffled=True, seed=42)
        assert np.array_equal(p1.permutation, p2.permutation)
        assert not np.array_equal(p1.permutation, np.arange(768))

    def test_inverse_composition_is_identity(self):
        plan = make_group_plan(12, 3, shuffled=True, seed=9)
        inv = plan.inverse_permutation()
        assert np.array_equal(plan.permutation[inv], np.arange(12))
        assert np.array_equal(inv[plan.permutation], np.arange(12))

    def test_non_divisor_rejected(self):
        with pytest.raises(ConfigError):
            make_group_plan(10, 4, shuffled=False)


class TestGroupWhiten:
    def test_single_group_equals_full_whitening(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
        plan = make_group_plan(6, 6, shuffled=False)
        stats = group_stats_from_batch(z, plan)
        out = group_whiten(z, plan, stats, ZCA, 0.0)
        full = apply_whitening(z, stats[0], derive_whitening(stats[0], ZCA, 0.0))
        assert np.array_equal(out, full)

    @pytest.mark.parametrize("shuffled", [False, True])
    def test_per_group_output_covariance_identity(self, shuffled):
        rng = np.random.default_rng(10)
        z = rng.normal(size=(128, 12)) * np.linspace(0.3, 3.0, 12)
        plan = make_group_plan(12, 4, shuffled=shuffled, seed=5)
        stats = group_stats_from_batch(z, plan)
        out = group_whiten(z, plan, stats, ZCA, 0.0)
        permuted = out[:, plan.permutation]
        for i in range(plan.num_groups):
            blk = permuted[:, i * 4 : (i + 1) * 4]
            emp = covariance(blk, blk.mean(axis=0))
            assert np.max(np.abs(emp - np.eye(4))) <= 1e-6

    def test_shuffle_roundtrip_bit_exact(self):
        rng = np.random.default_rng(11)
        z = rng.normal(size=(7, 10))
        plan = make_group_plan(10, 5, shuffled=True, seed=1)
        permuted = z[:, plan.permutation]
        restored = np.empty_like(permuted)
        restored[:, plan.permutation] = permuted
        assert np.array_equal(restored, z)

    def test_whitening_identity_invariant(self):
        # N >= 4g and tiny ridge: output group covariance is I to 1e-4
        rng = np.random.default_rng(12)
        g = 8
        z = rng.normal(size=(4 * g, 16)) @ rng.normal(size=(16, 16))
        plan = make_group_plan(16, g, shuffled=True, seed=2)
        stats = group_stats_from_batch(z, plan)
        out = group_whiten(z, plan, stats, ZCA, 1e-8)
        permuted = out[:, plan.permutation]
        for i in range(plan.num_groups):
            blk = permuted[:, i * g : (i + 1) * g]
            emp = covariance(blk, blk.mean(axis=0))
            assert np.max(np.abs(emp - np.eye(g))) <= 1e-4

    def test_wrong_stats_count(self):
        rng = np.random.default_rng(13)
        z = rng.normal(size=(20, 8))
        plan = make_group_plan(8, 4, shuffled=False)
        stats = group_stats_from_batch(z, plan)
        with pytest.raises(ShapeError):
            group_whiten(z, plan, stats[:1], ZCA, 0.0)


class TestSgwAugment:
    def test_single_view_full_group_is_plain_zca(self):
        rng = np.random.default_rng(14)
        z = rng.normal(size=(50, 8)) @ rng.normal(size=(8, 8))
        (view,) = sgw_augment(z, 8, 8, 1, base_seed=3)
        stats = stats_from_batch(z)
        full = apply_whitening(z, stats, derive_whitening(stats, ZCA, 0.0))
        assert np.max(np.abs(view - full)) <= 1e-12

    def test_views_differ_and_whiten(self):
        rng = np.random.default_rng(15)
        z = rng.normal(size=(64, 16)) * np.linspace(0.5, 2.0, 16)
        views = sgw_augment(z, 16, 4, 3, base_seed=9)
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.max(np.abs(views[i] - views[j])) > 0.0
        for j, view in enumerate(views):
            plan = make_group_plan(16, 4, shuffled=True, seed=view_seed(9, j))
            permuted = view[:, plan.permutation]
            for i in range(plan.num_groups):
                blk = permuted[:, i * 4 : (i + 1) * 4]
                emp = covariance(blk, blk.mean(axis=0))
                assert np.max(np.abs(emp - np.eye(4))) <= 1e-6

    def test_deterministic_in_base_seed(self):
        rng = np.random.default_rng(16)
        z = rng.normal(size=(32, 8))
        a = sgw_augment(z, 8, 4, 2, base_seed=7)
        b = sgw_augment(z, 8, 4, 2, base_seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_rank_deficient_batch_gets_ridge(self):
        rng = np.random.default_rng(17)
        z = rng.normal(size=(3, 8))  # 3 rows cannot span 8-dim groups
        views = sgw_augment(z, 8, 8, 1, base_seed=1)
        assert np.all(np.isfinite(views[0]))


class TestPerturbationIdentity:
    def test_full_whitening_zero_mean(self):
        rng = np.random.default_rng(18)
        z = rng.normal(size=(30, 6)) @ rng.normal(size=(6, 6))
        cov = covariance(z, np.zeros(6))
        stats = WhiteningStats(np.zeros(6), cov, 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        h = apply_whitening(z, stats, w)
        perturbation = z @ (w.w - np.eye(6)).T
        assert np.max(np.abs(z + perturbation - h)) <= 1e-12

    def test_shuffled_plan_in_permuted_space(self):
        rng = np.random.default_rng(19)
        z = rng.normal(size=(40, 8))
        plan = make_group_plan(8, 8, shuffled=True, seed=4)
        zp = z[:, plan.permutation]
        cov = covariance(zp, np.zeros(8))
        stats = WhiteningStats(np.zeros(8), cov, 0.9, update_count=1)
        w = derive_whitening(stats, ZCA, 0.0)
        hp = apply_whitening(zp, stats, w)
        assert np.max(np.abs(zp + zp @ (w.w - np.eye(8)).T - hp)) <= 1e-12


class TestAutoRidge:
    def test_full_rank_batch_gets_zero(self):
        stats = WhiteningStats(np.zeros(4), np.eye(4), 0.9, update_count=1)
        assert auto_ridge(stats, n_rows=16, epsilon=1e-5) == 0.0

    def test_rank_deficient_scales_with_trace(self):
        stats = WhiteningStats(np.zeros(4), 2.0 * np.eye(4), 0.9, update_count=1)
        assert auto_ridge(stats, n_rows=3, epsilon=1e-5) == pytest.approx(2e-5)
