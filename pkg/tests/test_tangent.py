"""Jacobian consistency, cone geometry, sampled cone/expansion checks, and
slice-torus domination margins."""

import numpy as np
import pytest

from torusdyn.tangent import (
    check_cone_invariance,
    check_expansion,
    cone_ratio,
    cone_ratio_batch,
    jacobian_F,
    jacobian_f,
    jacobian_fd,
    nh_inequalities_probe,
    sample_cone_boundary,
    sample_region,
)
from torusdyn.torus import dist_batch


class TestJacobianConsistency:
    def _rel_errors(self, system, analytic, map_obj, count=2000):
        rng = np.random.default_rng(17)
        X = rng.uniform(-1.0, 1.0, size=(count, 3))
        errs = np.empty(count)
        for i, x in enumerate(X):
            J = analytic(system, x)
            Jfd = jacobian_fd(map_obj, x)
            errs[i] = np.linalg.norm(Jfd - J) / np.linalg.norm(J)
        return errs

    def test_blended_map(self, system):
        errs = self._rel_errors(system, jacobian_f, system.f)
        assert float(np.max(errs)) < 1e-5

    def test_singular_map(self, system):
        errs = self._rel_errors(system, jacobian_F, system.F)
        assert float(np.max(errs)) < 1e-5

    def test_batch_matches_pointwise(self, system):
        rng = np.random.default_rng(18)
        X = rng.uniform(-1.0, 1.0, size=(60, 3))
        Jb = system.F.jacobian_batch(X)
        for i in range(60):
            assert np.max(np.abs(Jb[i] - system.F.jacobian(X[i]))) < 1e-14


class TestConeGeometry:
    def test_hand_values(self):
        assert cone_ratio(np.array([1.0, 0.0, 0.0]), m=1) == 0.0
        assert cone_ratio(np.array([1.0, 3.0, 4.0]), m=1) == 5.0
        assert cone_ratio(np.array([2.0, 0.0, 1.0]), m=2) == 0.5

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(19)
        V = rng.normal(size=(300, 3))
        rb = cone_ratio_batch(V, m=1)
        for v, r in zip(V, rb):
            assert cone_ratio(v, m=1) == pytest.approx(r, rel=1e-14)

    def test_boundary_sampler_sits_on_the_cone(self, P):
        rng = np.random.default_rng(20)
        V = sample_cone_boundary(P, 5000, rng)
        ratios = cone_ratio_batch(V, P.m)
        assert np.max(np.abs(ratios - P.kappa)) < 1e-12

    def test_interior_fraction_stays_inside(self, P):
        rng = np.random.default_rng(21)
        V = sample_cone_boundary(P, 5000, rng, 0.5)
        ratios = cone_ratio_batch(V, P.m)
        assert np.all(ratios <= P.kappa + 1e-12)
        assert np.min(ratios) < P.kappa - 1e-3


class TestRegionSampler:
    def test_ball_points_lie_in_ball(self, P):
        rng = np.random.default_rng(22)
        X = sample_region(P, "ball", 2000, rng)
        assert np.max(dist_batch(X, np.asarray(P.p))) <= P.l + 1e-12

    def test_transition_points_avoid_inner_slices(self, P):
        rng = np.random.default_rng(23)
        X = sample_region(P, "transition", 2000, rng)
        centers = np.asarray(P.slice_centers)
        gaps = np.min(
            np.abs(
                np.mod(X[:, :1] - centers[None, :] + 1.0, 2.0) - 1.0
            ),
            axis=1,
        )
        assert np.all(gaps > P.r - 1e-12)
        assert np.all(gaps < 2.0 * P.r + 1e-12)

    def test_outside_points_clear_widened_slices(self, P):
        rng = np.random.default_rng(24)
        X = sample_region(P, "outside", 2000, rng)
        centers = np.asarray(P.slice_centers)
        gaps = np.min(
            np.abs(np.mod(X[:, :1] - centers[None, :] + 1.0, 2.0) - 1.0), axis=1
        )
        assert np.all(gaps >= 2.0 * P.r - 1e-12)

    def test_unknown_region(self, P):
        with pytest.raises(ValueError):
            sample_region(P, "nowhere", 10, np.random.default_rng(0))


class TestConeInvariance:
    def test_passes_on_all_regions(self, system, P):
        for region in ("all", "transition", "ball"):
            rep = check_cone_invariance(
                system.F, P, region=region, samples=20_000, seed=31
            )
            assert rep.passed
            assert rep.max_ratio < P.kappa
            assert rep.region == region

    def test_deterministic(self, system, P):
        a = check_cone_invariance(system.F, P, samples=5_000, seed=32)
        b = check_cone_invariance(system.F, P, samples=5_000, seed=32)
        assert a == b

    def test_kappa_guard(self, system, P):
        with pytest.raises(ValueError):
            check_cone_invariance(system.F, P, kappa=3.5, samples=10)


class TestExpansion:
    def test_min_factor_above_floor(self, system, P):
        rep = check_expansion(system.F, P, samples=20_000, seed=33)
        assert rep.passed
        assert rep.min_factor > rep.threshold == 6.0
        assert rep.min_factor >= rep.floor - 1e-9
        assert rep.floor == pytest.approx(P.lam / np.sqrt(2.0), rel=1e-15)

    def test_linear_map_factor_is_constant(self, system, P):
        # for A every boundary cone vector (|c| = kappa |u|) is stretched by
        # exactly sqrt((lam^2 + kappa^2) / (1 + kappa^2)); here sqrt(841) = 29
        rep = check_expansion(system.A, P, samples=20_000, seed=34)
        want = np.sqrt((P.lam**2 + P.kappa**2) / (1.0 + P.kappa**2))
        assert want == 29.0
        assert rep.min_factor == pytest.approx(want, rel=1e-12)
        assert rep.min_factor >= rep.floor


class TestDominationMargins:
    def test_every_slice_passes(self, system, P):
        for i in range(P.k + 3):
            rep = nh_inequalities_probe(system, i, samples=5_000, seed=35)
            assert rep.passed
            assert rep.inv_unstable_norm == 1.0 / P.lam
            assert rep.domination_ratio < 1.0

    def test_shrinking_slice_center_sup(self, system, P):
        rep = nh_inequalities_probe(system, 0, samples=5_000, seed=36)
        assert rep.center_sup <= 1.0 + P.alpha / 2.0 + 1e-15

    def test_bad_index(self, system, P):
        with pytest.raises(ValueError):
            nh_inequalities_probe(system, P.k + 3)
