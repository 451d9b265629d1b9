"""Determinant identities at the pinned points, critical-set root
bracketing, and persistence of the sign change under perturbation."""

import numpy as np
import pytest

from torusdyn.endo import PerturbationField, default_params, perturb
from torusdyn.singular import (
    critical_set_sample,
    critical_slice,
    det_F,
    persistence_probe,
    segment_endpoints,
)
from torusdyn.torus import dist_batch

P = default_params()
SCALE = float(P.lam) ** P.m


class TestSegment:
    def test_endpoints(self, system):
        q2, q1 = segment_endpoints(system)
        p = np.asarray(P.p)
        assert np.array_equal(q2[:2], p[:2])
        assert np.array_equal(q1[:2], p[:2])
        assert q2[-1] == p[-1] + P.delta / 8.0
        assert q1[-1] == p[-1] + P.delta / 4.0


class TestDeterminantIdentities:
    def test_pinned_values_are_float_exact(self, system):
        q2, q1 = segment_endpoints(system)
        assert float(det_F(system, np.asarray(P.p))) == 0.0
        assert float(det_F(system, q1)) == 5.0 * SCALE / 2.0 == 102.5
        assert float(det_F(system, q2)) == -SCALE == -41.0

    def test_closed_form_inside_ball(self, system):
        # det = lam^m * (1 - phi'(z) psi(s)) with s frozen per column
        rng = np.random.default_rng(41)
        X = np.tile(np.asarray(P.p), (400, 1))
        X[:, :2] += rng.uniform(-0.02, 0.02, size=(400, 2))
        X[:, 2] += rng.uniform(-P.delta / 4, 3 * P.delta / 4, size=400)
        s = np.sum(X[:, :2] ** 2, axis=1)
        want = SCALE * (
            1.0 - system.F.phi_slope_pp(X[:, 2]) * system.F.psi_pp(s)
        )
        got = np.array([float(det_F(system, x)) for x in X])
        assert np.max(np.abs(got - want)) < 1e-9 * SCALE

    def test_sign_change_bracketed_by_endpoints(self, system):
        q2, q1 = segment_endpoints(system)
        assert float(det_F(system, q2)) * float(det_F(system, q1)) < 0.0


class TestCriticalSlice:
    def test_single_root_at_quintic_oracle(self, system):
        roots = critical_slice(system)
        assert len(roots) == 1
        root = roots[0]
        # independent oracle: on the segment the slope profile descends as
        # 1 - 7/4 * S(t), so det = 0 where the quintic S(t) equals 2/7
        rr = np.roots([6.0, -15.0, 10.0, 0.0, 0.0, -2.0 / 7.0])
        (t_star,) = [r.real for r in rr if abs(r.imag) < 1e-9 and 0 < r.real < 1]
        z_star = P.p[-1] + P.delta / 8.0 * (1.0 + t_star)
        assert root.z == pytest.approx(z_star, abs=1e-14)
        assert root.z == 0.25008633334398817
        assert abs(root.det_value) < 1e-9 * SCALE

    def test_bracket_is_at_floating_point_limit(self, system):
        root = critical_slice(system)[0]
        lo, hi = root.bracket
        assert lo <= root.z <= hi
        assert hi == np.nextafter(lo, np.inf)

    def test_segment_validation(self, system):
        q2, q1 = segment_endpoints(system)
        bad = q1.copy()
        bad[0] += 0.01
        with pytest.raises(ValueError):
            critical_slice(system, segment=(q2, bad))
        far = np.array([0.5, 0.5, 0.25])
        with pytest.raises(ValueError):
            critical_slice(system, segment=(far, far + [0, 0, 1e-4]))


class TestCriticalSetSample:
    def test_report(self, system):
        rep = critical_set_sample(system, resolution=24)
        assert rep.passed
        assert rep.det_p == 0.0
        assert rep.det_q1 == 102.5
        assert rep.det_q2 == -41.0
        assert rep.max_residual < 1e-9 * SCALE
        assert len(rep.points) > 0
        # every located critical point sits inside the correction ball
        assert np.max(dist_batch(rep.points, np.asarray(P.p))) < P.l

    def test_zero_set_respects_closed_form(self, system):
        rep = critical_set_sample(system, resolution=24)
        dets = np.array([float(det_F(system, x)) for x in rep.points])
        assert np.max(np.abs(dets)) < 1e-8 * SCALE


class TestPersistence:
    def test_unperturbed_trials_recover_endpoint_values(self, system):
        pv = persistence_probe(system, eps_pert=0.0, trials=3, seed=1)
        assert pv.pass_count == 3
        for t in pv.trials:
            # finite differences carry ~1e-3 of error at h = 1e-6
            assert t.det_lo == pytest.approx(-41.0, abs=2e-3)
            assert t.det_hi == pytest.approx(102.5, abs=2e-3)
            assert t.found

    def test_perturbed_sweep_passes(self, system):
        pv = persistence_probe(system, eps_pert=0.4, trials=10, seed=3)
        assert pv.passed
        assert pv.pass_count == 10

    def test_deterministic(self, system):
        a = persistence_probe(system, eps_pert=0.4, trials=4, seed=5)
        b = persistence_probe(system, eps_pert=0.4, trials=4, seed=5)
        assert a == b

    def test_refined_roots_near_unperturbed_fraction(self, system):
        # the unperturbed root sits at the quintic fraction t* of the
        # segment; perturbations of size 0.4 move it but not far
        pv = persistence_probe(system, eps_pert=0.4, trials=5, seed=7, refine=True)
        for t in pv.trials:
            assert t.root_t is not None
            assert 0.0 < t.root_t < 1.0
            assert abs(t.root_t - 0.381333503810455) < 0.15
