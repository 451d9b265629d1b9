"""Parameter admissibility, the linear/blended/singular towers, fixed-point
structure, and seeded perturbations."""

import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from torusdyn.endo import (
    LinearMap,
    Params,
    PerturbationField,
    SliceLayout,
    apply_A,
    apply_f,
    apply_F,
    build_system,
    default_params,
    fixed_points_A,
    fixed_points_A_exact,
    params_validate,
    perturb,
    spec_like_params,
    strict_params,
)
from torusdyn.ifs import SineMember, TranslationMember, ZoneMember
from torusdyn.torus import dist, reduce

P = default_params()


class TestParams:
    def test_derived_quantities(self):
        assert P.m == P.n - P.k == 1
        assert P.expansion_floor == pytest.approx(
            P.lam / np.sqrt(1.0 + P.kappa**2), rel=1e-15
        )
        assert len(P.slice_centers) == P.k + 3

    def test_validation_modes(self):
        ok, v = params_validate(P, "empirical")
        assert ok == P and v == []
        ok, v = params_validate(P, "strict")
        assert ok is None and [x.code for x in v] == ["lam-vs-M"]
        ok, v = params_validate(spec_like_params(), "strict")
        assert ok is None and [x.code for x in v] == ["lam-vs-r"]
        ok, v = params_validate(strict_params(), "strict")
        assert ok is not None and v == []

    def test_r_range_guard(self):
        ok, v = params_validate(dataclasses.replace(P, r=0.06), "empirical")
        assert ok is None
        assert [x.code for x in v] == ["r-range"]
        assert "0.05" in str(v[0])

    def test_k_range_guard(self):
        ok, v = params_validate(dataclasses.replace(P, k=0), "empirical")
        assert ok is None and "k-range" in [x.code for x in v]
        ok, v = params_validate(dataclasses.replace(P, n=2, k=2), "empirical")
        assert ok is None and "k-range" in [x.code for x in v]

    def test_dict_input_fills_defaults(self):
        ok, v = params_validate({"n": 3, "k": 2, "lam": 41}, "empirical")
        assert v == []
        assert ok == P._replace(seed=P.seed) if hasattr(P, "_replace") else ok == P


class TestFixedPoints:
    def test_exact_count_and_identity(self):
        vals = fixed_points_A_exact(P)
        assert len(vals) == P.lam - 1 == 40
        assert len(set(vals)) == 40
        for v in vals:
            assert (P.lam * v - v) % 2 == 0
            assert -1 <= v < 1

    def test_float_enumeration_matches_exact(self):
        exact = fixed_points_A_exact(P)
        approx = fixed_points_A(P)
        assert approx.shape == (40,)
        for a, e in zip(approx, exact):
            assert abs(a - float(e)) < 1e-15

    def test_slice_centers_are_stride_picks(self):
        exact = fixed_points_A_exact(P)
        for j, c in enumerate(P.slice_centers):
            want = exact[(j * P.stride) % (P.lam - 1)]
            assert abs(c - float(want)) < 1e-15
            # centers really are fixed: lam * c = c mod 2 exactly in Q
            assert (P.lam * want - want) % 2 == 0


class TestLinearMap:
    A = LinearMap(P)

    def test_head_expansion_only(self):
        x = np.array([1.0 / 64.0, 0.25, -0.75])  # dyadic: lam*x is exact
        img = np.asarray(self.A.apply(x))
        assert img.tolist() == [0.640625, 0.25, -0.75]
        assert np.array_equal(apply_A(P, x), img)

    def test_jacobian_structure(self):
        J = self.A.jacobian(np.zeros(3))
        want = np.diag([float(P.lam), 1.0, 1.0])
        assert np.array_equal(J, want)
        Jb = self.A.jacobian_batch(np.zeros((5, 3)))
        assert Jb.shape == (5, 3, 3)
        assert np.array_equal(Jb[3], want)


class TestBlendedMap:
    def test_identity_far_from_windows(self, system):
        x = np.array([0.8, 0.33, -0.4])  # head coord far from every center
        img = np.asarray(system.f.apply(x))
        want = reduce(np.array([P.lam * x[0], x[1], x[2]]))
        assert np.array_equal(img, want)

    def test_full_activation_applies_member(self, system):
        layout = SliceLayout.from_params(P)
        y = np.array([0.37, -0.81])
        for i, c in enumerate(P.slice_centers):
            g = layout.member_for(i, system.F2, system.F1)
            x = np.array([c, y[0], y[1]])
            img = np.asarray(system.f.apply(x))
            assert img[0] == pytest.approx(reduce(P.lam * c), abs=1e-13)
            assert np.max(np.abs(img[1:] - np.asarray(g.apply(y)))) < 1e-12

    def test_member_assignment_order(self, system):
        layout = SliceLayout.from_params(P)
        kinds = [
            type(layout.member_for(i, system.F2, system.F1))
            for i in range(P.k + 3)
        ]
        assert kinds == [ZoneMember] * (P.k + 1) + [TranslationMember, SineMember]

    def test_function_form_matches_method(self, system):
        rng = np.random.default_rng(4)
        X = rng.uniform(-1.0, 1.0, size=(50, 3))
        a = np.asarray(system.f.apply(X))
        b = np.asarray(apply_f(P, system.F2, system.F1, X))
        assert np.array_equal(a, b)

    def test_batch_jacobian_matches_pointwise(self, system):
        rng = np.random.default_rng(5)
        X = rng.uniform(-1.0, 1.0, size=(40, 3))
        Jb = system.f.jacobian_batch(X)
        for i in range(40):
            assert np.max(np.abs(Jb[i] - system.f.jacobian(X[i]))) < 1e-14


class TestSingularMap:
    def test_agrees_with_blend_outside_ball(self, system):
        rng = np.random.default_rng(6)
        X = rng.uniform(-1.0, 1.0, size=(2000, 3))
        outside = ~system.F.in_ball(X)
        a = np.asarray(system.F.apply(X[outside]))
        b = np.asarray(system.f.apply(X[outside]))
        assert np.array_equal(a, b)

    def test_corrects_only_last_coordinate(self, system):
        # the displacement profile lives on a delta-wide band of the last
        # coordinate, so aim the samples there instead of the whole ball
        rng = np.random.default_rng(7)
        X = np.tile(np.asarray(P.p), (500, 1))
        X[:, :2] += rng.uniform(-0.01, 0.01, size=(500, 2))
        X[:, 2] += rng.uniform(-P.delta / 4, 3 * P.delta / 4, size=500)
        X = reduce(X)
        assert bool(np.all(system.F.in_ball(X)))
        a = np.asarray(system.F.apply(X))
        b = np.asarray(system.f.apply(X))
        assert np.array_equal(a[:, :-1], b[:, :-1])
        assert np.any(a[:, -1] != b[:, -1])

    def test_function_form_matches_method(self, system):
        rng = np.random.default_rng(8)
        X = rng.uniform(-1.0, 1.0, size=(50, 3))
        a = np.asarray(system.F.apply(X))
        b = np.asarray(apply_F(P, system.F2, system.F1, X))
        assert np.array_equal(a, b)

    def test_det_in_ball_matches_dense_determinant(self, system):
        rng = np.random.default_rng(9)
        offs = rng.uniform(-P.l / 2, P.l / 2, size=(500, 3))
        X = reduce(np.asarray(P.p) + offs)
        X = X[system.F.in_ball(X)]
        closed = np.asarray(system.F.det_in_ball(X))
        dense = np.linalg.det(system.F.jacobian_batch(X))
        assert np.max(np.abs(closed - dense)) < 1e-9 * float(P.lam) ** P.m


class TestSaddle:
    saddle = np.array([0.0, -1.0, -1.0])

    def test_fixed_for_all_three_maps(self, system):
        assert np.array_equal(np.asarray(system.A.apply(self.saddle)), self.saddle)
        assert np.array_equal(np.asarray(system.f.apply(self.saddle)), self.saddle)
        assert np.array_equal(np.asarray(system.F.apply(self.saddle)), self.saddle)

    def test_eigenstructure(self, system):
        J = system.F.jacobian(self.saddle)
        eigs = np.sort(np.linalg.eigvals(J).real)
        contraction = 1.0 - P.alpha * system.F2.members[0].g.c / 2.0
        assert abs(eigs[-1] - P.lam) < 1e-9
        assert np.max(np.abs(eigs[:2] - contraction)) < 1e-9
        assert 0.0 < contraction < 1.0
        # off-diagonal blocks vanish at the saddle
        off = J - np.diag(np.diag(J))
        assert np.max(np.abs(off)) == 0.0


class TestPerturbation:
    def test_generate_is_deterministic(self):
        a = PerturbationField.generate(3, 0.2, 99)
        b = PerturbationField.generate(3, 0.2, 99)
        assert np.array_equal(a.amps, b.amps)
        assert np.array_equal(a.phases, b.phases)

    def test_c1_size_within_budget(self):
        fld = PerturbationField.generate(3, 0.2, 99)
        rng = np.random.default_rng(1)
        X = rng.uniform(-1.0, 1.0, size=(50_000, 3))
        sup_v = float(np.max(np.linalg.norm(fld.value(X), axis=1)))
        sup_j = float(np.max(np.linalg.norm(fld.jacobian_batch(X), ord=2, axis=(1, 2))))
        assert max(sup_v, sup_j) < 0.2

    def test_perturbed_map_is_base_plus_field(self, system):
        fld = PerturbationField.generate(3, 0.2, 99)
        g = perturb(system.F, fld)
        x = np.array([0.3, -0.2, 0.1])
        want = reduce(np.asarray(system.F.apply(x)) + fld.value(x[None])[0])
        assert np.array_equal(np.asarray(g.apply(x)), want)

    def test_zero_size_field_is_identity_perturbation(self, system):
        fld = PerturbationField.generate(3, 0.0, 5)
        g = perturb(system.F, fld)
        X = np.random.default_rng(2).uniform(-1, 1, (100, 3))
        assert np.array_equal(np.asarray(g.apply(X)), np.asarray(system.F.apply(X)))
