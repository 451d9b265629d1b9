"""Map families on T^k: the shrinking zone family, the minimal pair,
semigroup branching, and greedy preimage growth."""

import math

import numpy as np
import pytest

from torusdyn.endo import default_params
from torusdyn.ifs import (
    MapFamily,
    SineMember,
    TranslationMember,
    ZoneMember,
    build_F1,
    build_F2,
    ifs_branch_greedy,
    minimality_probe,
    preimage_inradius_growth,
    replay_branch,
)
from torusdyn.profiles import ConstructionError
from torusdyn.torus import Box, axis_dist, dist

P = default_params()


@pytest.fixture(scope="module")
def F2():
    return build_F2(P.k, P.alpha, a0=P.a0)


@pytest.fixture(scope="module")
def F1():
    return build_F1(P.k, P.M_target, seed=P.seed, jac_slack=P.jac_slack)


class TestShrinkingFamily:
    def test_member_count_and_role(self, F2):
        assert len(F2.members) == P.k + 1
        assert F2.role == "shrinking-family"
        assert F2.d == P.k

    def test_zone_centers_spread_evenly(self, F2):
        shifts = [m.shift for m in F2.members]
        assert shifts == pytest.approx([2.0 * i / (P.k + 1) for i in range(P.k + 1)])

    def test_members_fix_their_anchors(self, F2):
        for m in F2.members:
            for v in m.fixed_values():
                pt = np.full(P.k, v)
                assert dist(np.asarray(m.apply(pt)), pt) < 1e-15

    def test_c1_distance_to_identity(self, F2):
        for m in F2.members:
            assert m.jac_identity_dist_sup() == P.alpha / 2.0
            assert m.jac_norm_sup() == 1.0 + P.alpha / 2.0
            assert m.displacement_sup() < P.alpha

    def test_measured_closeness_below_alpha(self, F2):
        c0, c1 = F2.measured_closeness()
        assert 0.0 < c0 < P.alpha
        assert 0.0 < c1 <= P.alpha / 2.0 + 1e-15
        # the sampled sup approaches the analytic one from below
        assert c0 <= F2.members[0].displacement_sup() * math.sqrt(P.k) + 1e-15

    def test_inverses(self, F2):
        assert F2.check_inverses() < 1e-12

    def test_rejects_bad_dimension(self):
        with pytest.raises(ConstructionError):
            build_F2(0, P.alpha)

    def test_rejects_overlapping_zones(self):
        with pytest.raises(ConstructionError):
            build_F2(2, P.alpha, a0=0.9 / 8.0)


class TestMinimalPair:
    def test_members_and_role(self, F1):
        assert len(F1.members) == 2
        assert F1.role == "minimal-pair"
        assert isinstance(F1.members[0], TranslationMember)
        assert isinstance(F1.members[1], SineMember)

    def test_translation_sized_to_target(self, F1):
        v = np.asarray(F1.members[0].v)
        assert np.linalg.norm(v) == pytest.approx(P.M_target, rel=1e-12)
        assert F1.members[0].jac_identity_dist_sup() == 0.0

    def test_sine_member_sized_to_target(self, F1):
        s = F1.members[1]
        assert s.displacement_sup() == pytest.approx(P.M_target, rel=1e-12)
        assert s.jac_identity_dist_sup() < 1.0

    def test_jacobian_slack_budget(self, F1):
        budget = sum(m.jac_identity_dist_sup() ** 2 for m in F1.members)
        assert budget < P.jac_slack

    def test_measured_closeness_matches_target(self, F1):
        c0, c1 = F1.measured_closeness(samples=20_000)
        assert c0 <= P.M_target + 1e-12
        assert c1 <= F1.members[1].jac_identity_dist_sup() + 1e-12

    def test_inverses(self, F1):
        assert F1.check_inverses() < 1e-12

    def test_translation_inverse_exact_roundtrip(self, F1):
        t = F1.members[0]
        rng = np.random.default_rng(3)
        y = rng.uniform(-1.0, 1.0, size=(200, P.k))
        back = np.asarray(t.inverse(t.apply(y)))
        assert np.max(axis_dist(back, y)) < 1e-15

    def test_rejects_nonpositive_target(self):
        with pytest.raises(ConstructionError):
            build_F1(P.k, 0.0, seed=P.seed)


class TestBranchGreedy:
    def test_reaches_easy_target(self, F1):
        tr = ifs_branch_greedy(
            F1, np.array([0.2, -0.4]), np.array([0.9, 0.9]), eps=0.05, budget=20_000
        )
        assert tr.status == "reached"
        assert tr.final_dist < 0.05
        assert tr.points.shape == (tr.members.shape[0] + 1, P.k)

    def test_replay_is_bit_exact(self, F1):
        tr = ifs_branch_greedy(
            F1, np.array([0.2, -0.4]), np.array([0.9, 0.9]), eps=0.05, budget=20_000
        )
        assert np.array_equal(replay_branch(F1, tr), tr.points[-1])

    def test_rejects_zero_budget(self, F1):
        with pytest.raises(ValueError):
            ifs_branch_greedy(F1, np.zeros(2), np.ones(2) * 0.5, budget=0)

    def test_minimality_probe_deterministic(self, F1):
        a = minimality_probe(F1, eps=0.05, trials=5, budget=20_000, seed=11)
        b = minimality_probe(F1, eps=0.05, trials=5, budget=20_000, seed=11)
        assert a.passed
        assert a.reached == b.reached == 5
        assert np.array_equal(a.steps_used, b.steps_used)


class TestPreimageGrowth:
    def test_quick_growth_is_monotone(self, F2):
        tr = preimage_inradius_growth(
            F2, Box((0.3, -0.2), (0.02, 0.05)), 250_000, threshold=0.03
        )
        assert tr.status == "reached"
        assert tr.inradii[-1] > 0.03
        assert bool(np.all(np.diff(np.asarray(tr.inradii)) >= 0.0))
        assert len(tr.member_seq) == tr.steps

    def test_budget_exhaustion_reported(self, F2):
        tr = preimage_inradius_growth(
            F2, Box((0.3, -0.2), (0.02, 0.05)), 50, threshold=0.5
        )
        assert tr.status == "exhausted"
        assert tr.steps == 50

    def test_default_threshold_formula(self, F2):
        tr = preimage_inradius_growth(F2, Box((0.0, 0.0), (0.01, 0.01)), 1)
        assert tr.threshold == pytest.approx(math.sqrt(P.k) / (P.k + 1), rel=1e-15)

    def test_requires_shrinking_family(self, F1):
        with pytest.raises(ValueError):
            preimage_inradius_growth(F1, Box((0.0, 0.0), (0.1, 0.1)), 100)
