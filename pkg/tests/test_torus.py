"""Canonical-domain reduction, toral metric, and box primitives."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusdyn.torus import (
    Box,
    TorusPoint,
    axis_dist,
    box_inradius,
    dist,
    reduce,
    reduce_scalar,
)

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


class TestReduce:
    def test_identity_on_exact_interior_points(self):
        # dyadic rationals in [-1, 1) survive the wrap bit-for-bit
        for num in range(-1024, 1024):
            x = num / 1024.0
            assert reduce_scalar(x) == x

    def test_dyadic_shifts_are_exact(self):
        # adding the lattice period changes nothing, exactly, for dyadics
        for num in range(-64, 64):
            x = num / 64.0
            for shift in (-4.0, -2.0, 2.0, 4.0):
                assert reduce_scalar(x + shift) == reduce_scalar(x)

    def test_fraction_oracle_on_dyadics(self):
        # exact rational wrap ((x+1) mod 2) - 1 agrees bit-for-bit when no
        # float rounding can occur (dyadic inputs of modest magnitude)
        for num in range(-300, 300, 7):
            x = num / 32.0
            want = (Fraction(x) + 1) % 2 - 1
            assert Fraction(reduce_scalar(x)) == want

    def test_known_rounding_quirk(self):
        # 1.3 is not a float; the wrap rounds once and lands one ulp off
        assert reduce_scalar(0.3) == 0.30000000000000004

    def test_half_open_contract_at_the_seam(self):
        # 1 - 2^-53 + 1 rounds to 2.0; the fold keeps the output in [-1, 1)
        x = 1.0 - 2.0**-53
        assert reduce_scalar(x) == -1.0
        assert reduce_scalar(1.0) == -1.0
        assert reduce_scalar(-1.0) == -1.0

    @given(finite_floats)
    @settings(max_examples=300)
    def test_range_and_idempotence(self, x):
        r = reduce_scalar(x)
        assert -1.0 <= r < 1.0
        assert reduce_scalar(r) == r

    @given(finite_floats)
    @settings(max_examples=300)
    def test_congruence_within_rounding(self, x):
        # output differs from the input by an even integer, up to the one
        # rounding step of the wrap
        r = reduce_scalar(x)
        k = round((x - r) / 2.0)
        assert abs((x - r) - 2.0 * k) <= 4e-16 * max(1.0, abs(x))

    def test_array_and_scalar_paths_agree(self):
        xs = np.linspace(-7.3, 7.3, 1001)
        arr = reduce(xs)
        assert arr.shape == xs.shape
        for x, r in zip(xs, arr):
            assert reduce_scalar(float(x)) == r

    def test_scalar_input_returns_float(self):
        assert isinstance(reduce(0.25), float)


class TestDist:
    def test_axis_dist_wraps(self):
        assert axis_dist(0.9, -0.9) == pytest.approx(0.2, abs=1e-15)
        assert axis_dist(-1.0, 1.0) == 0.0

    def test_diameter(self):
        # antipodal points on every axis: per-axis arc 1, Euclidean sqrt(n)
        a = np.zeros(3)
        b = np.full(3, 1.0)
        assert dist(a, b) == pytest.approx(np.sqrt(3.0), rel=1e-15)

    @given(
        st.lists(finite_floats, min_size=3, max_size=3),
        st.lists(finite_floats, min_size=3, max_size=3),
    )
    @settings(max_examples=200)
    def test_symmetry_and_bounds(self, a, b):
        a, b = np.array(a), np.array(b)
        d = dist(a, b)
        assert d == pytest.approx(dist(b, a), abs=1e-12)
        assert 0.0 <= d <= np.sqrt(3.0) + 1e-12

    @given(
        st.lists(finite_floats, min_size=2, max_size=2),
        st.lists(finite_floats, min_size=2, max_size=2),
        st.lists(finite_floats, min_size=2, max_size=2),
    )
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        a, b, c = np.array(a), np.array(b), np.array(c)
        assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9

    def test_identity_of_indiscernibles(self):
        x = np.array([0.3, -0.7])
        assert dist(x, x) == 0.0
        assert dist(x, x + 2.0) <= 3e-16


class TestTorusPoint:
    def test_reduces_on_construction(self):
        p = TorusPoint((2.5, -3.0))
        assert p.coords == (0.5, -1.0)
        assert p.n == 2

    def test_rejects_dimension_one(self):
        with pytest.raises(ValueError):
            TorusPoint((0.5,))

    def test_array_roundtrip(self):
        p = TorusPoint((0.25, -0.5, 0.75))
        q = TorusPoint.from_array(p.array())
        assert q == p
        assert np.asarray(p).tolist() == [0.25, -0.5, 0.75]


class TestBox:
    def test_contains_and_wrap(self):
        b = Box((0.95, 0.0), (0.1, 0.2))
        assert b.contains((-0.99, 0.1))  # across the seam
        assert not b.contains((0.5, 0.0))

    def test_sample_stays_inside(self, rng):
        b = Box((-0.9, 0.4, 0.0), (0.15, 0.05, 1.0))
        pts = b.sample(rng, 500)
        assert pts.shape == (500, 3)
        assert bool(np.all(b.contains_batch(pts)))

    def test_volume_and_inradius(self):
        b = Box((0.0, 0.0), (0.3, 0.2))
        assert b.volume() == pytest.approx(0.24, rel=1e-15)
        assert box_inradius(b) == 0.2

    def test_full_circle_axis(self):
        b = Box((0.0,), (1.0,))
        assert b.contains((0.999,))
        assert b.volume() == 2.0

    def test_invalid_half_width(self):
        with pytest.raises(ValueError):
            Box((0.0,), (0.0,))
        with pytest.raises(ValueError):
            Box((0.0,), (1.5,))
        with pytest.raises(ValueError):
            Box((0.0, 0.0), (0.5,))
