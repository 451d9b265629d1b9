"""Flat torus geometry with the canonical fundamental domain [-1, 1)^n.

The torus is the quotient of R^n by the lattice (2Z)^n.  Every coordinate is
kept in the canonical representative interval [-1, 1); `reduce` performs the
wrap and every map in this package reduces its output once per application.
Distances use the flat metric: per-axis arc length min(|d|, 2 - |d|) and the
Euclidean norm across axes, so the diameter of the n-torus is sqrt(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "reduce",
    "reduce_scalar",
    "dist",
    "axis_dist",
    "TorusPoint",
    "Box",
    "box_inradius",
]


def reduce(x):
    """Reduce coordinates to the canonical interval [-1, 1).

    Accepts scalars or arrays; returns the same shape.  The formula
    ((x + 1) mod 2) - 1 lands in [-1, 1) except when rounding pushes the
    modulo result to exactly 2.0 (possible for inputs a hair below an odd
    integer); that case is folded back to -1.0 so the half-open contract
    holds for every float input.
    """
    r = np.mod(np.asarray(x, dtype=float) + 1.0, 2.0)
    r = np.where(r >= 2.0, 0.0, r) - 1.0
    if r.ndim == 0:
        return float(r)
    return r


def reduce_scalar(x: float) -> float:
    """Scalar fast path of `reduce` (hot loops avoid array dispatch)."""
    r = (x + 1.0) % 2.0
    if r >= 2.0:
        r = 0.0
    return r - 1.0


def axis_dist(a, b):
    """Per-axis toral arc length, elementwise: min(|d|, 2 - |d|) in [0, 1]."""
    return np.abs(reduce(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def dist(a, b) -> float:
    """Toral Euclidean distance between two points (arrays of equal shape)."""
    d = axis_dist(a, b)
    return float(np.sqrt(np.sum(np.square(d), axis=-1)))


def dist_batch(A, b):
    """Distances from each row of A (N, n) to the point b (n,)."""
    d = axis_dist(A, b)
    return np.sqrt(np.sum(np.square(d), axis=-1))


@dataclass(frozen=True)
class TorusPoint:
    """A point on T^n, n >= 2, stored in canonical coordinates.

    Value type for construction-level APIs and reports; numeric kernels pass
    plain ndarrays instead.
    """

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) < 2:
            raise ValueError("TorusPoint needs dimension n >= 2")
        object.__setattr__(
            self, "coords", tuple(float(reduce_scalar(c)) for c in self.coords)
        )

    @property
    def n(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    @classmethod
    def from_array(cls, arr) -> "TorusPoint":
        return cls(tuple(float(v) for v in np.asarray(arr, dtype=float)))

    def __array__(self, dtype=None, copy=None):
        a = np.array(self.coords, dtype=dtype or float)
        return a


@dataclass(frozen=True)
class Box:
    """Product of toral arcs: per-axis (center, half-width), half-width <= 1.

    A half-width of exactly 1 denotes the full circle on that axis.  Works for
    any dimension d >= 1 (central-fiber boxes live on T^k with k possibly 1).
    """

    centers: tuple[float, ...]
    half_widths: tuple[float, ...]

    def __post_init__(self):
        if len(self.centers) != len(self.half_widths):
            raise ValueError("centers and half_widths must have equal length")
        if len(self.centers) == 0:
            raise ValueError("Box needs dimension >= 1")
        for h in self.half_widths:
            if not (0.0 < h <= 1.0):
                raise ValueError(f"half-width {h} outside (0, 1]")
        object.__setattr__(
            self, "centers", tuple(float(reduce_scalar(c)) for c in self.centers)
        )
        object.__setattr__(self, "half_widths", tuple(float(h) for h in self.half_widths))

    @property
    def d(self) -> int:
        return len(self.centers)

    def contains(self, x) -> bool:
        d = axis_dist(np.asarray(x, dtype=float), np.array(self.centers))
        # an axis with half-width 1 is the whole circle
        return bool(
            np.all((d <= np.array(self.half_widths) + 1e-15) | (np.array(self.half_widths) >= 1.0))
        )

    def contains_batch(self, X) -> np.ndarray:
        d = axis_dist(np.asarray(X, dtype=float), np.array(self.centers))
        hw = np.array(self.half_widths)
        return np.all((d <= hw + 1e-15) | (hw >= 1.0), axis=-1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform sample of `count` points, shape (count, d), canonical coords."""
        c = np.array(self.centers)
        h = np.array(self.half_widths)
        u = rng.uniform(-1.0, 1.0, size=(count, self.d))
        return reduce(c + u * h)

    def volume(self) -> float:
        return float(np.prod(2.0 * np.array(self.half_widths)))


def box_inradius(box: Box) -> float:
    """Radius of the largest metric ball inside the box: min half-width."""
    return float(min(box.half_widths))
