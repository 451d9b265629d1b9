"""Tangent-space verification: Jacobians, cones, expansion, domination.

The unstable cone of parameter kappa at any point is the set of tangent
vectors whose central-block norm (last k coordinates) is at most kappa
times the unstable-block norm (first m).  Invariance and expansion are
checked on the extreme rays (ratio exactly kappa, random directions on
the two block spheres); linearity of the differential and monotonicity of
the image ratio in the central component extend the verdict to the whole
cone, and interior vectors are sampled anyway as a cross-check.

Everything here is sampling-based with explicit seeds; the rigor module
re-proves the same inequalities on interval enclosures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .endo import Params, SliceLayout, System
from .torus import reduce

__all__ = [
    "jacobian_f",
    "jacobian_F",
    "jacobian_fd",
    "cone_ratio",
    "cone_ratio_batch",
    "sample_region",
    "sample_cone_boundary",
    "ConeReport",
    "check_cone_invariance",
    "ExpansionReport",
    "check_expansion",
    "NHReport",
    "nh_inequalities_probe",
]


def jacobian_f(system: System, x) -> np.ndarray:
    return system.f.jacobian(x)


def jacobian_F(system: System, x) -> np.ndarray:
    # outside the ball this is the blended map's Jacobian by construction
    return system.F.jacobian(x)


def jacobian_fd(map_obj, x, h: float = 1e-6) -> np.ndarray:
    """Central differences per coordinate with toral lifting of the image
    displacement, so seam crossings do not corrupt the quotient."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    if h < 1e-12:
        warnings.warn("step below 1e-12: differences are noise-dominated")
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp = np.asarray(map_obj.apply(reduce(x + e)))
        fm = np.asarray(map_obj.apply(reduce(x - e)))
        J[:, j] = reduce(fp - fm) / (2.0 * h)
    return J


def cone_ratio(v, m: int) -> float:
    """Central-block over unstable-block norm; +inf on a flat head."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("zero vector has no cone ratio")
    head = float(np.linalg.norm(v[:m]))
    tail = float(np.linalg.norm(v[m:]))
    if head == 0.0:
        return math.inf
    return tail / head


def cone_ratio_batch(V: np.ndarray, m: int) -> np.ndarray:
    head = np.linalg.norm(V[:, :m], axis=1)
    tail = np.linalg.norm(V[:, m:], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(head > 0.0, tail / np.maximum(head, 1e-300), np.inf)
    return out


# === region samplers =======================================================

_REGIONS = ("all", "transition", "slices", "ball", "outside")


def sample_region(P: Params, region: str, count: int, rng) -> np.ndarray:
    """Base points for tangent checks.

    all: uniform on T^n.  transition: widened slices minus inner slices.
    slices: widened slices.  ball: the correction ball.  outside: the
    complement of the widened slice cylinders.
    """
    if region not in _REGIONS:
        raise ValueError(f"unknown region {region!r}")
    n, m = P.n, P.m
    if region == "all":
        return rng.uniform(-1.0, 1.0, size=(count, n))
    if region == "ball":
        p = np.asarray(P.p)
        v = rng.normal(size=(count, n))
        v /= np.linalg.norm(v, axis=1)[:, None]
        rad = P.l * rng.uniform(0.0, 1.0, size=count) ** (1.0 / n)
        return reduce(p + v * rad[:, None])
    centers = np.asarray(P.slice_centers)
    out = np.empty((count, n))
    filled = 0
    while filled < count:
        todo = count - filled
        idx = rng.integers(0, len(centers), size=todo)
        off = rng.uniform(-2.0 * P.r, 2.0 * P.r, size=(todo, m))
        if region == "transition":
            keep = np.max(np.abs(off), axis=1) > P.r
        elif region == "slices":
            keep = np.ones(todo, dtype=bool)
        else:  # outside: uniform with the widened cylinders rejected
            pts = rng.uniform(-1.0, 1.0, size=(todo, n))
            dmin = np.min(
                np.stack(
                    [
                        np.max(np.abs(reduce(pts[:, :m] - c)), axis=1)
                        for c in centers
                    ]
                ),
                axis=0,
            )
            keep = dmin >= 2.0 * P.r
            kn = int(keep.sum())
            out[filled : filled + kn] = pts[keep]
            filled += kn
            continue
        kn = int(keep.sum())
        xu = reduce(centers[idx[keep], None] + off[keep])
        yc = rng.uniform(-1.0, 1.0, size=(kn, P.k))
        out[filled : filled + kn, :m] = xu
        out[filled : filled + kn, m:] = yc
        filled += kn
    return out


def sample_cone_boundary(
    P: Params, count: int, rng, interior_fraction: float = 0.0
) -> np.ndarray:
    """Unit-head cone vectors with ratio exactly kappa (or uniformly
    below it for the requested interior fraction)."""
    m, k = P.m, P.k
    head = rng.normal(size=(count, m))
    head /= np.linalg.norm(head, axis=1)[:, None]
    tail = rng.normal(size=(count, k))
    tail /= np.linalg.norm(tail, axis=1)[:, None]
    scale = np.full(count, P.kappa)
    if interior_fraction > 0.0:
        inner = rng.uniform(0.0, 1.0, size=count) < interior_fraction
        scale[inner] = P.kappa * rng.uniform(0.0, 1.0, size=int(inner.sum()))
    V = np.empty((count, m + k))
    V[:, :m] = head
    V[:, m:] = tail * scale[:, None]
    return V


# === cone invariance =======================================================


@dataclass(frozen=True)
class ConeReport:
    region: str
    samples: int
    kappa: float
    max_ratio: float
    worst_point: tuple[float, ...]
    worst_vector: tuple[float, ...]
    passed: bool

    def summary(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return (
            f"cone[{self.region}] {tag}: max image ratio "
            f"{self.max_ratio:.6f} < kappa {self.kappa} on {self.samples}"
        )


def check_cone_invariance(
    map_obj,
    P: Params,
    region: str = "all",
    kappa: float | None = None,
    samples: int = 100_000,
    seed: int = 0,
    interior_fraction: float = 0.0,
    chunk: int = 100_000,
) -> ConeReport:
    """Max image cone ratio over sampled (point, boundary vector) pairs."""
    kappa = P.kappa if kappa is None else kappa
    if not (0.0 < kappa < 3.0):
        raise ValueError("kappa outside (0, 3)")
    rng = np.random.default_rng(seed)
    m = P.m
    best = -1.0
    worst_x = worst_v = None
    done = 0
    while done < samples:
        nb = min(chunk, samples - done)
        X = sample_region(P, region, nb, rng)
        V = sample_cone_boundary(P, nb, rng, interior_fraction)
        J = map_obj.jacobian_batch(X)
        W = np.einsum("nij,nj->ni", J, V)
        ratios = cone_ratio_batch(W, m)
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best = float(ratios[i])
            worst_x = tuple(float(t) for t in X[i])
            worst_v = tuple(float(t) for t in V[i])
        done += nb
    return ConeReport(
        region=region,
        samples=samples,
        kappa=kappa,
        max_ratio=best,
        worst_point=worst_x,
        worst_vector=worst_v,
        passed=best < kappa,
    )


# === expansion =============================================================


@dataclass(frozen=True)
class ExpansionReport:
    region: str
    samples: int
    min_factor: float
    floor: float
    threshold: float
    worst_point: tuple[float, ...]
    passed: bool

    def summary(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return (
            f"expansion[{self.region}] {tag}: min factor {self.min_factor:.6f} "
            f"> {self.threshold} (analytic floor {self.floor:.6f})"
        )


def check_expansion(
    map_obj,
    P: Params,
    region: str = "all",
    samples: int = 100_000,
    seed: int = 0,
    threshold: float = 6.0,
    chunk: int = 100_000,
) -> ExpansionReport:
    """Min of |Jv|/|v| over boundary cone vectors at sampled points."""
    rng = np.random.default_rng(seed)
    floor = P.lam / math.sqrt(1.0 + P.kappa**2)
    best = math.inf
    worst_x = None
    done = 0
    while done < samples:
        nb = min(chunk, samples - done)
        X = sample_region(P, region, nb, rng)
        V = sample_cone_boundary(P, nb, rng)
        J = map_obj.jacobian_batch(X)
        W = np.einsum("nij,nj->ni", J, V)
        factors = np.linalg.norm(W, axis=1) / np.linalg.norm(V, axis=1)
        i = int(np.argmin(factors))
        if factors[i] < best:
            best = float(factors[i])
            worst_x = tuple(float(t) for t in X[i])
        done += nb
    return ExpansionReport(
        region=region,
        samples=samples,
        min_factor=best,
        floor=floor,
        threshold=threshold,
        worst_point=worst_x,
        passed=best > threshold,
    )


# === normal-hyperbolicity margins =========================================


@dataclass(frozen=True)
class NHReport:
    slice_index: int
    inv_unstable_norm: float
    center_sup: float
    domination_ratio: float
    samples: int
    passed: bool

    def summary(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return (
            f"nh[slice {self.slice_index}] {tag}: 1/lam = "
            f"{self.inv_unstable_norm:.6f}, sup|Df@center| = "
            f"{self.center_sup:.6f}, domination {self.domination_ratio:.6f}"
        )


def nh_inequalities_probe(
    system: System, slice_i: int, samples: int = 10_000, seed: int = 0
) -> NHReport:
    """Domination margins on the invariant slice torus {c_i} x T^k.

    There the unstable block is multiplied by lam exactly and the center
    block is the assigned member's diagonal differential, so the two
    inequalities reduce to 1/lam < 1 and sup|Dg| / lam < 1.
    """
    P = system.params
    if not (0 <= slice_i <= P.k + 2):
        raise ValueError(f"slice index {slice_i} outside 0..{P.k + 2}")
    layout = SliceLayout.from_params(P)
    g = layout.member_for(slice_i, system.F2, system.F1)
    rng = np.random.default_rng(seed)
    y = rng.uniform(-1.0, 1.0, size=(samples, P.k))
    diag = np.abs(np.asarray(g.jac_diag(y)))
    center_sup = float(diag.max())
    inv_u = 1.0 / P.lam
    ratio = center_sup / P.lam
    return NHReport(
        slice_index=slice_i,
        inv_unstable_norm=inv_u,
        center_sup=center_sup,
        domination_ratio=ratio,
        samples=samples,
        passed=(inv_u < 1.0 and ratio < 1.0),
    )
