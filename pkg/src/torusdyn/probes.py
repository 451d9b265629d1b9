"""Falsifiable dynamics experiments: coverage, hitting times, manifolds.

Density and transitivity are asymptotic claims; every probe here fixes a
budget and reports a quantified surrogate (grid-cell coverage, first
hitting iterate, covered arc length), never "density".  Probe evidence is
not proof and each report type says so in its provenance field.

Long orbits run through a compiled scalar kernel that mirrors the map
formulas from `endo`/`ifs`/`profiles` operation by operation; the numpy
batch paths are used for clouds, so a hit witness replays bit-for-bit
through the same code that found it.  Orbits of expanding maps are not
shadow-exact, so coverage experiments aggregate over seeds instead of
trusting any single trajectory.

All randomness flows through explicit integer seeds; sweeps parallelize
over seeds/trials with threads (the kernel releases the GIL) and merge by
order-independent reductions, honoring the TORUSDYN_WORKERS variable.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .endo import (
    LinearMap,
    PerturbationField,
    PerturbedMap,
    SingularMap,
    System,
    perturb,
)
from .torus import Box, dist, reduce

__all__ = [
    "orbit",
    "CoverageReport",
    "grid_coverage",
    "coverage_sweep",
    "a_control_bound",
    "HitReport",
    "transitivity_probe",
    "random_box_pair",
    "ManifoldReport",
    "unstable_manifold_probe",
    "stable_manifold_probe",
    "RobustnessTrial",
    "RobustnessReport",
    "robustness_sweep",
]

_EVIDENCE = "probe evidence (finite budget), not proof"


def _default_workers(tasks: int) -> int:
    env = os.environ.get("TORUSDYN_WORKERS", "")
    if env.strip():
        return max(1, min(int(env), tasks))
    return max(1, min(os.cpu_count() or 1, tasks))


# === kernel packing ========================================================

_PAD = 8


def _pp_pack(pp) -> tuple[np.ndarray, np.ndarray]:
    breaks = np.asarray(pp.breaks, dtype=float)
    coeffs = np.zeros((len(pp.coeffs), _PAD))
    for i, c in enumerate(pp.coeffs):
        coeffs[i, : len(c)] = c
    return breaks, coeffs


_EMPTY_PP = (np.array([0.0, 0.0]), np.zeros((1, _PAD)))


def _pack_map(map_obj) -> tuple:
    """Flatten a map object into the argument tuple of the step kernel."""
    has_pert = 0
    kvecs = np.zeros((0, 1))
    amps = np.zeros((0, 1))
    pph = np.zeros(0)
    if isinstance(map_obj, PerturbedMap):
        fld = map_obj.field
        has_pert = 1
        kvecs = np.asarray(fld.kvecs, dtype=float)
        amps = np.asarray(fld.amps, dtype=float)
        pph = np.asarray(fld.phases, dtype=float)
        map_obj = map_obj.base

    has_ball = 0
    P = map_obj.P
    pvec = np.zeros(P.n)
    ell = 0.0
    phib, phic = _EMPTY_PP
    psib, psic = _EMPTY_PP
    if isinstance(map_obj, SingularMap):
        has_ball = 1
        pvec = np.asarray(P.p, dtype=float)
        ell = P.l
        phib, phic = _pp_pack(map_obj.phi_pp)
        psib, psic = _pp_pack(map_obj.psi_pp)
        map_obj = map_obj.base

    if isinstance(map_obj, LinearMap):
        centers = np.zeros(0)
        C = 0
        mkind = np.zeros(0, dtype=np.int64)
        mshift = np.zeros(0)
        mvec = np.zeros((0, P.k))
        meta = np.zeros(0)
        mph = np.zeros((0, P.k))
        ga0 = galpha = gc = 0.0
    else:  # BlendedMap
        layout = map_obj.layout
        centers = np.asarray(layout.centers, dtype=float)
        C = len(centers)
        mkind = np.zeros(C, dtype=np.int64)
        mshift = np.zeros(C)
        mvec = np.zeros((C, P.k))
        meta = np.zeros(C)
        mph = np.zeros((C, P.k))
        g0 = map_obj.F2.members[0].g
        ga0, galpha, gc = g0.a0, g0.alpha, g0.c
        for i in range(C):
            g = layout.member_for(i, map_obj.F2, map_obj.F1)
            cls = type(g).__name__
            if cls == "ZoneMember":
                mkind[i] = 0
                mshift[i] = g.shift
            elif cls == "TranslationMember":
                mkind[i] = 1
                mvec[i] = np.asarray(g.v)
            else:
                mkind[i] = 2
                mvec[i] = np.asarray(g.w)
                meta[i] = g.eta
                mph[i] = np.asarray(g.phases)

    return (
        float(P.lam),
        P.m,
        P.k,
        centers,
        P.r,
        mkind,
        mshift,
        mvec,
        meta,
        mph,
        ga0,
        galpha,
        gc,
        has_ball,
        pvec,
        ell,
        phib,
        phic,
        psib,
        psic,
        has_pert,
        kvecs,
        amps,
        pph,
    )


# === compiled scalar kernel ================================================


@njit(cache=False, nogil=True)
def _kred(x):
    r = (x + 1.0) % 2.0
    if r >= 2.0:
        r = 0.0
    return r - 1.0


@njit(cache=False, nogil=True)
def _kpp(x, breaks, coeffs):
    if x < breaks[0] or x > breaks[-1]:
        return 0.0
    P = coeffs.shape[0]
    i = 0
    while i < P - 1 and breaks[i + 1] < x:
        i += 1
    t = (x - breaks[i]) / (breaks[i + 1] - breaks[i])
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    v = coeffs[i, _PAD - 1]
    for j in range(_PAD - 2, -1, -1):
        v = v * t + coeffs[i, j]
    return v


@njit(cache=False, nogil=True)
def _kstep(
    x,
    out,
    lam,
    m,
    k,
    centers,
    r,
    mkind,
    mshift,
    mvec,
    meta,
    mph,
    ga0,
    galpha,
    gc,
    has_ball,
    pvec,
    ell,
    phib,
    phic,
    psib,
    psic,
    has_pert,
    kvecs,
    amps,
    pph,
):
    n = m + k
    for j in range(m):
        out[j] = _kred(lam * x[j])
    # locate the widened slice and its window value
    si = -1
    U = 0.0
    for i in range(centers.shape[0]):
        dmax = 0.0
        for j in range(m):
            d = _kred(x[j] - centers[i])
            if d < 0.0:
                d = -d
            if d > dmax:
                dmax = d
        if dmax < 2.0 * r:
            si = i
            U = 1.0
            for j in range(m):
                t = abs(_kred(x[j] - centers[i])) / r
                if t <= 1.0:
                    u = 1.0
                elif t >= 2.0:
                    u = 0.0
                else:
                    tt = 2.0 - t
                    u = tt * tt * tt * (10.0 + tt * (-15.0 + 6.0 * tt))
                U *= u
            break
    if si < 0 or U == 0.0:
        for j in range(k):
            out[m + j] = _kred(x[m + j])
    else:
        kind = mkind[si]
        w = 2.0 * ga0
        for j in range(k):
            y = x[m + j]
            if kind == 0:
                X = _kred(y - mshift[si])
                if X > w or X < -w:
                    sgn = 1.0 if X > 0 else -1.0
                    s = 0.5 * galpha * gc * (sgn - X)
                else:
                    tau = X / w
                    Pq = tau * (
                        1.0 - tau * tau * (1.0 - 0.6 * tau * tau + tau**4 / 7.0)
                    )
                    s = 0.5 * galpha * ((1.0 + gc) * w * Pq - gc * X)
                gy = _kred(_kred(X + s) + mshift[si])
            elif kind == 1:
                gy = _kred(y + mvec[si, j])
            else:
                gy = _kred(
                    y + meta[si] * math.sin(math.pi * (y - mph[si, j])) + mvec[si, j]
                )
            disp = _kred(gy - y)
            out[m + j] = _kred(y + U * disp)
    if has_ball == 1:
        d2 = 0.0
        for j in range(n):
            dj = _kred(x[j] - pvec[j])
            d2 += dj * dj
        if math.sqrt(d2) < ell:
            ssum = 0.0
            for j in range(n - 1):
                ssum += x[j] * x[j]
            corr = _kpp(x[n - 1], phib, phic) * _kpp(ssum, psib, psic)
            out[n - 1] = _kred(out[n - 1] - corr)
    if has_pert == 1:
        for c in range(n):
            acc = 0.0
            for q in range(kvecs.shape[0]):
                ang = 0.0
                for j in range(n):
                    ang += kvecs[q, j] * x[j]
                acc += amps[q, c] * math.cos(math.pi * ang + pph[q])
            out[c] = _kred(out[c] + acc)


@njit(cache=False, nogil=True)
def _kcoverage(
    x0,
    N,
    res,
    visited,
    lam,
    m,
    k,
    centers,
    r,
    mkind,
    mshift,
    mvec,
    meta,
    mph,
    ga0,
    galpha,
    gc,
    has_ball,
    pvec,
    ell,
    phib,
    phic,
    psib,
    psic,
    has_pert,
    kvecs,
    amps,
    pph,
):
    n = m + k
    x = x0.copy()
    out = np.empty(n)
    total = visited.shape[0]
    count = 0
    first_full = -1
    for step in range(N + 1):
        if step > 0:
            _kstep(
                x, out, lam, m, k, centers, r, mkind, mshift, mvec, meta, mph,
                ga0, galpha, gc, has_ball, pvec, ell, phib, phic, psib, psic,
                has_pert, kvecs, amps, pph,
            )
            for j in range(n):
                x[j] = out[j]
        cell = 0
        for j in range(n):
            cj = int((x[j] + 1.0) * 0.5 * res)
            if cj >= res:
                cj = res - 1
            elif cj < 0:
                cj = 0
            cell = cell * res + cj
        if visited[cell] == 0:
            visited[cell] = 1
            count += 1
            if count == total and first_full < 0:
                first_full = step
    return count, first_full


# === orbits and coverage ===================================================


def orbit(map_obj, x0, N: int):
    """Streaming forward orbit: yields the N successive images of x0."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x = reduce(np.asarray(x0, dtype=float))
    for _ in range(N):
        x = np.asarray(map_obj.apply(x))
        yield x.copy()


@dataclass(frozen=True)
class CoverageReport:
    resolution: int
    cells_hit: int
    total_cells: int
    N: int
    seed: int
    x0: tuple[float, ...]
    first_full_step: int | None
    provenance: str = _EVIDENCE

    @property
    def fraction(self) -> float:
        return self.cells_hit / self.total_cells

    def summary(self) -> str:
        ff = self.first_full_step if self.first_full_step is not None else "-"
        return (
            f"coverage res={self.resolution} N={self.N} seed={self.seed}: "
            f"{self.fraction:.4f} ({self.cells_hit}/{self.total_cells}), "
            f"full at {ff}"
        )


def grid_coverage(
    map_obj,
    N: int,
    resolution: int,
    seed: int = 0,
    x0=None,
    cell_budget: int = 100_000_000,
) -> CoverageReport:
    """Fraction of uniform grid cells visited by one N-step orbit."""
    n = map_obj.n
    total = resolution**n
    if total > cell_budget:
        raise ValueError(
            f"resolution^{n} = {total} exceeds cell budget {cell_budget}"
        )
    if x0 is None:
        x0 = np.random.default_rng(seed).uniform(-1.0, 1.0, size=n)
    x0 = reduce(np.asarray(x0, dtype=float))
    visited = np.zeros(total, dtype=np.uint8)
    args = _pack_map(map_obj)
    count, first_full = _kcoverage(x0, N, resolution, visited, *args)
    return CoverageReport(
        resolution=resolution,
        cells_hit=int(count),
        total_cells=total,
        N=N,
        seed=seed,
        x0=tuple(float(v) for v in x0),
        first_full_step=None if first_full < 0 else int(first_full),
    )


def coverage_sweep(
    map_obj,
    seeds,
    N: int,
    resolution: int,
    workers: int | None = None,
) -> list[CoverageReport]:
    """grid_coverage over many seeds, threaded (kernel releases the GIL)."""
    seeds = list(seeds)
    if workers is None:
        workers = _default_workers(len(seeds))
    if workers <= 1 or len(seeds) <= 1:
        return [grid_coverage(map_obj, N, resolution, seed=s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futs = [
            ex.submit(grid_coverage, map_obj, N, resolution, s) for s in seeds
        ]
        return [f.result() for f in futs]


def a_control_bound(P, resolution: int) -> float:
    """Coverage ceiling for the linear map: central cells never change."""
    return resolution**P.m / resolution**P.n


# === hitting probes ========================================================


@dataclass(frozen=True)
class HitReport:
    U: Box
    V: Box
    status: str  # "hit" | "exhausted"
    n_hit: int | None
    witness: tuple[float, ...] | None
    replay_dev: float | None
    samples: int
    maxN: int
    seed: int
    provenance: str = _EVIDENCE

    @property
    def hit(self) -> bool:
        return self.status == "hit"


def _replay(map_obj, w: np.ndarray, n: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(w, dtype=float))
    for _ in range(n):
        X = np.atleast_2d(np.asarray(map_obj.apply(X)))
    return X[0]


def transitivity_probe(
    map_obj,
    U: Box,
    V: Box,
    maxN: int = 200,
    samples: int = 10_000,
    seed: int = 0,
) -> HitReport:
    """First iterate at which a sample cloud of U meets V.

    The cloud advances through the map's batch path; the reported witness
    is the cloud point's original position and replays through the same
    batch path, so the replay deviation is exactly zero unless the map is
    nondeterministic.
    """
    rng = np.random.default_rng(seed)
    cloud0 = U.sample(rng, samples)
    cloud = cloud0.copy()
    for nstep in range(1, maxN + 1):
        cloud = np.asarray(map_obj.apply(cloud))
        inside = V.contains_batch(cloud)
        if np.any(inside):
            i = int(np.argmax(inside))
            w = cloud0[i]
            dev = float(dist(_replay(map_obj, w, nstep), cloud[i]))
            return HitReport(
                U=U,
                V=V,
                status="hit",
                n_hit=nstep,
                witness=tuple(float(v) for v in w),
                replay_dev=dev,
                samples=samples,
                maxN=maxN,
                seed=seed,
            )
    return HitReport(
        U=U,
        V=V,
        status="exhausted",
        n_hit=None,
        witness=None,
        replay_dev=None,
        samples=samples,
        maxN=maxN,
        seed=seed,
    )


def random_box_pair(n: int, half_width: float, rng) -> tuple[Box, Box]:
    cu = rng.uniform(-1.0, 1.0, size=n)
    cv = rng.uniform(-1.0, 1.0, size=n)
    hw = (half_width,) * n
    return Box(tuple(cu), hw), Box(tuple(cv), hw)


# === manifold probes =======================================================


@dataclass(frozen=True)
class ManifoldReport:
    kind: str  # "unstable" | "stable"
    target: Box
    status: str
    n_hit: int | None
    witness: tuple[float, ...] | None
    replay_dev: float | None
    cloud_size: int
    budget: int
    seed: int
    spread_trace: tuple[float, ...]
    diam_trace: tuple[float, ...]
    spread_full_step: int | None
    min_growth: float | None
    provenance: str = _EVIDENCE

    @property
    def hit(self) -> bool:
        return self.status == "hit"


def _axis_spread(vals: np.ndarray, bins: int = 400) -> tuple[float, float]:
    """Covered arc length (occupied bins * width) and wrapped diameter
    (2 minus the largest empty gap) of a circle point set."""
    idx = np.unique(((vals + 1.0) * 0.5 * bins).astype(int) % bins)
    covered = 2.0 * len(idx) / bins
    if len(idx) == bins:
        return covered, 2.0
    ext = np.concatenate([idx, idx[:1] + bins])
    gap = int(np.max(np.diff(ext)))
    return covered, 2.0 - 2.0 * gap / bins


def _manifold_run(
    map_obj,
    cloud0: np.ndarray,
    target: Box,
    budget: int,
    cloud_size: int,
    seed: int,
    kind: str,
    growth_iters: int,
    spread_threshold: float,
) -> ManifoldReport:
    m = map_obj.P.m
    max_steps = max(1, budget // cloud_size)
    spread0, diam0 = _axis_spread(cloud0[:, 0])
    spreads = [spread0]
    diams = [diam0]
    spread_full = None
    status, n_hit, witness, dev = "exhausted", None, None, None
    inside0 = target.contains_batch(cloud0)
    if np.any(inside0):
        i = int(np.argmax(inside0))
        status, n_hit = "hit", 0
        witness, dev = tuple(float(v) for v in cloud0[i]), 0.0
    cloud = cloud0.copy()
    for nstep in range(1, max_steps + 1):
        cloud = np.asarray(map_obj.apply(cloud))
        sp, dm = _axis_spread(cloud[:, 0])
        for j in range(1, m):
            spj, dmj = _axis_spread(cloud[:, j])
            sp, dm = min(sp, spj), min(dm, dmj)
        spreads.append(sp)
        diams.append(dm)
        if spread_full is None and sp >= spread_threshold:
            spread_full = nstep
        if status == "exhausted":
            inside = target.contains_batch(cloud)
            if np.any(inside):
                i = int(np.argmax(inside))
                status, n_hit = "hit", nstep
                witness = tuple(float(v) for v in cloud0[i])
                dev = float(dist(_replay(map_obj, cloud0[i], nstep), cloud[i]))
        if status == "hit" and (spread_full is not None or nstep >= growth_iters):
            break
    # growth ratios for iterates that start below the spanning threshold;
    # the spanning step itself counts (its measured ratio is capped by the
    # circle length, which still clears 6 for any disk of diameter < 1/3)
    min_growth = None
    if growth_iters > 0 and len(spreads) > 1:
        ratios = []
        for t in range(min(growth_iters, len(spreads) - 1)):
            if spreads[t] >= spread_threshold:
                break
            ratios.append(spreads[t + 1] / max(spreads[t], 1e-12))
        min_growth = min(ratios) if ratios else None
    return ManifoldReport(
        kind=kind,
        target=target,
        status=status,
        n_hit=n_hit,
        witness=witness,
        replay_dev=dev,
        cloud_size=cloud_size,
        budget=budget,
        seed=seed,
        spread_trace=tuple(spreads),
        diam_trace=tuple(diams),
        spread_full_step=spread_full,
        min_growth=min_growth,
        provenance=_EVIDENCE,
    )


def unstable_manifold_probe(
    system: System,
    V: Box,
    budget: int = 4_000_000,
    cloud_size: int = 10_000,
    seed: int = 0,
    map_obj=None,
) -> ManifoldReport:
    """Forward iteration of a cloud on the local unstable manifold
    (-r, r)^m x {1_k} of the saddle; reports the first entry into V and
    the per-iterate spread of the unstable projection."""
    P = system.params
    rng = np.random.default_rng(seed)
    cloud0 = np.empty((cloud_size, P.n))
    cloud0[:, : P.m] = rng.uniform(-P.r, P.r, size=(cloud_size, P.m))
    cloud0[:, P.m :] = -1.0
    fmap = map_obj if map_obj is not None else system.F
    # lam-expansion arithmetic: spreading iterates needed to wrap the circle
    wrap = math.ceil(math.log(1.0 / P.r) / math.log(P.lam)) + 1
    return _manifold_run(
        fmap,
        cloud0,
        V,
        budget,
        cloud_size,
        seed,
        "unstable",
        growth_iters=wrap,
        spread_threshold=2.0 * (1.0 - 4.0 / 400),
    )


def stable_manifold_probe(
    system: System,
    V: Box,
    budget: int = 4_000_000,
    cloud_size: int = 10_000,
    seed: int = 0,
    target: Box | None = None,
    map_obj=None,
) -> ManifoldReport:
    """Forward iteration of a horizontal m-disk through the center of V;
    reports the first entry into the crossing box around the saddle and
    the disk's unstable-projection growth (expected factor lam until the
    projection spans the circle)."""
    P = system.params
    if target is None:
        c = (0.0,) * P.m + (-1.0,) * P.k
        target = Box(c, (P.r / 2.0,) * P.n)
    rng = np.random.default_rng(seed)
    center = np.asarray(V.centers, dtype=float)
    hw = np.asarray(V.half_widths, dtype=float)
    cloud0 = np.tile(center, (cloud_size, 1))
    cloud0[:, : P.m] = reduce(
        center[: P.m] + rng.uniform(-1.0, 1.0, size=(cloud_size, P.m)) * hw[: P.m]
    )
    fmap = map_obj if map_obj is not None else system.F
    diam0 = float(2.0 * np.min(hw[: P.m]))
    growth_iters = max(1, math.ceil(math.log(2.0 / diam0) / math.log(6.0)))
    return _manifold_run(
        fmap,
        cloud0,
        target,
        budget,
        cloud_size,
        seed,
        "stable",
        growth_iters=growth_iters,
        spread_threshold=2.0 * (1.0 - 4.0 / 400),
    )


# === robustness sweep ======================================================


@dataclass(frozen=True)
class RobustnessTrial:
    trial: int
    field_seed: int
    fraction: float
    passed: bool


@dataclass(frozen=True)
class RobustnessReport:
    eps_pert: float
    probe: str
    threshold: float
    trials: tuple[RobustnessTrial, ...]
    seed: int
    passed: bool
    provenance: str = _EVIDENCE

    @property
    def pass_count(self) -> int:
        return sum(1 for t in self.trials if t.passed)


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence((seed, trial)).generate_state(1)[0])


def robustness_sweep(
    system: System,
    eps_pert: float,
    trials: int = 20,
    N: int = 1_000_000,
    resolution: int = 12,
    threshold: float = 0.95,
    seed: int = 0,
    workers: int | None = None,
) -> RobustnessReport:
    """Coverage of `trials` independently perturbed maps; every perturbed
    map must clear the coverage threshold."""

    def one(t: int) -> RobustnessTrial:
        fs = _trial_seed(seed, t)
        fld = PerturbationField.generate(system.params.n, eps_pert, fs)
        rep = grid_coverage(
            perturb(system.F, fld), N, resolution, seed=fs % 2**31
        )
        return RobustnessTrial(
            trial=t,
            field_seed=fs,
            fraction=rep.fraction,
            passed=rep.fraction >= threshold,
        )

    if workers is None:
        workers = _default_workers(trials)
    if workers <= 1 or trials <= 1:
        results = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(trials)))
    return RobustnessReport(
        eps_pert=eps_pert,
        probe="coverage",
        threshold=threshold,
        trials=tuple(results),
        seed=seed,
        passed=all(t.passed for t in results),
    )
