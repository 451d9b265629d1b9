"""Critical set of the singular map and persistence of singularities.

Inside the correction ball the determinant factors exactly through the
two profiles: det = lam^m * (1 - phi'(z) * psi(s)) with s the sum of
squared first n-1 coordinates.  The critical set is therefore the level
set phi'(z) * psi(s) = 1, a codimension-one cylinder piece through
p = (-3/4, 0, ..., 0, 1/4), and the pinned profile nodes force a sign
change of the determinant along the short vertical segment from
q2 = p + (delta/8) e_n (det = -lam^m) to q1 = p + (delta/4) e_n
(det = 5 lam^m / 2).  Persistence is probed the same way the sign change
is obtained: a bracketed root of the determinant along that segment
survives any perturbation too small to overcome the endpoint values.

Root refinement bisects until the floating-point bracket collapses to
adjacent representable numbers, so reported residuals are as small as
the number system allows (the determinant slope near the root is about
1e5/lam^m per unit z, which bounds attainable residuals near 1e-12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .endo import PerturbationField, System, perturb
from .tangent import jacobian_fd
from .torus import dist_batch

__all__ = [
    "det_F",
    "BracketedRoot",
    "critical_slice",
    "CriticalReport",
    "critical_set_sample",
    "PersistenceTrial",
    "PersistenceVerdict",
    "persistence_probe",
    "segment_endpoints",
]


def det_F(system: System, x) -> float | np.ndarray:
    """lam^m * (1 - phi'*psi) from profile evaluations; ball-only."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if not np.all(dist_batch(X2, np.asarray(system.params.p)) < system.params.l):
        raise ValueError("determinant identity only holds inside the ball")
    out = system.F.det_in_ball(X2)
    return float(out[0]) if single else out


def segment_endpoints(system: System) -> tuple[np.ndarray, np.ndarray]:
    """q2 = p + (delta/8) e_n and q1 = p + (delta/4) e_n."""
    P = system.params
    q2 = np.asarray(P.p, dtype=float).copy()
    q1 = q2.copy()
    q2[-1] += P.delta / 8.0
    q1[-1] += P.delta / 4.0
    return q2, q1


@dataclass(frozen=True)
class BracketedRoot:
    z: float
    det_value: float
    bracket: tuple[float, float]
    iterations: int


def _bisect_to_ulp(h, lo: float, hi: float) -> BracketedRoot:
    """Bisect a sign change until the bracket has no interior float."""
    flo, fhi = h(lo), h(hi)
    if flo == 0.0:
        return BracketedRoot(lo, 0.0, (lo, lo), 0)
    if fhi == 0.0:
        return BracketedRoot(hi, 0.0, (hi, hi), 0)
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise ValueError("no sign change on the given bracket")
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = h(mid)
        it += 1
        if fm == 0.0:
            return BracketedRoot(mid, 0.0, (lo, hi), it)
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    z = lo if abs(flo) <= abs(fhi) else hi
    return BracketedRoot(z, h(z), (lo, hi), it)


def critical_slice(
    system: System, segment: tuple[np.ndarray, np.ndarray] | None = None
) -> list[BracketedRoot]:
    """Bracketed roots of the determinant along the q2-q1 segment.

    The segment varies only the last coordinate, so the determinant is
    lam^m * (1 - phi'(z) * psi(s0)) with s0 frozen at the segment's first
    block.  Scans a fine z-grid for sign changes and refines each by
    bisection to the floating-point limit.
    """
    P = system.params
    if segment is None:
        q2, q1 = segment_endpoints(system)
    else:
        q2, q1 = np.asarray(segment[0], float), np.asarray(segment[1], float)
    if np.any(q2[:-1] != q1[:-1]):
        raise ValueError("segment must vary only the last coordinate")
    if not np.all(dist_batch(np.vstack([q2, q1]), np.asarray(P.p)) < P.l):
        raise ValueError("segment endpoints must lie inside the ball")
    s0 = float(np.sum(q2[:-1] ** 2))
    psi0 = float(system.F.psi_pp(np.array([s0]))[0])
    scale = float(P.lam) ** P.m

    def h(z: float) -> float:
        return scale * (1.0 - float(system.F.phi_slope_pp(np.array([z]))[0]) * psi0)

    zs = np.linspace(q2[-1], q1[-1], 257)
    vals = np.array([h(z) for z in zs])
    if np.all(vals > 0.0) or np.all(vals < 0.0):
        raise ValueError("no determinant sign change along the segment")
    roots: list[BracketedRoot] = []
    sign = np.sign(vals)
    for i in range(len(zs) - 1):
        if sign[i] == 0.0:
            roots.append(BracketedRoot(float(zs[i]), 0.0, (zs[i], zs[i]), 0))
        elif sign[i] * sign[i + 1] < 0.0:
            roots.append(_bisect_to_ulp(h, float(zs[i]), float(zs[i + 1])))
    if sign[-1] == 0.0:
        roots.append(BracketedRoot(float(zs[-1]), 0.0, (zs[-1], zs[-1]), 0))
    return roots


@dataclass(frozen=True)
class CriticalReport:
    points: np.ndarray  # (N, n) refined critical points
    det_p: float
    det_q1: float
    det_q2: float
    bracket: tuple[float, float]
    resolution: int
    max_residual: float
    passed: bool


def critical_set_sample(system: System, resolution: int = 32) -> CriticalReport:
    """Grid scan of the critical cylinder with per-line bisection.

    Walks a grid of first-block points inside the ball, and along each
    vertical line refines every sign change of 1 - phi'(z)psi(s).  The
    cloud is empty only if the construction is broken; that flags failure
    rather than raising.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    P = system.params
    p = np.asarray(P.p, dtype=float)
    scale = float(P.lam) ** P.m
    q2, q1 = segment_endpoints(system)
    det_p = float(det_F(system, p))
    det_q1 = float(det_F(system, q1))
    det_q2 = float(det_F(system, q2))

    axes = [
        np.linspace(p[j] - P.l, p[j] + P.l, resolution) for j in range(P.n - 1)
    ]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.n - 1)
    # z-line support: phi' lives on [1/4 - delta/4, 1/4 + delta/2]
    zlo, zhi = 0.25 - P.delta / 4.0, 0.25 + P.delta / 2.0
    zs = np.linspace(zlo, zhi, max(resolution, 64))
    pts: list[np.ndarray] = []
    max_res = 0.0
    for base in grid:
        s = float(np.sum(base**2))
        psi0 = float(system.F.psi_pp(np.array([s]))[0])
        if psi0 < 1.0:
            continue  # phi' <= 1, so no root on this line

        def h(z: float) -> float:
            return scale * (
                1.0 - float(system.F.phi_slope_pp(np.array([z]))[0]) * psi0
            )

        vals = np.array([h(z) for z in zs])
        sign = np.sign(vals)
        for i in range(len(zs) - 1):
            if sign[i] * sign[i + 1] < 0.0:
                root = _bisect_to_ulp(h, float(zs[i]), float(zs[i + 1]))
                cand = np.append(base, root.z)
                if float(dist_batch(cand[None], p)[0]) < P.l:
                    pts.append(cand)
                    max_res = max(max_res, abs(root.det_value) / scale)
    cloud = np.array(pts) if pts else np.empty((0, P.n))
    return CriticalReport(
        points=cloud,
        det_p=det_p,
        det_q1=det_q1,
        det_q2=det_q2,
        bracket=(float(q2[-1]), float(q1[-1])),
        resolution=resolution,
        max_residual=max_res,
        passed=len(cloud) > 0,
    )


# === persistence under perturbation =======================================


@dataclass(frozen=True)
class PersistenceTrial:
    trial: int
    field_seed: int
    det_lo: float
    det_hi: float
    found: bool
    root_t: float | None


@dataclass(frozen=True)
class PersistenceVerdict:
    eps_pert: float
    trials: tuple[PersistenceTrial, ...]
    seed: int
    passed: bool

    @property
    def pass_count(self) -> int:
        return sum(1 for t in self.trials if t.found)


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence((seed, trial)).generate_state(1)[0])


def _fd_det(map_obj, x: np.ndarray, h: float = 1e-6) -> float:
    return float(np.linalg.det(jacobian_fd(map_obj, x, h)))


def persistence_probe(
    system: System,
    eps_pert: float = 0.4,
    trials: int = 100,
    seed: int = 0,
    refine: bool = False,
) -> PersistenceVerdict:
    """Does every perturbed map keep a determinant sign change on the
    q2-q1 segment?

    Each trial perturbs the singular map by a fresh seeded field of C1
    size eps_pert and evaluates finite-difference determinants at the
    segment endpoints; the unperturbed values -lam^m and 5 lam^m / 2
    leave far more headroom than the field can consume.  If endpoints
    fail to bracket, a finer scan along the segment is tried before the
    trial is declared lost.
    """
    P = system.params
    q2, q1 = segment_endpoints(system)
    out: list[PersistenceTrial] = []
    for t in range(trials):
        fs = _trial_seed(seed, t)
        fld = PerturbationField.generate(P.n, eps_pert, fs)
        g = perturb(system.F, fld)
        dlo = _fd_det(g, q2)
        dhi = _fd_det(g, q1)
        found = dlo * dhi < 0.0
        root_t = None
        if not found:
            ts = np.linspace(0.0, 1.0, 21)
            seg = q2 + np.outer(ts, q1 - q2)
            dets = np.array([_fd_det(g, s) for s in seg])
            idx = np.nonzero(dets[:-1] * dets[1:] < 0.0)[0]
            found = idx.size > 0
        if found and refine:

            def dt(tt: float) -> float:
                return _fd_det(g, q2 + tt * (q1 - q2))

            lo, hi = 0.0, 1.0
            flo = dt(lo)
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                fm = dt(mid)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if math.copysign(1.0, fm) == math.copysign(1.0, flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            root_t = 0.5 * (lo + hi)
        out.append(
            PersistenceTrial(
                trial=t,
                field_seed=fs,
                det_lo=dlo,
                det_hi=dhi,
                found=found,
                root_t=root_t,
            )
        )
    return PersistenceVerdict(
        eps_pert=eps_pert,
        trials=tuple(out),
        seed=seed,
        passed=all(t.found for t in out),
    )
