"""Finite families of circle-product diffeomorphisms on T^d and their
semigroup dynamics.

Two families feed the blended construction:

  * a shrinking family of d+1 members, each a coordinatewise copy of the
    near-identity zone map shifted so the expanding zones of distinct
    members are pairwise disjoint; its defining property is that greedy
    preimage selection grows the inradius of any small box past
    sqrt(d)/(d+1), at which point the box meets every candidate position
    of a shrunken fundamental domain;

  * a two-member candidate for a minimal system: a translation in a
    totally irrational direction plus a sheared sine map.  Minimality is
    probed empirically, never assumed.

All members act coordinatewise (translations included), so Jacobians are
diagonal and box preimages factor per axis.  That structural fact is relied
on throughout: `preimage_inradius_growth` inverts arc endpoints exactly
instead of enclosing corner images with a Lipschitz margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import ConstructionError, GTilde
from .torus import Box, dist, reduce, reduce_scalar

__all__ = [
    "ZoneMember",
    "TranslationMember",
    "SineMember",
    "MapFamily",
    "build_F2",
    "build_F1",
    "BranchTrace",
    "ifs_branch_greedy",
    "replay_branch",
    "InradiusTrace",
    "preimage_inradius_growth",
    "MinimalityReport",
    "minimality_probe",
]

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


# === members ===============================================================


@dataclass(frozen=True)
class ZoneMember:
    """Coordinatewise zone map conjugated by the shift b: expands near b."""

    d: int
    g: GTilde
    shift: float

    def apply(self, y):
        Y = np.asarray(y, dtype=float)
        return reduce(self.g.value(Y - self.shift) + self.shift)

    def inverse(self, y):
        Y = np.asarray(y, dtype=float)
        return reduce(self.g.inverse(Y - self.shift) + self.shift)

    def jac_diag(self, y):
        Y = np.asarray(y, dtype=float)
        return self.g.deriv(Y - self.shift)

    def displacement_sup(self) -> float:
        return self.g.sup_displacement() * math.sqrt(self.d)

    def jac_identity_dist_sup(self) -> float:
        return self.g.alpha / 2.0

    def jac_norm_sup(self) -> float:
        return 1.0 + self.g.alpha / 2.0

    def fixed_values(self) -> tuple[float, float]:
        """Per-axis fixed circle values: the zone center and its antipode."""
        return (reduce_scalar(self.shift), reduce_scalar(self.shift + 1.0))


@dataclass(frozen=True)
class TranslationMember:
    """Rigid translation; an isometry with identity Jacobian."""

    v: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.v)

    def apply(self, y):
        return reduce(np.asarray(y, dtype=float) + np.asarray(self.v))

    def inverse(self, y):
        return reduce(np.asarray(y, dtype=float) - np.asarray(self.v))

    def jac_diag(self, y):
        return np.ones_like(np.asarray(y, dtype=float))

    def displacement_sup(self) -> float:
        return float(np.linalg.norm(self.v))

    def jac_identity_dist_sup(self) -> float:
        return 0.0

    def jac_norm_sup(self) -> float:
        return 1.0


@dataclass(frozen=True)
class SineMember:
    """Translation composed with a coordinatewise sine shear.

    y_j -> y_j + eta*sin(pi*(y_j - phase_j)) + w_j.  Monotone per coordinate
    (hence invertible) as long as eta*pi < 1.
    """

    w: tuple[float, ...]
    eta: float
    phases: tuple[float, ...]

    def __post_init__(self):
        if self.eta * math.pi >= 1.0:
            raise ConstructionError("eta*pi >= 1: sine shear not invertible")

    @property
    def d(self) -> int:
        return len(self.w)

    def apply(self, y):
        Y = np.asarray(y, dtype=float)
        ph = np.asarray(self.phases)
        return reduce(Y + self.eta * np.sin(np.pi * (Y - ph)) + np.asarray(self.w))

    def inverse(self, y):
        Y = np.asarray(y, dtype=float)
        ph = np.asarray(self.phases)
        target = Y - np.asarray(self.w)
        X = np.array(target, dtype=float, copy=True)
        for _ in range(60):
            F = X + self.eta * np.sin(np.pi * (X - ph)) - target
            X = X - F / (1.0 + self.eta * np.pi * np.cos(np.pi * (X - ph)))
            if np.max(np.abs(F)) < 1e-14:
                break
        return reduce(X)

    def jac_diag(self, y):
        Y = np.asarray(y, dtype=float)
        ph = np.asarray(self.phases)
        return 1.0 + self.eta * np.pi * np.cos(np.pi * (Y - ph))

    def displacement_sup(self) -> float:
        return float(np.linalg.norm(self.w)) + self.eta * math.sqrt(self.d)

    def jac_identity_dist_sup(self) -> float:
        return self.eta * math.pi

    def jac_norm_sup(self) -> float:
        return 1.0 + self.eta * math.pi


# === families ==============================================================


@dataclass(frozen=True)
class MapFamily:
    """Immutable family of invertible coordinatewise maps of T^d.

    role is "shrinking-family" (closeness budget alpha applies to every
    member) or "minimal-pair" (recorded sup-displacement M applies).
    """

    d: int
    members: tuple
    role: str
    alpha: float | None = None
    M: float | None = None

    def __post_init__(self):
        if self.role not in ("shrinking-family", "minimal-pair"):
            raise ValueError(f"unknown role {self.role!r}")
        for g in self.members:
            if g.d != self.d:
                raise ValueError("member dimension mismatch")

    def apply(self, i: int, y):
        return self.members[i].apply(y)

    def check_inverses(self, samples: int = 1000, seed: int = 0) -> float:
        """Max toral distance of inverse(apply(y)) from y over random samples."""
        rng = np.random.default_rng(seed)
        Y = rng.uniform(-1.0, 1.0, size=(samples, self.d))
        worst = 0.0
        for g in self.members:
            Z = g.inverse(g.apply(Y))
            worst = max(worst, float(np.max(np.abs(reduce(Z - Y)))))
        return worst

    def measured_closeness(self, samples: int = 100_000, seed: int = 0):
        """Sampled sup of (displacement norm, |I - Dg| operator norm).

        Diagonal Jacobians make the operator norm the max diagonal deviation.
        """
        rng = np.random.default_rng(seed)
        Y = rng.uniform(-1.0, 1.0, size=(samples, self.d))
        c0 = 0.0
        c1 = 0.0
        for g in self.members:
            disp = reduce(np.asarray(g.apply(Y)) - Y)
            c0 = max(c0, float(np.max(np.linalg.norm(disp, axis=1))))
            c1 = max(c1, float(np.max(np.abs(1.0 - g.jac_diag(Y)))))
        return c0, c1


def build_F2(d: int, alpha: float, a0: float | None = None) -> MapFamily:
    """Shrinking family of d+1 zone maps with disjoint expanding zones.

    Member i expands inside the cube of half-width 2*a0 around the diagonal
    point (2i/(d+1), ..., 2i/(d+1)) and contracts by the exact factor
    1 - alpha*c/2 outside it.  Both the C0 and the C1 distance to the
    identity stay below alpha (the C1 distance is exactly alpha/2).
    """
    if d < 1:
        raise ConstructionError(f"d={d} must be >= 1")
    if a0 is None:
        a0 = 1.0 / (16.0 * d)
    if not (0.0 < a0 <= 1.0 / (8.0 * d)):
        raise ConstructionError(f"a0={a0} outside (0, 1/(8d)] for d={d}")
    if 4.0 * a0 >= 2.0 / (d + 1):
        raise ConstructionError("expanding zones would overlap")
    g = GTilde(a0=a0, alpha=alpha)
    members = tuple(ZoneMember(d, g, 2.0 * i / (d + 1)) for i in range(d + 1))
    for m in members:
        if m.displacement_sup() >= alpha or m.jac_identity_dist_sup() >= alpha:
            raise ConstructionError("member strays farther than alpha from identity")
    return MapFamily(d=d, members=members, role="shrinking-family", alpha=alpha)


def build_F1(
    d: int, M_target: float, seed: int, jac_slack: float = 0.8
) -> MapFamily:
    """Candidate minimal pair: irrational translation + sheared sine map.

    The translation moves along the normalized golden-ratio power direction
    (1, phi, phi^2, ...), which has rationally independent coordinates; the
    second member adds a coordinatewise sine shear (amplitude eta) on top of
    a translation along the reversed direction, sized so its sup-distance to
    the identity is exactly M_target and the Jacobian slack budget
    (|Dm1|-1)^2 + (|Dm2|-1)^2 < jac_slack holds with a 0.81 margin factor.
    """
    if M_target <= 0.0:
        raise ConstructionError(f"M_target={M_target} must be positive")
    if jac_slack <= 0.0:
        raise ConstructionError(f"jac_slack={jac_slack} must be positive")
    dir1 = np.array([_GOLDEN**j for j in range(d)])
    dir1 /= np.linalg.norm(dir1)
    dir2 = dir1[::-1].copy()
    v = M_target * dir1
    eta = min(0.9 * math.sqrt(jac_slack) / math.pi, 0.5 * M_target / math.sqrt(d))
    w = (M_target - eta * math.sqrt(d)) * dir2
    phases = np.random.default_rng(seed).uniform(-1.0, 1.0, size=d)
    m1 = TranslationMember(v=tuple(float(x) for x in v))
    m2 = SineMember(
        w=tuple(float(x) for x in w),
        eta=eta,
        phases=tuple(float(x) for x in phases),
    )
    slack_used = (m1.jac_norm_sup() - 1.0) ** 2 + (m2.jac_norm_sup() - 1.0) ** 2
    if slack_used >= jac_slack:
        raise ConstructionError("Jacobian slack budget exceeded")
    M = max(m1.displacement_sup(), m2.displacement_sup())
    if M > M_target * (1.0 + 1e-12):
        raise ConstructionError("sup-displacement exceeds M_target")
    return MapFamily(d=d, members=(m1, m2), role="minimal-pair", M=M)


# === greedy branch search ==================================================


@dataclass(frozen=True)
class BranchTrace:
    """One branch of the semigroup orbit: member picks and visited points."""

    members: np.ndarray  # (steps,) int
    points: np.ndarray  # (steps+1, d), points[0] = start
    status: str  # "reached" | "exhausted"
    final_dist: float


def ifs_branch_greedy(
    fam: MapFamily,
    start,
    target,
    eps: float = 0.01,
    budget: int = 10_000,
    patience: int = 300,
    burst0: int = 400,
) -> BranchTrace:
    """Branch toward `target` by greedy member choice with cycle escape.

    Base policy: apply the member whose image is closest to the target,
    never choosing a member that does not move the point.  Pure greedy is
    not enough: the state-dependent switching it induces has attracting
    periodic cycles (observed for translation-like pairs), so after
    `patience` steps without improving the best distance the branch rides
    a single member for a burst, round-robin over members with the burst
    length doubling each time.  Ever-longer rides of a minimal member
    (e.g. a totally irrational translation) pass arbitrarily close to any
    target, so the escape cannot itself get stuck; the budget bounds the
    search either way.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    nm = len(fam.members)
    x = np.asarray(start, dtype=float).copy()
    tgt = np.asarray(target, dtype=float)
    picks: list[int] = []
    pts = [x.copy()]
    dcur = dist(x, tgt)
    best = dcur
    no_imp = 0
    burst_left = 0
    burst_idx = 0
    burst_len = burst0
    while dcur >= eps and len(picks) < budget:
        images = [np.asarray(g.apply(x)) for g in fam.members]
        dists = [dist(im, tgt) for im in images]
        moving = [
            float(np.max(np.abs(reduce(images[i] - x)))) > 1e-14 for i in range(nm)
        ]
        if not any(moving):
            break  # nothing moves: stuck for good
        if burst_left > 0:
            chosen = burst_idx % nm
            if not moving[chosen]:
                burst_left = 0
                burst_idx += 1
                continue
            burst_left -= 1
            if burst_left == 0:
                burst_idx += 1
        else:
            order = np.argsort(dists, kind="stable")
            chosen = next(int(i) for i in order if moving[i])
        x = images[chosen]
        picks.append(chosen)
        pts.append(x.copy())
        dcur = dists[chosen]
        if dcur < best - 1e-15:
            best = dcur
            no_imp = 0
        else:
            no_imp += 1
            if no_imp >= patience and burst_left == 0:
                burst_left = burst_len
                burst_len = min(2 * burst_len, 200_000)
                no_imp = 0
    status = "reached" if dcur < eps else "exhausted"
    return BranchTrace(
        members=np.asarray(picks, dtype=np.int64),
        points=np.asarray(pts),
        status=status,
        final_dist=float(dcur),
    )


def replay_branch(fam: MapFamily, trace: BranchTrace) -> np.ndarray:
    """Re-apply the recorded member sequence to the recorded start."""
    x = trace.points[0].copy()
    for i in trace.members:
        x = np.asarray(fam.members[int(i)].apply(x))
    return x


# === preimage inradius growth =============================================


@dataclass(frozen=True)
class InradiusTrace:
    """Greedy preimage run: member picks and the inradius before each step.

    inradii has one more entry than member_seq (the final inradius).  status
    "reached" means the threshold was strictly exceeded.
    """

    member_seq: np.ndarray  # (p,) int
    inradii: np.ndarray  # (p+1,) float
    threshold: float
    status: str  # "reached" | "exhausted" | "stalled"
    final_box: Box

    @property
    def steps(self) -> int:
        return int(self.member_seq.shape[0])


def _exact_box_preimage(member: ZoneMember, lo: list, hi: list, halves: list):
    """Per-axis arc endpoint inversion; exact for coordinatewise members."""
    corners = np.array([lo, hi])
    pre = np.asarray(member.inverse(corners))
    lengths = np.mod(pre[1] - pre[0], 2.0)
    # an axis already covering its circle stays covered under any bijection
    full = np.asarray(halves) >= 1.0
    lengths[full] = 2.0
    return pre[0], lengths


def preimage_inradius_growth(
    fam: MapFamily,
    w: Box,
    p_max: int,
    threshold: float | None = None,
) -> InradiusTrace:
    """Grow a box by greedy preimages until its inradius beats the
    sqrt(d)/(d+1) threshold.

    Selection rule: prefer the member whose (slightly inflated) expanding
    zone is disjoint from the current box with the largest margin; its
    inverse is then exactly affine with uniform slope 1/(1 - alpha*c/2) > 1
    on every axis, so each such step multiplies the inradius by that exact
    factor.  Only when no member's zone misses the box are exact endpoint
    preimages computed for every member and the best taken; the run stops
    ("stalled") if even the best choice fails to grow the box.
    """
    if fam.role != "shrinking-family":
        raise ValueError("preimage growth is defined for shrinking families only")
    d = fam.d
    if threshold is None:
        threshold = math.sqrt(d) / (d + 1)
    g: GTilde = fam.members[0].g
    shifts = [m.shift for m in fam.members]
    a0, alpha, c = g.a0, g.alpha, g.c
    slope_out = 1.0 - alpha * c / 2.0
    rho = 1.0 / slope_out
    # image of the zone edge under g: a box avoiding (b +- edge) on every
    # axis has its full preimage in the affine region
    edge = 2.0 * a0 + (alpha * c / 2.0) * (1.0 - 2.0 * a0)

    centers = [float(x) for x in w.centers]
    halves = [float(h) for h in w.half_widths]
    picks: list[int] = []
    inradii: list[float] = []
    status = "exhausted"

    for _ in range(p_max):
        inr = min(halves)
        inradii.append(inr)
        if inr > threshold:
            status = "reached"
            break
        best = -1
        best_margin = 0.0
        for i, b in enumerate(shifts):
            margin = 2.0
            for j in range(d):
                u = reduce_scalar(centers[j] - b)
                m = (u if u >= 0.0 else -u) - halves[j] - edge
                if m < margin:
                    margin = m
            if margin > best_margin:
                best_margin = margin
                best = i
        if best >= 0:
            b = shifts[best]
            for j in range(d):
                u = reduce_scalar(centers[j] - b)
                s = 1.0 if u > 0.0 else -1.0
                centers[j] = reduce_scalar(b + s + (u - s) * rho)
                halves[j] = min(halves[j] * rho, 1.0)
            picks.append(best)
            continue
        # no clean member: exact preimages, take the best
        lo = [reduce_scalar(centers[j] - halves[j]) for j in range(d)]
        hi = [reduce_scalar(centers[j] + halves[j]) for j in range(d)]
        cand = []
        for m in fam.members:
            lo2, lengths = _exact_box_preimage(m, lo, hi, halves)
            cand.append((float(np.min(lengths)) / 2.0, lo2, lengths))
        best = int(np.argmax([cc[0] for cc in cand]))
        if cand[best][0] <= inr + 1e-18:
            status = "stalled"
            break
        lo2, lengths = cand[best][1], cand[best][2]
        for j in range(d):
            halves[j] = min(float(lengths[j]) / 2.0, 1.0)
            centers[j] = reduce_scalar(float(lo2[j]) + halves[j])
        picks.append(best)
    else:
        inradii.append(min(halves))

    final = Box(
        centers=tuple(centers),
        half_widths=tuple(min(h, 1.0) for h in halves),
    )
    return InradiusTrace(
        member_seq=np.asarray(picks, dtype=np.int64),
        inradii=np.asarray(inradii),
        threshold=threshold,
        status=status,
        final_box=final,
    )


# === minimality probe ======================================================


@dataclass(frozen=True)
class MinimalityReport:
    eps: float
    trials: int
    budget: int
    seed: int
    reached: int
    failed_trials: tuple[int, ...]
    steps_used: np.ndarray  # (trials,) steps for reached trials, -1 otherwise

    @property
    def passed(self) -> bool:
        return self.reached == self.trials


def minimality_probe(
    fam: MapFamily, eps: float, trials: int, budget: int, seed: int
) -> MinimalityReport:
    """Greedy-branch density check on random (start, target) pairs.

    Deterministic for a fixed seed: trial pairs are drawn from one seeded
    generator up front, so outcomes replay bit-for-bit.
    """
    rng = np.random.default_rng(seed)
    pairs = rng.uniform(-1.0, 1.0, size=(trials, 2, fam.d))
    reached = 0
    failed: list[int] = []
    steps = np.full(trials, -1, dtype=np.int64)
    for t in range(trials):
        tr = ifs_branch_greedy(fam, pairs[t, 0], pairs[t, 1], eps=eps, budget=budget)
        if tr.status == "reached":
            reached += 1
            steps[t] = tr.members.shape[0]
        else:
            failed.append(t)
    return MinimalityReport(
        eps=eps,
        trials=trials,
        budget=budget,
        seed=seed,
        reached=reached,
        failed_trials=tuple(failed),
        steps_used=steps,
    )
