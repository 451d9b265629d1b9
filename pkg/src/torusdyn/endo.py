"""The three-stage endomorphism family on T^n and its parameter system.

Stage one is the linear endomorphism A multiplying the first m = n - k
coordinates by an integer lam and leaving the last k untouched.  Stage two
blends A with fiber dynamics: k+3 disjoint cube slices along the expanding
diagonal are routed through the members of a shrinking family (slices
0..k) and a candidate minimal pair (slices k+1, k+2), interpolated by a
product window so the result is globally smooth:

    f(x, y) = (lam*x,  y + U(x) * (member_i(y) - y))     x in slice i.

Stage three subtracts a localized correction from the last coordinate
inside the metric ball around p = (-3/4, 0, ..., 0, 1/4):

    F(x) = f(x) - phi(x_n) * psi(x_1^2 + ... + x_{n-1}^2) * e_n,

which creates a nonempty, persistent critical set while keeping an
unstable cone family invariant.  The correction vanishes on the boundary
sphere except on a measure-zero band (the slab where phi != 0 crosses the
sphere); the piecewise definition is kept as stated, so F is discontinuous
exactly there and nowhere else.  Every checkable consequence (determinant
identities, cone invariance, expansion) is insensitive to that band.

Parameter validation runs in two modes.  Empirical mode enforces only the
structural facts the construction needs to be well defined (ranges,
disjoint slices, the ball avoiding the slices); the analytic sufficient
inequalities are deferred to the tangent-space checks, which verify their
conclusions directly.  Strict mode additionally enforces the sufficient
inequalities themselves, which demand a far larger lam than the default
instance uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import profiles
from .ifs import MapFamily, build_F1, build_F2
from .profiles import (
    BumpSpec,
    ConstructionError,
    PhiSpec,
    PiecewisePoly,
    PsiSpec,
    bump_eval,
    window_eval,
)
from .torus import dist, dist_batch, reduce, reduce_scalar

__all__ = [
    "Params",
    "Violation",
    "params_validate",
    "default_params",
    "spec_like_params",
    "strict_params",
    "SliceLayout",
    "slice_index",
    "LinearMap",
    "BlendedMap",
    "SingularMap",
    "PerturbationField",
    "PerturbedMap",
    "apply_A",
    "apply_fhat",
    "apply_f",
    "apply_F",
    "fixed_points_A",
    "fixed_points_A_exact",
    "perturb",
    "System",
    "build_system",
]


# === parameters ============================================================


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class Params:
    """Full symbol table of the construction; immutable once validated."""

    n: int = 3
    k: int = 2
    lam: int = 41
    r: float = 0.036
    kappa: float = 1.0
    alpha: float = 1.5e-4
    a: float = 1.0 / 16.0
    a0: float = 1.0 / 32.0
    theta: float = 0.04
    delta: float = 5e-4
    l: float = 0.1
    p: tuple[float, ...] = (-0.75, 0.0, 0.25)
    M_target: float = 0.4
    jac_slack: float = 0.8
    stride: int = 3
    seed: int = 20240801

    @property
    def m(self) -> int:
        return self.n - self.k

    @property
    def slice_centers(self) -> tuple[float, ...]:
        # k+3 fixed values of the expanding circle, multiples of the stride
        return tuple(
            reduce_scalar(2.0 * self.stride * i / (self.lam - 1))
            for i in range(self.k + 3)
        )

    @property
    def expansion_floor(self) -> float:
        """Guaranteed minimal cone-vector stretch: lam/sqrt(1+kappa^2)."""
        return self.lam / math.sqrt(1.0 + self.kappa**2)


def default_params() -> Params:
    """Tuned default instance (n=3, k=2, lam=41)."""
    return Params()


def spec_like_params() -> Params:
    """The narrower design-default variant (smaller r, kappa, M)."""
    return replace(
        default_params(), r=0.024, kappa=0.5, M_target=6e-3
    )


def strict_params() -> Params:
    """An instance satisfying every sufficient inequality (strict mode)."""
    return replace(
        default_params(),
        lam=997,
        stride=50,
        r=0.024,
        kappa=0.5,
        M_target=6e-3,
    )


def _axis_interval_dist(x: float, center: float, half: float) -> float:
    """Toral distance from the circle value x to the arc [center +- half]."""
    d = abs(reduce_scalar(x - center))
    return max(0.0, d - half)


def params_validate(
    raw: Params | dict, mode: str = "empirical"
) -> tuple[Params | None, list[Violation]]:
    """Check admissibility; returns (params, violations).

    Empirical mode: structural constraints only (the construction is well
    defined).  Strict mode: also the analytic sufficient inequalities,
    using the measured slope bound of the shell profile.  params is None
    when any violation is found.
    """
    if mode not in ("empirical", "strict"):
        raise ValueError(f"unknown validation mode {mode!r}")
    P = raw if isinstance(raw, Params) else Params(**raw)
    v: list[Violation] = []

    def bad(code: str, msg: str) -> None:
        v.append(Violation(code, msg))

    if P.n < 2:
        bad("n-range", f"n={P.n} must be >= 2")
    if not (1 <= P.k <= P.n - 1):
        bad("k-range", f"k={P.k} must satisfy 1 <= k <= n-1 (n={P.n})")
    if not (isinstance(P.lam, int) and P.lam >= 2):
        bad("lam-int", f"lam={P.lam} must be an integer >= 2")
    if P.k >= 1 and not (0.0 < P.r < 1.0 / (10.0 * P.k)):
        bad("r-range", f"r={P.r} outside (0, 1/(10k)) = (0, {1.0/(10.0*P.k):.4g})")
    if not (0.0 < P.kappa < 3.0):
        bad("kappa-range", f"kappa={P.kappa} outside (0, 3)")
    if P.alpha <= 0.0:
        bad("alpha-range", f"alpha={P.alpha} must be positive")
    if P.k >= 1 and not (0.0 < P.a < 1.0 / (4.0 * P.k)):
        bad("a-range", f"a={P.a} outside (0, 1/(4k))")
    if P.k >= 1 and not (0.0 < P.a0 <= 1.0 / (8.0 * P.k)):
        bad("a0-range", f"a0={P.a0} outside (0, 1/(8k)]")
    if P.l <= 0.0:
        bad("l-range", f"l={P.l} must be positive")
    if not (0.0 < P.theta < P.l / 2.0):
        bad("theta-range", f"theta={P.theta} outside (0, l/2)")
    if not (0.0 < P.delta < 2.0 * P.theta):
        bad("delta-range", f"delta={P.delta} outside (0, 2*theta)")
    if P.stride < 1:
        bad("stride-range", f"stride={P.stride} must be >= 1")
    if len(P.p) != P.n:
        bad("p-dim", f"p has {len(P.p)} coordinates, need n={P.n}")
    if P.M_target <= 0.0:
        bad("M-range", f"M_target={P.M_target} must be positive")
    if P.jac_slack <= 0.0:
        bad("jac-slack-range", f"jac_slack={P.jac_slack} must be positive")

    if not v and isinstance(P.lam, int) and P.lam >= 2:
        centers = P.slice_centers
        # pairwise disjoint at outer width 2r, including the wrap-around gap
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                gap = abs(reduce_scalar(centers[i] - centers[j]))
                gap = min(gap, 2.0 - gap) if gap > 1.0 else gap
                if gap <= 4.0 * P.r:
                    bad(
                        "slice-overlap",
                        f"slices {i},{j} at spacing {gap:.4g} <= 4r = {4*P.r:.4g}",
                    )
        # the critical ball must avoid every widened slice cylinder
        for i, c in enumerate(centers):
            d2 = 0.0
            for j in range(P.m):
                d2 += _axis_interval_dist(P.p[j], c, 2.0 * P.r) ** 2
            if math.sqrt(d2) <= P.l:
                bad(
                    "ball-overlap",
                    f"ball of radius l={P.l} meets widened slice {i} at {c:.4g}",
                )

    if mode == "strict" and not v:
        if P.lam <= 1.0 / P.r:
            bad("lam-vs-r", f"lam={P.lam} must exceed 1/r = {1.0/P.r:.4g}")
        if P.n == 3:
            bound = 80.0 * P.M_target / (P.r * P.kappa)
        else:
            bound = 2.0 * P.M_target / (P.r * P.kappa) + 2.0 + math.sqrt(P.n)
        if P.lam < bound:
            bad("lam-vs-M", f"lam={P.lam} below sufficient bound {bound:.4g}")
        if P.alpha > P.kappa * P.r / 80.0:
            bad(
                "alpha-bound",
                f"alpha={P.alpha} exceeds kappa*r/80 = {P.kappa*P.r/80.0:.4g}",
            )
        m_psi = profiles.measured_max_abs_deriv(
            profiles.build_psi(PsiSpec(P.theta)).derivative()
        )
        lhs = 2.0 * P.n * (1.0 + P.kappa) * P.delta * m_psi
        if lhs >= P.kappa:
            bad(
                "delta-mpsi",
                f"2n(1+kappa)*delta*m_psi = {lhs:.4g} not below kappa = {P.kappa}",
            )

    return (P if not v else None, v)


# === slice layout ==========================================================


@dataclass(frozen=True)
class SliceLayout:
    """Cube slices along the expanding block and their family routing."""

    centers: tuple[float, ...]
    r: float
    m: int
    k: int

    @classmethod
    def from_params(cls, P: Params) -> "SliceLayout":
        return cls(centers=P.slice_centers, r=P.r, m=P.m, k=P.k)

    def locate(self, xu) -> tuple[int | None, str]:
        """Slice index and zone ("K" | "transition" | "outside") of a point
        of the expanding block."""
        xu = np.atleast_1d(np.asarray(xu, dtype=float))
        for i, c in enumerate(self.centers):
            d = np.max(np.abs(reduce(xu - c)))
            if d < 2.0 * self.r:
                return i, ("K" if d <= self.r else "transition")
        return None, "outside"

    def member_for(self, i: int, F2: MapFamily, F1: MapFamily):
        """Slices 0..k run the shrinking family; k+1, k+2 run the pair."""
        if i <= self.k:
            return F2.members[i]
        return F1.members[i - (self.k + 1)]

    def window(self, i: int) -> tuple[BumpSpec, ...]:
        return tuple(BumpSpec(self.centers[i], self.r) for _ in range(self.m))


def slice_index(P: Params, xu) -> tuple[int | None, str]:
    return SliceLayout.from_params(P).locate(xu)


# === the three maps ========================================================


class LinearMap:
    """A: multiply the first m coordinates by lam, keep the last k."""

    provenance = "A"

    def __init__(self, P: Params):
        self.P = P
        self.n = P.n
        self._diag = np.array([float(P.lam)] * P.m + [1.0] * P.k)

    def apply(self, x):
        X = np.asarray(x, dtype=float)
        return reduce(X * self._diag)

    def jacobian(self, x):
        return np.diag(self._diag)

    def jacobian_batch(self, X):
        N = np.atleast_2d(np.asarray(X, dtype=float)).shape[0]
        return np.broadcast_to(np.diag(self._diag), (N, self.n, self.n)).copy()


class BlendedMap:
    """f: the window-blended slice map over A."""

    provenance = "f"

    def __init__(self, P: Params, F2: MapFamily, F1: MapFamily):
        if F2.d != P.k or F1.d != P.k:
            raise ConstructionError("family dimension must equal k")
        if len(F2.members) != P.k + 1 or len(F1.members) != 2:
            raise ConstructionError("need k+1 shrinking members and a pair")
        self.P = P
        self.n = P.n
        self.F2 = F2
        self.F1 = F1
        self.layout = SliceLayout.from_params(P)
        self._windows = [self.layout.window(i) for i in range(P.k + 3)]

    def _members(self):
        L = self.layout
        return [L.member_for(i, self.F2, self.F1) for i in range(self.P.k + 3)]

    def apply(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X).astype(float)
        P = self.P
        m = P.m
        xu = X2[:, :m]
        y = X2[:, m:]
        out_u = reduce(P.lam * xu)
        out_c = np.array(reduce(y), dtype=float, copy=True)
        members = self._members()
        for i, c in enumerate(self.layout.centers):
            dmax = np.max(np.abs(reduce(xu - c)), axis=1)
            mask = dmax < 2.0 * P.r
            if not np.any(mask):
                continue
            U, _ = window_eval(xu[mask], self._windows[i])
            U = np.atleast_1d(U)
            disp = reduce(np.asarray(members[i].apply(y[mask])) - y[mask])
            out_c[mask] = reduce(y[mask] + U[:, None] * disp)
        out = np.hstack([np.atleast_2d(out_u), out_c])
        return out[0] if single else out

    def jacobian(self, x):
        return self.jacobian_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def jacobian_batch(self, X):
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        P = self.P
        m, k, n = P.m, P.k, P.n
        N = X2.shape[0]
        xu = X2[:, :m]
        y = X2[:, m:]
        J = np.zeros((N, n, n))
        J[:, range(m), range(m)] = float(P.lam)
        J[:, range(m, n), range(m, n)] = 1.0
        members = self._members()
        for i, c in enumerate(self.layout.centers):
            dmax = np.max(np.abs(reduce(xu - c)), axis=1)
            mask = dmax < 2.0 * P.r
            if not np.any(mask):
                continue
            U, gradU = window_eval(xu[mask], self._windows[i])
            U = np.atleast_1d(U)
            gradU = np.atleast_2d(gradU)
            g = members[i]
            disp = reduce(np.asarray(g.apply(y[mask])) - y[mask])
            diag = np.asarray(g.jac_diag(y[mask]))
            # bottom-left: disp (outer) gradU ; bottom-right: U*Dg + (1-U)*I
            J[np.ix_(mask, range(m, n), range(0, m))] = (
                disp[:, :, None] * gradU[:, None, :]
            )
            br = np.zeros((int(mask.sum()), k, k))
            br[:, range(k), range(k)] = U[:, None] * diag + (1.0 - U[:, None])
            J[np.ix_(mask, range(m, n), range(m, n))] = br
        return J


class SingularMap:
    """F: the blended map minus the localized last-coordinate correction."""

    provenance = "F"

    def __init__(self, P: Params, base: BlendedMap):
        self.P = P
        self.n = P.n
        self.base = base
        self.psi_spec = PsiSpec(P.theta)
        self.phi_spec = PhiSpec(P.delta)
        self.psi_pp: PiecewisePoly = profiles.build_psi(self.psi_spec)
        self.psi_slope_pp: PiecewisePoly = self.psi_pp.derivative()
        self.phi_pp: PiecewisePoly = profiles.build_phi(self.phi_spec)
        self.phi_slope_pp: PiecewisePoly = profiles.build_phi_slope(self.phi_spec)
        self._p = np.asarray(P.p, dtype=float)

    def in_ball(self, X) -> np.ndarray:
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        return dist_batch(X2, self._p) < self.P.l

    def correction(self, X):
        """phi(x_n)*psi(sum of squared first n-1 coordinates), batched."""
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.sum(X2[:, :-1] ** 2, axis=1)
        return self.phi_pp(X2[:, -1]) * self.psi_pp(s)

    def apply(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X).astype(float)
        out = np.atleast_2d(self.base.apply(X2))
        mask = self.in_ball(X2)
        if np.any(mask):
            corr = self.correction(X2[mask])
            out[mask, -1] = reduce(out[mask, -1] - corr)
        return out[0] if single else out

    def jacobian(self, x):
        return self.jacobian_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def jacobian_batch(self, X):
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        J = self.base.jacobian_batch(X2)
        mask = self.in_ball(X2)
        if np.any(mask):
            Xb = X2[mask]
            s = np.sum(Xb[:, :-1] ** 2, axis=1)
            z = Xb[:, -1]
            phi = self.phi_pp(z)
            dphi = self.phi_slope_pp(z)
            psi = self.psi_pp(s)
            dpsi = self.psi_slope_pp(s)
            grad = np.empty_like(Xb)
            grad[:, :-1] = 2.0 * Xb[:, :-1] * (phi * dpsi)[:, None]
            grad[:, -1] = dphi * psi
            J[mask, -1, :] -= grad
        return J

    def det_in_ball(self, X):
        """Exact determinant lam^m * (1 - phi'*psi) from the profiles."""
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.sum(X2[:, :-1] ** 2, axis=1)
        dphi = self.phi_slope_pp(X2[:, -1])
        psi = self.psi_pp(s)
        return float(self.P.lam) ** self.P.m * (1.0 - dphi * psi)


# === perturbations =========================================================


@dataclass(frozen=True)
class PerturbationField:
    """Seeded trigonometric displacement field with certified C0/C1 size.

    field(x)_c = sum_q amps[q, c] * cos(pi * kvecs[q] . x + phases[q]).
    Amplitudes are normalized at construction so both the sup-norm of the
    field and the sup of its Jacobian operator norm are <= eps_pert; the
    bounds used are the analytic coefficient bounds, not grid estimates.
    """

    eps_pert: float
    seed: int
    kvecs: np.ndarray  # (Q, n) integers as floats
    amps: np.ndarray  # (Q, n)
    phases: np.ndarray  # (Q,)

    @classmethod
    def generate(
        cls, n: int, eps_pert: float, seed: int, terms: int = 6, max_degree: int = 2
    ) -> "PerturbationField":
        if eps_pert < 0.0:
            raise ValueError("eps_pert must be >= 0")
        rng = np.random.default_rng(seed)
        kvecs = np.zeros((terms, n))
        for q in range(terms):
            kv = rng.integers(-max_degree, max_degree + 1, size=n)
            while not np.any(kv):
                kv = rng.integers(-max_degree, max_degree + 1, size=n)
            kvecs[q] = kv
        amps = rng.normal(size=(terms, n))
        phases = rng.uniform(-math.pi, math.pi, size=terms)
        # analytic sup bounds: per-component sums of |amplitude|
        c0 = math.sqrt(float(np.sum(np.sum(np.abs(amps), axis=0) ** 2)))
        c1 = math.pi * math.sqrt(
            float(np.sum((np.abs(amps).T @ np.abs(kvecs)) ** 2))
        )
        scale = eps_pert / max(c0, c1) if max(c0, c1) > 0 else 0.0
        return cls(
            eps_pert=eps_pert,
            seed=seed,
            kvecs=kvecs,
            amps=amps * scale,
            phases=phases,
        )

    def value(self, X):
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        # angles per term: (N, Q)
        ang = math.pi * (X2 @ self.kvecs.T) + self.phases
        out = np.cos(ang) @ self.amps
        return out[0] if np.asarray(X).ndim == 1 else out

    def jacobian_batch(self, X):
        X2 = np.atleast_2d(np.asarray(X, dtype=float))
        ang = math.pi * (X2 @ self.kvecs.T) + self.phases
        s = np.sin(ang)  # (N, Q)
        # J[c, j] = -pi * sum_q amps[q, c] * kvecs[q, j] * sin(ang_q)
        return -math.pi * np.einsum("nq,qc,qj->ncj", s, self.amps, self.kvecs)


class PerturbedMap:
    """base + field, with summed analytic Jacobians."""

    provenance = "perturbed"

    def __init__(self, base, fld: PerturbationField):
        self.base = base
        self.field = fld
        self.n = base.n
        self.P = base.P

    def apply(self, x):
        X = np.asarray(x, dtype=float)
        return reduce(np.asarray(self.base.apply(X)) + self.field.value(X))

    def jacobian(self, x):
        return self.jacobian_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def jacobian_batch(self, X):
        return self.base.jacobian_batch(X) + self.field.jacobian_batch(X)


def perturb(base, fld: PerturbationField) -> PerturbedMap:
    return PerturbedMap(base, fld)


# === module-level operation wrappers ======================================


def apply_A(P: Params, x):
    return LinearMap(P).apply(x)


def apply_fhat(P: Params, F2: MapFamily, F1: MapFamily, x):
    """The unblended slice map; only defined over the widened slices."""
    X = np.asarray(x, dtype=float)
    layout = SliceLayout.from_params(P)
    i, zone = layout.locate(X[: P.m])
    if i is None:
        raise ValueError("point is outside every widened slice")
    g = layout.member_for(i, F2, F1)
    out = np.empty_like(X)
    out[: P.m] = reduce(P.lam * X[: P.m])
    out[P.m :] = np.asarray(g.apply(X[P.m :]))
    return out


def apply_f(P: Params, F2: MapFamily, F1: MapFamily, x):
    return BlendedMap(P, F2, F1).apply(x)


def apply_F(P: Params, F2: MapFamily, F1: MapFamily, x):
    return SingularMap(P, BlendedMap(P, F2, F1)).apply(x)


def fixed_points_A(P: Params) -> np.ndarray:
    """The lam-1 fixed circle values 2i/(lam-1) of the expanding factor."""
    return np.array(
        [reduce_scalar(2.0 * i / (P.lam - 1)) for i in range(P.lam - 1)]
    )


def fixed_points_A_exact(P: Params) -> list[Fraction]:
    """Exact rational fixed values; lam*v - v = 2i vanishes mod 2 exactly."""
    out = []
    for i in range(P.lam - 1):
        val = Fraction(2 * i, P.lam - 1)
        val = (val + 1) % 2 - 1
        out.append(val)
    return out


# === assembled system ======================================================


@dataclass(frozen=True)
class System:
    """Everything built from one parameter set."""

    params: Params
    F2: MapFamily
    F1: MapFamily
    A: LinearMap
    f: BlendedMap
    F: SingularMap


def build_system(P: Params) -> System:
    """Construct families, the blended map, and the singular map."""
    F2 = build_F2(P.k, P.alpha, a0=P.a0)
    F1 = build_F1(P.k, P.M_target, seed=P.seed, jac_slack=P.jac_slack)
    A = LinearMap(P)
    f = BlendedMap(P, F2, F1)
    F = SingularMap(P, f)
    return System(params=P, F2=F2, F1=F1, A=A, f=f, F=F)
