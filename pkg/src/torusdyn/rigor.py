"""Certification of the key inequalities by outward-rounded intervals.

Sampling (the tangent module) can only falsify; this module certifies.
Every arithmetic operation inflates its result outward by 4 ulps, which
keeps enclosures sound without hardware rounding-mode control at a small
cost in tightness.

Polynomial pieces are bounded by a range engine that splits the domain
until the derivative's Bernstein coefficients have a definite sign (the
piece is then monotone and its endpoint values bound it tightly) and
falls back to a mean-value enclosure on the tiny cells around interior
extrema, where the vanishing derivative makes that form quadratically
tight.  Piecewise profiles evaluate branch-wise and hull the touched
branches, including the zero exterior.

Predicates certify on boxes by bounding the Jacobian's block structure:
the unstable block is exactly lam times the identity, so cone-image
ratios are compared as squared norms (no square root of the quotient)
and expansion inherits the floor lam^2/(1+kappa^2) from the head block
alone.  The certificate of a region is a deterministic function of
(region, predicate, depth): subdivision order never affects the verdict.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .endo import Params, SliceLayout, System
from .profiles import PiecewisePoly
from .torus import reduce_scalar

__all__ = [
    "Interval",
    "IntervalBox",
    "interval_eval",
    "pp_range",
    "interval_sin",
    "CertificateTrace",
    "verify_inequality",
    "named_region",
    "certificate_to_text",
    "PREDICATES",
]

_ULPS = 4


def _workers() -> int:
    env = os.environ.get("TORUSDYN_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _dn(x: float) -> float:
    for _ in range(_ULPS):
        x = math.nextafter(x, -math.inf)
    return x


def _up(x: float) -> float:
    for _ in range(_ULPS):
        x = math.nextafter(x, math.inf)
    return x


@dataclass(frozen=True)
class Interval:
    """Closed interval with outward rounding on every operation."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def mag(self) -> float:
        """sup |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    def __add__(self, o):
        o = _coerce(o)
        return Interval(_dn(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, o):
        return self + (-_coerce(o))

    def __rsub__(self, o):
        return _coerce(o) + (-self)

    def __mul__(self, o):
        o = _coerce(o)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_dn(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = _coerce(o)
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionError("division by interval containing 0")
        ps = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_dn(min(ps)), _up(max(ps)))

    def sq(self) -> "Interval":
        if self.lo >= 0.0:
            return Interval(_dn(self.lo * self.lo), _up(self.hi * self.hi))
        if self.hi <= 0.0:
            return Interval(_dn(self.hi * self.hi), _up(self.lo * self.lo))
        m = self.mag
        return Interval(0.0, _up(m * m))

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise ValueError("sqrt of an interval with negative part")
        return Interval(max(0.0, _dn(math.sqrt(self.lo))), _up(math.sqrt(self.hi)))

    def abs_(self) -> "Interval":
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, self.mag)

    def hull(self, o: "Interval") -> "Interval":
        return Interval(min(self.lo, o.lo), max(self.hi, o.hi))

    def intersect(self, o: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, o.lo), min(self.hi, o.hi)
        return Interval(lo, hi) if lo <= hi else None

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def subset_of(self, o: "Interval") -> bool:
        return o.lo <= self.lo and self.hi <= o.hi


def _coerce(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(float(x))


def interval_sin(x: Interval) -> Interval:
    """Enclosure of sin over an interval (pi-aware critical points)."""
    if x.width >= 2.0 * math.pi:
        return Interval(-1.0, 1.0)
    lo = min(math.sin(x.lo), math.sin(x.hi))
    hi = max(math.sin(x.lo), math.sin(x.hi))
    # crest/trough at pi/2 + j*pi inside the interval
    j0 = math.floor((x.lo - math.pi / 2.0) / math.pi)
    for j in (j0, j0 + 1, j0 + 2):
        c = math.pi / 2.0 + j * math.pi
        if x.lo <= c <= x.hi:
            v = 1.0 if j % 2 == 0 else -1.0
            lo, hi = min(lo, v), max(hi, v)
    return Interval(max(-1.0, _dn(lo)), min(1.0, _up(hi)))


@dataclass(frozen=True)
class IntervalBox:
    """Product of coordinate intervals (a subdivision cell)."""

    axes: tuple[Interval, ...]

    @classmethod
    def from_bounds(cls, bounds) -> "IntervalBox":
        return cls(tuple(Interval(float(a), float(b)) for a, b in bounds))

    @property
    def n(self) -> int:
        return len(self.axes)

    def widest_axis(self) -> int:
        return max(range(self.n), key=lambda i: self.axes[i].width)

    def split(self, axis: int) -> tuple["IntervalBox", "IntervalBox"]:
        iv = self.axes[axis]
        m = iv.mid
        left = list(self.axes)
        right = list(self.axes)
        left[axis] = Interval(iv.lo, m)
        right[axis] = Interval(m, iv.hi)
        return IntervalBox(tuple(left)), IntervalBox(tuple(right))

    def bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((iv.lo, iv.hi) for iv in self.axes)


def interval_eval(fn, box: IntervalBox) -> Interval:
    """Evaluate an Interval-valued expression over the box's axes."""
    out = fn(*box.axes)
    return _coerce(out)


# === polynomial range engine ==============================================


def _poly_eval_iv(coeffs: tuple[float, ...], t: Interval) -> Interval:
    """Horner evaluation in interval arithmetic (ascending coefficients)."""
    acc = Interval.point(0.0)
    for c in reversed(coeffs):
        acc = acc * t + _coerce(c)
    return acc


def _poly_deriv(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    return tuple(i * c for i, c in enumerate(coeffs))[1:] or (0.0,)


def _shift_scale_iv(
    coeffs: tuple[float, ...], t0: float, h: float
) -> tuple[Interval, ...]:
    """Interval coefficients of q(s) = p(t0 + s*h) on s in [0, 1]."""
    d = len(coeffs) - 1
    q = [Interval.point(0.0) for _ in range(d + 1)]
    c0 = Interval.point(t0)
    hh = Interval.point(h)
    for i, a in enumerate(coeffs):
        if a == 0.0:
            continue
        # expand a*(t0 + s*h)^i into s-powers via binomial coefficients
        term = _coerce(a)
        pw_c = Interval.point(1.0)
        cpows = []
        for _ in range(i + 1):
            cpows.append(pw_c)
            pw_c = pw_c * c0
        pw_h = Interval.point(1.0)
        for j in range(i + 1):
            binom = math.comb(i, j)
            q[j] = q[j] + term * binom * cpows[i - j] * pw_h
            pw_h = pw_h * hh
    return tuple(q)


def _bernstein_sign(qc: tuple[Interval, ...]) -> int:
    """+1 / -1 if the polynomial with these power coefficients is certainly
    nonnegative / nonpositive on [0, 1] by its Bernstein coefficients,
    else 0."""
    d = len(qc) - 1
    allpos = True
    allneg = True
    for i in range(d + 1):
        b = Interval.point(0.0)
        for j in range(i + 1):
            w = math.comb(i, j) / math.comb(d, j)
            b = b + qc[j] * w
        if b.lo < 0.0:
            allpos = False
        if b.hi > 0.0:
            allneg = False
        if not (allpos or allneg):
            return 0
    return 1 if allpos else -1


def _poly_range(
    coeffs: tuple, t: Interval, depth: int = 0, max_depth: int = 60
) -> Interval:
    """Tight enclosure of the polynomial over t (subset of [0, 1]).

    Cells where the derivative's sign is definite (cheap Horner check,
    then a sharper Bernstein test) are bounded by their endpoint values;
    cells pinned around a derivative zero take the mean-value form, whose
    slop dp*w is driven below 1e-13 by the subdivision itself."""
    w = t.width
    dcoeffs = _poly_deriv(coeffs)
    if w == 0.0:
        return _poly_eval_iv(coeffs, Interval.point(t.lo))
    dp = _poly_eval_iv(dcoeffs, t)
    monotone = not dp.contains(0.0)
    if not monotone and dp.mag * w > 1e-13 and w >= 1e-10 and depth < max_depth:
        qd = _shift_scale_iv(dcoeffs, t.lo, w)
        monotone = _bernstein_sign(qd) != 0
        if not monotone:
            m = t.mid
            left = _poly_range(coeffs, Interval(t.lo, m), depth + 1, max_depth)
            right = _poly_range(coeffs, Interval(m, t.hi), depth + 1, max_depth)
            return left.hull(right)
    if monotone:
        a = _poly_eval_iv(coeffs, Interval.point(t.lo))
        b = _poly_eval_iv(coeffs, Interval.point(t.hi))
        return a.hull(b)
    mid = t.mid
    pm = _poly_eval_iv(coeffs, Interval.point(mid))
    half = Interval(-0.5 * w, 0.5 * w)
    return pm + dp * half


def pp_range(pp: PiecewisePoly, x: Interval) -> Interval:
    """Range of a piecewise polynomial over x: branch-wise with hulling,
    including the constant exterior when x leaves the support."""
    return _pp_range_cached(pp, x.lo, x.hi)


@functools.lru_cache(maxsize=4096)
def _pp_range_cached(pp: PiecewisePoly, xlo: float, xhi: float) -> Interval:
    x = Interval(xlo, xhi)
    breaks = pp.breaks
    out: Interval | None = None
    if x.lo < breaks[0] or x.hi > breaks[-1]:
        out = Interval.point(pp.outside)
    for i in range(len(breaks) - 1):
        piece = Interval(breaks[i], breaks[i + 1])
        sub = x.intersect(piece)
        if sub is None:
            continue
        wdt = breaks[i + 1] - breaks[i]
        t = Interval(
            max(0.0, _dn((sub.lo - breaks[i]) / wdt)),
            min(1.0, _up((sub.hi - breaks[i]) / wdt)),
        )
        r = _poly_range(tuple(pp.coeffs[i]), t)
        out = r if out is None else out.hull(r)
    if out is None:
        out = Interval.point(pp.outside)
    return out


# === upper-bound float helpers ============================================


def _sum_up(vals) -> float:
    acc = 0.0
    for v in vals:
        acc = _up(acc + v)
    return acc


def _mul_up(a: float, b: float) -> float:
    return _up(a * b)


def _sqrt_up(a: float) -> float:
    return _up(math.sqrt(a))


# === interval evaluation of the construction's tangent data ===============


def _toral_images(iv: Interval, shift: float) -> list[Interval]:
    """Canonical-interval pieces of {reduce(x - shift) : x in iv}.

    Endpoints absorb the shift's rounding by outward inflation before the
    clamp back into [-1, 1]."""
    lo, hi = _dn(iv.lo - shift), _up(iv.hi - shift)
    if hi - lo >= 2.0:
        return [Interval(-1.0, 1.0)]
    base = math.floor((lo + 1.0) / 2.0)
    lo = _dn(lo - 2.0 * base)
    hi = _up(hi - 2.0 * base)
    if hi <= 1.0:
        return [Interval(max(-1.0, lo), min(1.0, hi))]
    return [
        Interval(max(-1.0, min(1.0, lo)), 1.0),
        Interval(-1.0, min(1.0, _up(hi - 2.0))),
    ]


def _gtilde_s_range(g, X: Interval) -> tuple[Interval, Interval]:
    """(s, s') enclosures of the zone displacement over canonical X."""
    w = 2.0 * g.a0
    al, c = g.alpha, g.c
    s_out: Interval | None = None
    sp_out: Interval | None = None

    def _acc(s_iv, sp_iv):
        nonlocal s_out, sp_out
        s_out = s_iv if s_out is None else s_out.hull(s_iv)
        sp_out = sp_iv if sp_out is None else sp_out.hull(sp_iv)

    inner = X.intersect(Interval(-w, w))
    half_al = Interval.point(0.5 * al)  # exact: 0.5 is a power of two
    c_iv = Interval.point(c)
    if inner is not None:
        # tau = X/w lies in [-1, 1] by construction; the clamp only trims
        # quotient rounding, never true range
        tau = inner / w
        tau = Interval(max(-1.0, tau.lo), min(1.0, tau.hi))
        # s = (al/2) * ((1+c) * w * P(tau) - c * X), P' = (1 - tau^2)^3
        pc = (0.0, 1.0, 0.0, -1.0, 0.0, 0.6, 0.0, -1.0 / 7.0)
        # map tau in [-1,1] to t in [0,1] for the range engine
        t = Interval(_dn(0.5 * (tau.lo + 1.0)), _up(0.5 * (tau.hi + 1.0)))
        t = Interval(max(0.0, t.lo), min(1.0, t.hi))
        comp = _compose_affine(pc, -1.0, 2.0)
        P = _poly_range(comp, t)
        s_iv = half_al * ((Interval.point(1.0) + c_iv) * w * P - c_iv * inner)
        one_m = Interval.point(1.0) - tau.sq()
        B = one_m * one_m * one_m
        sp_iv = half_al * ((Interval.point(1.0) + c_iv) * B - c_iv)
        _acc(s_iv, sp_iv)
    for seg in (Interval(-1.0, -w), Interval(w, 1.0)):
        sub = X.intersect(seg)
        if sub is not None:
            sgn = 1.0 if sub.lo >= 0.0 else -1.0
            s_iv = half_al * c_iv * (Interval.point(sgn) - sub)
            _acc(s_iv, -(half_al * c_iv))
    if s_out is None:
        s_out, sp_out = Interval.point(0.0), Interval.point(0.0)
    return s_out, sp_out


def _compose_affine(coeffs: tuple[float, ...], a: float, b: float):
    """Interval power coefficients of p(a + b*t) from those of p."""
    d = len(coeffs) - 1
    out = [Interval.point(0.0) for _ in range(d + 1)]
    for i, ci in enumerate(coeffs):
        if ci == 0.0:
            continue
        for j in range(i + 1):
            term = _coerce(ci) * math.comb(i, j) * (a ** (i - j)) * (b**j)
            out[j] = out[j] + term
    return tuple(out)


def _member_coord_ranges(member, j: int, y_iv: Interval):
    """Enclosures of (g(y) - y, g'(y)) for coordinate j of a member."""
    cls = type(member).__name__
    if cls == "ZoneMember":
        segs = _toral_images(y_iv, member.shift)
        disp = None
        der = None
        for seg in segs:
            s_iv, sp_iv = _gtilde_s_range(member.g, seg)
            disp = s_iv if disp is None else disp.hull(s_iv)
            d_iv = Interval.point(1.0) + sp_iv
            der = d_iv if der is None else der.hull(d_iv)
        return disp, der
    if cls == "TranslationMember":
        return Interval.point(member.v[j]), Interval.point(1.0)
    # SineMember: disp = eta*sin(pi*(y - ph)) + w_j
    ang = (y_iv - member.phases[j]) * math.pi
    s = interval_sin(ang)
    disp = _coerce(member.eta) * s + member.w[j]
    cosiv = interval_sin(ang + math.pi / 2.0)
    der = Interval.point(1.0) + _coerce(member.eta * math.pi) * cosiv
    return disp, der


@dataclass(frozen=True)
class _TangentEnclosure:
    """Row-wise sup bounds of the Jacobian's center rows over a box.

    b[j]: sup 2-norm of row j's unstable-block entries; c[j]: sup 2-norm
    of row j's center-block entries.  The head block is exactly lam*I."""

    b: tuple[float, ...]
    c: tuple[float, ...]


def _enclose_center_rows(system: System, box: IntervalBox) -> _TangentEnclosure:
    P = system.params
    m, k, n = P.m, P.k, P.n
    xs = box.axes[:m]
    ys = box.axes[m:]
    # window and member data over the box, hulled across touched slices
    U_iv = Interval.point(0.0)
    gradU_sup = [0.0] * m
    disp_ivs = [Interval.point(0.0) for _ in range(k)]
    der_ivs = [Interval.point(1.0) for _ in range(k)]
    touched = False
    for i, cc in enumerate(P.slice_centers):
        per_axis: list[tuple[Interval, Interval]] = []
        hit = True
        for j in range(m):
            uj: Interval | None = None
            dj: Interval | None = None
            for seg in _toral_images(xs[j], cc):
                u_iv, du_iv = _bump_ranges(seg, P.r)
                uj = u_iv if uj is None else uj.hull(u_iv)
                dj = du_iv if dj is None else dj.hull(du_iv)
            if uj is None or uj.hi <= 0.0:
                hit = False
                break
            per_axis.append((uj, dj))
        if not hit:
            continue
        touched = True
        member = SliceLayout.from_params(P).member_for(i, system.F2, system.F1)
        Ui = Interval.point(1.0)
        for uj, _ in per_axis:
            Ui = Ui * uj
        U_iv = U_iv.hull(Ui)
        for j in range(m):
            others = Interval.point(1.0)
            for jj in range(m):
                if jj != j:
                    others = others * per_axis[jj][0]
            gij = (per_axis[j][1] * others).mag
            gradU_sup[j] = max(gradU_sup[j], gij)
        for q in range(k):
            d_iv, g_iv = _member_coord_ranges(member, q, ys[q])
            disp_ivs[q] = disp_ivs[q].hull(d_iv)
            der_ivs[q] = der_ivs[q].hull(g_iv)
    # center-block diagonal: 1 + U*(g' - 1), hulled with the untouched case
    diag = []
    for q in range(k):
        dd = Interval.point(1.0) + U_iv * (der_ivs[q] - 1.0)
        if touched:
            dd = dd.hull(Interval.point(1.0))
        diag.append(dd)

    # ball-correction extras on the last row
    ball_u = [0.0] * m  # sup of |-2 x_j phi psi'| for unstable j
    ball_c = [0.0] * (k - 1)
    last_diag = diag[k - 1]
    p = np.asarray(P.p)
    # can the box meet the ball?  Distance underestimates round down and the
    # comparison carries slack, so a boundary sliver is never missed.
    d2lo = 0.0
    for j in range(n):
        best = None
        for seg in _toral_images(box.axes[j], p[j]):
            a = 0.0 if seg.contains(0.0) else min(abs(seg.lo), abs(seg.hi))
            best = a if best is None else min(best, a)
        d2lo = max(0.0, _dn(d2lo + _dn(best * best)))
    if math.sqrt(d2lo) < P.l + 1e-9:
        s_iv = Interval.point(0.0)
        for j in range(n - 1):
            s_iv = s_iv + box.axes[j].sq()
        z_iv = box.axes[n - 1]
        phi = pp_range(system.F.phi_pp, z_iv)
        dphi = pp_range(system.F.phi_slope_pp, z_iv)
        psi = pp_range(system.F.psi_pp, s_iv)
        dpsi = pp_range(system.F.psi_slope_pp, s_iv)
        for j in range(m):
            ball_u[j] = (_coerce(2.0) * box.axes[j] * phi * dpsi).mag
        for q in range(k - 1):
            ball_c[q] = (_coerce(2.0) * box.axes[m + q] * phi * dpsi).mag
        corr = Interval.point(1.0) - dphi * psi
        # boundary boxes must hull with the uncorrected branch
        last_diag = last_diag.hull(last_diag - dphi * psi).hull(corr)

    b = []
    c = []
    for q in range(k):
        row_b = [_mul_up(disp_ivs[q].mag, gradU_sup[j]) for j in range(m)]
        row_c = [0.0] * k
        row_c[q] = diag[q].mag
        if q == k - 1:
            row_b = [_up(rb + bu) for rb, bu in zip(row_b, ball_u)]
            for t in range(k - 1):
                row_c[t] = _up(row_c[t] + ball_c[t])
            row_c[q] = last_diag.mag
        b.append(_sqrt_up(_sum_up(_mul_up(v, v) for v in row_b)))
        c.append(_sqrt_up(_sum_up(_mul_up(v, v) for v in row_c)))
    return _TangentEnclosure(b=tuple(b), c=tuple(c))


def _bump_ranges(x_iv: Interval, r: float) -> tuple[Interval, Interval]:
    """(u, u') enclosures of the plateau bump (center 0) over canonical x."""
    t_iv = x_iv.abs_() / r
    S = (0.0, 0.0, 0.0, 10.0, -15.0, 6.0)
    Sd = (0.0, 0.0, 30.0, -60.0, 30.0)
    val: Interval | None = None
    der: Interval | None = None

    def _acc(v, d):
        nonlocal val, der
        val = v if val is None else val.hull(v)
        der = d if der is None else der.hull(d)

    if t_iv.lo < 1.0:
        _acc(Interval.point(1.0), Interval.point(0.0))
    if t_iv.hi > 2.0:
        _acc(Interval.point(0.0), Interval.point(0.0))
    mid = t_iv.intersect(Interval(1.0, 2.0))
    if mid is not None:
        # u = S(2 - t); |u'| <= S'(2 - t)/r, sign depends on the side of 0
        tt = Interval(max(0.0, _dn(2.0 - mid.hi)), min(1.0, _up(2.0 - mid.lo)))
        v = _poly_range(S, tt)
        dmag = _poly_range(Sd, tt).abs_() / r
        sgn = Interval(-1.0, 1.0)
        if x_iv.lo >= 0.0:
            sgn = Interval.point(-1.0)
        elif x_iv.hi <= 0.0:
            sgn = Interval.point(1.0)
        _acc(v, dmag * sgn)
    if val is None:
        val, der = Interval.point(0.0), Interval.point(0.0)
    return val, der


# === predicates ============================================================


def _pred_cone(system: System, box: IntervalBox, kappa: float) -> bool:
    P = system.params
    enc = _enclose_center_rows(system, box)
    tail_sq = _sum_up(
        _mul_up(_up(bj + _mul_up(kappa, cj)), _up(bj + _mul_up(kappa, cj)))
        for bj, cj in zip(enc.b, enc.c)
    )
    lam_sq_dn = _dn(float(P.lam) * float(P.lam))
    kap_sq_dn = _dn(kappa * kappa)
    return tail_sq < _dn(kap_sq_dn * lam_sq_dn)


def _pred_expansion(system: System, box: IntervalBox, threshold: float) -> bool:
    P = system.params
    lam_sq_dn = _dn(float(P.lam) * float(P.lam))
    den_up = _up(1.0 + _up(P.kappa * P.kappa))
    floor_sq = _dn(lam_sq_dn / den_up)
    return floor_sq > _up(threshold * threshold)


def _pred_det_nonzero(system: System, box: IntervalBox, _unused: float) -> bool:
    P = system.params
    n = P.n
    s_iv = Interval.point(0.0)
    for j in range(n - 1):
        s_iv = s_iv + box.axes[j].sq()
    dphi = pp_range(system.F.phi_slope_pp, box.axes[n - 1])
    psi = pp_range(system.F.psi_pp, s_iv)
    det = Interval.point(1.0) - dphi * psi
    return not det.contains(0.0)


def _pred_phi_bound(system: System, box: IntervalBox, _unused: float) -> bool:
    phi = pp_range(system.F.phi_pp, box.axes[0])
    return phi.abs_().hi <= system.params.delta


PREDICATES = {
    "cone-image-ratio": _pred_cone,
    "expansion": _pred_expansion,
    "det-nonzero": _pred_det_nonzero,
    "phi-bound": _pred_phi_bound,
}


# === subdivision engine ====================================================


@dataclass(frozen=True)
class CertificateTrace:
    predicate: str
    region: tuple[tuple[float, float], ...]
    max_depth: int
    parameter: float
    leaves_certified: int
    leaves_undecided: int
    depth_reached: int
    undecided: tuple[tuple[tuple[float, float], ...], ...]
    verdict: str  # "certified" | "undecided"
    truncated: bool = False

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def _canonical_segs(a: float, b: float) -> list[tuple[float, float]]:
    """Split [a, b] (width < 2) into canonical chart segments."""
    if a < -1.0:
        return [(a + 2.0, 1.0), (-1.0, b)]
    if b > 1.0:
        return [(a, 1.0), (-1.0, b - 2.0)]
    return [(a, b)]


def _axis_complement_segs(centers: list[float], r: float) -> list[tuple[float, float]]:
    cs = sorted(centers)
    segs: list[tuple[float, float]] = []
    for i, c in enumerate(cs):
        nxt = cs[(i + 1) % len(cs)] + (2.0 if i + 1 == len(cs) else 0.0)
        a, b = c + 2.0 * r, nxt - 2.0 * r
        if b > a:
            segs.extend(_canonical_segs(a, b))
    return segs


def _cube_complement(
    centers: list[float], r: float, m: int
) -> list[list[tuple[float, float]]]:
    """Box cover of the complement of the widened slice cubes in T^m:
    the first axis is either in a gap (rest free) or inside one cube's
    interval (rest in that cube's complement, recursively)."""
    segs = _axis_complement_segs(centers, r)
    if m == 1:
        return [[s] for s in segs]
    out: list[list[tuple[float, float]]] = []
    rest_full = [(-1.0, 1.0)] * (m - 1)
    for s in segs:
        out.append([s] + rest_full)
    for c in sorted(centers):
        for head in _canonical_segs(c - 2.0 * r, c + 2.0 * r):
            for tail in _cube_complement([c], r, m - 1):
                out.append([head] + tail)
    return out


def named_region(P: Params, name: str) -> list[IntervalBox]:
    """Region presets: "ball" (cube hull of the correction ball, a sound
    enlargement), "slices" (widened slice cylinders), "outside" (their
    exact complement cover)."""
    if name == "ball":
        b = [(pj - P.l, pj + P.l) for pj in P.p]
        return [IntervalBox.from_bounds(b)]
    centers = [reduce_scalar(c) for c in P.slice_centers]
    full = [(-1.0, 1.0)] * P.k
    if name == "slices":
        out = []
        for c in centers:
            axis_segs = _canonical_segs(c - 2.0 * P.r, c + 2.0 * P.r)
            for combo in itertools.product(axis_segs, repeat=P.m):
                out.append(IntervalBox.from_bounds(list(combo) + full))
        return out
    if name == "outside":
        return [
            IntervalBox.from_bounds(bounds + full)
            for bounds in _cube_complement(centers, P.r, P.m)
        ]
    raise ValueError(f"unknown region {name!r}")


def verify_inequality(
    system: System,
    predicate: str,
    region: str | IntervalBox | list[IntervalBox],
    max_depth: int = 16,
    parameter: float | None = None,
    max_undecided: int = 4096,
) -> CertificateTrace:
    """Adaptive bisection certificate for a registered predicate.

    Splits along the widest axis until every leaf certifies or the depth
    cap is hit; undecided leaves are reported with their boxes.  The
    result is a pure function of (region, predicate, depth, parameter).
    """
    if predicate not in PREDICATES:
        raise ValueError(f"unknown predicate {predicate!r}; have {sorted(PREDICATES)}")
    P = system.params
    if parameter is None:
        parameter = P.kappa if predicate == "cone-image-ratio" else 6.0
    if isinstance(region, str):
        boxes = named_region(P, region)
        region_bounds = boxes[0].bounds() if len(boxes) == 1 else tuple(
            bb for box in boxes for bb in box.bounds()
        )
    elif isinstance(region, IntervalBox):
        boxes = [region]
        region_bounds = region.bounds()
    else:
        boxes = list(region)
        region_bounds = tuple(bb for box in boxes for bb in box.bounds())
    fn = PREDICATES[predicate]

    def run_box(top: IntervalBox):
        certified = 0
        n_undecided = 0
        local: list[tuple[tuple[float, float], ...]] = []
        depth_reached = 0
        truncated = False
        stack: list[tuple[IntervalBox, int]] = [(top, 0)]
        while stack:
            box, depth = stack.pop()
            depth_reached = max(depth_reached, depth)
            if fn(system, box, parameter):
                certified += 1
                continue
            if depth >= max_depth:
                n_undecided += 1
                if len(local) < 64:
                    local.append(box.bounds())
                if n_undecided >= max_undecided:
                    truncated = True
                    break
                continue
            a, b2 = box.split(box.widest_axis())
            stack.append((b2, depth + 1))
            stack.append((a, depth + 1))
        return certified, n_undecided, local, depth_reached, truncated

    # each top-level box subdivides deterministically on its own; results
    # merge in box order, so the trace never depends on scheduling
    if len(boxes) > 1:
        with ThreadPoolExecutor(max_workers=min(len(boxes), _workers())) as ex:
            parts = list(ex.map(run_box, boxes))
    else:
        parts = [run_box(boxes[0])]
    certified = sum(p[0] for p in parts)
    n_undecided = sum(p[1] for p in parts)
    undecided: list[tuple[tuple[float, float], ...]] = []
    for p in parts:
        undecided.extend(p[2])
    depth_reached = max(p[3] for p in parts)
    truncated = any(p[4] for p in parts)
    verdict = "certified" if (n_undecided == 0 and not truncated) else "undecided"
    return CertificateTrace(
        predicate=predicate,
        region=region_bounds,
        max_depth=max_depth,
        parameter=parameter,
        leaves_certified=certified,
        leaves_undecided=n_undecided,
        depth_reached=depth_reached,
        undecided=tuple(undecided[:64]),
        verdict=verdict,
        truncated=truncated,
    )


def certificate_to_text(trace: CertificateTrace) -> str:
    lines = [
        f"predicate: {trace.predicate} (parameter {trace.parameter})",
        f"verdict: {trace.verdict}",
        f"leaves: certified={trace.leaves_certified} "
        f"undecided={trace.leaves_undecided} depth<={trace.depth_reached}"
        + (" (truncated)" if trace.truncated else ""),
        "region:",
    ]
    for lo, hi in trace.region:
        lines.append(f"  [{lo:+.6f}, {hi:+.6f}]")
    if trace.undecided:
        lines.append(f"undecided leaves (first {len(trace.undecided)}):")
        for bx in trace.undecided:
            lines.append(
                "  " + " x ".join(f"[{lo:+.9f},{hi:+.9f}]" for lo, hi in bx)
            )
    return "\n".join(lines) + "\n"
