"""Scalar profiles used to assemble the maps: slice windows, near-identity
circle maps, and the two pinned profiles driving the singular perturbation.

All transitions use the quintic smoothstep S(t) = 10t^3 - 15t^4 + 6t^5, which
vanishes to second order at both ends, so every profile below is C^2.  Closed
forms are kept piecewise-polynomial on purpose: the rigor module re-evaluates
the same pieces in interval arithmetic, and polynomial pieces make that sound
and cheap.

Profiles
--------
bump        plateau window: 1 on [c-r, c+r], 0 outside [c-2r, c+2r];
            max |u'| = 1.875/r < 2/r.
window      product of bumps over the expanding coordinates, with gradient.
g_a         piecewise-linear circle map fixing -1, 0, 1: slope 1 + alpha/2 on
            [-a, a], slope 1 + a*alpha/(2(a-1)) < 1 outside.
GTilde      C^2 near-identity circle map shadowing g_a: displacement lobe of
            half-width 2*a0 around 0, exact affine contraction outside, fixes
            -1, 0, 1, derivative exactly 1 + alpha/2 at 0 and constant
            1 - alpha*c/2 < 1 outside (-2*a0, 2*a0).
Psi         shell profile: peak value 2 at s = 9/16, support (9/16 - theta,
            9/16 + theta), shape 2*(1 - t^2)^3.
Phi         pinned-slope profile: phi'(1/4) = 1/2, phi'(1/4 + delta/8) = 1,
            phi'(1/4 + delta/4) = -3/4, phi(1/4) = 0, -3/4 <= phi' <= 1,
            |phi| <= delta, phi' supported on [1/4 - delta/4, 1/4 + 3*delta/4],
            and phi vanishes at both support ends (two free lobe amplitudes are
            calibrated to zero out the two defining integrals, which keeps the
            piecewise map of the ambient construction continuous off a thin
            slab; see ConstructionError checks below).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .torus import reduce, reduce_scalar

__all__ = [
    "ConstructionError",
    "smoothstep",
    "smoothstep_deriv",
    "BumpSpec",
    "bump_eval",
    "window_eval",
    "g_a_eval",
    "GTilde",
    "gtilde_eval",
    "PiecewisePoly",
    "PsiSpec",
    "build_psi",
    "psi_eval",
    "PhiSpec",
    "build_phi",
    "phi_eval",
    "measured_max_abs_deriv",
]


class ConstructionError(ValueError):
    """A profile or family could not be built within its stated bounds."""


# === quintic smoothstep ====================================================

_S_COEFFS = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])  # ascending powers
_SP_COEFFS = np.array([0.0, 0.0, 30.0, -60.0, 30.0])


def smoothstep(t):
    """S(t) on [0, 1]; S(0)=0, S(1)=1, S'(0)=S'(1)=S''(0)=S''(1)=0."""
    t = np.clip(t, 0.0, 1.0)
    return npoly.polyval(t, _S_COEFFS)


def smoothstep_deriv(t):
    """S'(t) = 30 t^2 (1 - t)^2, maximal value 1.875 at t = 1/2."""
    t = np.clip(t, 0.0, 1.0)
    return npoly.polyval(t, _SP_COEFFS)


# === slice window bumps ====================================================


@dataclass(frozen=True)
class BumpSpec:
    """Plateau window around `center`: inner half-width r, outer 2r."""

    center: float
    r: float

    def __post_init__(self):
        if not (self.r > 0.0):
            raise ConstructionError(f"bump half-width r={self.r} must be positive")
        if 4.0 * self.r > 2.0:
            raise ConstructionError("bump outer width exceeds the circle")


def bump_eval(x, spec: BumpSpec):
    """Window value and derivative at x (scalar or array), toral in x.

    Value 1 on [c-r, c+r], 0 outside [c-2r, c+2r], falling smoothstep in
    between.  max |u'| = 1.875/r.
    """
    d = reduce(np.asarray(x, dtype=float) - spec.center)
    ad = np.abs(d)
    t = (ad - spec.r) / spec.r
    inner = ad <= spec.r
    outer = ad >= 2.0 * spec.r
    val = np.where(inner, 1.0, np.where(outer, 0.0, 1.0 - smoothstep(t)))
    der = np.where(
        inner | outer, 0.0, -smoothstep_deriv(t) / spec.r * np.sign(d)
    )
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


def window_eval(x, specs: tuple[BumpSpec, ...]):
    """Product window over the expanding block: value and gradient.

    x has shape (m,) or (N, m); specs has length m (one bump per axis, all
    bumps of one slice share center pattern and r).  Returns (U, grad) with
    grad shape matching x.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    m = X.shape[1]
    if len(specs) != m:
        raise ValueError("one BumpSpec per axis required")
    vals = np.empty_like(X)
    ders = np.empty_like(X)
    for j, spec in enumerate(specs):
        vals[:, j], ders[:, j] = bump_eval(X[:, j], spec)
    U = np.prod(vals, axis=1)
    grad = np.empty_like(X)
    for j in range(m):
        others = np.prod(np.delete(vals, j, axis=1), axis=1) if m > 1 else 1.0
        grad[:, j] = ders[:, j] * others
    if single:
        return float(U[0]), grad[0]
    return U, grad


# === piecewise-linear IFS generator =======================================


def g_a_eval(x, a: float, alpha: float):
    """Piecewise-linear circle map fixing -1, 0, 1: (value, slope).

    Slope 1 + alpha/2 on [-a, a]; slope 1 + a*alpha/(2(a-1)) < 1 outside.
    Both slopes must be positive for the map to be a bijection of [-1, 1].
    """
    if not (0.0 < a < 1.0):
        raise ConstructionError(f"a={a} outside (0, 1)")
    if not (alpha > 0.0):
        raise ConstructionError(f"alpha={alpha} must be positive")
    s_in = 1.0 + alpha / 2.0
    s_out = 1.0 + a * alpha / (2.0 * (a - 1.0))
    if s_out <= 0.0:
        raise ConstructionError("outer slope non-positive; alpha too large for a")
    X = reduce(np.asarray(x, dtype=float))
    mid = np.abs(X) <= a
    val = np.where(mid, s_in * X, s_out * (X - np.sign(X)) + np.sign(X))
    der = np.where(mid, s_in, s_out)
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


# === smooth near-identity circle map ======================================


@dataclass(frozen=True)
class GTilde:
    """C^2 circle map x + s(x) with an expansion lobe at 0.

    s is odd and 2-periodic; inside |x| <= 2*a0 it is the integral of the
    bump (1 - (x/2a0)^2)^3 rebalanced so the map has derivative exactly
    1 + alpha/2 at 0, and outside it is affine with derivative 1 - alpha*c/2
    where c = I/(1 - I), I = (32/35)*a0.  Then:

      * |g(x) - x| < alpha/2 everywhere,
      * g' <= 1 + alpha/2 with equality only at 0,
      * g' = 1 - alpha*c/2 < 1 on the complement of (-2*a0, 2*a0),
      * g fixes -1, 0, 1 and is an orientation-preserving diffeomorphism.
    """

    a0: float
    alpha: float
    c: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.a0 <= 0.125):
            raise ConstructionError(f"a0={self.a0} outside (0, 1/8]")
        if not (self.alpha > 0.0):
            raise ConstructionError(f"alpha={self.alpha} must be positive")
        ib = (32.0 / 35.0) * self.a0
        c = ib / (1.0 - ib)
        if self.alpha * c / 2.0 >= 1.0:
            raise ConstructionError("alpha too large: outer derivative would vanish")
        object.__setattr__(self, "c", c)

    # displacement s and s' ------------------------------------------------

    def _s_arrays(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a0, al, c = self.a0, self.alpha, self.c
        w = 2.0 * a0
        tau = np.clip(X / w, -1.0, 1.0)
        # P(tau) = integral of (1 - u^2)^3 from 0 to tau
        P = tau * (1.0 - tau**2 + 0.6 * tau**4 - tau**6 / 7.0)
        inside = np.abs(X) < w
        s_in = 0.5 * al * ((1.0 + c) * w * P - c * X)
        s_out = 0.5 * al * c * (np.sign(X) - X)
        s = np.where(inside, s_in, s_out)
        B = (1.0 - np.clip(tau, -1.0, 1.0) ** 2) ** 3
        sp = np.where(inside, 0.5 * al * ((1.0 + c) * B - c), -0.5 * al * c)
        return s, sp

    def value(self, x):
        """g(x) in canonical coordinates (scalar or array)."""
        scalar = np.ndim(x) == 0
        X = np.atleast_1d(np.asarray(reduce(np.asarray(x, dtype=float))))
        s, _ = self._s_arrays(X)
        out = reduce(X + s)
        return float(out[0]) if scalar else out

    def deriv(self, x):
        scalar = np.ndim(x) == 0
        X = np.atleast_1d(np.asarray(reduce(np.asarray(x, dtype=float))))
        _, sp = self._s_arrays(X)
        out = 1.0 + sp
        return float(out[0]) if scalar else out

    def value_scalar(self, x: float) -> float:
        """Scalar fast path used by orbit kernels."""
        X = reduce_scalar(x)
        a0 = self.a0
        w = 2.0 * a0
        if X > w or X < -w:
            s = 0.5 * self.alpha * self.c * ((1.0 if X > 0 else -1.0) - X)
        else:
            tau = X / w
            P = tau * (1.0 - tau * tau * (1.0 - 0.6 * tau * tau + tau**4 / 7.0))
            # rewrite of tau - tau^3 + 0.6 tau^5 - tau^7/7 with fewer powers
            s = 0.5 * self.alpha * ((1.0 + self.c) * w * P - self.c * X)
        return reduce_scalar(X + s)

    def inverse(self, y):
        """Monotone scalar/array inverse on the circle (Newton, verified)."""
        Y = reduce(np.asarray(y, dtype=float))
        scalar = Y.ndim == 0
        Yv = np.atleast_1d(Y).astype(float)
        s, _ = self._s_arrays(Yv)
        X = Yv - s
        for _ in range(4):
            s, sp = self._s_arrays(X)
            X = X - (X + s - Yv) / (1.0 + sp)
        s, _ = self._s_arrays(X)
        resid = np.max(np.abs(X + s - Yv))
        if resid > 1e-12:
            raise ConstructionError(f"inverse iteration residual {resid:.2e}")
        out = reduce(X)
        return float(out[0]) if scalar else out

    def sup_displacement(self) -> float:
        """Exact stationary-point bound for max |g(x) - x|."""
        # s' = 0 inside the lobe at B(tau) = c/(1+c)
        tau = math.sqrt(1.0 - (self.c / (1.0 + self.c)) ** (1.0 / 3.0))
        X = np.array([tau * 2.0 * self.a0])
        s, _ = self._s_arrays(X)
        return abs(float(s[0]))


def gtilde_eval(x, g: GTilde):
    """(value, derivative) pair for the smooth generator."""
    return g.value(x), g.deriv(x)


# === piecewise polynomial infrastructure ==================================


@dataclass(frozen=True)
class PiecewisePoly:
    """Piecewise polynomial on consecutive intervals, constant outside.

    Coefficients are stored per piece in the local coordinate
    t = (x - a_i)/(b_i - a_i) in [0, 1], ascending powers.  This keeps
    evaluation well-conditioned for very thin pieces (widths of order delta)
    and lets the rigor module run interval Horner on the same data.
    """

    breaks: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]
    outside: float = 0.0

    def __post_init__(self):
        if len(self.breaks) != len(self.coeffs) + 1:
            raise ValueError("need len(breaks) == len(coeffs) + 1")
        b = np.asarray(self.breaks, dtype=float)
        if np.any(np.diff(b) <= 0):
            raise ValueError("breaks must be strictly increasing")

    @property
    def support(self) -> tuple[float, float]:
        return self.breaks[0], self.breaks[-1]

    def __call__(self, x):
        X = np.asarray(x, dtype=float)
        scalar = X.ndim == 0
        Xv = np.atleast_1d(X).astype(float)
        out = np.full(Xv.shape, self.outside, dtype=float)
        b = np.asarray(self.breaks)
        idx = np.searchsorted(b, Xv, side="right") - 1
        inside = (Xv >= b[0]) & (Xv <= b[-1])
        idx = np.clip(idx, 0, len(self.coeffs) - 1)
        for i, cf in enumerate(self.coeffs):
            mask = inside & (idx == i)
            if not np.any(mask):
                continue
            a, bb = b[i], b[i + 1]
            t = (Xv[mask] - a) / (bb - a)
            out[mask] = npoly.polyval(t, np.asarray(cf))
        return float(out[0]) if scalar else out

    def derivative(self) -> "PiecewisePoly":
        cfs = []
        b = np.asarray(self.breaks)
        for i, cf in enumerate(self.coeffs):
            w = b[i + 1] - b[i]
            d = npoly.polyder(np.asarray(cf)) / w
            cfs.append(tuple(float(v) for v in np.atleast_1d(d)))
        return PiecewisePoly(self.breaks, tuple(cfs), outside=0.0)

    def antiderivative(self) -> "PiecewisePoly":
        """Antiderivative vanishing at the left end of the support.

        Outside value stays 0 on the left; the right-outside value equals the
        total integral (callers needing a compactly supported antiderivative
        must calibrate that integral to zero first).
        """
        cfs = []
        b = np.asarray(self.breaks)
        acc = 0.0
        for i, cf in enumerate(self.coeffs):
            w = b[i + 1] - b[i]
            prim = npoly.polyint(np.asarray(cf)) * w
            prim = np.atleast_1d(prim).astype(float)
            prim[0] += acc
            cfs.append(tuple(float(v) for v in prim))
            acc = float(npoly.polyval(1.0, prim))
        return PiecewisePoly(self.breaks, tuple(cfs), outside=0.0)

    def piece_integral(self, i: int) -> float:
        b = np.asarray(self.breaks)
        w = b[i + 1] - b[i]
        prim = npoly.polyint(np.asarray(self.coeffs[i]))
        return float(npoly.polyval(1.0, prim) * w)

    def total_integral(self) -> float:
        return float(sum(self.piece_integral(i) for i in range(len(self.coeffs))))


def _poly_compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Coefficients of outer(inner(t)), ascending."""
    acc = np.array([0.0])
    for c in outer[::-1]:
        acc = npoly.polymul(acc, inner)
        if acc.size == 0:
            acc = np.array([0.0])
        acc = np.atleast_1d(acc)
        acc = npoly.polyadd(acc, np.array([c]))
    return np.atleast_1d(acc)


_EVEN_BUMP = np.array([1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0])  # (1 - u^2)^3


def _lobe_coeffs() -> np.ndarray:
    """(1 - (2t - 1)^2)^3 on local t in [0, 1]: a C^2 lobe, peak 1 at 1/2."""
    return _poly_compose(_EVEN_BUMP, np.array([-1.0, 2.0]))


# === shell profile psi =====================================================


@dataclass(frozen=True)
class PsiSpec:
    """Peak 2 at s = 9/16, support half-width theta."""

    theta: float

    def __post_init__(self):
        if not (self.theta > 0.0):
            raise ConstructionError(f"theta={self.theta} must be positive")


def build_psi(spec: PsiSpec) -> PiecewisePoly:
    lo = 9.0 / 16.0 - spec.theta
    hi = 9.0 / 16.0 + spec.theta
    return PiecewisePoly((lo, hi), (tuple(2.0 * _lobe_coeffs()),), outside=0.0)


def psi_eval(s, spec: PsiSpec):
    """(psi, psi') at s; psi(9/16) = 2 exactly, psi' = 0 outside the support."""
    pp = build_psi(spec)
    return pp(s), pp.derivative()(s)


# === pinned-slope profile phi ==============================================


@dataclass(frozen=True)
class PhiSpec:
    """Support scale delta for the pinned profile around z = 1/4."""

    delta: float

    def __post_init__(self):
        if not (self.delta > 0.0):
            raise ConstructionError(f"delta={self.delta} must be positive")


def _build_phi_slope_unit() -> PiecewisePoly:
    """phi' in the normalized coordinate xi = (z - 1/4)/delta on [-1/4, 3/4].

    Fixed skeleton (quintic smoothstep segments through the pinned nodes)
    plus two lobes with free amplitudes A1 (on [-1/4, -1/32]) and A2 (on
    [9/16, 3/4]).  A1 zeroes the integral over [-1/4, 0] (so the
    antiderivative vanishes at the pinned zero phi(1/4) = 0); A2 zeroes the
    total integral (so the antiderivative vanishes at the right support end).
    """
    S = tuple(float(v) for v in _S_COEFFS)
    L = _lobe_coeffs()
    breaks = (-0.25, -1.0 / 32.0, 0.0, 0.125, 0.25, 9.0 / 16.0, 0.75)
    # skeleton segment coefficients (amplitude slots for pieces 0 and 5)
    seg_rise_half = tuple(float(v) for v in 0.5 * np.asarray(S))            # 0 -> 1/2
    seg_half_to_one = tuple(float(v) for v in npoly.polyadd(np.array([0.5]), 0.5 * np.asarray(S)))
    seg_one_to_neg = tuple(float(v) for v in npoly.polyadd(np.array([1.0]), -1.75 * np.asarray(S)))
    seg_neg_to_zero = tuple(float(v) for v in npoly.polyadd(np.array([-0.75]), 0.75 * np.asarray(S)))

    def assemble(a1: float, a2: float) -> PiecewisePoly:
        return PiecewisePoly(
            breaks,
            (
                tuple(float(v) for v in a1 * L),
                seg_rise_half,
                seg_half_to_one,
                seg_one_to_neg,
                seg_neg_to_zero,
                tuple(float(v) for v in a2 * L),
            ),
            outside=0.0,
        )

    # integrals of the unit lobes and the fixed skeleton
    probe = assemble(1.0, 1.0)
    lobe1 = probe.piece_integral(0)
    lobe2 = probe.piece_integral(5)
    fixed = assemble(0.0, 0.0)
    fixed_left = fixed.piece_integral(0) + fixed.piece_integral(1)
    fixed_total = fixed.total_integral()
    a1 = -fixed_left / lobe1
    a2 = -(fixed_total + a1 * lobe1) / lobe2
    pp = assemble(a1, a2)

    # calibration sanity: pinned nodes, bounds, vanishing integrals
    for z, want in ((0.0, 0.5), (0.125, 1.0), (0.25, -0.75)):
        got = pp(z)
        if abs(got - want) > 1e-12:
            raise ConstructionError(f"pinned node phi'({z}) = {got}, want {want}")
    left = pp.piece_integral(0) + pp.piece_integral(1)
    if abs(left) > 1e-14 or abs(pp.total_integral()) > 1e-14:
        raise ConstructionError("lobe calibration failed to zero the integrals")
    grid = np.linspace(-0.25, 0.75, 20001)
    vals = pp(grid)
    if vals.min() < -0.75 - 1e-9 or vals.max() > 1.0 + 1e-9:
        raise ConstructionError("phi' escapes [-3/4, 1] after calibration")
    return pp


_PHI_SLOPE_UNIT = _build_phi_slope_unit()


def build_phi_slope(spec: PhiSpec) -> PiecewisePoly:
    """phi'(z) on [1/4 - delta/4, 1/4 + 3*delta/4] (values are scale-free)."""
    b = tuple(0.25 + spec.delta * x for x in _PHI_SLOPE_UNIT.breaks)
    return PiecewisePoly(b, _PHI_SLOPE_UNIT.coeffs, outside=0.0)


def build_phi(spec: PhiSpec) -> PiecewisePoly:
    """phi(z) = integral of the calibrated slope; compactly supported.

    max |phi| is about 0.14 * delta, well inside the |phi| <= delta budget.
    """
    pp = build_phi_slope(spec).antiderivative()
    zl, zr = pp.support
    if abs(pp(zr)) > 1e-12 * spec.delta or abs(pp(0.25)) > 1e-12 * spec.delta:
        raise ConstructionError("phi does not vanish at its pinned zeros")
    grid = np.linspace(zl, zr, 20001)
    m = float(np.max(np.abs(pp(grid))))
    if m > spec.delta:
        raise ConstructionError(f"max |phi| = {m} exceeds delta = {spec.delta}")
    return pp


def phi_eval(z, spec: PhiSpec):
    """(phi, phi') at z."""
    return build_phi(spec)(z), build_phi_slope(spec)(z)


# === measured derivative bound ============================================


def measured_max_abs_deriv(pp: PiecewisePoly, samples: int = 100_001) -> float:
    """Grid maximum of |pp| over its support, times a 1.01 safety factor.

    Used for the reported slope bound of the shell profile: the bound is
    measured, not assumed, and the factor keeps it above the true maximum
    for these low-degree pieces.
    """
    lo, hi = pp.support
    grid = np.linspace(lo, hi, samples)
    return float(np.max(np.abs(pp(grid)))) * 1.01
