"""Scalar algebraic toolkit: signed powers, the Bregman gap of the power
function, ramp cutoffs and their weighted integrals, exponential time
mollification, and a seeded sweep that audits the inequalities these
quantities satisfy.

All functions are pure and accept scalars or numpy arrays (broadcasting);
nothing here holds state, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad


class QuadratureConvergenceError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def _check_finite(name, a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def signed_power(a, gamma):
    """The odd map a -> |a|^(gamma-1) a, defined for gamma > 0.

    Strictly increasing, odd, and inverted by signed_power(., 1/gamma).
    """
    if not (np.isscalar(gamma) and np.isfinite(gamma) and gamma > 0):
        raise ValueError("gamma must be a positive finite scalar")
    a = _check_finite("argument of signed_power", a)
    return np.sign(a) * np.abs(a) ** gamma


#: name used by the expression grammar and older call sites
spow = signed_power


def bregman_gap(v, w, alpha):
    """Bregman gap of F(v) = |v|^(alpha+1)/(alpha+1) between v and w:

        alpha/(alpha+1) (|v|^(a+1) - |w|^(a+1)) - w (|v|^(a-1) v - |w|^(a-1) w)

    Nonnegative for all real v, w and zero iff v == w.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive")
    v = _check_finite("v", v)
    w = _check_finite("w", w)
    a1 = alpha + 1.0
    return (alpha / a1) * (np.abs(v) ** a1 - np.abs(w) ** a1) - w * (
        signed_power(v, alpha) - signed_power(w, alpha)
    )


def bregman_gap_alt(v, w, alpha):
    """Second closed form of the same gap:

        (|w|^(a+1) - |v|^(a+1))/(alpha+1) + |v|^(a-1) v (v - w)

    Kept separate so the two expressions can be cross-checked.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive")
    v = _check_finite("v", v)
    w = _check_finite("w", w)
    a1 = alpha + 1.0
    return (np.abs(w) ** a1 - np.abs(v) ** a1) / a1 + signed_power(v, alpha) * (v - w)


def ramp(s, delta):
    """Lipschitz cutoff: 0 for s <= 0, s/delta on (0, delta), 1 for s >= delta."""
    if not (np.isscalar(delta) and np.isfinite(delta) and delta > 0):
        raise ValueError("delta must be positive")
    return np.clip(np.asarray(s, dtype=float) / delta, 0.0, 1.0)


def _ramp_weight_kernel(alpha, eps):
    """Integrand weight: alpha |s|^(alpha-1), or its eps-smoothed variant

        (alpha-1)(|s|+eps)^(alpha-2)|s| + (|s|+eps)^(alpha-1),

    which is d/ds [ (|s|+eps)^(alpha-1) s ].
    """
    if eps == 0.0:
        return lambda s: alpha * np.abs(s) ** (alpha - 1.0)

    def kernel(s):
        m = np.abs(s) + eps
        return (alpha - 1.0) * m ** (alpha - 2.0) * np.abs(s) + m ** (alpha - 1.0)

    return kernel


def _quad_with_breakpoints(f, a, b, interior_points, tol):
    """scipy Gauss-Kronrod quadrature of f over [a, b], split at known kinks.

    Raises QuadratureConvergenceError when the achieved absolute error
    estimate exceeds the tolerance.
    """
    if a == b:
        return 0.0
    if a > b:
        return -_quad_with_breakpoints(f, b, a, interior_points, tol)
    pts = sorted(p for p in interior_points if a < p < b)
    val, err = quad(f, a, b, points=pts or None, epsabs=tol, epsrel=0.0, limit=200)
    if err > max(tol, 1e-13 * abs(val)) * 10.0:
        raise QuadratureConvergenceError(
            f"quadrature on [{a}, {b}] achieved tolerance {err:.3e} > {tol:.3e}",
            achieved=err,
        )
    return val


def ramp_gap(z, z0, alpha, delta, eps=0.0, tol=1e-10):
    """Ramp-weighted increment of the signed power between z0 and z:

        integral_{z0}^{z} ramp(s - z0, delta) * alpha |s|^(alpha-1) ds.

    Nonnegative; bounded above by (signed_power(z, alpha) -
    signed_power(z0, alpha))_+ and converging to that positive part as
    delta -> 0.  With eps > 0 the weight is replaced by its smoothed
    variant (used only by property tests).
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive")
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError("delta must be positive")
    z = float(_check_finite("z", z))
    z0 = float(_check_finite("z0", z0))
    if z <= z0:
        return 0.0
    kernel = _ramp_weight_kernel(alpha, eps)

    def f(s):
        return ramp(s - z0, delta) * kernel(s)

    breaks = [z0 + delta]
    if alpha < 1.0 and eps == 0.0:
        breaks.append(0.0)
    return _quad_with_breakpoints(f, z0, z, breaks, tol)


def ramp_gap_reflected(z, z0, alpha, delta, eps=0.0, tol=1e-10):
    """Odd-reflected counterpart of ramp_gap: uses -ramp(-s, delta) and is
    nonzero only for z < z0, bounded by (signed_power(z0, alpha) -
    signed_power(z, alpha))_+."""
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive")
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError("delta must be positive")
    z = float(_check_finite("z", z))
    z0 = float(_check_finite("z0", z0))
    if z >= z0:
        return 0.0
    kernel = _ramp_weight_kernel(alpha, eps)

    # reflected form: integral_z^{z0} ramp(z0 - s, delta) * weight(s) ds >= 0
    def f(s):
        return ramp(z0 - s, delta) * kernel(s)

    breaks = [z0 - delta]
    if alpha < 1.0 and eps == 0.0:
        breaks.append(0.0)
    return _quad_with_breakpoints(f, z, z0, breaks, tol)


def smoothed_energy_density(u, alpha, eps, tol=1e-10):
    """Primitive of alpha (|s|+eps)^(alpha-1) s from 0 to u, elementwise.

    This is the energy density whose time derivative the regularized
    scheme controls; it is even in u and nonnegative.
    """
    if not (np.isfinite(eps) and eps > 0):
        raise ValueError("eps must be positive")

    def one(val):
        return _quad_with_breakpoints(
            lambda s: alpha * (np.abs(s) + eps) ** (alpha - 1.0) * s,
            0.0,
            float(val),
            [0.0],
            tol,
        )

    u = _check_finite("u", u)
    if np.isscalar(u) or u.ndim == 0:
        return one(float(u))
    return np.array([one(val) for val in np.ravel(u)]).reshape(u.shape)


def smoothed_power(u, alpha, eps, tol=1e-10):
    """Primitive of alpha (|s|+eps)^(alpha-1) from 0 to u, elementwise.

    An odd, smoothed stand-in for signed_power(u, alpha); the two differ
    by at most O(eps^min(alpha,1)) terms.
    """
    if not (np.isfinite(eps) and eps > 0):
        raise ValueError("eps must be positive")

    def one(val):
        return _quad_with_breakpoints(
            lambda s: alpha * (np.abs(s) + eps) ** (alpha - 1.0),
            0.0,
            float(val),
            [0.0],
            tol,
        )

    u = _check_finite("u", u)
    if np.isscalar(u) or u.ndim == 0:
        return one(float(u))
    return np.array([one(val) for val in np.ravel(u)]).reshape(u.shape)


@dataclass(frozen=True)
class TimeSeries:
    """Samples of a scalar or vector signal on a strictly increasing grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must be a 1-d array with at least two samples")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if times[0] < 0:
            raise ValueError("times must be nonnegative")
        if values.shape[0] != times.size:
            raise ValueError("values must have one row per time sample")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("times and values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def _segment_coefficients(dt, h):
    """Per-segment update weights for the exact exponential recurrence on a
    piecewise-linear signal.

    Returns (E, c_near, c_far): E = exp(-dt/h) propagates the previous
    mollified value, c_far weights the sample nearer the evaluation point
    and c_near the other endpoint; c_near + c_far = 1 - E.
    """
    r = dt / h
    E = np.exp(-r)
    one = -np.expm1(-r)  # 1 - E, stable for small r
    small = r < 1e-4
    # c_near = (1-E)/r - E, series r/2 - r^2/3 + r^3/8 guards cancellation
    with np.errstate(invalid="ignore", divide="ignore"):
        c_near = np.where(small, r / 2.0 - r**2 / 3.0 + r**3 / 8.0, one / r - E)
    c_far = one - c_near
    return E, c_near, c_far


def exp_mollify(series: TimeSeries, h: float, reversed: bool = False) -> TimeSeries:
    """Exponential time mollification of a sampled signal.

    Forward form: (1/h) * integral_0^t exp((s-t)/h) v(s) ds, evaluated
    exactly for the piecewise-linear reconstruction of the samples.  The
    reversed flag integrates over [t, T] with kernel exp((t-s)/h) instead.
    The result contracts every discrete l^p norm and obeys the derivative
    identity d/dt v_h = (v - v_h)/h (reversed: (v_h - v)/h).
    """
    if not (np.isfinite(h) and h > 0):
        raise ValueError("h must be positive")
    times = series.times
    values = series.values
    dts = np.diff(times)
    E, c_near, c_far = _segment_coefficients(dts, h)
    out = np.zeros_like(values)
    if not reversed:
        for k in range(len(dts)):
            out[k + 1] = E[k] * out[k] + c_near[k] * values[k] + c_far[k] * values[k + 1]
    else:
        for k in range(len(dts) - 1, -1, -1):
            out[k] = E[k] * out[k + 1] + c_near[k] * values[k + 1] + c_far[k] * values[k]
    return TimeSeries(times, out)


# --- inequality sweep -------------------------------------------------------

#: normalized slack allowed for inequalities that hold with an exact constant
EXACT_SLACK = 1e-12


@dataclass(frozen=True)
class LemmaCheck:
    """Outcome of one inequality audit over the sampled pairs."""

    lemma_id: str
    alpha: float
    samples: int
    worst_ratio: float
    passed: bool
    exact: bool = field(default=False)


@dataclass(frozen=True)
class SweepReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows(self):
        for c in self.checks:
            yield (c.lemma_id, c.alpha, c.samples, c.worst_ratio, c.passed)


def _sample_signed_logu(rng, count):
    mag = 10.0 ** rng.uniform(-6.0, 6.0, size=count)
    sign = rng.choice([-1.0, 1.0], size=count)
    return sign * mag


def _ratio(num, den):
    """Worst-case num/den over samples; inf when den vanishes but num does not."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    both_zero = (num == 0.0) & (den == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(both_zero, 0.0, num / den)
    r = np.where((den == 0.0) & ~both_zero, np.inf, r)
    return float(np.max(r)) if r.size else 0.0


def inequality_sweep(alpha: float, sample_count: int, seed: int) -> SweepReport:
    """Audit the algebraic inequalities for one exponent over seeded samples.

    Pairs are drawn with log-uniform magnitude in [1e-6, 1e6] and random
    sign.  Inequalities with an explicit constant are checked against a
    normalized slack of 1e-12; inequalities that only assert the existence
    of a constant are reported through their worst empirical ratio, which
    must be finite.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError("alpha must be positive")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    v = _sample_signed_logu(rng, sample_count)
    w = _sample_signed_logu(rng, sample_count)

    a1 = alpha + 1.0
    pv, pw = signed_power(v, alpha), signed_power(w, alpha)
    gap_vw = bregman_gap(v, w, alpha)
    gap_wv = bregman_gap(w, v, alpha)
    pairing = (pv - pw) * (v - w)
    absv, absw = np.abs(v), np.abs(w)
    checks = []

    def exact_check(lemma_id, violation, scale):
        worst = _ratio(violation, scale)
        checks.append(
            LemmaCheck(lemma_id, alpha, sample_count, worst, worst <= EXACT_SLACK, True)
        )

    def ratio_check(lemma_id, num, den):
        worst = _ratio(num, den)
        checks.append(
            LemmaCheck(lemma_id, alpha, sample_count, worst, bool(np.isfinite(worst)))
        )

    # (|v|^(a-1)v - |w|^(a-1)w) v >= a/(a+1) (|v|^(a+1) - |w|^(a+1)), exact
    lhs = (pv - pw) * v
    rhs = (alpha / a1) * (absv**a1 - absw**a1)
    scale = np.abs(lhs) + np.abs(rhs) + absv**a1 + absw**a1
    exact_check("power_mono_lower", rhs - lhs, scale)

    # gap >= 0
    gap_scale = absv**a1 + absw**a1 + np.finfo(float).tiny
    exact_check("gap_nonneg", -gap_vw, gap_scale)

    # gap[v,w] <= pairing, exact (their difference is gap[w,v] >= 0)
    exact_check("gap_upper_by_pairing", gap_vw - pairing, gap_scale + np.abs(pairing))

    # pairing - gap[v,w] - gap[w,v] == 0, exact identity
    exact_check(
        "gap_pairing_identity",
        np.abs(pairing - gap_vw - gap_wv),
        gap_scale + np.abs(pairing),
    )

    # two closed forms of the gap agree
    exact_check(
        "gap_closed_forms_agree",
        np.abs(gap_vw - bregman_gap_alt(v, w, alpha)),
        gap_scale + np.abs(pairing),
    )

    # |s_half(v) - s_half(w)|^2 <= c gap, with s_half the (a+1)/2 signed power
    half = (alpha + 1.0) / 2.0
    ratio_check(
        "half_power_sq_vs_gap",
        np.abs(signed_power(v, half) - signed_power(w, half)) ** 2,
        gap_vw,
    )

    # |a-b|^gamma <= c |signed_power(a,gamma) - signed_power(b,gamma)|, gamma = a+1
    ratio_check(
        "power_diff_dominates",
        np.abs(v - w) ** a1,
        np.abs(signed_power(v, a1) - signed_power(w, a1)),
    )

    if alpha < 1.0:
        # |v-w| <= c |pv-pw| (|v|^(1-a) + |w|^(1-a))
        ratio_check(
            "inverse_power_diff",
            np.abs(v - w),
            np.abs(pv - pw) * (absv ** (1.0 - alpha) + absw ** (1.0 - alpha)),
        )
        weighted_sq = (absv + absw) ** (alpha - 1.0) * (v - w) ** 2
        ratio_check("weighted_sq_vs_gap", weighted_sq, gap_vw)
        ratio_check("gap_vs_weighted_sq", gap_vw, weighted_sq)
        ratio_check("gap_vs_diff_power", gap_vw, np.abs(v - w) ** a1)
        ratio_check(
            "powerdiff_conjugate_vs_gap", np.abs(pv - pw) ** (a1 / alpha), gap_vw
        )
    if alpha >= 1.0:
        ratio_check(
            "gap_vs_powerdiff_conjugate", gap_vw, np.abs(pv - pw) ** (a1 / alpha)
        )
        ratio_check("diff_power_vs_gap", np.abs(v - w) ** a1, gap_vw)
        ratio_check("diff_power_vs_pairing", np.abs(v - w) ** a1, pairing)

    return SweepReport(checks)
