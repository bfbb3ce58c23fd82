"""Compactly supported orthonormal wavelets and their fractional companions.

The mother wavelet comes from the classic minimal-phase filter family with a
chosen number of vanishing moments; samples on a dyadic grid are produced by
the exact two-scale recursion, so refining the grid never changes values at
points already computed.  Fractional primitives/derivatives are built in the
Fourier domain with a phase-and-power multiplier and then scaled to agree
with the one-sided convolution definitions, so downstream pairings have
well-defined constants.
"""

import functools
import math
import warnings

import numpy as np
from scipy.fft import next_fast_len
from scipy.integrate import trapezoid

from .errors import (ConfigError, ParameterError, QuadratureError,
                     RegimeError, UnsupportedOrderError, WindowError)

_MAX_ORDER = 20


@functools.lru_cache(maxsize=32)
def daubechies_filter(p):
    """Orthonormal scaling filter with p vanishing moments (length 2p).

    Spectral factorization of the half-band polynomial, done in extended
    precision so orders up to 20 keep clean coefficients.  Normalized so the
    coefficients sum to sqrt(2) and their squares sum to 1.
    """
    if p < 1:
        raise UnsupportedOrderError("vanishing_moments must be >= 1")
    if p > _MAX_ORDER:
        raise UnsupportedOrderError(
            f"vanishing_moments above {_MAX_ORDER} not supported")
    if p == 1:
        v = 1.0 / math.sqrt(2.0)
        return np.array([v, v])
    from mpmath import mp, binomial, mpc, mpf, polyroots

    with mp.workdps(60 + 3 * p):
        # Laurent expansion of sum_k C(p-1+k, k) y^k with y = (2 - z - 1/z)/4
        total = {}
        ypow = {0: mpf(1)}
        for k in range(p):
            c = binomial(p - 1 + k, k)
            for e, v in ypow.items():
                total[e] = total.get(e, mpf(0)) + c * v
            nxt = {}
            for e, v in ypow.items():
                nxt[e - 1] = nxt.get(e - 1, mpf(0)) - v / 4
                nxt[e] = nxt.get(e, mpf(0)) + v / 2
                nxt[e + 1] = nxt.get(e + 1, mpf(0)) - v / 4
            ypow = nxt
        deg = p - 1
        poly = [total.get(e, mpf(0)) for e in range(deg, -deg - 1, -1)]
        roots = polyroots(poly, maxsteps=500, extraprec=300)
        inside = [r for r in roots if abs(r) < 1]
        # expand prod (z - r) over the minimal-phase roots
        coeffs = [mpc(1)]
        for r in inside:
            nxt = [mpc(0)] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                nxt[i] += c
                nxt[i + 1] -= c * r
            coeffs = nxt
        # multiply by (1+z)^p / 2^p
        for _ in range(p):
            nxt = [mpc(0)] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                nxt[i] += c / 2
                nxt[i + 1] += c / 2
            coeffs = nxt
        vals = np.array([float(c.real) for c in coeffs][::-1])
    h = vals * (math.sqrt(2.0) / vals.sum())
    if abs(h @ h - 1.0) > 1e-10:
        raise QuadratureError(
            f"filter factorization for order {p} lost orthonormality")
    if abs(h[0]) < abs(h[-1]):
        h = h[::-1].copy()  # canonical minimal-phase ordering, big taps first
    return h


def _scaling_values(h, level):
    """Samples of the scaling function on [0, 2p-1] at spacing 2^-level."""
    p = h.size // 2
    if p == 1:
        n = (1 << level) + 1
        v = np.ones(n)
        v[-1] = 0.0
        return v
    width = 2 * p - 1
    # values at the integers: unit eigenvector of the two-scale matrix
    interior = np.arange(1, width)
    A = np.zeros((interior.size, interior.size))
    for a, i in enumerate(interior):
        for b, j in enumerate(interior):
            k = 2 * i - j
            if 0 <= k < h.size:
                A[a, b] = math.sqrt(2.0) * h[k]
    w, vec = np.linalg.eig(A)
    idx = int(np.argmin(np.abs(w - 1.0)))
    phi = np.real(vec[:, idx])
    phi = phi / phi.sum()
    v = np.zeros(width + 1)
    v[1:width] = phi
    for j in range(level):
        step = 1 << j
        cur_len = width * step + 1
        nxt = np.zeros(width * 2 * step + 1)
        for k in range(h.size):
            lo = k * step
            nxt[lo:lo + cur_len] += math.sqrt(2.0) * h[k] * v[:cur_len]
        v = nxt
    return v


class MotherWavelet:
    """Sampled wavelet on a dyadic grid over [-(p-1), p].

    The support is an integer translate of the raw two-scale support, which
    keeps dilates and integer translates of the table mutually orthogonal
    across scales; a fractional recentering would quietly break that.
    """

    def __init__(self, vanishing_moments, refinement_level, values):
        self.vanishing_moments = vanishing_moments
        self.refinement_level = refinement_level
        self.spacing = 2.0 ** -refinement_level
        self.support_left = -(vanishing_moments - 1.0)
        self.support_right = float(vanishing_moments)
        self.support_halfwidth = max(-self.support_left, self.support_right)
        # normalize the discrete energy exactly; for rough low-order
        # wavelets the plain Riemann sum is otherwise off by ~1e-5
        values = values / math.sqrt(np.sum(values ** 2) * self.spacing)
        self.values = values
        self.x = np.arange(values.size) * self.spacing + self.support_left

    def evaluate(self, x):
        """Linear interpolation of the table; zero outside the support."""
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def integral(self, order=0):
        return float(np.sum(self.x ** order * self.values) * self.spacing
                     if order else np.sum(self.values) * self.spacing)

    def l2_norm_sq(self):
        return float(np.sum(self.values ** 2) * self.spacing)

    def lalpha_norm(self, alpha):
        return float((np.sum(np.abs(self.values) ** alpha) * self.spacing)
                     ** (1.0 / alpha))


@functools.lru_cache(maxsize=16)
def build_daubechies(vanishing_moments, refinement_level=10):
    """Mother wavelet with the requested vanishing moments, sampled at 2^-r.

    Order 1 is the square wave (+1 then -1 over a unit interval); higher
    orders come out of the exact two-scale recursion.
    """
    if refinement_level < 6:
        raise ParameterError("refinement_level must be >= 6")
    p = int(vanishing_moments)
    h = daubechies_filter(p)
    r = refinement_level
    if p == 1:
        n = (1 << r) + 1
        half = 1 << (r - 1)
        vals = np.zeros(n)
        vals[:half] = 1.0
        vals[half:-1] = -1.0
        return MotherWavelet(p, r, vals)
    g = ((-1.0) ** np.arange(h.size)) * h[::-1]
    phi = _scaling_values(h, r - 1)
    width = 2 * p - 1
    step = 1 << (r - 1)
    out = np.zeros(width * 2 * step + 1)
    cur_len = phi.size
    for k in range(g.size):
        lo = k * step
        out[lo:lo + cur_len] += math.sqrt(2.0) * g[k] * phi
    return MotherWavelet(p, r, out)


class FractionalWavelet:
    """Fractional primitive or derivative of a mother wavelet on [-W, W]."""

    def __init__(self, base, exponent, alpha, direction, window, values):
        self.base = base
        self.exponent = exponent
        self.alpha = alpha
        self.direction = direction
        self.window = window
        self.spacing = base.spacing
        self.values = values
        self.x = np.arange(values.size) * self.spacing - window
        self.mass = float(np.sum(np.abs(values)) * self.spacing)
        self.decay_constant = check_localization(self)

    def evaluate(self, x):
        """Linear interpolation of the table; zero outside the window."""
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def integral(self):
        return float(np.sum(self.values) * self.spacing)


def _derivative_samples(values, spacing):
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * spacing)
    d[0] = (values[1] - values[0]) / spacing
    d[-1] = (values[-1] - values[-2]) / spacing
    return d


def check_localization(fw):
    """sup over the window of (1+|x|)^2 (|phi| + |phi'|), finite differences."""
    d = _derivative_samples(fw.values, fw.spacing)
    weight = (1.0 + np.abs(fw.x)) ** 2
    return float(np.max(weight * (np.abs(fw.values) + np.abs(d))))


def fractionalize(psi, exponent, alpha, direction, window=None):
    """Build the fractional companion of order exponent + 1 - 1/alpha.

    direction 'primitive' smooths (negative power of frequency), 'derivative'
    roughens (positive power).  Both get the one-sided phase and are scaled
    to match the corresponding convolution kernels exactly, so the pairing
    of a primitive with a derivative has unit constant.
    """
    if direction not in ("primitive", "derivative"):
        raise ParameterError(f"unknown direction {direction!r}")
    g = exponent - 1.0 / alpha
    if not 0.0 < g < 1.0:
        raise RegimeError(
            f"need exponent - 1/alpha in (0, 1), got {g} "
            f"(exponent={exponent}, alpha={alpha})")
    if psi.vanishing_moments < 3:
        warnings.warn("fewer than 3 vanishing moments: localization of the "
                      "fractional companion is not guaranteed", RuntimeWarning)
    a = g + 1.0
    h = psi.spacing
    if window is None:
        window = 64.0 * psi.support_halfwidth
    need = max(-psi.support_left, psi.support_right)
    if window < need:
        raise WindowError(
            f"window {window:g} cannot contain the mother support "
            f"[{psi.support_left:g}, {psi.support_right:g}]",
            suggested_window=64.0 * psi.support_halfwidth)
    half = int(math.ceil(window / h))
    window = half * h
    n = next_fast_len(2 * half + 1)
    buf = np.zeros(n)
    # place psi circularly with x = 0 at index 0
    idx = (np.round(psi.x / h).astype(np.int64)) % n
    buf[idx] = psi.values
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    power = -a if direction == "primitive" else a
    with np.errstate(divide="ignore"):
        mag = np.abs(xi) ** power
    mag[0] = 0.0
    mult = mag * np.exp(-1j * np.sign(xi) * a * np.pi / 2.0)
    out = np.fft.ifft(np.fft.fft(buf) * mult)
    if np.max(np.abs(out.imag)) > 1e-9 * max(np.max(np.abs(out.real)), 1e-30):
        raise QuadratureError("fractional transform produced a non-real "
                              "result; grid too coarse")
    const = math.gamma(a) if direction == "primitive" else math.gamma(2.0 - a)
    vals = out.real * const
    # reorder circular buffer onto the centered grid
    grid_idx = (np.arange(-half, half + 1)) % n
    fw = FractionalWavelet(psi, exponent, alpha, direction, window,
                           vals[grid_idx].copy())
    if psi.vanishing_moments >= 3:
        omitted, suggested = _tail_mass_estimate(fw)
        if omitted > 1e-3 * (fw.mass + omitted):
            raise WindowError(
                f"window {window:g} leaves an estimated {omitted:g} of |phi| "
                f"mass outside (in-window mass {fw.mass:g})",
                suggested_window=suggested)
    return fw


def _tail_mass_estimate(fw):
    """Extrapolate |phi| mass beyond the window from a power fit on the
    outer half, assuming |phi| ~ C (1+|x|)^-q out there."""
    outer = np.abs(fw.x) >= fw.window / 2.0
    r = np.abs(fw.values[outer]) + 1e-300
    lx = np.log1p(np.abs(fw.x[outer]))
    slope, intercept = np.polyfit(lx, np.log(r), 1)
    q, C = -slope, math.exp(intercept)
    target = 1e-3 * fw.mass
    if q <= 1.0:
        return math.inf, 128.0 * fw.base.support_halfwidth
    omitted = 2.0 * C * (1.0 + fw.window) ** (1.0 - q) / (q - 1.0)
    suggested = (2.0 * C / ((q - 1.0) * target)) ** (1.0 / (q - 1.0)) - 1.0
    return omitted, max(suggested, fw.window)


@functools.lru_cache(maxsize=64)
def fractional_pair(vanishing_moments, refinement_level, exponent, alpha,
                    window=None):
    """Cached (primitive, derivative) pair for one axis exponent."""
    psi = build_daubechies(vanishing_moments, refinement_level)
    prim = fractionalize(psi, exponent, alpha, "primitive", window)
    deriv = fractionalize(psi, exponent, alpha, "derivative", window)
    return prim, deriv


def window_stability(psi, exponent, alpha, direction, window):
    """Localization value at W and 2W plus the relative change."""
    f1 = fractionalize(psi, exponent, alpha, direction, window)
    f2 = fractionalize(psi, exponent, alpha, direction, 2.0 * window)
    v1, v2 = f1.decay_constant, f2.decay_constant
    return v1, v2, abs(v2 - v1) / max(v1, 1e-300)


def _compatible(a, b):
    return (a.base is b.base or
            (a.base.vanishing_moments == b.base.vanishing_moments
             and a.base.refinement_level == b.base.refinement_level)) \
        and a.exponent == b.exponent and a.alpha == b.alpha


def biorth_inner(a, b, J, K, J2, K2):
    """Quadrature of int a(2^J x - K) b(2^J2 x - K2) dx.

    a must be a primitive and b a derivative of the same mother/exponent;
    on the diagonal (J = J2, K = K2) the value is the pairing constant times
    2^-J, off the diagonal it vanishes.
    """
    if a.direction != "primitive" or b.direction != "derivative":
        raise ConfigError("need (primitive, derivative) in that order")
    if not _compatible(a, b):
        raise ConfigError("mismatched mother wavelet, exponent, or alpha")
    lo = max((-a.window + K) / 2.0 ** J, (-b.window + K2) / 2.0 ** J2)
    hi = min((a.window + K) / 2.0 ** J, (b.window + K2) / 2.0 ** J2)
    if hi <= lo:
        return 0.0
    dx = a.spacing / 2.0 ** max(J, J2, 0)
    x = np.arange(lo, hi + dx, dx)
    vals = a.evaluate(2.0 ** J * x - K) * b.evaluate(2.0 ** J2 * x - K2)
    return float(trapezoid(vals, dx=dx))
