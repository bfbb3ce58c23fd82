"""Closed-form quantities of the sheet's law: kernel, normalization, increments, dimensions.

The moving-average kernel factorizes over axes, with per-axis exponent
g_l = H_l - 1/alpha.  kappa normalizes the field so the scale parameter at
the all-ones corner is exactly 1, which in turn makes every rectangle's
increment scale the plain product of side lengths to the H powers.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import OrderingError, ParameterError, QuadratureError, RegimeError


@dataclass(frozen=True)
class HurstVector:
    """Admissible exponent vector: 1/alpha < H_1 <= ... <= H_N < 1."""

    alpha: float
    H: tuple

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ParameterError(f"alpha must be in (0, 2], got {self.alpha}")
        H = tuple(float(h) for h in (self.H if hasattr(self.H, "__len__") else (self.H,)))
        if len(H) == 0:
            raise ParameterError("H must have at least one entry")
        object.__setattr__(self, "H", H)
        if any(H[i] > H[i + 1] for i in range(len(H) - 1)):
            raise OrderingError(f"H entries must be nondecreasing, got {H}")
        if not all(1.0 / self.alpha < h < 1.0 for h in H):
            raise RegimeError(
                f"need 1/alpha < H_l < 1 for every l (alpha={self.alpha}, H={H})")

    @property
    def N(self):
        return len(self.H)

    @property
    def g(self):
        """Per-axis kernel exponents H_l - 1/alpha, each in (0, 1 - 1/alpha)."""
        return tuple(h - 1.0 / self.alpha for h in self.H)


def powplus(x, g):
    """x_+^g elementwise; the zero-exponent case is the indicator of x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if g == 0.0:
        return np.where(x > 0.0, 1.0, 0.0)
    out = np.zeros_like(x)
    pos = x > 0.0
    np.power(x, g, out=out, where=pos)
    return out


def kernel_factor(t, s, g):
    """One axis factor (t-s)_+^g - (-s)_+^g, safe against far-tail cancellation.

    For s << 0 the two powers agree to many digits; rewriting the difference
    through expm1/log1p keeps full relative accuracy out to any radius.
    """
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64).item()
    if g == 0.0:
        return np.where(s < t, 1.0, 0.0) - np.where(s < 0.0, 1.0, 0.0)
    out = np.zeros_like(s)
    inner = (s >= 0.0) & (s < t)
    if inner.any():
        np.power(t - s, g, out=out, where=inner)
    neg = s < 0.0
    if neg.any():
        u = -s[neg]
        both = t > -u
        vals = np.zeros_like(u)
        if both.any():
            ub = u[both]
            vals[both] = ub ** g * np.expm1(g * np.log1p(t / ub))
        if (~both).any():
            vals[~both] = -u[~both] ** g
        out[neg] = vals
    return out


@functools.lru_cache(maxsize=256)
def unit_integral(g, alpha):
    """I(g) = int |(1-s)_+^g - (-s)_+^g|^alpha ds over the real line.

    The [0,1] piece is analytic; the negative half uses adaptive quadrature
    with the cancellation-free difference form.
    """
    if g < 0.0:
        raise RegimeError(f"kernel exponent must be >= 0, got {g}")
    if g >= 1.0:
        raise RegimeError(f"kernel exponent must be < 1, got {g}")
    core = 1.0 / (1.0 + g * alpha)
    if g == 0.0:
        return core

    def integrand(u):
        return (u ** g * math.expm1(g * math.log1p(1.0 / u))) ** alpha

    near, err1 = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=200)
    far, err2 = quad(integrand, 1.0, np.inf, epsabs=1e-14, epsrel=1e-10, limit=200)
    total = core + near + far
    if err1 + err2 > 1e-6 * total:
        raise QuadratureError(f"kernel norm quadrature unreliable for g={g}")
    return total


def normalize_kappa(H, alpha, rel_tol=1e-8):
    """Normalizing constant: product over axes of I(g_l)^(-1/alpha).

    Accepts the regime boundary H_l = 1/alpha (indicator kernel, kappa
    factor 1) so the classical-sheet corner can be evaluated as a formula.
    """
    H = np.atleast_1d(np.asarray(H, dtype=np.float64))
    kappa = 1.0
    for h in H:
        g = h - 1.0 / alpha
        if g < -1e-12:
            raise RegimeError(f"H={h} below 1/alpha={1.0/alpha}")
        kappa *= unit_integral(max(g, 0.0), alpha) ** (-1.0 / alpha)
    # rel_tol kept for interface stability; the adaptive quadrature above is
    # already tighter than any tolerance callers ask for
    del rel_tol
    return float(kappa)


@dataclass(frozen=True)
class KernelSpec:
    """Hurst vector plus its cached normalization."""

    hurst: HurstVector
    kappa: float

    @staticmethod
    @functools.lru_cache(maxsize=64)
    def for_hurst(hurst):
        return KernelSpec(hurst, normalize_kappa(hurst.H, hurst.alpha))


def kernel_h(t, s, spec):
    """Moving-average kernel h(t, s) = kappa * prod_l kernel_factor(t_l, s_l, g_l).

    s may be a single point (N,) or an array (..., N); the product is taken
    over the trailing axis.
    """
    hv = spec.hurst
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    s = np.asarray(s, dtype=np.float64)
    single = s.ndim == 1
    pts = s.reshape(-1, hv.N)
    out = np.full(pts.shape[0], spec.kappa)
    for l, g in enumerate(hv.g):
        out *= kernel_factor(t[l], pts[:, l], g)
    if single:
        return float(out[0])
    return out.reshape(s.shape[:-1])


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box with strictly positive side lengths."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        up = tuple(float(v) for v in self.upper)
        if len(lo) != len(up):
            raise ParameterError("lower/upper dimension mismatch")
        if any(u <= l for l, u in zip(lo, up)):
            raise ParameterError(f"degenerate rectangle: lower={lo}, upper={up}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def N(self):
        return len(self.lower)

    @property
    def sides(self):
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    def vertices(self):
        """All 2^N corners keyed by their 0/1 selector."""
        out = {}
        for m in range(1 << self.N):
            delta = tuple((m >> j) & 1 for j in range(self.N))
            out[delta] = tuple(self.upper[j] if delta[j] else self.lower[j]
                               for j in range(self.N))
        return out


def increment_scale(rect, hurst):
    """Scale parameter of the rectangular increment: prod (t_j - s_j)^{H_j}."""
    H = hurst.H if isinstance(hurst, HurstVector) else tuple(hurst)
    if rect.N != len(H):
        raise ParameterError("rectangle and Hurst vector dimensions differ")
    return float(np.prod([side ** h for side, h in zip(rect.sides, H)]))


def rectangular_increment(values):
    """Signed vertex sum of a field over a box.

    values maps each 0/1 selector tuple to the field value at that corner;
    the sign is (-1)^(N - sum(delta)), so for N = 2 this is
    X(t) - X(t_1, s_2) - X(s_1, t_2) + X(s).
    """
    if not values:
        raise ParameterError("empty vertex map")
    N = len(next(iter(values)))
    if len(values) != 1 << N:
        raise ParameterError(f"need all {1 << N} vertices, got {len(values)}")
    total = 0.0
    for m in range(1 << N):
        delta = tuple((m >> j) & 1 for j in range(N))
        if delta not in values:
            raise ParameterError(f"missing vertex {delta}")
        total += (-1) ** (N - sum(delta)) * values[delta]
    return float(total)


def rho_metric(s, t, hurst):
    """Anisotropic distance sum |s_j - t_j|^{H_j}."""
    H = hurst.H if isinstance(hurst, HurstVector) else tuple(hurst)
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if s.shape[-1] != len(H):
        raise ParameterError("point dimension does not match Hurst vector")
    return np.sum(np.abs(s - t) ** np.asarray(H), axis=-1)


def _check_dims_input(hurst):
    H = np.asarray(hurst.H if isinstance(hurst, HurstVector) else hurst,
                   dtype=np.float64)
    if H.ndim != 1 or H.size == 0:
        raise ParameterError("H must be a nonempty vector")
    if np.any(H <= 0.0) or np.any(H >= 1.0):
        raise ParameterError(f"H entries must lie in (0, 1), got {H}")
    if np.any(np.diff(H) < 0.0):
        raise OrderingError(f"H entries must be nondecreasing, got {H}")
    return H


def hausdorff_dims(hurst, d):
    """Closed-form dimensions: range, graph, and the unit cube under rho.

    Returns a dict with keys 'range', 'graph', 'rho_cube'.  The graph value
    follows the piecewise formula whose branch is selected by where d falls
    among the partial sums of 1/H_l; branches join continuously.
    """
    H = _check_dims_input(hurst)
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    d = int(d)
    N = H.size
    inv = 1.0 / H
    total = float(inv.sum())
    dim_range = min(float(d), total)
    if total <= d:
        dim_graph = total
    else:
        csum = np.concatenate([[0.0], np.cumsum(inv)])
        k = int(np.searchsorted(csum, d, side="right"))  # csum[k-1] <= d < csum[k]
        Hk = H[k - 1]
        dim_graph = float(np.sum(Hk / H[:k]) + (N - k) + (1.0 - Hk) * d)
    return {"range": dim_range, "graph": dim_graph, "rho_cube": total}


def graph_dim_candidates(hurst, d):
    """All competing graph-dimension expressions; the closed form is their min."""
    H = _check_dims_input(hurst)
    N = H.size
    out = [float(np.sum(1.0 / H))] if np.sum(1.0 / H) <= d else []
    for k in range(1, N + 1):
        Hk = H[k - 1]
        out.append(float(np.sum(Hk / H[:k]) + (N - k) + (1.0 - Hk) * d))
    return out


def required_tail_extent(g, alpha, t_max, tol):
    """One-sided noise radius so the omitted kernel tail mass stays below tol.

    Past radius R the axis kernel behaves like g*t*u^(g-1); integrating its
    alpha power and comparing with the full axis integral gives a closed-form
    radius.  The asymptotics need R to dominate t, hence the floor.
    """
    if g <= 0.0:
        return max(4.0 * abs(t_max), 4.0)
    q = (1.0 - g) * alpha - 1.0
    if q <= 0.0:
        raise RegimeError("tail exponent not integrable; check H < 1")
    t = max(abs(t_max), 1e-3)
    total = t ** (g * alpha + 1.0) * unit_integral(g, alpha)
    R = ((g * t) ** alpha / (tol * q * total)) ** (1.0 / q)
    return float(max(R, 4.0 * t, 4.0))
