"""Estimators that confront simulated fields with the theory.

Path regularity exponents from transect increments, two-sided increment
bounds, sup-moment stability, box-counting dimensions of point clouds, the
logarithmic growth envelope, and a permutation independence test for
coefficient lattices.  Estimators are pure functions of immutable field
samples; medians and order statistics are preferred over means because the
fields have heavy tails.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (InsufficientDataError, ParameterError, ResolutionError,
                     ScaleRangeError)
from .stable_rng import estimate_scale

_MIN_TRANSECT = 1 << 12
_MIN_CLOUD = 50_000


@dataclass(frozen=True)
class ExponentReport:
    axis: int
    estimated_exponent: float
    stderr: float
    lag_range: tuple
    theory: float
    statistic: str

    def __post_init__(self):
        lo, hi = self.lag_range
        if hi / lo < 10.0 ** 1.5:
            raise ParameterError(
                f"lag range [{lo:g}, {hi:g}] spans less than 1.5 decades")


@dataclass(frozen=True)
class DimensionReport:
    target: str
    estimate: float
    theory: float
    box_scales: tuple
    counts: tuple

    def __post_init__(self):
        if len(self.box_scales) < 5:
            raise ParameterError("need at least 5 box scales")
        if max(self.box_scales) / min(self.box_scales) < 4.0:
            raise ParameterError("box scales must span at least 2 octaves")


def report_dict(name, estimate, theory, tolerance):
    """The serialization row used by every verification suite."""
    est, th = float(estimate), float(theory)
    ok = bool(abs(est - th) <= tolerance) if math.isfinite(est) else False
    return {"name": name, "estimate": est, "theory": th,
            "tolerance": float(tolerance), "pass": ok}


def _fit_loglog(x, y):
    lx, ly = np.log(x), np.log(y)
    k = lx.size
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    denom = float(np.sum((lx - lx.mean()) ** 2))
    dof = max(k - 2, 1)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / denom)
    return float(slope), stderr


def _transect(field):
    varying = [l for l in range(field.ndim)
               if np.ptp(field.grid[:, l]) > 0.0]
    if len(varying) != 1:
        raise ParameterError("field must vary along exactly one axis")
    axis = varying[0]
    fixed = np.delete(field.grid[0], axis)
    if np.any(fixed == 0.0):
        raise ParameterError(
            "transect must fix the other coordinates away from zero")
    s = field.grid[:, axis]
    ds = np.diff(s)
    if np.any(ds <= 0.0) or np.any(np.abs(ds - ds[0]) > 1e-9 * ds[0]):
        raise ParameterError("transect must be increasing and uniform")
    return axis, float(ds[0])


def empirical_axis_exponent(field, lags, statistic="median"):
    """Scaling exponent of transect increments against the lag.

    statistic 'median' regresses the median over positions of the absolute
    increment (stable against heavy tails; its slope tracks the marginal
    scale exponent H_n).  statistic 'sup' regresses the largest absolute
    increment over all positions: the count of independent spans grows as
    the lag shrinks, and for alpha < 2 the maximum picks up that count to
    the power 1/alpha, lowering the slope to the pathwise regularity
    exponent H_n - 1/alpha.  Keep the lags well below the transect length
    or the leftover max-stable fluctuations bias the fit.  The report's
    theory field always carries H_n - 1/alpha.
    """
    if statistic not in ("median", "sup"):
        raise ParameterError(f"unknown statistic {statistic!r}")
    axis, step = _transect(field)
    x = field.column()
    if x.size < _MIN_TRANSECT:
        raise ResolutionError(
            f"transect has {x.size} points, need {_MIN_TRANSECT}")
    lag_list = sorted(float(l) for l in lags)
    if len(lag_list) < 3:
        raise ParameterError("need at least 3 lags")
    stats, used = [], []
    for lag in lag_list:
        m = int(round(lag / step))
        if m < 1 or m >= x.size:
            raise ParameterError(f"lag {lag:g} outside the transect")
        d = np.abs(x[m:] - x[:-m])
        v = float(np.median(d) if statistic == "median" else d.max())
        stats.append(v)
        used.append(m * step)
    stats = np.array(stats)
    if np.any(stats <= 0.0):
        raise InsufficientDataError(
            "degenerate increments, regression impossible")
    slope, stderr = _fit_loglog(np.array(used), stats)
    hurst = field.provenance["H"]
    alpha = field.provenance["alpha"]
    theory = float(hurst[axis]) - 1.0 / float(alpha)
    return ExponentReport(axis, slope, stderr, (used[0], used[-1]), theory,
                          statistic)


def _locate(field, point):
    hit = np.nonzero(np.all(field.grid == np.asarray(point, dtype=np.float64),
                            axis=1))[0]
    if hit.size == 0:
        raise ParameterError(f"point {tuple(point)} not on the field grid")
    return int(hit[0])


def check_increment_bounds(fields, pairs, spec):
    """Scale of X(s) - X(t) against the sum of per-axis moduli.

    All replicate fields must share one grid containing every pair point.
    Returns per-pair ratios plus their min, max and spread; for N = 1 the
    comparison holds as an equality so the spread collapses to 1.
    """
    if len(fields) < 200:
        raise InsufficientDataError(
            f"need at least 200 replicates, got {len(fields)}")
    hv = spec.hurst
    ratios = []
    for s, t in pairs:
        sa = np.asarray(s, dtype=np.float64)
        ta = np.asarray(t, dtype=np.float64)
        if np.array_equal(sa, ta):
            raise ParameterError("pair with s = t has an undefined ratio")
        for q in (sa, ta):
            if np.any(q < 0.1) or np.any(q > 1.0):
                raise ParameterError(f"pair point {tuple(q)} outside [0.1, 1]^N")
        i, j = _locate(fields[0], sa), _locate(fields[0], ta)
        diffs = np.array([f.column()[i] - f.column()[j] for f in fields])
        denom = float(np.sum(np.abs(sa - ta) ** np.asarray(hv.H)))
        ratios.append(estimate_scale(diffs, hv.alpha) / denom)
    ratios = np.array(ratios)
    return {"ratios": ratios, "min": float(ratios.min()),
            "max": float(ratios.max()),
            "spread": float(ratios.max() / ratios.min())}


def check_sup_moment(fields, rect, spec):
    """Mean over replicates of sup |X - X(lower corner)| over the rectangle,
    divided by the sum of side lengths to their Hurst powers."""
    if len(fields) < 200:
        raise InsufficientDataError(
            f"need at least 200 replicates, got {len(fields)}")
    hv = spec.hurst
    sides = np.asarray(rect.sides)
    if np.any(sides <= 0.0):
        raise ParameterError("degenerate rectangle")
    grid = fields[0].grid
    lo = np.asarray(rect.lower)
    hi = np.asarray(rect.upper)
    inside = np.all((grid >= lo - 1e-12) & (grid <= hi + 1e-12), axis=1)
    if int(np.sum(inside)) < 33 ** hv.N:
        raise InsufficientDataError(
            f"rectangle holds {int(np.sum(inside))} grid points, "
            f"need {33 ** hv.N}")
    anchor = _locate(fields[0], lo)
    sups = np.array([float(np.max(np.abs(f.column()[inside]
                                         - f.column()[anchor])))
                     for f in fields])
    denom = float(np.sum(sides ** np.asarray(hv.H)))
    return {"ratio": float(np.mean(sups) / denom),
            "points": int(np.sum(inside)), "replicates": len(fields)}


def box_counting_dimension(points, scales, target="range",
                           theory=float("nan")):
    """Slope of log(occupied boxes) against log(1/side length).

    Grid-aligned counting on the supplied scales; the smallest scale must
    still spread the cloud over many boxes or the regression is meaningless.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < _MIN_CLOUD:
        raise InsufficientDataError(
            f"need a 2-D cloud of at least {_MIN_CLOUD} points")
    sc = sorted(float(s) for s in scales)
    if len(sc) < 5 or sc[-1] / sc[0] < 4.0:
        raise ParameterError("need >= 5 scales spanning >= 2 octaves")
    base = pts - pts.min(axis=0)
    counts = []
    for delta in sc:
        keys = np.floor(base / delta).astype(np.int64)
        counts.append(int(np.unique(keys, axis=0).shape[0]))
    if counts[0] < 100:
        raise ScaleRangeError(
            f"finest scale {sc[0]:g} occupies only {counts[0]} boxes")
    slope, _ = _fit_loglog(1.0 / np.array(sc), np.array(counts, dtype=float))
    return DimensionReport(target, slope, float(theory), tuple(sc),
                           tuple(counts))


def check_growth_envelope(field, eta=0.1):
    """Sup over the sample of |X(t)| / prod |t_j|^H_j (1+|log|t_j||)^(1/a+e),
    tracked octave by octave in max_j |t_j|.

    stable means extending the domain by its boundary octave, inward or
    outward, grows the sup by at most 25%: a bounded normalized field has
    its maximum set by the interior, not by whichever shell was added
    last.  Points on the coordinate axes are excluded (the weight
    vanishes there, and so does the field).
    """
    hurst = np.asarray(field.provenance["H"], dtype=np.float64)
    alpha = float(field.provenance["alpha"])
    grid, vals = field.grid, np.abs(field.column())
    keep = np.all(grid != 0.0, axis=1)
    grid, vals = grid[keep], vals[keep]
    if grid.shape[0] == 0:
        raise ParameterError("no points off the coordinate axes")
    at = np.abs(grid)
    r = at.max(axis=1)
    span = r.max() / r.min()
    if span < 2.0 ** 12:
        raise ParameterError(
            f"domain spans {math.log2(span):.1f} octaves, need 12 "
            f"(log-uniform coverage of [2^-8, 2^8])")
    weight = np.prod(at ** hurst
                     * (1.0 + np.abs(np.log(at))) ** (1.0 / alpha + eta),
                     axis=1)
    norm = vals / weight
    k_lo = int(math.ceil(math.log2(r.min())))
    k_hi = int(math.ceil(math.log2(r.max())))
    octave_sups = []
    for k in range(k_lo, k_hi + 1):
        sel = r <= 2.0 ** k
        if np.any(sel):
            octave_sups.append((k, float(np.max(norm[sel]))))
    full = float(np.max(norm))
    inner = norm[r > 2.0 ** k_lo]
    outer = norm[r <= 2.0 ** (k_hi - 1)]
    stable = True
    for part in (inner, outer):
        base = float(np.max(part)) if part.size else 0.0
        if full > 1.25 * base and full > 0.0:
            stable = False
    return {"sup": full if norm.size else 0.0,
            "octave_sups": octave_sups, "stable": bool(stable),
            "eta": float(eta)}


def distance_correlation(x, y):
    """Sample distance correlation of two 1-D samples (0 iff independent in
    the population limit, for any dependence shape)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 10:
        raise InsufficientDataError("need two equal samples of >= 10 values")
    a = np.abs(x[:, None] - x[None, :])
    b = np.abs(y[:, None] - y[None, :])
    a = a - a.mean(axis=0) - a.mean(axis=1)[:, None] + a.mean()
    b = b - b.mean(axis=0) - b.mean(axis=1)[:, None] + b.mean()
    dcov2 = float(np.mean(a * b))
    dvx = float(np.mean(a * a))
    dvy = float(np.mean(b * b))
    if dvx <= 0.0 or dvy <= 0.0:
        return 0.0
    return math.sqrt(max(dcov2, 0.0) / math.sqrt(dvx * dvy))


def independence_test(x, y, permutations=199, seed=0):
    """Permutation p-value for dependence via distance correlation.

    Deterministic in seed; p is (1 + worse)/(1 + permutations), so the
    smallest reportable value is 1/(1 + permutations).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    obs = distance_correlation(x, y)
    rng = np.random.default_rng(seed)
    worse = 0
    for _ in range(permutations):
        if distance_correlation(x, rng.permutation(y)) >= obs:
            worse += 1
    return obs, (1.0 + worse) / (1.0 + permutations)
