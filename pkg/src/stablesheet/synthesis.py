"""Sample-path generation for the stable sheet.

Two routes to the same field: direct Riemann discretization of the
moving-average integral, and the truncated random wavelet series driven by
the same discretized noise so the two can be compared pathwise.  Also the
dual wavelet transform that projects a 1-D transect of the field back onto
noise-side coefficients.

All randomness is addressed: a noise grid never stores draws, it regenerates
the increment of cell i from (stream, i) on demand, so results are pure
functions of (seed, parameters) no matter how the work is scheduled.
"""

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import (ConfigError, DomainError, ParameterError,
                     ResolutionError, WindowError)
from .kernel import (KernelSpec, Rectangle, kernel_factor, powplus,
                     required_tail_extent, unit_integral)
from .stable_rng import (SeedKey, StableParams, derive_stream,
                         sample_stable_range)

_MAX_CELLS = 1 << 27


@dataclass(frozen=True)
class TruncationSpec:
    """Dyadic index box: |j_l| <= n and |k_l| <= M * 2^(n+1) on every axis."""

    n: int
    M: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ParameterError(f"n must be a nonnegative integer, got {self.n}")
        if not self.M > 0.0:
            raise ParameterError(f"M must be positive, got {self.M}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "M", float(self.M))

    @property
    def kmax(self):
        return int(math.floor(self.M * 2.0 ** (self.n + 1)))

    def scales(self):
        return range(-self.n, self.n + 1)

    def shifts(self):
        return range(-self.kmax, self.kmax + 1)


class NoiseGrid:
    """Discretized stable random measure on a product of intervals.

    Cell (i_1, ..., i_N) spans the product of [edges_l[i_l], edges_l[i_l+1])
    and its increment is a strictly stable draw of scale volume^(1/alpha),
    the control measure being Lebesgue.  Increments are regenerated from the
    cell's linear index, so distinct cells are independent and revisiting a
    cell always returns the identical value.
    """

    def __init__(self, edges, alpha, stream, skewness=0.0):
        edges = tuple(np.ascontiguousarray(e, dtype=np.float64) for e in edges)
        if not edges:
            raise ParameterError("need at least one axis")
        for e in edges:
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0.0):
                raise ParameterError(
                    "edges must be strictly increasing 1-D arrays with >= 2 entries")
        self.edges = edges
        self.alpha = float(alpha)
        self.skewness = float(skewness)
        StableParams(self.alpha, 1.0, self.skewness)
        SeedKey(int(stream))
        self.stream = int(stream)
        self.core_start = tuple(_uniform_suffix_start(e) for e in edges)
        if self.size > _MAX_CELLS:
            raise ParameterError(
                f"grid of {self.size} cells is too large to materialize")

    @classmethod
    def regular(cls, domain, spacing, alpha, stream, skewness=0.0):
        """Uniform cells of side ~ spacing exactly filling the box."""
        if not spacing > 0.0:
            raise ParameterError("spacing must be positive")
        edges = []
        for lo, up in zip(domain.lower, domain.upper):
            n = max(1, int(round((up - lo) / spacing)))
            edges.append(np.linspace(lo, up, n + 1))
        return cls(tuple(edges), alpha, stream, skewness)

    @classmethod
    def padded(cls, core, spacing, radii, alpha, stream, skewness=0.0,
               cells_per_octave=8):
        """Uniform core extended down to -radius per axis by growing cells.

        Past the core the kernel follows a slowly varying power of |s|, so a
        handful of cells per octave resolves its alpha-mass even when the
        required radius is astronomically large.
        """
        if not spacing > 0.0:
            raise ParameterError("spacing must be positive")
        if cells_per_octave < 2:
            raise ParameterError("cells_per_octave must be >= 2")
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64),
                                (len(core.lower),))
        grow = 2.0 ** (1.0 / cells_per_octave)
        edges = []
        for (lo, up), radius in zip(zip(core.lower, core.upper), radii):
            n = max(1, int(round((up - lo) / spacing)))
            uni = np.linspace(lo, up, n + 1)
            w = (up - lo) / n
            pos, tail = lo, []
            while pos > -radius:
                w *= grow
                pos -= w
                tail.append(pos)
            edges.append(np.concatenate([np.array(tail[::-1]), uni]))
        return cls(tuple(edges), alpha, stream, skewness)

    @property
    def ndim(self):
        return len(self.edges)

    @property
    def shape(self):
        return tuple(e.size - 1 for e in self.edges)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def domain(self):
        return Rectangle(tuple(float(e[0]) for e in self.edges),
                         tuple(float(e[-1]) for e in self.edges))

    def spacing(self):
        """Resolution of the uniform part (coarsest core cell over axes)."""
        return max(float(e[-1] - e[-2]) for e in self.edges)

    def centers(self, axis):
        e = self.edges[axis]
        return 0.5 * (e[1:] + e[:-1])

    def widths(self, axis):
        return np.diff(self.edges[axis])

    def increments(self):
        """The full tensor of cell increments, regenerated on every call."""
        params = StableParams(self.alpha, 1.0, self.skewness)
        out = sample_stable_range(params, self.stream, 0, self.size)
        out = out.reshape(self.shape)
        p = 1.0 / self.alpha
        for axis in range(self.ndim):
            w = self.widths(axis) ** p
            out *= w.reshape(w.shape + (1,) * (self.ndim - 1 - axis))
        return out

    def with_stream(self, stream):
        """Same geometry, fresh randomness."""
        return NoiseGrid(self.edges, self.alpha, stream, self.skewness)


def _uniform_suffix_start(e):
    # first cell index of the trailing run of equal-width cells
    w = np.diff(e)
    bad = np.nonzero(np.abs(w - w[-1]) > 1e-9 * w[-1])[0]
    return int(bad[-1] + 1) if bad.size else 0


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Field values on a list of points, with provenance enough to rerun."""

    grid: np.ndarray
    values: np.ndarray
    method: str
    provenance: dict

    def __post_init__(self):
        if self.method not in ("direct", "wavelet-exact", "wavelet-iid"):
            raise ConfigError(f"unknown method {self.method!r}")
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.grid.ndim != 2 or self.values.ndim != 2 \
                or self.grid.shape[0] != self.values.shape[0]:
            raise ConfigError("grid must be (npts, N) and values (npts, d)")

    @property
    def ndim(self):
        return self.grid.shape[1]

    @property
    def ncoords(self):
        return self.values.shape[1]

    def column(self, c=0):
        return self.values[:, c]


def grid_points(*axes):
    """Cartesian product of per-axis coordinate arrays, C order, (npts, N)."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=np.float64) for a in axes],
                       indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _as_points(points, n):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if n == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != n or pts.shape[0] == 0:
        raise ParameterError(f"points must be a nonempty (npts, {n}) array")
    return pts


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in np.asarray(v).tolist()] \
            if isinstance(v, np.ndarray) else [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def write_field(sample, csv_path, sidecar_path=None):
    """CSV (t then x columns) plus a JSON sidecar with the provenance.

    %.17g columns round-trip doubles exactly, so a rerun with the same seed
    and parameters is byte-identical.
    """
    cols = [f"t_{l + 1}" for l in range(sample.ndim)] \
        + [f"x_{c + 1}" for c in range(sample.ncoords)]
    data = np.hstack([sample.grid, sample.values])
    np.savetxt(csv_path, data, fmt="%.17g", delimiter=",",
               header=",".join(cols), comments="")
    if sidecar_path is not None:
        doc = {"schema": 1, "method": sample.method, "columns": cols,
               "points": int(sample.grid.shape[0]),
               "provenance": _jsonable(sample.provenance)}
        with open(sidecar_path, "w", encoding="utf-8") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
            f.write("\n")


def read_field(csv_path, sidecar_path):
    """Inverse of write_field."""
    with open(sidecar_path, encoding="utf-8") as f:
        doc = json.load(f)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    ndim = sum(1 for c in doc["columns"] if c.startswith("t_"))
    return FieldSample(data[:, :ndim], data[:, ndim:], doc["method"],
                       doc["provenance"])


def noise_for_points(points, spec, spacing, stream, tail_tolerance=1e-4,
                     skewness=0.0):
    """Noise grid sized so direct synthesis at these points meets the
    kernel-tail tolerance: uniform core around the evaluation range, then
    geometric padding out to the required radius."""
    hv = spec.hurst
    pts = _as_points(points, hv.N)
    lower, upper, radii = [], [], []
    for l in range(hv.N):
        col = pts[:, l]
        tmax = float(np.max(np.abs(col)))
        up = max(float(np.max(col)), 0.0)
        lo = min(float(np.min(col)), 0.0) - 2.0 * max(tmax, spacing)
        # snap the core onto the spacing lattice so points laid out on the
        # same lattice line up with cell centers modulo h (fast path)
        up = spacing * math.ceil(up / spacing - 1e-12)
        lo = spacing * math.floor(lo / spacing + 1e-12)
        radii.append(required_tail_extent(hv.g[l], hv.alpha, tmax,
                                          tail_tolerance / hv.N))
        lower.append(lo)
        upper.append(up if up > lo else lo + spacing)
    return NoiseGrid.padded(Rectangle(tuple(lower), tuple(upper)), spacing,
                            tuple(radii), hv.alpha, stream, skewness)


def direct_synthesis(points, noise, spec, tail_tolerance=1e-4):
    """Riemann sum of the moving-average kernel against the noise cells.

    The kernel is evaluated at cell centers and the per-cell increment
    carries the cell volume, so the sum converges to the stable integral as
    the core spacing shrinks and the domain radius grows.  tail_tolerance
    None accepts the noise domain as given (for comparing representations
    on the same deliberately bounded noise).
    """
    hv = spec.hurst
    pts = _as_points(points, hv.N)
    if noise.ndim != hv.N:
        raise ConfigError(f"noise has {noise.ndim} axes, kernel has {hv.N}")
    if noise.alpha != hv.alpha:
        raise ConfigError("noise and kernel disagree on alpha")
    _check_noise_domain(pts, noise, hv, tail_tolerance)
    vals = spec.kappa * _contract(pts, noise, hv.g, noise.increments())
    prov = {"alpha": hv.alpha, "H": list(hv.H), "kappa": spec.kappa,
            "stream": noise.stream, "skewness": noise.skewness,
            "noise_domain": [list(noise.domain.lower), list(noise.domain.upper)],
            "noise_shape": list(noise.shape), "noise_spacing": noise.spacing(),
            "tail_tolerance": tail_tolerance}
    return FieldSample(pts, vals[:, None], "direct", prov)


def _check_noise_domain(pts, noise, hv, tol):
    dom = noise.domain
    for l in range(hv.N):
        col = pts[:, l]
        tmax = float(np.max(np.abs(col)))
        if tmax == 0.0:
            continue
        top = float(np.max(col))
        if top > dom.upper[l] + 1e-12:
            raise DomainError(
                f"axis {l}: evaluation reaches t={top} beyond the noise "
                f"domain upper edge {dom.upper[l]}", required_radius=top)
        if tol is None:
            continue
        need = required_tail_extent(hv.g[l], hv.alpha, tmax, tol / hv.N)
        if -dom.lower[l] < need:
            raise DomainError(
                f"axis {l}: domain lower edge {dom.lower[l]} leaves more "
                f"than {tol:g} relative kernel tail mass, extend to "
                f"-{need:.4g}", required_radius=need)


def _cell_column(tvals, c, g):
    # (t - c)_+^g - (-c)_+^g over a vector of t for one cell center; the
    # expm1 form keeps relative accuracy when c is far in the left tail
    if c >= 0.0:
        return powplus(tvals - c, g)
    u = -c
    out = np.full(tvals.shape, -(u ** g))
    sel = tvals > c
    if np.any(sel):
        out[sel] = u ** g * np.expm1(g * np.log1p(tvals[sel] / u))
    return out


def _axis_factor(tvals, centers, g):
    out = np.empty((tvals.size, centers.size))
    if tvals.size <= centers.size:
        for i, t in enumerate(tvals):
            out[i] = kernel_factor(t, centers, g)
    else:
        for i, c in enumerate(centers):
            out[:, i] = _cell_column(tvals, c, g)
    return out


def _contract(pts, noise, gvec, tensor):
    """Sum_cells prod_l factor(t_l, c_l) * dZ_cell for every point.

    Axes are contracted one at a time, cheapest first; a long uniform
    transect along a uniform piece of the grid goes through an FFT
    correlation instead of a dense factor matrix.
    """
    uniq, inv = [], []
    for l in range(noise.ndim):
        u, iv = np.unique(pts[:, l], return_inverse=True)
        uniq.append(u)
        inv.append(iv)
    order = sorted(range(noise.ndim), key=lambda l: uniq[l].size)
    cur = np.transpose(tensor, order)
    for l in order:
        cur = _apply_axis(uniq[l], noise, l, gvec[l], cur)
    cur = np.transpose(cur, np.argsort(order))
    return cur[tuple(inv)]


def _apply_axis(u, noise, axis, g, cur):
    # contracts the leading axis of cur, appends the point axis at the end
    centers = noise.centers(axis)
    m, n = u.size, centers.size
    if m >= 512 and m * n > 4_000_000:
        res = _transect_apply(u, noise, axis, g, cur)
        if res is not None:
            return res
    if m * n <= 16_000_000:
        return np.tensordot(cur, _axis_factor(u, centers, g), axes=([0], [1]))
    step = max(1, 16_000_000 // n)
    out = np.empty(cur.shape[1:] + (m,))
    for c0 in range(0, m, step):
        blk = _axis_factor(u[c0:c0 + step], centers, g)
        out[..., c0:c0 + blk.shape[0]] = np.tensordot(cur, blk, axes=([0], [1]))
    return out


def _transect_apply(u, noise, axis, g, cur):
    """FFT route for points on a lattice commensurate with the uniform core.

    Writes the core part of the sum as a correlation sampled every q cells;
    the geometric tail cells are few and handled densely.  Returns None when
    the lattice condition fails.
    """
    cs = noise.core_start[axis]
    e = noise.edges[axis]
    n_core = e.size - 1 - cs
    if n_core < 2 or u.size < 2:
        return None
    h = (e[-1] - e[cs]) / n_core
    du = np.diff(u)
    if np.any(np.abs(du - du[0]) > 1e-9 * abs(du[0])):
        return None
    q = du[0] / h
    qi = int(round(q))
    if qi < 1 or abs(q - qi) > 1e-9:
        return None
    centers = noise.centers(axis)
    core_c = centers[cs:]
    tail = np.tensordot(cur[:cs], _axis_factor(u, centers[:cs], g),
                        axes=([0], [1])) if cs else 0.0
    core_cur = cur[cs:]
    rmin = -(n_core - 1)
    rmax = (u.size - 1) * qi
    w = powplus(u[0] - core_c[0] + np.arange(rmin, rmax + 1) * h, g)
    w = w.reshape((-1,) + (1,) * (core_cur.ndim - 1))
    conv = fftconvolve(w, core_cur, axes=0)
    idx = np.arange(u.size) * qi - rmin
    second = np.tensordot(powplus(-core_c, g), core_cur, axes=([0], [0]))
    out = np.moveaxis(conv[idx], 0, -1) - second[..., None]
    return out + tail


class CoefficientSet:
    """Noise coefficients on a dyadic index box, stored per scale tuple.

    Shifts whose wavelet support misses the noise domain are not stored;
    they are exactly zero.
    """

    def __init__(self, alpha, ndim, scales, shift_bounds, blocks, mode,
                 provenance):
        self.alpha = float(alpha)
        self.ndim = int(ndim)
        self.scales = tuple(int(j) for j in scales)
        self.shift_bounds = (int(shift_bounds[0]), int(shift_bounds[1]))
        self.blocks = blocks
        self.mode = mode
        self.provenance = provenance

    def amplitude(self, jcomb, kcomb):
        ent = self.blocks.get(tuple(int(j) for j in jcomb))
        if ent is None:
            return 0.0
        starts, arr = ent
        idx = []
        for k, k0, nk in zip(kcomb, starts, arr.shape):
            i = int(k) - k0
            if i < 0 or i >= nk:
                return 0.0
            idx.append(i)
        return float(arr[tuple(idx)])

    def pooled(self):
        """All stored entries in one flat array (support-overlapping only)."""
        if not self.blocks:
            return np.empty(0)
        return np.concatenate([arr.ravel() for _, arr in self.blocks.values()])


def compute_coefficients(noise, jrange, krange, psi, margin=3):
    """Exact-mode coefficients: the noise integrated against dyadic dilates
    and translates of the mother wavelet, one tensor contraction per scale
    tuple.

    The shift range is treated as its [min, max] hull, shared by all axes.
    """
    jv = sorted({int(j) for j in jrange})
    kr = [int(k) for k in krange]
    if not jv or not kr:
        raise ParameterError("jrange and krange must be nonempty")
    kmin, kmax = min(kr), max(kr)
    required = 2.0 ** -(max(jv) + margin)
    if noise.spacing() > required * (1.0 + 1e-12):
        raise ResolutionError(
            f"noise spacing {noise.spacing():g} too coarse for scale "
            f"{max(jv)} with margin {margin}", required_spacing=required)
    mats = []
    for l in range(noise.ndim):
        c = noise.centers(l)
        e0, e1 = noise.edges[l][0], noise.edges[l][-1]
        per_j = {}
        for j in jv:
            s = 2.0 ** j
            klo = max(kmin, int(math.ceil(s * e0 - psi.support_right)))
            khi = min(kmax, int(math.floor(s * e1 - psi.support_left)))
            if klo > khi:
                per_j[j] = None
                continue
            kvals = np.arange(klo, khi + 1)
            vals = psi.evaluate(s * c[None, :] - kvals[:, None])
            per_j[j] = (klo, 2.0 ** (j / noise.alpha) * vals)
        mats.append(per_j)
    blocks = {}

    def descend(partial, depth, jpref, kstarts):
        if depth == noise.ndim:
            blocks[jpref] = (kstarts, partial)
            return
        for j in jv:
            ent = mats[depth][j]
            if ent is None:
                continue
            k0, mat = ent
            descend(np.tensordot(partial, mat, axes=([0], [1])),
                    depth + 1, jpref + (j,), kstarts + (k0,))

    descend(noise.increments(), 0, (), ())
    prov = {"stream": noise.stream, "alpha": noise.alpha,
            "noise_domain": [list(noise.domain.lower),
                             list(noise.domain.upper)],
            "noise_spacing": noise.spacing(), "margin": margin,
            "wavelet_order": psi.vanishing_moments,
            "refinement_level": psi.refinement_level}
    return CoefficientSet(noise.alpha, noise.ndim, jv, (kmin, kmax), blocks,
                          "exact", prov)


def sample_coefficients_iid(trunc, alpha, psi_norm, seed, ndim=1):
    """Independent draws with the marginal law of exact coefficients: one
    strictly stable variate of scale psi_norm^ndim per index in the box."""
    if ndim < 1:
        raise ParameterError("ndim must be >= 1")
    params = StableParams(alpha, float(psi_norm) ** ndim)
    stream = derive_stream(seed, "iid-coeffs")
    kv = np.arange(-trunc.kmax, trunc.kmax + 1)
    per = kv.size ** ndim
    blocks = {}
    start = 0
    for jpref in itertools.product(trunc.scales(), repeat=ndim):
        draws = sample_stable_range(params, stream, start, per)
        start += per
        blocks[jpref] = ((int(kv[0]),) * ndim, draws.reshape((kv.size,) * ndim))
    prov = {"seed": seed, "alpha": alpha, "psi_norm": float(psi_norm),
            "n": trunc.n, "M": trunc.M}
    return CoefficientSet(alpha, ndim, trunc.scales(), (int(kv[0]), int(kv[-1])),
                          blocks, "iid", prov)


def _per_axis_wavelets(fw, hurst):
    try:
        fws = tuple(fw)
    except TypeError:
        fws = (fw,) * hurst.N
    if len(fws) == 1 and hurst.N > 1:
        fws = fws * hurst.N
    if len(fws) != hurst.N:
        raise ConfigError(f"need one fractional wavelet per axis ({hurst.N})")
    for l, w in enumerate(fws):
        if w.direction != "primitive":
            raise ConfigError("series synthesis takes the primitive direction")
        if abs(w.exponent - hurst.H[l]) > 1e-12 or w.alpha != hurst.alpha:
            raise ConfigError(
                f"axis {l}: table is for exponent {w.exponent}, alpha "
                f"{w.alpha}, kernel wants {hurst.H[l]}, {hurst.alpha}")
    return fws


def _effective_right(fw, rel_tol):
    # rightmost |x| where the table still matters at the given relative level
    keep = np.abs(fw.values) >= rel_tol * np.max(np.abs(fw.values))
    return float(fw.x[np.nonzero(keep)[0][-1]]) if np.any(keep) else 0.0


def wavelet_synthesis(points, coeffs, trunc, fw, hurst, term_tolerance=1e-12):
    """Truncated random wavelet series over the index box of `trunc`.

    Evaluation factors come from the fractional-primitive tables by linear
    interpolation; shifts whose factors sit below term_tolerance (relative
    to the table peak) are skipped.  The kernel normalization is included,
    so with exact-mode coefficients the series approaches the direct sum on
    the same noise.
    """
    hv = hurst
    fws = _per_axis_wavelets(fw, hv)
    pts = _as_points(points, hv.N)
    top = float(np.max(np.abs(pts)))
    if top > trunc.M + 1e-12:
        raise DomainError(
            f"points reach |t|={top}, outside the series domain "
            f"[-M, M]^N with M={trunc.M}", required_radius=top)
    if coeffs.ndim != hv.N:
        raise ConfigError(f"coefficients have {coeffs.ndim} axes, kernel {hv.N}")
    if coeffs.alpha != hv.alpha:
        raise ConfigError("coefficients and kernel disagree on alpha")
    kappa = KernelSpec.for_hurst(hv).kappa
    uniq, inv = [], []
    for l in range(hv.N):
        u, iv = np.unique(pts[:, l], return_inverse=True)
        uniq.append(u)
        inv.append(iv)
    x_eff = [_effective_right(w, term_tolerance) for w in fws]
    out = np.zeros(tuple(u.size for u in uniq))
    for jcomb, (kstarts, arr) in coeffs.blocks.items():
        if any(abs(j) > trunc.n for j in jcomb):
            continue
        sub = arr
        factors = []
        dead = False
        for l, j in enumerate(jcomb):
            s = 2.0 ** j
            u = uniq[l]
            klo = int(math.ceil(min(s * u[0] - x_eff[l], -x_eff[l])))
            khi = int(math.floor(max(s * u[-1] - fws[l].base.support_left,
                                     -fws[l].base.support_left)))
            klo = max(klo, kstarts[l], -trunc.kmax)
            khi = min(khi, kstarts[l] + arr.shape[l] - 1, trunc.kmax)
            if klo > khi:
                dead = True
                break
            sub = sub[(slice(None),) * l
                      + (slice(klo - kstarts[l], khi - kstarts[l] + 1),)]
            kvals = np.arange(klo, khi + 1)
            tab = fws[l]
            factors.append(tab.evaluate(s * u[:, None] - kvals[None, :])
                           - tab.evaluate(-kvals.astype(np.float64))[None, :])
        if dead:
            continue
        cur = sub
        for mat in factors:
            cur = np.tensordot(cur, mat, axes=([0], [1]))
        out += 2.0 ** -sum(j * h for j, h in zip(jcomb, hv.H)) * cur
    out *= kappa
    method = "wavelet-exact" if coeffs.mode == "exact" else "wavelet-iid"
    prov = {"alpha": hv.alpha, "H": list(hv.H), "kappa": kappa,
            "n": trunc.n, "M": trunc.M, "mode": coeffs.mode,
            "term_tolerance": term_tolerance,
            "coefficients": coeffs.provenance}
    return FieldSample(pts, out[tuple(inv)][:, None], method, prov)


def synthesize_vector(points, d, hurst, seed, method="direct",
                      spacing=2.0 ** -8, trunc=None, psi=None, fw=None,
                      noise_domain=None, tail_tolerance=1e-4, skewness=0.0,
                      margin=3):
    """Field with d independent coordinates, one seed stream per coordinate.

    direct needs only the spacing (the grid is sized from the points);
    wavelet-exact needs trunc, psi and the per-axis fw tables, plus
    optionally an explicit noise_domain; wavelet-iid needs trunc, psi, fw.
    """
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    spec = KernelSpec.for_hurst(hurst)
    pts = _as_points(points, hurst.N)
    if method not in ("direct", "wavelet-exact", "wavelet-iid"):
        raise ConfigError(f"unknown method {method!r}")
    if method != "direct" and (trunc is None or psi is None or fw is None):
        raise ConfigError("wavelet methods need trunc, psi and fw")
    cols, streams = [], []
    fs = None
    for c in range(int(d)):
        stream = derive_stream(seed, "coordinate", c)
        streams.append(stream)
        if method == "direct":
            noise = noise_for_points(pts, spec, spacing, stream,
                                     tail_tolerance, skewness)
            fs = direct_synthesis(pts, noise, spec, tail_tolerance)
        elif method == "wavelet-iid":
            coeffs = sample_coefficients_iid(
                trunc, hurst.alpha, psi.lalpha_norm(hurst.alpha), stream,
                hurst.N)
            fs = wavelet_synthesis(pts, coeffs, trunc, fw, hurst)
        else:
            dom = noise_domain
            if dom is None:
                dom = Rectangle((-2.0 * trunc.M,) * hurst.N,
                                (trunc.M,) * hurst.N)
            noise = NoiseGrid.regular(dom, spacing, hurst.alpha, stream,
                                      skewness)
            coeffs = compute_coefficients(noise, trunc.scales(),
                                          trunc.shifts(), psi, margin)
            fs = wavelet_synthesis(pts, coeffs, trunc, fw, hurst)
        cols.append(fs.column())
    prov = dict(fs.provenance)
    prov.update({"seed": seed, "d": int(d), "coordinate_streams": streams})
    return FieldSample(pts, np.stack(cols, axis=1), fs.method, prov)


def wavelet_transform_G(path, j_n, k_n, fw_deriv, window_tolerance=1e-3):
    """Dual transform of a 1-D transect: quadrature of the path against a
    dilated fractional-derivative wavelet.

    Normalized (by the kernel constant and the pairing constant of the
    table pair) so the result is exactly the noise-side functional whose
    scale is the mother's L^alpha norm times the off-axis slice norms.
    """
    if fw_deriv.direction != "derivative":
        raise ConfigError("the transform takes the derivative direction")
    if path.ncoords != 1:
        raise ConfigError("transform expects a scalar field path")
    varying = [l for l in range(path.ndim)
               if np.ptp(path.grid[:, l]) > 0.0]
    if len(varying) != 1:
        raise ConfigError("path must vary along exactly one axis")
    s = path.grid[:, varying[0]]
    ds = np.diff(s)
    if np.any(ds <= 0.0) or np.any(np.abs(ds - ds[0]) > 1e-9 * ds[0]):
        raise ResolutionError("path must be an increasing uniform transect")
    step = float(ds[0])
    required = 2.0 ** -(j_n + 4)
    if step > required * (1.0 + 1e-9):
        raise ResolutionError(
            f"transect spacing {step:g} too coarse for scale {j_n}",
            required_spacing=required)
    scale = 2.0 ** j_n
    y = scale * s - k_n
    inside = (fw_deriv.x >= y[0]) & (fw_deriv.x <= y[-1])
    covered = float(np.sum(np.abs(fw_deriv.values[inside])) * fw_deriv.spacing)
    omitted = 1.0 - covered / fw_deriv.mass
    if omitted > window_tolerance:
        raise WindowError(
            f"transect covers the dual wavelet up to omitted mass "
            f"{omitted:.3g} (tolerance {window_tolerance:g})",
            suggested_window=(fw_deriv.window + abs(k_n)) / scale)
    kappa = path.provenance.get("kappa")
    if kappa is None:
        raise ConfigError("path provenance lacks the kernel normalization")
    a = fw_deriv.exponent + 1.0 - 1.0 / fw_deriv.alpha
    pairing = math.gamma(a) * math.gamma(2.0 - a)
    w = fw_deriv.evaluate(y) * path.column()
    quad = step * (np.sum(w) - 0.5 * (w[0] + w[-1]))
    return float(2.0 ** (j_n * (1.0 + fw_deriv.exponent)) * quad
                 / (kappa * pairing))


def g_transform_scale_target(hurst, axis, u_hat, psi):
    """Closed-form scale the dual transform should reproduce, any (j, k)."""
    others = [l for l in range(hurst.N) if l != axis]
    if len(u_hat) != len(others):
        raise ParameterError(
            f"u_hat must fix the {len(others)} off-transect coordinates")
    out = psi.lalpha_norm(hurst.alpha)
    for l, u in zip(others, u_hat):
        g = hurst.g[l]
        out *= abs(u) ** hurst.H[l] \
            * unit_integral(g, hurst.alpha) ** (1.0 / hurst.alpha)
    return float(out)
