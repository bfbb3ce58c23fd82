"""Batch front end: configure, synthesize, analyze, verify, dump.

Every command is a pure function of its configuration; reruns write the
same bytes, and the worker count never changes a result, it only changes
how replicate loops are scheduled.
"""

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import empirical_axis_exponent, report_dict
from .errors import ConfigError, ResolutionError, StableSheetError
from .kernel import (HurstVector, KernelSpec, Rectangle, hausdorff_dims,
                     increment_scale, rectangular_increment)
from .stable_rng import (StableParams, derive_stream, estimate_scale,
                         sample_stable_range, tail_slope)
from .synthesis import (NoiseGrid, TruncationSpec, compute_coefficients,
                        direct_synthesis, g_transform_scale_target,
                        grid_points, noise_for_points, read_field,
                        synthesize_vector, wavelet_transform_G, write_field)
from .wavelet import (biorth_inner, build_daubechies, fractional_pair,
                      fractionalize, window_stability)

SUITES = ("rng", "wavelet", "scale", "exponent", "dims", "all")

_DEFAULT_TOL = {
    "scale": 0.10, "exponent": 0.07, "rng": 0.10, "var": 0.02,
    "moment": 1e-6, "biorth": 1e-3, "localization": 0.05,
}


@dataclass
class RunConfig:
    alpha: float = 1.5
    H: tuple = (0.8, 0.9)
    d: int = 1
    method: str = "direct"
    n: int = 4
    M: float = 1.0
    noise_domain: tuple = None
    spacing: float = 2.0 ** -8
    grid: tuple = (64,)
    seed: int = 0
    out: str = "."
    workers: int = 1
    replicates: int = 200
    draws: int = 1000000
    psi_order: int = 6
    statistic: str = "sup"
    lags: tuple = tuple(2.0 ** -e for e in range(13, 6, -1))
    tol: dict = field(default_factory=lambda: dict(_DEFAULT_TOL))

    def hurst(self):
        return HurstVector(self.alpha, self.H)

    def validate(self):
        hv = self.hurst()
        if self.method not in ("direct", "wavelet-exact", "wavelet-iid"):
            raise ConfigError(f"unknown method {self.method!r}")
        if len(self.grid) not in (1, hv.N):
            raise ConfigError(
                f"grid spec has {len(self.grid)} axes, field has {hv.N}")
        if self.method == "wavelet-exact":
            required = 2.0 ** -(self.n + 3)
            if self.spacing > required * (1 + 1e-12):
                raise ResolutionError(
                    f"noise spacing {self.spacing:g} too coarse for |j| <= "
                    f"{self.n}, need {required:g}")
        return hv


def _parse_floats(text):
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _parse_grid(text):
    return tuple(int(v) for v in str(text).lower().split("x"))


_COERCE = {
    "alpha": float, "H": _parse_floats, "d": int, "method": str, "n": int,
    "M": float, "noise_domain": _parse_floats, "spacing": float,
    "grid": _parse_grid, "seed": int, "out": str, "workers": int,
    "replicates": int, "draws": int, "psi_order": int, "statistic": str,
    "lags": _parse_floats,
}


def load_config(path=None, overrides=None):
    cfg = RunConfig()
    pairs = []
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}")
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line {line!r}")
            k, v = line.split("=", 1)
            pairs.append((k.strip(), v.strip()))
    for k, v in (overrides or {}).items():
        if v is not None:
            pairs.append((k, v))
    for k, v in pairs:
        if k.startswith("tol_"):
            cfg.tol[k[4:]] = float(v)
        elif k in _COERCE:
            try:
                setattr(cfg, k, _COERCE[k](v))
            except (TypeError, ValueError):
                raise ConfigError(f"bad value {v!r} for config key {k}")
        else:
            raise ConfigError(f"unknown config key {k}")
    return cfg


def _map_indexed(fn, count, workers):
    """fn(i) for i in range(count), any scheduling, stable result order."""
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    out = [None] * count
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, val in zip(range(count), pool.map(fn, range(count))):
            out[i] = val
    return out


def _emit(doc, path):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if path is not None:
        Path(path).write_text(text)


def _config_echo(cfg):
    return {
        "alpha": cfg.alpha, "H": list(cfg.H), "d": cfg.d,
        "method": cfg.method, "n": cfg.n, "M": cfg.M,
        "noise_domain": None if cfg.noise_domain is None
        else list(cfg.noise_domain),
        "spacing": cfg.spacing, "grid": list(cfg.grid), "seed": cfg.seed,
        "replicates": cfg.replicates, "draws": cfg.draws,
        "psi_order": cfg.psi_order, "statistic": cfg.statistic,
        "lags": list(cfg.lags), "tol": dict(sorted(cfg.tol.items())),
    }


def _grid_axes(cfg, hv):
    counts = cfg.grid if len(cfg.grid) == hv.N else cfg.grid * hv.N
    return [np.arange(1, m + 1) / float(m) for m in counts]


def cmd_simulate(cfg):
    hv = cfg.validate()
    pts = grid_points(*_grid_axes(cfg, hv))
    kw = {}
    if cfg.method != "direct":
        psi = build_daubechies(cfg.psi_order)
        fw = tuple(fractional_pair(cfg.psi_order, 10, h, cfg.alpha)[0]
                   for h in hv.H)
        kw = {"trunc": TruncationSpec(cfg.n, cfg.M), "psi": psi, "fw": fw}
        if cfg.noise_domain is not None:
            lo, hi = cfg.noise_domain
            kw["noise_domain"] = Rectangle((lo,) * hv.N, (hi,) * hv.N)
    f = synthesize_vector(pts, cfg.d, hv, cfg.seed, method=cfg.method,
                          spacing=cfg.spacing, **kw)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field(f, out / "field.csv", out / "field.json")
    sys.stdout.write(f"wrote {out / 'field.csv'} ({f.values.shape[0]} points, "
                     f"method {f.method})\n")
    return 0


def cmd_coeffs(cfg):
    hv = cfg.validate()
    tr = TruncationSpec(cfg.n, cfg.M)
    required = 2.0 ** -(cfg.n + 3)
    spacing = min(cfg.spacing, required)
    if cfg.noise_domain is not None:
        lo, hi = cfg.noise_domain
    else:
        lo, hi = -2.0 * tr.M, tr.M
    noise = NoiseGrid.regular(Rectangle((lo,) * hv.N, (hi,) * hv.N), spacing,
                              cfg.alpha, derive_stream(cfg.seed, "coeffs"))
    psi = build_daubechies(cfg.psi_order)
    cs = compute_coefficients(noise, tr.scales(), tr.shifts(), psi)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for jc in sorted(cs.blocks):
        kstarts, arr = cs.blocks[jc]
        for idx in np.ndindex(arr.shape):
            kc = tuple(ks + i for ks, i in zip(kstarts, idx))
            rows.append((jc, kc, arr[idx]))
    with open(out / "coeffs.csv", "w") as fh:
        head = ([f"j_{i + 1}" for i in range(hv.N)]
                + [f"k_{i + 1}" for i in range(hv.N)] + ["eps"])
        fh.write(",".join(head) + "\n")
        for jc, kc, v in rows:
            fh.write(",".join(str(q) for q in jc + kc)
                     + f",{v:.17g}\n")
    side = {"schema": 1, "kind": "coefficients", "mode": cs.mode,
            "config": _config_echo(cfg), "rows": len(rows)}
    (out / "coeffs.json").write_text(
        json.dumps(side, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"wrote {out / 'coeffs.csv'} ({len(rows)} rows)\n")
    return 0


def cmd_analyze(cfg, input_prefix):
    pre = Path(input_prefix)
    csv = pre if pre.suffix == ".csv" else pre / "field.csv"
    f = read_field(csv, csv.with_suffix(".json"))
    r = empirical_axis_exponent(f, cfg.lags, cfg.statistic)
    doc = {"schema": 1, "kind": "exponent-report", "axis": r.axis,
           "estimate": r.estimated_exponent, "stderr": r.stderr,
           "lag_range": list(r.lag_range), "theory": r.theory,
           "statistic": r.statistic}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _emit(doc, out / "analysis.json")
    return 0


def cmd_dims(cfg):
    # closed forms depend on H and d only, so no admissibility gate here
    dims = hausdorff_dims(cfg.H, cfg.d)
    _emit({"range": dims["range"], "graph": dims["graph"]}, None)
    return 0


def _tail_band(a):
    # heavier tails keep the survival curve populated further out, so the
    # band can start later; near alpha 2 it has to start early to keep
    # enough exceedances in the fit
    return (10.0, 100.0) if a < 1.7 else (5.0, 100.0)


def _suite_rng(cfg):
    def one(i):
        a = (1.2, 1.5, 1.8, 2.0)[i]
        x = sample_stable_range(StableParams(a),
                                derive_stream(cfg.seed, "rng", int(a * 10)),
                                0, cfg.draws)
        if a == 2.0:
            return report_dict("gaussian_variance", float(np.var(x)), 2.0,
                               cfg.tol["var"] * 2.0)
        return report_dict(f"tail_slope_alpha_{a:g}",
                           tail_slope(x, *_tail_band(a)), -a, cfg.tol["rng"])

    return _map_indexed(one, 4, cfg.workers)


def _suite_wavelet(cfg):
    h = cfg.H[0]
    psi = build_daubechies(cfg.psi_order)
    prim, deriv = fractional_pair(cfg.psi_order, 10, h, cfg.alpha)
    rows = [
        report_dict("moment_primitive", abs(prim.integral()), 0.0,
                    cfg.tol["moment"]),
        report_dict("moment_derivative", abs(deriv.integral()), 0.0,
                    cfg.tol["moment"]),
    ]
    c = biorth_inner(prim, deriv, 0, 0, 0, 0)
    worst = 0.0
    for J in range(-2, 3):
        for K in range(-4, 5):
            for J2 in range(-2, 3):
                for K2 in range(-4, 5):
                    got = biorth_inner(prim, deriv, J, K, J2, K2)
                    want = c * 2.0 ** -J if (J == J2 and K == K2) else 0.0
                    rel = abs(got - want) / (abs(c) * 2.0 ** -max(J, J2))
                    worst = max(worst, rel)
    rows.append(report_dict("biorth_max_rel_dev", worst, 0.0,
                            cfg.tol["biorth"]))
    for direction in ("primitive", "derivative"):
        _, _, rel = window_stability(psi, h, cfg.alpha, direction, 64.0)
        rows.append(report_dict(f"localization_window_{direction}", rel, 0.0,
                                cfg.tol["localization"]))
    return rows


# scale rows run on a deliberately coarse noise grid: the discretized
# pipeline's exact scale (computable because the field is linear in the
# noise) sits within 0.1% of the closed form already at spacing 2^-6, so
# the replicate budget is better spent beating down quantile-estimator
# noise (about 1.25/sqrt(reps) relative) than on finer cells.
_SCALE_SPACING = 2.0 ** -6


def _replicate_columns(cfg, spec, pts, tag, reps):
    base = noise_for_points(pts, spec, _SCALE_SPACING,
                            derive_stream(cfg.seed, tag, 0))

    def one(i):
        ns = base.with_stream(derive_stream(cfg.seed, tag, i))
        return direct_synthesis(pts, ns, spec).column()

    return np.array(_map_indexed(one, reps, cfg.workers))


def _suite_scale(cfg):
    hv = cfg.hurst()
    spec = KernelSpec.for_hurst(hv)
    reps = max(cfg.replicates, 1200)
    if hv.N != 2:
        corner = np.ones((1, hv.N))
        vals = _replicate_columns(cfg, spec, corner, "scale", reps)
        return [report_dict("corner_scale",
                            estimate_scale(vals[:, 0], hv.alpha), 1.0,
                            cfg.tol["scale"])]

    lo, hi = np.array([0.3, 0.4]), np.array([0.8, 0.9])
    sels = list(np.ndindex(2, 2))
    verts = [tuple(np.where(sel, hi, lo)) for sel in sels]
    pts = np.array(sorted({v for v in verts}
                          | {(0.3, 0.4), (0.6, 0.8), (1.0, 1.0)}))
    where = {tuple(p): i for i, p in enumerate(map(tuple, pts))}
    cols = _replicate_columns(cfg, spec, pts, "scale", reps)
    rows = [report_dict("corner_scale",
                        estimate_scale(cols[:, where[(1.0, 1.0)]], hv.alpha),
                        1.0, cfg.tol["scale"])]
    incs = sum(cols[:, where[tuple(np.where(sel, hi, lo))]]
               * (-1.0) ** (2 - sum(sel)) for sel in sels)
    rect = Rectangle(tuple(lo), tuple(hi))
    rows.append(report_dict(
        "increment_scale",
        estimate_scale(incs, hv.alpha) / increment_scale(rect, hv),
        1.0, cfg.tol["scale"]))
    ratio = (estimate_scale(cols[:, where[(0.6, 0.8)]], hv.alpha)
             / estimate_scale(cols[:, where[(0.3, 0.4)]], hv.alpha))
    rows.append(report_dict("oss_doubling_ratio", ratio / 2.0 ** sum(hv.H),
                            1.0, cfg.tol["scale"]))
    rows.append(report_dict("g_transform_scale",
                            _g_scale_ratio(cfg, hv, spec,
                                           min(max(cfg.replicates, 300), 600)),
                            1.0, cfg.tol["scale"]))
    return rows


def _dual_transect(deriv, j_n, k_n, step):
    """Uniform transect covering the dilated dual wavelet up to 5e-4 of its
    mass per side; the full table window would be enormously wider than the
    part that matters."""
    cum = np.cumsum(np.abs(deriv.values)) * deriv.spacing
    lo = deriv.x[np.searchsorted(cum, 5e-4 * cum[-1])]
    hi = deriv.x[np.searchsorted(cum, (1.0 - 5e-4) * cum[-1])]
    s = 2.0 ** j_n
    start = math.floor(((lo + k_n) / s - 0.5) / step)
    stop = math.ceil(((hi + k_n) / s + 0.5) / step)
    return np.arange(start, stop + 1) * step


def _g_scale_ratio(cfg, hv, spec, reps, j_n=2, k_n=3, u2=0.7,
                   step=2.0 ** -6):
    psi = build_daubechies(cfg.psi_order)
    _, deriv = fractional_pair(cfg.psi_order, 10, hv.H[0], hv.alpha)
    u1 = _dual_transect(deriv, j_n, k_n, step)
    pts = np.stack([u1, np.full(u1.size, u2)], axis=1)
    base = noise_for_points(pts, spec, step,
                            derive_stream(cfg.seed, "gt", 0))

    def one(i):
        ns = base.with_stream(derive_stream(cfg.seed, "gt", i))
        f = direct_synthesis(pts, ns, spec)
        return wavelet_transform_G(f, j_n, k_n, deriv)

    vals = np.array(_map_indexed(one, reps, cfg.workers))
    target = g_transform_scale_target(hv, 0, (u2,), psi)
    return estimate_scale(vals, hv.alpha) / target


def _suite_exponent(cfg):
    hv = HurstVector(cfg.alpha, cfg.H[:1])
    spec = KernelSpec.for_hurst(hv)
    npts = 1 << 14
    t = (np.arange(npts) + 1) / npts
    noise = noise_for_points(t, spec, 2.0 ** -15,
                             derive_stream(cfg.seed, "transect"))
    f = direct_synthesis(t, noise, spec)
    r = empirical_axis_exponent(f, cfg.lags, cfg.statistic)
    return [report_dict("axis_exponent", r.estimated_exponent, r.theory,
                        cfg.tol["exponent"])]


def _suite_dims(cfg):
    d1, d3 = hausdorff_dims((0.6, 0.8), 1), hausdorff_dims((0.6, 0.8), 3)
    rows = [
        report_dict("dims_d1_range", d1["range"], 1.0, 1e-12),
        report_dict("dims_d1_graph", d1["graph"], 2.4, 1e-12),
        report_dict("dims_d3_range", d3["range"], 35.0 / 12.0, 1e-12),
        report_dict("dims_d3_graph", d3["graph"], 35.0 / 12.0, 1e-12),
    ]
    # both formulas stay continuous across the branch switch at sum 1/H = d;
    # (0.6, 0.75) against d = 3 sits exactly on it
    for key in ("range", "graph"):
        below = hausdorff_dims((0.6, 0.75 - 1e-9), 3)[key]
        above = hausdorff_dims((0.6, 0.75 + 1e-9), 3)[key]
        on = hausdorff_dims((0.6, 0.75), 3)[key]
        jump = max(abs(on - below), abs(above - on))
        rows.append(report_dict(f"dims_{key}_branch_continuity", jump, 0.0,
                                1e-8))
    return rows


def cmd_verify(cfg, suite):
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}, pick one of "
                          + ", ".join(SUITES))
    parts = {"rng": _suite_rng, "wavelet": _suite_wavelet,
             "scale": _suite_scale, "exponent": _suite_exponent,
             "dims": _suite_dims}
    names = [s for s in SUITES if s != "all"] if suite == "all" else [suite]
    checks = []
    for s in names:
        checks.extend(parts[s](cfg))
    ok = all(row["pass"] for row in checks)
    doc = {"schema": 1, "kind": "verify-report", "suite": suite,
           "checks": checks, "pass": ok, "config": _config_echo(cfg)}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _emit(doc, out / f"verify_{suite}.json")
    return 0 if ok else 3


def cmd_rng_check(cfg):
    a = cfg.alpha
    x = sample_stable_range(StableParams(a),
                            derive_stream(cfg.seed, "rng", int(a * 10)),
                            0, cfg.draws)
    if a == 2.0:
        rows = [report_dict("gaussian_variance", float(np.var(x)), 2.0,
                            cfg.tol["var"] * 2.0)]
    else:
        rows = [report_dict(f"tail_slope_alpha_{a:g}",
                            tail_slope(x, *_tail_band(a)), -a,
                            cfg.tol["rng"])]
    ok = all(r["pass"] for r in rows)
    _emit({"schema": 1, "kind": "rng-check", "checks": rows, "pass": ok,
           "draws": cfg.draws, "alpha": a, "seed": cfg.seed}, None)
    return 0 if ok else 3


def cmd_wavelet_dump(cfg, direction):
    if direction not in ("primitive", "derivative"):
        raise ConfigError(f"direction must be primitive or derivative, "
                          f"got {direction!r}")
    h = cfg.H[0]
    psi = build_daubechies(cfg.psi_order)
    fw = fractionalize(psi, h, cfg.alpha, direction)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "wavelet.csv", "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(fw.x, fw.values):
            fh.write(f"{x:.17g},{v:.17g}\n")
    side = {"schema": 1, "kind": "fractional-wavelet", "direction": direction,
            "exponent": h, "alpha": cfg.alpha, "order": cfg.psi_order,
            "window": fw.window, "spacing": fw.spacing,
            "points": int(fw.x.size)}
    (out / "wavelet.json").write_text(
        json.dumps(side, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"wrote {out / 'wavelet.csv'} ({fw.x.size} samples)\n")
    return 0


def _build_parser():
    p = argparse.ArgumentParser(
        prog="stablesheet",
        description="Synthesize and verify linear fractional stable sheets.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        for k in _COERCE:
            sp.add_argument(f"--{k}")
        sp.add_argument("--tol", action="append", default=[],
                        metavar="NAME=VALUE")

    for name in ("simulate", "coeffs", "dims", "rng-check"):
        common(sub.add_parser(name))
    sp = sub.add_parser("analyze")
    common(sp)
    sp.add_argument("--input", required=True,
                    help="field CSV or the directory holding field.csv")
    sp = sub.add_parser("verify")
    common(sp)
    sp.add_argument("--suite", required=True)
    sp = sub.add_parser("wavelet-dump")
    common(sp)
    sp.add_argument("--direction", default="primitive")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    over = {k: getattr(args, k, None) for k in _COERCE}
    try:
        cfg = load_config(args.config, over)
        for item in args.tol:
            if "=" not in item:
                raise ConfigError(f"bad --tol {item!r}, want NAME=VALUE")
            k, v = item.split("=", 1)
            cfg.tol[k] = float(v)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "coeffs":
            return cmd_coeffs(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.input)
        if args.command == "dims":
            return cmd_dims(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        if args.command == "rng-check":
            return cmd_rng_check(cfg)
        return cmd_wavelet_dump(cfg, args.direction)
    except StableSheetError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except OSError as e:
        sys.stderr.write(f"io error: {e}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
