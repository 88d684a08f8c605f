"""Command-line front end: ``zollfrei <command> [options]``.

Every command writes ``report.json`` (schema ``zollfrei.report/1``) into
``<output root>/<command>``; the output root is ``--out``, else the
``ZOLLFREI_OUTPUT`` environment variable, else ``./zollfrei-output``.
Exit codes: 0 when every criterion passes, 1 on a failed criterion or a
stage error, 2 on configuration errors.
"""

import argparse
import configparser
import dataclasses
import hashlib
import json
import math
import os
import sys

import numpy as np
import scipy

from . import __version__
from .errors import ZollfreiError

REPORT_SCHEMA = "zollfrei.report/1"
PLOT_SCHEMA = "zollfrei.plotdata/1"
ENV_OUTPUT = "ZOLLFREI_OUTPUT"


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class RunConfig:
    metric: str = "g0"
    embedding: str = "flat"
    modes: int = 12
    grid_lat: int = 8
    grid_lon: int = 14
    fit_degree: int = 0
    samples: int = 0
    geodesics: int = 0
    seed: int = 0
    tol: float = 0.0
    workers: int = 1
    degree: int = 3
    norm: float = 0.05
    flow_time: float = 0.1
    expect: str = "none"
    q: str = ""
    scalar: bool = False
    source: str = ""

    def validate(self):
        for name in ("modes", "grid_lat", "grid_lon", "workers", "degree"):
            if getattr(self, name) < 1:
                raise ConfigError(f"field {name!r}: must be >= 1")
        for name in ("samples", "geodesics", "fit_degree"):
            if getattr(self, name) < 0:
                raise ConfigError(f"field {name!r}: must be >= 0")
        if self.modes < 4:
            raise ConfigError("field 'modes': the disk solver needs at least 4 modes")
        if self.grid_lat < 4 or self.grid_lon < 4:
            raise ConfigError("fields 'grid_lat'/'grid_lon': at least 4 per direction")
        if self.tol < 0 or not math.isfinite(self.tol):
            raise ConfigError("field 'tol': must be a finite positive number (0 selects the default)")
        if self.norm < 0:
            raise ConfigError("field 'norm': must be >= 0")
        if self.expect not in ("none", "flat", "selfdual", "nonselfdual", "zero"):
            raise ConfigError(f"field 'expect': unknown value {self.expect!r}")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, raw, where):
    f = _FIELDS.get(name)
    if f is None:
        raise ConfigError(f"{where}: unknown field {name!r}")
    typ = f.type if isinstance(f.type, type) else {"int": int, "float": float, "str": str,
                                                    "bool": bool}[f.type]
    try:
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int and isinstance(raw, float) and not raw.is_integer():
            raise ValueError(raw)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: field {name!r}: expected {typ.__name__}, got {raw!r}") from None


def _ini_line(text, key):
    for n, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return n
    return "?"


def load_config(path):
    """Read an INI (section ``[run]``) or JSON config file into a dict of typed fields."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    out = {}
    if path.endswith(".json"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        for k, v in data.items():
            out[k] = _coerce(k, v, path)
        return out
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    for sec in cp.sections():
        if sec != "run":
            raise ConfigError(f"{path}: line {_ini_line(text, '[' + sec + ']')}: unknown section [{sec}]")
        for k, v in cp.items(sec):
            out[k] = _coerce(k, v, f"{path}: line {_ini_line(text, k)}")
    return out


def effective_config(args):
    cfg = load_config(args.config) if args.config else {}
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = v
    rc = RunConfig(**cfg)
    rc.validate()
    return rc


def config_hash(cfg_dict):
    return hashlib.sha256(json.dumps(cfg_dict, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


class Report:
    def __init__(self, command, cfg):
        self.command = command
        self.cfg = dataclasses.asdict(cfg)
        self.results = {}
        self.criteria = []
        self.error = None

    def check(self, name, value, threshold, relation="<"):
        ops = {"<": lambda a, b: a < b, ">": lambda a, b: a > b, "==": lambda a, b: a == b,
               ">=": lambda a, b: a >= b}
        value = _clean(value)
        passed = bool(ops[relation](value, threshold))
        self.criteria.append({"name": name, "value": value, "relation": relation,
                              "threshold": threshold, "passed": passed})
        return passed

    @property
    def passed(self):
        return self.error is None and all(c["passed"] for c in self.criteria)

    def to_json(self):
        return _clean({"schema": REPORT_SCHEMA, "command": self.command, "config": self.cfg,
                       "config_hash": config_hash(self.cfg),
                       "versions": {"zollfrei": __version__, "numpy": np.__version__,
                                    "scipy": scipy.__version__},
                       "results": self.results, "criteria": self.criteria,
                       "error": self.error, "passed": self.passed})


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) if not isinstance(v, str) else v for v in r) + "\n")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _rng(cfg):
    return np.random.default_rng(cfg.seed)


def _points(cfg, n):
    from .manifold import random_point
    return list(random_point(_rng(cfg), n))


def _metric(cfg):
    from .metrics import metric_from_spec
    try:
        return metric_from_spec(cfg.metric)
    except ZollfreiError as exc:
        raise ConfigError(f"field 'metric': {exc}") from None


def _embedding(cfg):
    """``flat``, ``random`` (degree/norm/seed), ``divfree`` or a JSON file path."""
    from .embedding import TotallyRealEmbedding, random_embedding
    from .kahler import DivFreeField, random_divfree
    spec = cfg.embedding
    if spec == "flat":
        return TotallyRealEmbedding()
    if spec == "random":
        return random_embedding(_rng(cfg), cfg.degree, cfg.norm)
    if spec == "divfree":
        return random_divfree(_rng(cfg), cfg.degree, cfg.norm).embedding()
    if not os.path.exists(spec):
        raise ConfigError(f"field 'embedding': no such file {spec!r}")
    try:
        with open(spec) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}: line {exc.lineno}: {exc.msg}") from None
    if data.get("schema") != "zollfrei.embedding/1":
        raise ConfigError(f"{spec}: field 'schema': expected 'zollfrei.embedding/1'")
    try:
        if data.get("kind") == "curl":
            return DivFreeField.from_json(data).embedding()
        return TotallyRealEmbedding.from_json(data)
    except ZollfreiError as exc:
        raise ConfigError(f"{spec}: {exc}") from None


def _divfree(cfg):
    from .kahler import DivFreeField, random_divfree
    if cfg.embedding in ("flat", "random", "divfree"):
        return random_divfree(_rng(cfg), cfg.degree, cfg.norm)
    if not os.path.exists(cfg.embedding):
        raise ConfigError(f"field 'embedding': no such file {cfg.embedding!r}")
    with open(cfg.embedding) as fh:
        data = json.load(fh)
    try:
        return DivFreeField.from_json(data)
    except ZollfreiError as exc:
        raise ConfigError(f"{cfg.embedding}: {exc}") from None


def _anchor(cfg):
    from .manifold import Point4
    if not cfg.q:
        return _points(cfg, 1)[0]
    try:
        v = np.array([float(s) for s in cfg.q.split(",")])
    except ValueError:
        raise ConfigError(f"field 'q': expected six comma-separated numbers, got {cfg.q!r}") from None
    if v.shape != (6,):
        raise ConfigError("field 'q': expected six numbers x1,x2,x3,y1,y2,y3")
    return Point4(v[:3] / np.linalg.norm(v[:3]), v[3:] / np.linalg.norm(v[3:]))


def _solver_cfg(cfg):
    from .disks import SolverConfig
    kw = {"modes": cfg.modes}
    if cfg.tol:
        kw["tol"] = cfg.tol
    return SolverConfig(**kw)


def _grid(cfg):
    from .disks import QGrid
    return QGrid(cfg.grid_lat, cfg.grid_lon)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_flat_check(cfg, rep, out):
    from .disks import closed_form_error, flat_anchor, maslov_index, solve_disk
    from .distribution import involutivity_residual
    from .embedding import TotallyRealEmbedding
    from .geodesics import zollfrei_closure_test
    from .manifold import curvature_decompose
    from .metrics import g0
    tol = cfg.tol or 1e-6
    g = g0()
    n = cfg.samples or 50
    norms = np.array([curvature_decompose(g, p).norms() for p in _points(cfg, n)])
    rep.results["curvature_max"] = {"Wplus": norms[:, 0].max(), "Wminus": norms[:, 1].max(),
                                    "ricci0": norms[:, 2].max(), "scalar": norms[:, 3].max()}
    rep.check("scalar curvature", norms[:, 3].max(), tol)
    rep.check("|W+|", norms[:, 0].max(), tol)
    rep.check("|W-|", norms[:, 1].max(), tol)
    cl = zollfrei_closure_test(g, cfg.geodesics or 20, seed=cfg.seed, tol=tol)
    rep.results["closure_gaps"] = [r.endpoint_gap for r in cl]
    rep.check("closure gap", max(r.endpoint_gap for r in cl), tol)
    rep.check("period - 2 pi", max(abs(r.period_estimate - 2 * np.pi) for r in cl), tol)
    rng = _rng(cfg)
    inv = [involutivity_residual(g, p, float(z)) for p, z in
           zip(_points(cfg, 10), rng.uniform(-2, 2, 10))]
    rep.results["involutivity"] = inv
    rep.check("involutivity residual", max(inv), tol)
    P = TotallyRealEmbedding()
    errs, mas = [], []
    for _ in range(10):
        a = complex(*rng.uniform(-1, 1, 2))
        b = complex(*rng.uniform(-1, 1, 2))
        q, _ = flat_anchor(a, b)
        s = solve_disk(P, q, cfg=_solver_cfg(cfg))
        errs.append(closed_form_error(s, a, b))
        mas.append(maslov_index(s, P))
    rep.results["disk_closed_form_error"] = errs
    rep.results["maslov"] = mas
    rep.check("flat disk closed-form error", max(errs), 1e-8)
    rep.check("Maslov index", int(min(mas) == max(mas) == 4), 1, "==")


def cmd_curvature(cfg, rep, out):
    from .manifold import curvature_decompose, selfdual_residual
    g = _metric(cfg)
    pts = _points(cfg, cfg.samples or 20)
    rows = []
    for p in pts:
        wp, wm, r, s = curvature_decompose(g, p).norms()
        rows.append([*p.array, wp, wm, r, s])
    write_csv(os.path.join(out, "curvature.csv"),
              ["x1", "x2", "x3", "y1", "y2", "y3", "Wplus", "Wminus", "ricci0", "scalar"], rows)
    sd = selfdual_residual(g, pts)
    R = np.array(rows)
    rep.results.update(selfdual_residual=sd, max_Wplus=R[:, 6].max(), max_Wminus=R[:, 7].max(),
                       max_ricci0=R[:, 8].max(), max_scalar=R[:, 9].max())
    tol = cfg.tol or (1e-6 if cfg.expect == "flat" else 1e-3)
    if cfg.expect == "flat":
        rep.check("max curvature block", float(R[:, 6:].max()), tol)
    elif cfg.expect == "selfdual":
        rep.check("selfdual residual", sd, tol)
    elif cfg.expect == "nonselfdual":
        rep.check("selfdual residual", sd, tol, ">")


def cmd_geodesics(cfg, rep, out):
    from .geodesics import integrate_null_geodesic, zollfrei_closure_test
    from .manifold import Point4, Tangent4
    g = _metric(cfg)
    tol = cfg.tol or 1e-6
    cl = zollfrei_closure_test(g, cfg.samples or 20, seed=cfg.seed, tol=tol)
    traces = []
    for r in cl:
        Y = np.array(r.start)
        length = r.period_estimate if math.isfinite(r.period_estimate) else 2 * np.pi
        tr = integrate_null_geodesic(g, Point4(Y[:3], Y[3:6]), Tangent4.from_array(Y[6:]), length)
        traces.append(tr.to_json())
    write_json(os.path.join(out, "traces.json"), {"schema": PLOT_SCHEMA, "traces": traces})
    rep.results["closure"] = [{"gap": r.endpoint_gap, "period": r.period_estimate, "closed": r.closed}
                              for r in cl]
    rep.check("closed fraction", float(np.mean([r.closed for r in cl])), 1.0, "==")


def cmd_surfaces(cfg, rep, out):
    n = cfg.samples or 3
    rng = _rng(cfg)
    if cfg.embedding != "flat":
        # disk route: S_y sampled from the disk family of the embedding
        from .embedding import sample_sphere3
        from .reconstruction import beta_surface_from_point, surface_pair_intersections
        P = _embedding(cfg)
        ys = sample_sphere3(2 * n, rng)
        counts, chis = [], []
        for k in range(n):
            S1 = beta_surface_from_point(P, ys[2 * k], cfg=_solver_cfg(cfg))
            S2 = beta_surface_from_point(P, ys[2 * k + 1], cfg=_solver_cfg(cfg))
            counts.append(len(surface_pair_intersections(S1, S2, P, cfg=_solver_cfg(cfg))))
            chis += [S1.euler_characteristic(), S2.euler_characteristic()]
        rep.results.update(intersection_counts=counts, euler_characteristics=chis)
        rep.check("pairs meeting in exactly two points", int(all(c == 2 for c in counts)), 1, "==")
        rep.check("Euler characteristic 2", int(all(c == 2 for c in chis)), 1, "==")
        return
    # metric route: beta-surfaces integrated from the metric
    from .geodesics import integrate_beta_surface, surface_intersection_count
    g = _metric(cfg)
    pts = _points(cfg, 2 * n)
    counts = []
    for k in range(n):
        z1, z2 = rng.uniform(-2, 2, 2)
        S1 = integrate_beta_surface(g, pts[2 * k], float(z1))
        S2 = integrate_beta_surface(g, pts[2 * k + 1], float(z2))
        counts.append(surface_intersection_count(S1, S2))
    rep.results["intersection_counts"] = counts
    rep.check("pairs meeting in exactly two points", int(all(c == 2 for c in counts)), 1, "==")


def cmd_distribution(cfg, rep, out):
    from .distribution import involutivity_residual
    g = _metric(cfg)
    n = cfg.samples or 10
    zs = _rng(cfg).uniform(-2, 2, n)
    res = [involutivity_residual(g, p, float(z)) for p, z in zip(_points(cfg, n), zs)]
    rep.results["involutivity"] = res
    if cfg.expect in ("selfdual", "flat"):
        rep.check("max involutivity residual", max(res), cfg.tol or 1e-6)
    elif cfg.expect == "nonselfdual":
        rep.check("fraction above threshold", float(np.mean(np.array(res) > (cfg.tol or 1e-3))), 0.9, ">=")


def _boundary_rows(sol, n=128):
    """Real unit lift of the boundary (defined for every disk) and the disk in its standard chart."""
    th = 2 * np.pi * np.arange(n + 1) / n
    x = sol.boundary(th)
    w = sol.chart_standard(np.exp(1j * th))
    return [[t, *a, *v.real, *v.imag] for t, a, v in zip(th, x, w)]


_BOUNDARY_HEADER = ["theta", "x1", "x2", "x3", "x4", "re_w1", "re_w2", "re_w3", "im_w1", "im_w2", "im_w3"]


def cmd_disks_solve(cfg, rep, out):
    from .disks import maslov_index, solve_disk
    P = _embedding(cfg)
    q = _anchor(cfg)
    sol = solve_disk(P, q, cfg=_solver_cfg(cfg))
    write_json(os.path.join(out, "disk.json"), sol.to_json())
    write_csv(os.path.join(out, "boundary.csv"), _BOUNDARY_HEADER, _boundary_rows(sol))
    m = maslov_index(sol, P)
    rep.results.update(q=q.array, residual=sol.residual, boundary_residual=sol.boundary_residual,
                       iterations=sol.iterations, condition=sol.condition, maslov=m,
                       spectral_decay=sol.spectral_decay())
    rep.check("boundary residual", sol.boundary_residual, cfg.tol or 1e-9)
    rep.check("Maslov index", m, 4, "==")


def cmd_disks_family(cfg, rep, out):
    from .disks import build_family
    P = _embedding(cfg)
    fam = build_family(P, _grid(cfg), _solver_cfg(cfg), workers=cfg.workers)
    fam.save(os.path.join(out, "family"))
    rep.results.update(cells=len(fam.grid.cells()), solved=len(fam.disks),
                       failures={f"{i},{j}": str(e) for (i, j), e in sorted(fam.failures.items())},
                       max_residual=max((s.boundary_residual for s in fam.disks.values()), default=None),
                       max_iterations=max((s.iterations for s in fam.disks.values()), default=None))
    rep.check("holes", len(fam.holes()), 0, "==")


def cmd_disks_maslov(cfg, rep, out):
    from .disks import flat_partial_indices, maslov_index, solve_disk
    from .embedding import TotallyRealEmbedding
    P = _embedding(cfg)
    idx = []
    for q in _points(cfg, cfg.samples or 10):
        idx.append(maslov_index(solve_disk(P, q, cfg=_solver_cfg(cfg)), P))
    flat = solve_disk(TotallyRealEmbedding(), _points(cfg, 1)[0], cfg=_solver_cfg(cfg))
    part, defect = flat_partial_indices(flat)
    rep.results.update(maslov=idx, flat_partial_indices=part, flat_frame_defect=defect)
    rep.check("all Maslov indices equal 4", int(all(m == 4 for m in idx)), 1, "==")
    rep.check("flat partial indices (2,1,1)", int(tuple(part) == (2, 1, 1)), 1, "==")


def cmd_reconstruct(cfg, rep, out):
    from .disks import build_family
    from .manifold import selfdual_residual
    from .reconstruction import _fit_hook, reconstruct_metric_field
    P = _embedding(cfg)
    fam = build_family(P, _grid(cfg), _solver_cfg(cfg), workers=cfg.workers, hook=_fit_hook)
    rec = reconstruct_metric_field(fam, fits=fam.extras, L=cfg.fit_degree or None)
    fam.save(os.path.join(out, "family"))
    rec.save(os.path.join(out, "metric_grid.json"))
    sd = selfdual_residual(rec.metric, _points(cfg, cfg.samples or 10))
    rep.results.update(fit_degree=rec.L, fit_error=rec.fit_error, selfdual_residual=sd,
                       min_gap=min(f.gap for f in rec.fits.values()))
    rep.check("selfdual residual", sd, cfg.tol or 1e-3)


def cmd_certify(cfg, rep, out):
    from .reconstruction import roundtrip_certify
    P = _embedding(cfg)
    r = roundtrip_certify(P, grid=_grid(cfg), cfg=_solver_cfg(cfg), L=cfg.fit_degree or None,
                          n_curv=cfg.samples or 20, n_geod=cfg.geodesics or 50, seed=cfg.seed,
                          workers=cfg.workers)
    fam = r.pop("family", None)
    r.pop("reconstruction", None)
    if fam is not None:
        fam.save(os.path.join(out, "family"))
    rep.results.update(r)
    if "error" in r:
        rep.error = r["error"]
        return
    rep.check("selfdual residual", r["selfdual_residual"], 1e-3)
    rep.check("closure gap", r["max_closure_gap"], 1e-3)


def cmd_kahler_lin_test(cfg, rep, out):
    from .kahler import divergence_split, phi_pullback_linearized
    free, comp = divergence_split(cfg.degree)
    a = [phi_pullback_linearized(f) for f in free]
    b = [phi_pullback_linearized(f) for f in comp]
    rep.results.update(divfree_dimension=len(free), complement_dimension=len(comp),
                       max_divfree=max(a), min_complement=min(b))
    rep.check("linearized pullback on div-free basis", max(a), 1e-8)
    rep.check("linearized pullback on complement", min(b), 1e-4, ">")


def cmd_kahler_flow(cfg, rep, out):
    from .embedding import sample_sphere3
    from .kahler import holomorphic_flow, lie_derivative_omega, tangent_frame_s3
    f = _divfree(cfg)
    pts = sample_sphere3(cfg.samples or 200, _rng(cfg))
    fl = holomorphic_flow(f, cfg.flow_time, pts)
    fr = np.stack(tangent_frame_s3(pts[:20]), axis=-1).astype(complex)
    lie = float(np.max(np.abs(lie_derivative_omega(f, fl.state[:20], fr))))
    rep.results.update(max_divergence=f.max_divergence(), reverse_defect=fl.reverse_defect(),
                       pullback_norm=fl.pullback_norm(), lie_derivative=lie)
    write_json(os.path.join(out, "field.json"), f.to_json())
    rep.check("time reversibility", rep.results["reverse_defect"], 1e-8)
    rep.check("pullback norm", rep.results["pullback_norm"], 1e-6)
    rep.check("Lie derivative of Omega", lie, 1e-8)


def cmd_kahler_pullback(cfg, rep, out):
    from .kahler import phi_pullback_norm
    P = _embedding(cfg)
    v = phi_pullback_norm(P)
    rep.results["pullback_norm"] = v
    if cfg.expect == "zero":
        rep.check("pullback norm", v, cfg.tol or 1e-6)
    elif cfg.expect == "nonselfdual":
        rep.check("pullback norm", v, cfg.tol or 1e-4, ">")


def cmd_kahler_residue(cfg, rep, out):
    from .kahler import (FlowEmbedding, kahler_form_residue, kahler_scalar_curvature,
                         residue_exterior_derivative)
    if cfg.embedding == "divfree":
        P = FlowEmbedding(_divfree(cfg), cfg.flow_time)
    else:
        P = _embedding(cfg)
    q = _anchor(cfg)
    r = kahler_form_residue(P, q, _solver_cfg(cfg))
    d, _ = residue_exterior_derivative(P, q, cfg=_solver_cfg(cfg))
    rep.results.update(q=q.array, omega=r.omega, flat_angle=r.flat_angle(), real_leak=r.real_leak,
                       closedness=d)
    rep.check("closedness", d, 1e-5)
    if cfg.embedding == "flat":
        rep.check("angle to mu1 - mu2", r.flat_angle(), 1e-4)
    if cfg.scalar:
        s = kahler_scalar_curvature(P, q, _solver_cfg(cfg))
        rep.results["scalar_curvature"] = s
        rep.check("scalar curvature", abs(s), 1e-3)


def cmd_emit_plots(cfg, rep, out):
    """Turn stored artifacts of an earlier run into plotting files."""
    src = cfg.source
    if not src or not os.path.isdir(src):
        raise ConfigError(f"field 'source': no run directory {src!r}")
    rp = os.path.join(src, "report.json")
    if not os.path.exists(rp):
        raise ZollfreiError(f"missing artifacts: {rp}")
    with open(rp) as fh:
        prior = json.load(fh)
    made = []
    tp = os.path.join(src, "traces.json")
    if os.path.exists(tp):
        with open(tp) as fh:
            traces = json.load(fh)["traces"]
        for k, t in enumerate(traces):
            name = f"geodesic_{k:03d}.csv"
            write_csv(os.path.join(out, name), t["columns"], t["rows"])
            made.append(name)
        gaps = [c["gap"] for c in prior["results"].get("closure", [])]
        if gaps:
            lg = np.log10(np.maximum(gaps, 1e-17))
            counts, edges = np.histogram(lg, bins=np.arange(-17, 1))
            write_csv(os.path.join(out, "closure_gap_histogram.csv"), ["log10_gap_lo", "log10_gap_hi", "count"],
                      [[a, b, c] for a, b, c in zip(edges[:-1], edges[1:], counts)])
            made.append("closure_gap_histogram.csv")
    fp = os.path.join(src, "family")
    if os.path.isdir(fp):
        from .disks import FamilyGrid
        fam = FamilyGrid.load(fp)
        os.makedirs(os.path.join(out, "boundaries"), exist_ok=True)
        for (i, j), sol in sorted(fam.disks.items()):
            name = os.path.join("boundaries", f"disk_{i:04d}_{j:04d}.csv")
            write_csv(os.path.join(out, name), _BOUNDARY_HEADER, _boundary_rows(sol))
            made.append(name)
    bp = os.path.join(src, "boundary.csv")
    if os.path.exists(bp):
        made.append("boundary.csv (already in source)")
    if prior["command"] in ("certify", "reconstruct"):
        keys = ("selfdual_residual", "max_closure_gap", "fit_error", "norm", "min_fit_gap", "min_gap")
        summ = {"schema": PLOT_SCHEMA, "command": prior["command"],
                "config_hash": prior["config_hash"],
                "residuals": {k: prior["results"][k] for k in keys if k in prior["results"]}}
        write_json(os.path.join(out, "residual_summary.json"), summ)
        made.append("residual_summary.json")
    if not made:
        raise ZollfreiError(f"missing artifacts: nothing to plot in {src}")
    rep.results["files"] = made


COMMANDS = {
    "flat-check": cmd_flat_check,
    "curvature": cmd_curvature,
    "geodesics": cmd_geodesics,
    "surfaces": cmd_surfaces,
    "distribution": cmd_distribution,
    "disks solve": cmd_disks_solve,
    "disks family": cmd_disks_family,
    "disks maslov": cmd_disks_maslov,
    "reconstruct": cmd_reconstruct,
    "certify": cmd_certify,
    "kahler lin-test": cmd_kahler_lin_test,
    "kahler flow": cmd_kahler_flow,
    "kahler pullback": cmd_kahler_pullback,
    "kahler residue": cmd_kahler_residue,
    "emit-plots": cmd_emit_plots,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="INI ([run] section) or JSON config file")
    p.add_argument("--out", help=f"output root (default ${ENV_OUTPUT} or ./zollfrei-output)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--metric", help="g0, flat, product-nonround[:eps], perturbed[:seed[:eps]] or file:<path>")
    p.add_argument("--embedding", help="flat, random, divfree or a JSON file")
    p.add_argument("--modes", type=int)
    p.add_argument("--grid-lat", dest="grid_lat", type=int)
    p.add_argument("--grid-lon", dest="grid_lon", type=int)
    p.add_argument("--fit-degree", dest="fit_degree", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--geodesics", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--norm", type=float)
    p.add_argument("--flow-time", dest="flow_time", type=float)
    p.add_argument("--expect", choices=["none", "flat", "selfdual", "nonselfdual", "zero"])
    p.add_argument("--q", help="anchor x1,x2,x3,y1,y2,y3")
    p.add_argument("--scalar", action="store_true", default=None)
    p.add_argument("--from", dest="source", help="run directory for emit-plots")


def build_parser():
    parser = argparse.ArgumentParser(prog="zollfrei", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("flat-check", "curvature", "geodesics", "surfaces", "distribution",
                 "reconstruct", "certify", "emit-plots"):
        _common(sub.add_parser(name))
    for group, actions in (("disks", ("solve", "family", "maslov")),
                           ("kahler", ("lin-test", "flow", "pullback", "residue"))):
        gp = sub.add_parser(group)
        gs = gp.add_subparsers(dest="action", required=True)
        for a in actions:
            _common(gs.add_parser(a))
    return parser


def output_root(args):
    return args.out or os.environ.get(ENV_OUTPUT) or os.path.join(os.getcwd(), "zollfrei-output")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    name = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        print(f"zollfrei: config error: {exc}", file=sys.stderr)
        return 2
    out = os.path.join(output_root(args), name.replace(" ", "-"))
    os.makedirs(out, exist_ok=True)
    rep = Report(name, cfg)
    try:
        COMMANDS[name](cfg, rep, out)
    except ConfigError as exc:
        print(f"zollfrei: config error: {exc}", file=sys.stderr)
        return 2
    except (ZollfreiError, np.linalg.LinAlgError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    data = rep.to_json()
    write_json(os.path.join(out, "report.json"), data)
    for c in rep.criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']!r} {c['relation']} {c['threshold']!r}")
    if rep.error:
        print(f"ERROR {rep.error}")
    print(f"report: {os.path.join(out, 'report.json')}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
