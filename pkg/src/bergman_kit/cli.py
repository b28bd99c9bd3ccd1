"""Command-line front end (``bergman-kit``).

Every numerical knob can come from a JSON config file and be overridden by a
flag.  Reports are JSON (full evidence, including the resolved config) or CSV
for ray profiles.  Files are written atomically.

Exit codes: 0 success, 2 verdict failure, 1 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from . import hilbert_schmidt as hs
from . import inequality_lab as lab
from . import kernel as kern
from .errors import BergmanKitError, NotInClass
from .holomap import evaluate, parse_map, self_map_check
from .metric import DEFAULT_R, DEFAULT_RESOLUTION, MetricConfig, geodesic_distance
from .quadrature import DEFAULT_ORDER, DEFAULT_PANELS, DEFAULT_R_MAX, build_radial_rule
from .weights import WeightSpec, class_membership_report, eval_weight, make_weight

EXAMPLE_PHI = "(1+z^2)/2"
EXAMPLE_EPSILON = 1.0 / 512.0
EXAMPLE_RADII = (0.9, 0.99, 0.999)


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


# -- configuration ----------------------------------------------------------------

@dataclass
class QuadratureConfig:
    panels: int = DEFAULT_PANELS
    order: int = DEFAULT_ORDER
    r_max: float = DEFAULT_R_MAX
    n_theta: int = hs.HSRule().n_theta


@dataclass
class RunConfig:
    weight: WeightSpec = field(default_factory=WeightSpec)
    phi: str | None = None
    psi: str | None = None
    moments_N: int | None = None        # None: the large cached table
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    seed: int = 0
    threads: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise UsageError("config: top level must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for k in d:
            if k not in known:
                raise UsageError(f"config: unknown field {k!r}")
        cfg = cls()
        cfg.weight = _sub(WeightSpec, d.get("weight", {}), "weight")
        cfg.quadrature = _sub(QuadratureConfig, d.get("quadrature", {}), "quadrature")
        cfg.metric = _sub(MetricConfig, d.get("metric", {}), "metric")
        for k in ("phi", "psi"):
            if d.get(k) is not None:
                if not isinstance(d[k], str):
                    raise UsageError(f"config: {k} must be a map expression string")
                setattr(cfg, k, d[k])
        for k in ("moments_N", "seed", "threads"):
            if d.get(k) is not None:
                if not isinstance(d[k], int) or isinstance(d[k], bool):
                    raise UsageError(f"config: {k} must be an integer")
                setattr(cfg, k, d[k])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        q = self.quadrature
        if q.panels < 1 or q.order < 2:
            raise UsageError("config: quadrature.panels and quadrature.order must be positive")
        if not 0.0 < q.r_max < 1.0:
            raise UsageError("config: quadrature.r_max must lie in (0, 1)")
        if q.n_theta < 8 or q.n_theta % 4:
            raise UsageError("config: quadrature.n_theta must be a multiple of 4, at least 8")
        if self.moments_N is not None and self.moments_N < 16:
            raise UsageError("config: moments_N must be at least 16")
        if self.threads is not None and self.threads < 1:
            raise UsageError("config: threads must be positive")
        for k in ("phi", "psi"):
            if getattr(self, k) is not None:
                try:
                    parse_map(getattr(self, k))
                except BergmanKitError as exc:
                    raise UsageError(f"config: {k}: {exc}") from exc

    def to_dict(self) -> dict:
        return {"weight": dataclasses.asdict(self.weight), "phi": self.phi, "psi": self.psi,
                "moments_N": self.moments_N, "quadrature": dataclasses.asdict(self.quadrature),
                "metric": {"resolution": self.metric.resolution, "R": self.metric.R},
                "seed": self.seed, "threads": self.threads}


def _sub(kind, d, name):
    if not isinstance(d, dict):
        raise UsageError(f"config: {name} must be an object")
    known = {f.name for f in dataclasses.fields(kind)}
    for k in d:
        if k not in known:
            raise UsageError(f"config: unknown field {name}.{k}")
    try:
        return kind(**d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config: {name}: {exc}") from exc


def resolve_threads(flag: int | None, cfg: RunConfig) -> int:
    """Thread budget recorded in reports; the numerical kernels themselves run serially."""
    if flag is not None:
        return flag
    if cfg.threads is not None:
        return cfg.threads
    env = os.environ.get("BERGMAN_KIT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"BERGMAN_KIT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("BERGMAN_KIT_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def load_config(args) -> RunConfig:
    d = {}
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
    cfg = RunConfig.from_dict(d)
    wd = dataclasses.asdict(cfg.weight)
    for flag, key in (("alpha", "alpha"), ("A", "A"), ("tau_scale", "tau_scale"),
                      ("tau_exponent", "tau_exponent")):
        v = getattr(args, flag, None)
        if v is not None:
            wd[key] = v
    try:
        cfg.weight = WeightSpec(**wd)
    except ValueError as exc:
        raise UsageError(f"weight: {exc}") from exc
    res = args.metric_resolution if args.metric_resolution is not None else cfg.metric.resolution
    R = args.metric_R if args.metric_R is not None else cfg.metric.R
    try:
        cfg.metric = MetricConfig(res, R)
    except ValueError as exc:
        raise UsageError(f"metric: {exc}") from exc
    for k in ("phi", "psi", "seed", "moments_N"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    cfg.threads = resolve_threads(args.threads, cfg)
    cfg.validate()
    return cfg


def _parse_point(s: str) -> complex:
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"not a complex number: {s!r}") from None


def _map(cfg, name, required=True):
    expr = getattr(cfg, name)
    if expr is None:
        if required:
            raise UsageError(f"--{name} (or config key {name!r}) is required")
        return None
    return parse_map(expr)


def _table(cfg: RunConfig, w):
    if cfg.moments_N is None:
        return kern.cached_moments(w)
    q = cfg.quadrature
    return kern.build_moments(w, cfg.moments_N, build_radial_rule(q.panels, q.order, q.r_max))


def _hs_rule(cfg: RunConfig) -> hs.HSRule:
    return hs.HSRule(n_theta=cfg.quadrature.n_theta)


# -- output -------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("Infinity" if x > 0 else "-Infinity" if x < 0 else "NaN")
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    return x


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _profile_rows(report: dict):
    rows = []
    for prof in _find_profiles(report):
        zeta = complex(*prof["zeta"])
        ang = math.atan2(zeta.imag, zeta.real)
        for r, v in zip(prof["radii"], prof["values"]):
            rows.append((ang, r, v))
    return rows


def _find_profiles(obj):
    if isinstance(obj, dict):
        if {"zeta", "radii", "values"} <= obj.keys():
            yield obj
        else:
            for v in obj.values():
                yield from _find_profiles(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _find_profiles(v)


def emit(report: dict, out: str | None, fmt: str) -> None:
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["ray_angle", "radius", "value"])
        rows = _profile_rows(_jsonable(report))
        if not rows:
            raise UsageError("this report has no ray profiles to write as CSV")
        for row in rows:
            wr.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
    else:
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------------

def cmd_weights(args, cfg):
    w = make_weight(cfg.weight)
    radii = [float(x) for x in (args.r or [0.0, 0.5, 0.9, 0.99])]
    rep = {"weight": dataclasses.asdict(cfg.weight),
           "values": {repr(r): eval_weight(w, r) for r in radii}}
    try:
        rep["membership"] = class_membership_report(w)
        rep["in_class"] = True
        ok = True
    except NotInClass as exc:
        rep["membership"] = {"violated": exc.condition, "message": str(exc)}
        rep["in_class"] = False
        ok = False
    return rep, ok


def cmd_kernel(args, cfg):
    w = make_weight(cfg.weight)
    t = _table(cfg, w)
    z, v = _parse_point(args.z), _parse_point(args.w if args.w is not None else args.z)
    kv = kern.kernel_value(t, z, v)
    return {"z": z, "w": v, "log_scale": kv.log_scale, "mantissa": kv.mantissa,
            "normalized": complex(np.asarray(kern.kernel_normalized(t, z, v)).ravel()[0]),
            "skwarczynski": float(np.asarray(kern.skwarczynski(t, z, v)).ravel()[0]),
            "table_n_max": t.n_max}, True


def cmd_dist(args, cfg):
    w = make_weight(cfg.weight)
    z, v = _parse_point(args.from_), _parse_point(args.to)
    g = geodesic_distance(w, z, v, cfg.metric.resolution)
    rep = g.to_dict()
    rep.update({"from": z, "to": v, "width": g.width,
                "rho": {"lower": -math.expm1(-g.lower), "value": -math.expm1(-g.estimate),
                        "upper": -math.expm1(-g.upper)},
                "below_R": g.estimate < cfg.metric.R})
    return rep, True


def _rays(args):
    if args.rays is None:
        return None
    return dg.default_rays(args.rays)


def cmd_diag(args, cfg):
    w = make_weight(cfg.weight)
    phi = _map(cfg, "phi")
    rays = _rays(args)
    if args.kind == "bounded":
        rep = dg.boundedness_indicator(w, phi)
        return rep, rep["bounded"]
    if args.kind == "compact":
        rep = dg.compactness_verdict(w, phi, rays)
        return rep, True
    if args.kind == "diff":
        psi = _map(cfg, "psi")
        prof = dg.difference_profile(w, phi, psi, rays, resolution=cfg.metric.resolution)
        return prof.to_dict(), True
    u = parse_map(args.u) if args.u else None
    delta = args.delta if args.delta is not None else w.m_tau / 2.0
    est = dg.carleson_box_ratio(w, u, phi, args.p, _parse_point(args.xi), delta,
                                args.samples, cfg.seed)
    rep = est.to_dict()
    rep.update({"xi": _parse_point(args.xi), "delta": delta, "p": args.p})
    return rep, True


def cmd_hs(args, cfg):
    w = make_weight(cfg.weight)
    t = _table(cfg, w)
    rule = _hs_rule(cfg)
    phi = _map(cfg, "phi")
    if args.kind == "weighted":
        u = parse_map(args.u) if args.u else None
        return hs.hs_weighted(w, u, phi, rule, t).to_dict(), True
    psi = _map(cfg, "psi")
    if args.kind == "diff":
        rep = hs.hs_difference(w, phi, psi, rule, t).to_dict()
        if args.basis:
            rep["basis"] = hs.hs_difference_basis(w, phi, psi, args.basis, rule, t).to_dict()
        return rep, True
    if args.kind == "ratio":
        return hs.hs_equiv_ratio(w, phi, psi, rule, cfg.metric.resolution, t), True
    if args.kind == "metric":
        return {"convention": args.convention,
                "value": hs.hs_metric(w, phi, psi, rule, args.convention, t)}, True
    grid = np.linspace(0.0, 1.0, int(round(1.0 / args.step)) + 1)
    return hs.path_scan(w, phi, psi, grid, rule, t), True


def cmd_probe(args, cfg):
    w = make_weight(cfg.weight)
    spec = lab.SampleSpec(args.samples, args.r_max, cfg.seed)
    if args.id == "all":
        suite = lab.run_all(w, cfg.seed, args.samples, cfg.metric.resolution, cfg.metric.R)
        return suite.to_dict(), suite.passed
    try:
        pid = lab.ProbeId(args.id)
    except ValueError:
        raise UsageError(f"unknown probe id {args.id!r}; choose from "
                         + ", ".join(p.value for p in lab.ProbeId) + " or all") from None
    rep = lab.run_probe(w, pid, spec, None, cfg.metric.resolution, cfg.metric.R)
    return rep.to_dict(), rep.passed


def example5(epsilon: float = EXAMPLE_EPSILON, resolution: int = DEFAULT_RESOLUTION,
             n_rays: int = dg.N_RAYS) -> tuple[dict, bool]:
    """Two non-compact composition operators whose difference is compact."""
    w = make_weight(WeightSpec(A=1.0, alpha=1.0))
    phi = parse_map(EXAMPLE_PHI)
    psi = parse_map(f"{EXAMPLE_PHI} + {epsilon!r}*(1-z^2)^5")
    for m in (phi, psi):
        self_map_check(m)
    rays = dg.default_rays(n_rays)
    checks, evidence = {}, {}
    limit = math.exp(0.5)
    for name, m in (("phi", phi), ("psi", psi)):
        b = dg.boundedness_indicator(w, m)
        c = dg.compactness_verdict(w, m, rays)
        lims = {round(math.degrees(math.atan2(p.zeta.imag, p.zeta.real)), 6): p.extrapolated_limit
                for p in c["profiles"]}
        at_pm1 = [lims[0.0], lims[180.0]]
        others = [v for k, v in lims.items() if k not in (0.0, 180.0)]
        checks[f"{name}.bounded"] = b["bounded"]
        checks[f"{name}.limits_at_pm1"] = all(abs(x / limit - 1.0) < 0.02 for x in at_pm1)
        checks[f"{name}.other_rays_vanish"] = all(x < 1e-6 for x in others)
        checks[f"{name}.not_compact"] = not c["compact"]
        evidence[name] = {"boundedness": b, "compactness": c, "limits_by_angle_deg": lims}
    radial = [dg.difference_functional(w, phi, psi, r, resolution) for r in EXAMPLE_RADII]
    vals = [f.value for f in radial]
    checks["difference.decreasing"] = all(b < a for a, b in zip(vals, vals[1:]))
    checks["difference.tenfold_drop"] = vals[-1] * 10.0 <= vals[0]
    prof = dg.difference_profile(w, phi, psi, dg.default_rays(8), resolution=resolution)
    checks["difference.compact"] = prof.compact_evidence
    evidence["difference"] = {"radii": list(EXAMPLE_RADII),
                              "values": [dataclasses.asdict(f) for f in radial],
                              "profile": prof}
    ok = all(checks.values())
    return {"maps": {"phi": EXAMPLE_PHI, "psi": f"{EXAMPLE_PHI} + {epsilon!r}*(1-z^2)^5"},
            "epsilon": epsilon, "expected_limit_at_pm1": limit, "checks": checks,
            "verdict": "PASS" if ok else "FAIL", "evidence": evidence}, ok


def cmd_example5(args, cfg):
    return example5(args.epsilon, cfg.metric.resolution)


# -- parser -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("shared options")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--out", help="output file (default: stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--metric-resolution", dest="metric_resolution", type=int)
    g.add_argument("--metric-R", dest="metric_R", type=float)
    g.add_argument("--threads", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--A", dest="A", type=float)
    g.add_argument("--tau-scale", dest="tau_scale", type=float)
    g.add_argument("--tau-exponent", dest="tau_exponent", type=float,
                   help="override the tau exponent (builds non-members for controls)")
    g.add_argument("--moments-N", dest="moments_N", type=int)
    g.add_argument("--phi")
    g.add_argument("--psi")

    p = _Parser(prog="bergman-kit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("weights", parents=[common], help="weight values and class membership")
    s.add_argument("action", choices=("check",))
    s.add_argument("--r", type=float, action="append", help="radius to tabulate (repeatable)")
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("kernel", parents=[common], help="reproducing kernel values")
    s.add_argument("action", choices=("eval",))
    s.add_argument("--z", required=True)
    s.add_argument("--w")
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("dist", parents=[common], help="geodesic distance bracket")
    s.add_argument("--from", dest="from_", required=True)
    s.add_argument("--to", required=True)
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("diag", parents=[common], help="composition operator diagnostics")
    s.add_argument("kind", choices=("bounded", "compact", "diff", "carleson"))
    s.add_argument("--rays", type=int, help="number of equally spaced rays")
    s.add_argument("--u", help="multiplier expression for carleson")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--xi", default="0.9")
    s.add_argument("--delta", type=float)
    s.add_argument("--samples", type=int, default=1_000_000)
    s.set_defaults(func=cmd_diag)

    s = sub.add_parser("hs", parents=[common], help="Hilbert-Schmidt quantities")
    s.add_argument("kind", choices=("weighted", "diff", "ratio", "metric", "path"))
    s.add_argument("--u", help="multiplier expression for weighted")
    s.add_argument("--basis", type=int, help="also run the basis method with this N")
    s.add_argument("--convention", choices=("sum", "sqrt"), default="sum")
    s.add_argument("--step", type=float, default=0.125, help="s-grid spacing for path")
    s.set_defaults(func=cmd_hs)

    s = sub.add_parser("probe", parents=[common], help="inequality probes")
    s.add_argument("--id", default="all")
    s.add_argument("--samples", type=int, default=lab.DEFAULT_COUNT)
    s.add_argument("--r-max", dest="r_max", type=float)
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("example5", parents=[common],
                       help="non-compact maps with a compact difference")
    s.add_argument("--epsilon", type=float, default=EXAMPLE_EPSILON)
    s.set_defaults(func=cmd_example5)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args)
        t0 = time.perf_counter()
        report, ok = args.func(args, cfg)
        if args.format == "json":
            report = {"command": args.command, "config": cfg.to_dict(), "result": report}
            if args.command != "probe":
                # probe reports stay byte-identical between runs
                report["elapsed_s"] = time.perf_counter() - t0
        emit(report, args.out, args.format)
    except UsageError as exc:
        print(f"bergman-kit: error: {exc}", file=sys.stderr)
        return 1
    except (BergmanKitError, ValueError) as exc:
        print(f"bergman-kit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
