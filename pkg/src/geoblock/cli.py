"""Command-line front end: ``geoblock <operation> --space FILE ...``.

Every operation writes one artifact (JSON, or CSV for ``growth``) to
``--out`` or stdout and prints a one-line summary. Artifacts carry no
timestamps or worker counts, so identical inputs give identical bytes.
Errors exit nonzero with a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .apartment import ApartmentGroup, TypedPoint
from .config import (ConfigError, SpaceSpec, exact, graph_inj, load_experiment, load_space,
                     parse_horizon, parse_point)
from .core import (BlockingCertificate, BlockingError, DisjointFamily, Hit, PairReport,
                   blocking_lower_bound, classify_pair, min_blockers, verify_blocking)
from .entropy import (EntropyEstimate, GrowthSeries, counting_inequality_check, graph_series,
                      light_projection, mane_estimate, torus_series)
from .graphs import QuotientGraph
from .revolution import RevolutionMetric, SurfacePoint, scan_cross_blocking, shoot_light
from .torus import TorusSpace

SCHEMA_ID = "geoblock/1"

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": SCHEMA_ID,
    "title": "geoblock artifact",
    "type": "object",
    "required": ["schema", "kind", "space", "params", "result"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "kind": {"enum": ["rays", "certificate", "failure", "pair-report", "growth",
                          "entropy", "scan"]},
        "space": {"type": "object", "required": ["kind", "params"],
                  "properties": {"kind": {"enum": ["torus", "graph", "apartment", "revolution"]},
                                 "params": {"type": "object",
                                            "additionalProperties": {"type": "string"}}}},
        "params": {"type": "object"},
        "result": {"type": "object"},
    },
    "$defs": {
        "ray": {"type": "object", "required": ["id", "space", "source", "target", "length", "path"],
                "properties": {"id": {"type": "string"}, "length": {"type": "number"},
                               "path": {"type": "object", "required": ["kind"]}}},
        "hit": {"type": "object", "required": ["blocker", "t", "frac"],
                "properties": {"blocker": {"type": "integer"}, "t": {"type": "number"},
                               "frac": {"type": ["string", "number"]}}},
        "certificate": {"type": "object",
                        "required": ["kind", "tolerance", "blockers", "used", "hits"],
                        "properties": {"hits": {"type": "object",
                                                "additionalProperties": {"$ref": "#/$defs/hit"}},
                                       "rays": {"type": "array",
                                                "items": {"$ref": "#/$defs/ray"}}}},
        "pair-report": {"type": "object",
                        "required": ["kind", "x", "y", "horizon", "m_T", "lower_bound",
                                     "upper_bound", "classification"]},
    },
}


class UsageError(Exception):
    pass


# -- artifacts -----------------------------------------------------------------

def _clean(obj: Any) -> Any:
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def artifact(kind: str, spec: SpaceSpec, params: dict, result: dict) -> dict:
    return {"schema": SCHEMA_ID, "kind": kind, "space": spec.to_json(),
            "params": {k: str(v) for k, v in sorted(params.items()) if v is not None},
            "result": result}


def _emit(text: str, out: str | None, summary: str) -> None:
    if out:
        Path(out).write_text(text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


# -- operations ----------------------------------------------------------------

class Run:
    """Parsed inputs shared by the operations."""

    def __init__(self, spec: SpaceSpec, values: dict[str, Any], workers: int):
        self.spec = spec
        self.space = spec.build()
        self.values = values
        self.workers = workers

    def point(self, key: str):
        v = self.values.get(key)
        if v is None:
            raise UsageError(f"--{key} is required")
        return parse_point(self.space, v)

    def horizon(self, key: str = "T"):
        v = self.values.get(key)
        if v is None:
            raise UsageError(f"--{key} is required")
        T = parse_horizon(self.space, v)
        if not T > 0:
            raise UsageError(f"--{key} must be positive")
        return T

    @property
    def tol(self) -> float:
        v = self.values.get("tol")
        if v is not None:
            return float(v)
        return self.space.tube_tol if isinstance(self.space, RevolutionMetric) else 0.0

    def params(self, *keys: str) -> dict:
        return {k: self.values.get(k) for k in keys}

    def light(self, x, y, T):
        if isinstance(self.space, RevolutionMetric):
            return shoot_light(self.space, x, y, T, workers=self.workers)
        if isinstance(self.space, ApartmentGroup):
            raise UsageError("apartments enumerate through 'block'")
        return self.space.enumerate_light(x, y, T)


def op_enumerate(run: Run) -> tuple[str, str, int]:
    x, y, T = run.point("x"), run.point("y"), run.horizon()
    if run.values.get("all"):
        if not hasattr(run.space, "enumerate_geodesics"):
            raise UsageError("--all is available on tori and graphs")
        rays = run.space.enumerate_geodesics(x, y, T)
    else:
        rays = run.light(x, y, T)
    result = {"count": len(rays), "continuum": bool(getattr(rays, "continuum", False)),
              "rays": [r.to_json() for r in rays]}
    label = "n_T" if run.values.get("all") else "m_T"
    text = dumps(artifact("rays", run.spec, run.params("x", "y", "T", "all"), result))
    return text, f"{label} = {len(rays)} (horizon {T})", 0


def _blockers(run: Run, x, y):
    s = run.space
    if isinstance(s, TorusSpace):
        return s.midpoint_blocking_set(x, y)
    if isinstance(s, QuotientGraph):
        return s.type_blocking_set(x, y)
    if isinstance(s, RevolutionMetric):
        if not s.is_round or not s.same_point(x, y):
            raise UsageError("revolution blockers are constructed for x = y on the round sphere")
        return [SurfacePoint.from_xyz(-x.xyz)]
    raise UsageError(f"no blocker construction for {run.spec.kind}")


def _certificate_result(run: Run, cert, rays, T) -> dict:
    out = cert.to_json(with_paths=False)
    out["passed"] = bool(cert)
    out["m_T"] = len(rays)
    if rays:
        fam = blocking_lower_bound(list(rays), tol=run.tol)
        out["lower_bound"] = fam.to_json()
    out["horizon"] = str(T)
    return out


def op_block(run: Run) -> tuple[str, str, int]:
    x, y, T = run.point("x"), run.point("y"), run.horizon()
    params = run.params("x", "y", "T", "tol")
    if isinstance(run.space, ApartmentGroup):
        cert = run.space.verify_apartment_blocking(x, y, T)
        result = cert.to_json(with_paths=False)
        result.update(passed=True, m_T=len(cert.hits), horizon=str(T))
        text = dumps(artifact("certificate", run.spec, params, result))
        return text, f"{len(cert.blockers)} midpoint types block {len(cert.hits)} rays (horizon {T})", 0
    rays = run.light(x, y, T)
    blockers = _blockers(run, x, y)
    if run.values.get("minimize") and rays:
        cert = min_blockers(list(rays), blockers, run.tol)
    else:
        cert = verify_blocking(blockers, list(rays), run.tol, workers=run.workers)
    if not cert:
        text = dumps(artifact("failure", run.spec, params, cert.to_json()))
        return text, f"blocking failed on ray {cert.ray.rid}", 1
    result = _certificate_result(run, cert, rays, T)
    lower = result.get("lower_bound", {}).get("size", 0)
    text = dumps(artifact("certificate", run.spec, params, result))
    return text, f"b(x,y) <= {cert.size} (horizon {T}), lower bound {lower}", 0


def _blockers_from(run: Run) -> list:
    if run.values.get("certificate"):
        data = json.loads(Path(run.values["certificate"]).read_text())
        pts = data["result"]["blockers"]
        return [_point_from_json(run.space, p) for p in pts]
    text = run.values.get("blockers")
    if text is None:
        raise UsageError("--blockers or --certificate is required")
    return [parse_point(run.space, t) for t in text.split(";") if t.strip()]


def _point_from_json(space, p):
    if isinstance(space, TorusSpace):
        return space.point(tuple(exact(c) for c in p))
    if isinstance(space, QuotientGraph):
        if "vertex" in p:
            return space.point(int(p["vertex"]))
        return space.point((int(p["edge"]), exact(p["offset"])))
    if isinstance(space, RevolutionMetric):
        return SurfacePoint(float(p["r"]), float(p["phi"]))
    if isinstance(space, ApartmentGroup):
        if isinstance(p, dict):
            return TypedPoint(tuple(exact(c) for c in p["position"]), tuple(exact(c) for c in p["type"]))
        return tuple(exact(c) for c in p)
    raise UsageError("cannot read blockers for this space")


def op_verify(run: Run) -> tuple[str, str, int]:
    x, y, T = run.point("x"), run.point("y"), run.horizon()
    blockers = _blockers_from(run)
    rays = run.light(x, y, T)
    cert = verify_blocking(blockers, list(rays), run.tol, workers=run.workers)
    params = run.params("x", "y", "T", "tol", "blockers")
    if not cert:
        text = dumps(artifact("failure", run.spec, params, cert.to_json()))
        return text, f"not blocking: ray {cert.ray.rid} is unblocked", 1
    text = dumps(artifact("certificate", run.spec, params, _certificate_result(run, cert, rays, T)))
    return text, f"verified: {len(blockers)} blockers cover {len(rays)} rays (horizon {T})", 0


def op_classify(run: Run) -> tuple[str, str, int]:
    x, y, T = run.point("x"), run.point("y"), run.horizon()
    rays = run.light(x, y, T)
    blockers = None
    try:
        blockers = _blockers(run, x, y)
    except UsageError:
        pass
    rep = classify_pair(run.space, x, y, T, run.tol, rays=rays, blockers=blockers)
    text = dumps(artifact("pair-report", run.spec, run.params("x", "y", "T", "tol"), rep.to_json()))
    return text, f"{rep.classification}, m_T = {rep.m_T}", 0


def _series(run: Run):
    x, y = run.point("x"), run.point("y")
    Tmax = run.horizon("Tmax")
    if isinstance(run.space, TorusSpace):
        step = exact(run.values.get("step") or "1")
        return torus_series(run.space, x, y, Tmax, step)
    if isinstance(run.space, QuotientGraph):
        step = exact(run.values.get("step") or "1")
        n = int(Tmax / step)
        return graph_series(run.space, x, y, [k * step for k in range(1, n + 1)],
                            graph_inj(run.spec))
    raise UsageError("growth series are available on tori and graphs")


def op_growth(run: Run) -> tuple[str, str, int]:
    s = _series(run)
    return s.to_csv(), f"{len(s.horizons)} horizons, n_T = {s.n[-1]} at T = {s.horizons[-1]:g}", 0


def op_entropy(run: Run) -> tuple[str, str, int]:
    s = _series(run)
    est = mane_estimate(s)
    result: dict[str, Any] = {"estimate": est.to_json(), "series": {
        "T": list(s.horizons), "n": list(s.n), "m": list(s.m)}}
    if isinstance(run.space, QuotientGraph):
        g = run.space.growth_oracle()
        result["oracle"] = {"growth": g, "log_growth": math.log(g)}
        summary = f"estimate {est.estimate:.4g} vs oracle log {g:.6g} = {math.log(g):.4f}"
        if s.inj:
            rep = counting_inequality_check(s, strict=False)
            # graphs are not manifolds: the inequality is expected to fail
            result["counting_inequality"] = dict(rep.to_json(), applicable=False)
    else:
        summary = f"estimate {est.estimate:.4g} (ratio {est.ratio:.4g}), tail decreasing: {est.tail_decreasing}"
        proj = None
        if run.values.get("fibers"):
            proj = light_projection(run.space.enumerate_geodesics(s.x, s.y, s.horizons[-1]))
        rep = counting_inequality_check(s, proj, strict=False)
        result["counting_inequality"] = dict(rep.to_json(), applicable=True)
    text = dumps(artifact("entropy", run.spec, run.params("x", "y", "Tmax", "step"), result))
    failed = result.get("counting_inequality", {}).get("applicable") and \
        not result["counting_inequality"]["holds"]
    return text, summary, 1 if failed else 0


def op_scan(run: Run) -> tuple[str, str, int]:
    if not isinstance(run.space, RevolutionMetric):
        raise UsageError("scan runs on revolution surfaces")
    grid = int(run.values.get("grid") or 12)
    T = run.horizon() if run.values.get("T") else 2 * math.pi
    limit = int(run.values.get("limit") or 1)
    res = scan_cross_blocking(run.space, grid, T, limit=limit, workers=run.workers)
    result = {"grid": grid, "candidates": res.candidates, "diameter": res.diameter,
              "violations": [r.to_json() for r in res.reports]}
    text = dumps(artifact("scan", run.spec, run.params("grid", "T", "limit", "seed"), result))
    return text, f"{len(res.reports)} cross-blocking-violated pairs ({res.candidates} screened)", 0


OPS = {"enumerate": op_enumerate, "block": op_block, "verify": op_verify,
       "classify": op_classify, "growth": op_growth, "entropy": op_entropy, "scan": op_scan}


# -- round trip ----------------------------------------------------------------

def _family_from(d: dict | None) -> DisjointFamily | None:
    if d is None:
        return None
    gap = math.inf if d["pairwise_gap"] is None else d["pairwise_gap"]
    return DisjointFamily(tuple(d["rays"]), gap, d["exact"], d["maximum"])


def _report_from(space, d: dict) -> PairReport:
    upper = None if d["upper_bound"] == "unknown" else d["upper_bound"]
    return PairReport(_point_from_json(space, d["x"]), _point_from_json(space, d["y"]),
                      d["horizon"], d["m_T"], d["lower_bound"], upper, d["classification"],
                      d["distance"], d["diameter"], _family_from(d["family"]), d["continuum"])


def _frac(v):
    return exact(v) if isinstance(v, str) else v


def load_artifact(text: str):
    """Parse an artifact back into the domain objects that produced it.

    CSV growth series give a GrowthSeries; JSON artifacts give a
    BlockingCertificate (without its rays), a PairReport, an EntropyEstimate,
    a list of PairReports (scan) or a list of (id, length) pairs (rays).
    """
    if text.startswith("T,n,m"):
        return GrowthSeries.from_csv(text)
    data = json.loads(text)
    if data.get("schema") != SCHEMA_ID:
        raise UsageError("not a geoblock artifact")
    kind, res = data["kind"], data["result"]
    space = SpaceSpec(data["space"]["kind"], data["space"]["params"]).build()
    if kind == "certificate":
        hits = {rid: Hit(h["blocker"], h["t"], _frac(h["frac"])) for rid, h in res["hits"].items()}
        return BlockingCertificate(tuple(_point_from_json(space, b) for b in res["blockers"]),
                                   hits, res["tolerance"])
    if kind == "pair-report":
        return _report_from(space, res)
    if kind == "scan":
        return [_report_from(space, r) for r in res["violations"]]
    if kind == "entropy":
        e = res["estimate"]
        return EntropyEstimate(e["estimate"], e["ratio"], e["residual"], tuple(e["tail"]),
                               tuple(e["fit_horizons"]))
    if kind == "rays":
        return [(r["id"], r["length"]) for r in res["rays"]]
    if kind == "failure":
        return res["ray"]["id"]
    raise UsageError(f"unknown artifact kind {kind!r}")


# -- report --------------------------------------------------------------------

def _report_line(path: str) -> tuple[str, bool]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from err
    if text.startswith("T,n,m"):
        from .entropy import GrowthSeries
        s = GrowthSeries.from_csv(text)
        return f"growth: {len(s.horizons)} horizons, n_T = {s.n[-1]}, m_T = {s.m[-1]} at T = {s.horizons[-1]:g}", True
    try:
        data = json.loads(text)
        kind, res = data["kind"], data["result"]
    except (ValueError, KeyError, TypeError) as err:
        raise UsageError(f"{path} is not a geoblock artifact") from err
    if kind == "certificate":
        lower = res.get("lower_bound", {}).get("size")
        line = f"b(x,y) <= {res['used']} (horizon {res.get('horizon')})"
        if lower is not None:
            line += f", lower bound {lower}"
        return line, bool(res.get("passed", True))
    if kind == "failure":
        return f"blocking failed on ray {res['ray']['id']}", False
    if kind == "pair-report":
        return f"{res['classification']}, m_T = {res['m_T']}", True
    if kind == "rays":
        return f"{res['count']} rays" + (" (continuum)" if res.get("continuum") else ""), True
    if kind == "entropy":
        est = res["estimate"]["estimate"]
        ok = True
        line = f"estimate {est:.2f}"
        if "oracle" in res:
            line += f" vs oracle log {res['oracle']['growth']:.6g}"
        ci = res.get("counting_inequality")
        if ci is not None:
            line += f"; counting inequality {'holds' if ci['holds'] else 'fails'}"
            if not ci.get("applicable", True):
                line += " (not a manifold, expected)"
            elif not ci["holds"]:
                ok = False
        return line, ok
    if kind == "scan":
        return f"{len(res['violations'])} cross-blocking-violated pairs on grid {res['grid']}", True
    raise UsageError(f"{path}: unknown artifact kind {kind!r}")


def report(paths: Sequence[str]) -> tuple[str, bool]:
    rows = [(p, *_report_line(p)) for p in paths]
    width = max(len(p) for p, _, _ in rows)
    lines = [f"{p.ljust(width)}  {'ok  ' if ok else 'FAIL'}  {line}" for p, line, ok in rows]
    return "\n".join(lines) + "\n", all(ok for _, _, ok in rows)


# -- entry point ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoblock", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--schema", action="store_true", help="print the artifact JSON schema")
    sub = ap.add_subparsers(dest="command")
    for name in OPS:
        p = sub.add_parser(name)
        p.add_argument("--space", required=True, help="space config file")
        p.add_argument("--x")
        p.add_argument("--y")
        p.add_argument("--T", dest="T")
        p.add_argument("--tol")
        p.add_argument("--out")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=0)
        if name == "enumerate":
            p.add_argument("--all", action="store_true", help="all geodesics, not only light rays")
        if name == "block":
            p.add_argument("--minimize", action="store_true")
        if name == "verify":
            p.add_argument("--blockers", help="points separated by ';'")
            p.add_argument("--certificate", help="reuse the blockers of a certificate artifact")
        if name in ("growth", "entropy"):
            p.add_argument("--Tmax", dest="Tmax", required=True)
            p.add_argument("--step")
        if name == "entropy":
            p.add_argument("--fibers", action="store_true", help="also check per-ray fiber sizes")
        if name == "scan":
            p.add_argument("--grid", type=int, default=12)
            p.add_argument("--limit", type=int, default=1)
    r = sub.add_parser("report")
    r.add_argument("paths", nargs="+")
    c = sub.add_parser("run", help="run an experiment config file")
    c.add_argument("config")
    c.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    return ap


def _fail(err: Exception, code: int) -> int:
    print(json.dumps({"error": {"type": type(err).__name__, "message": str(err)}},
                     sort_keys=True), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    if args.schema:
        sys.stdout.write(dumps(SCHEMA))
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "report":
            text, ok = report(args.paths)
            sys.stdout.write(text)
            return 0 if ok else 1
        if args.command == "run":
            cfg = load_experiment(args.config)
            values = {("T" if k == "t" else "Tmax" if k == "tmax" else k): v
                      for k, v in cfg.values.items() if k not in ("operation", "space")}
            out = values.get("out")
            if out:
                values["out"] = str(cfg.base / out)
            run = Run(cfg.space, values, max(1, int(values.get("workers") or args.workers)))
            op, out = OPS[cfg.operation], values.get("out")
        else:
            values = {k: v for k, v in vars(args).items()
                      if k not in ("command", "schema", "space", "workers")}
            values = {k: (None if v is False else v) for k, v in values.items()}
            run = Run(load_space(args.space), values, max(1, args.workers))
            op, out = OPS[args.command], args.out
        text, summary, code = op(run)
        _emit(text, out, summary)
        return code
    except (UsageError, ConfigError) as err:
        return _fail(err, 2)
    except (BlockingError, ValueError, ArithmeticError, RuntimeError, KeyError) as err:
        return _fail(err, 3)


if __name__ == "__main__":
    sys.exit(main())
