"""Key-value configuration files for spaces and experiments.

Grammar, one entry per line::

    # comment
    key = value

Keys are lower-case identifiers, every key at most once, blank lines and
``#`` comments ignored. Unknown keys are errors. Exact spaces take rational
literals only ("3", "-1/2"); decimal literals are accepted only for
revolution parameters.

Space files::

    space = torus          basis = 1,0; 0,1
    space = graph          graph = wedge | theta | cycle | custom
                           k = 2, vertices = 1, edges = 0-0, 0-0, inj = 1/2
    space = apartment      sides = 1, 1
    space = revolution     profile = round | zoll | coeffs, eps = 0.3,
                           coeffs = 0, 0.3, 0, -0.3, step = 1e-3,
                           resolution = 360, tube_tol = 1e-6, inj = 1, grid = 12

Experiment files name an operation, a space file and the run parameters::

    operation = block
    space = torus.cfg
    x = 0,0
    y = 1/2,1/2
    T = 30
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .apartment import ApartmentGroup
from .graphs import QuotientGraph
from .revolution import RevolutionMetric, SurfacePoint
from .torus import TorusSpace


class ConfigError(ValueError):
    pass


_KEY = re.compile(r"^[a-z_][a-z0-9_]*$")
_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")

SPACE_KEYS = {
    "torus": {"basis"},
    "graph": {"graph", "k", "vertices", "edges", "inj"},
    "apartment": {"sides"},
    "revolution": {"profile", "eps", "coeffs", "step", "resolution", "tube_tol", "inj", "grid"},
}

OPERATIONS = ("enumerate", "block", "verify", "classify", "growth", "entropy", "scan")

EXPERIMENT_KEYS = {"operation", "space", "x", "y", "t", "tmax", "step", "tol", "out", "csv",
                   "seed", "workers", "grid", "limit", "blockers", "certificate", "all",
                   "minimize", "fibers"}


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if not _KEY.match(key):
            raise ConfigError(f"{source}:{no}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{no}: empty value for {key!r}")
        out[key] = value
    return out


def exact(text: str) -> Fraction:
    """A rational literal "p" or "p/q"; decimals are rejected."""
    t = text.strip()
    if not _RATIONAL.match(t):
        raise ConfigError(f"{text!r} is not a rational literal (use p/q)")
    return Fraction(t)


def exact_vector(text: str) -> tuple[Fraction, ...]:
    return tuple(exact(v) for v in text.split(","))


def _int(text: str, key: str, lo: int | None = None) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be at least {lo}")
    return v


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


@dataclass(frozen=True)
class SpaceSpec:
    kind: str
    params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SPACE_KEYS:
            raise ConfigError(f"unknown space {self.kind!r}")
        extra = set(self.params) - SPACE_KEYS[self.kind]
        if extra:
            raise ConfigError(f"unknown keys for {self.kind}: {', '.join(sorted(extra))}")

    def build(self):
        p = self.params
        try:
            if self.kind == "torus":
                rows = p.get("basis", "1,0; 0,1").split(";")
                return TorusSpace(tuple(exact_vector(r) for r in rows))
            if self.kind == "apartment":
                return ApartmentGroup(exact_vector(p.get("sides", "1")))
            if self.kind == "graph":
                return _graph(p)
            return _revolution(p)
        except ConfigError:
            raise
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from err

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(sorted(self.params.items()))}


def _graph(p: dict[str, str]) -> QuotientGraph:
    name = p.get("graph", "wedge")
    if name == "custom":
        if "edges" not in p or "vertices" not in p:
            raise ConfigError("custom graphs need vertices and edges")
        edges = []
        for tok in p["edges"].split(","):
            u, _, v = tok.strip().partition("-")
            edges.append((_int(u, "edges", 0), _int(v, "edges", 0)))
        return QuotientGraph(_int(p["vertices"], "vertices", 1), tuple(edges))
    if "edges" in p or "vertices" in p:
        raise ConfigError("edges and vertices are only valid for custom graphs")
    k = p.get("k")
    if name == "wedge":
        return QuotientGraph.wedge(_int(k, "k", 1) if k else 2)
    if name == "theta":
        return QuotientGraph.theta(_int(k, "k", 2) if k else 3)
    if name == "cycle":
        return QuotientGraph.cycle(_int(k, "k", 1) if k else 3)
    raise ConfigError(f"unknown graph {name!r}")


def graph_inj(spec: SpaceSpec) -> float | None:
    v = spec.params.get("inj")
    return float(exact(v)) if v else None


def _revolution(p: dict[str, str]) -> RevolutionMetric:
    kw: dict[str, Any] = {}
    if "step" in p:
        kw["step"] = _float(p["step"], "step")
    if "resolution" in p:
        kw["resolution"] = _int(p["resolution"], "resolution", 8)
    if "tube_tol" in p:
        kw["tube_tol"] = _float(p["tube_tol"], "tube_tol")
    if "inj" in p:
        kw["inj"] = _float(p["inj"], "inj")
    if "grid" in p:
        kw["grid"] = _int(p["grid"], "grid", 2)
    profile = p.get("profile", "zoll" if "eps" in p else "coeffs" if "coeffs" in p else "round")
    if profile == "round":
        if "eps" in p or "coeffs" in p:
            raise ConfigError("round profile takes no eps or coeffs")
        return RevolutionMetric.round(**kw)
    if profile == "zoll":
        if "coeffs" in p:
            raise ConfigError("zoll profile takes eps, not coeffs")
        return RevolutionMetric.zoll(_float(p.get("eps", "0.3"), "eps"), **kw)
    if profile == "coeffs":
        if "coeffs" not in p:
            raise ConfigError("coeffs profile needs coeffs")
        return RevolutionMetric(tuple(_float(c, "coeffs") for c in p["coeffs"].split(",")), **kw)
    raise ConfigError(f"unknown profile {profile!r}")


def load_space(path: str | Path) -> SpaceSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from err
    kv = parse_kv(text, str(path))
    if "space" not in kv:
        raise ConfigError(f"{path}: missing 'space'")
    kind = kv.pop("space")
    return SpaceSpec(kind, kv)


def parse_point(space, text: str):
    """Point literal for the given space."""
    t = text.strip()
    if isinstance(space, TorusSpace):
        return space.point(exact_vector(t))
    if isinstance(space, ApartmentGroup):
        return space.typed(exact_vector(t))
    if isinstance(space, QuotientGraph):
        if t in ("v", "v0") or re.fullmatch(r"v\d+", t):
            return space.point(int(t[1:] or 0))
        m = re.fullmatch(r"e(\d+)@(.+)", t)
        if not m:
            raise ConfigError(f"graph point {text!r}: use v<k> or e<k>@p/q")
        return space.point((int(m.group(1)), exact(m.group(2))))
    if isinstance(space, RevolutionMetric):
        parts = t.split(",")
        if len(parts) != 2:
            raise ConfigError(f"surface point {text!r}: use r,phi")
        return SurfacePoint(_float(parts[0], "r"), _float(parts[1], "phi"))
    raise ConfigError(f"no point syntax for {type(space).__name__}")


def parse_horizon(space, text: str):
    if isinstance(space, RevolutionMetric):
        return _float(text, "T")
    return exact(text)


@dataclass(frozen=True)
class ExperimentConfig:
    operation: str
    space: SpaceSpec
    values: dict[str, str]
    base: Path = Path(".")

    def __post_init__(self):
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}")
        extra = set(self.values) - EXPERIMENT_KEYS
        if extra:
            raise ConfigError(f"unknown keys: {', '.join(sorted(extra))}")

    def get(self, key: str, default=None):
        return self.values.get(key, default)


def load_experiment(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        kv = parse_kv(path.read_text(), str(path))
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from err
    if "operation" not in kv or "space" not in kv:
        raise ConfigError(f"{path}: need 'operation' and 'space'")
    extra = set(kv) - EXPERIMENT_KEYS
    if extra:
        raise ConfigError(f"unknown keys: {', '.join(sorted(extra))}")
    spec = load_space(path.parent / kv["space"])
    return ExperimentConfig(kv["operation"], spec, kv, path.parent)
