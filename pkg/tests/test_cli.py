import json
from fractions import Fraction

import pytest

from geoblock.cli import SCHEMA_ID, load_artifact, main
from geoblock.config import (ConfigError, SpaceSpec, exact, load_experiment, load_space,
                             parse_kv, parse_point)
from geoblock.core import BlockingCertificate, PairReport
from geoblock.entropy import EntropyEstimate, GrowthSeries
from geoblock.graphs import QuotientGraph
from geoblock.revolution import RevolutionMetric, SurfacePoint
from geoblock.torus import TorusSpace

F = Fraction

SPACES = {
    "torus.cfg": "space = torus\nbasis = 1,0; 0,1\n",
    "wedge.cfg": "# wedge of two circles\nspace = graph\ngraph = wedge\ninj = 1/2\n",
    "theta.cfg": "space = graph\ngraph = theta\n",
    "round.cfg": "space = revolution\nprofile = round\nresolution = 64\n",
    "zoll.cfg": "space = revolution\neps = 0.3\n",
    "box.cfg": "space = apartment\nsides = 1, 1\n",
}


@pytest.fixture
def cfg(tmp_path):
    for name, text in SPACES.items():
        (tmp_path / name).write_text(text)
    return tmp_path


def run(cfg, *argv):
    return main([str(cfg / a[1:]) if a.startswith("%") else a for a in argv])


def test_parse_kv():
    assert parse_kv("a = 1\n\n# c\nb=x y # tail\n") == {"a": "1", "b": "x y"}
    for bad in ("a\n", "a = 1\na = 2\n", "A-b = 1\n", "a =\n"):
        with pytest.raises(ConfigError):
            parse_kv(bad)


def test_exact_literals():
    assert exact("-3/4") == F(-3, 4)
    with pytest.raises(ConfigError):
        exact("0.5")
    with pytest.raises(ConfigError):
        exact("1e3")


def test_space_specs(cfg):
    assert isinstance(load_space(cfg / "torus.cfg").build(), TorusSpace)
    assert isinstance(load_space(cfg / "wedge.cfg").build(), QuotientGraph)
    z = load_space(cfg / "zoll.cfg").build()
    assert isinstance(z, RevolutionMetric) and z.coeffs == (0.0, 0.3, 0.0, -0.3)
    assert load_space(cfg / "round.cfg").build().resolution == 64
    with pytest.raises(ConfigError):
        SpaceSpec("torus", {"eps": "1"})
    with pytest.raises(ConfigError):
        SpaceSpec("klein", {})
    with pytest.raises(ConfigError):
        SpaceSpec("torus", {"basis": "0.5,0; 0,1"}).build()
    with pytest.raises(ConfigError):
        SpaceSpec("revolution", {"profile": "round", "eps": "0.1"}).build()
    custom = SpaceSpec("graph", {"graph": "custom", "vertices": "2", "edges": "0-1, 0-1, 0-0"}).build()
    assert custom.edges == ((0, 1), (0, 1), (0, 0))


def test_parse_points():
    t = TorusSpace.unit(2)
    assert parse_point(t, "1/2,3/2").coords == (F(1, 2), F(1, 2))
    g = QuotientGraph.wedge()
    assert repr(parse_point(g, "v")) == "v0"
    assert repr(parse_point(g, "e1@1/4")) == "e1@1/4"
    with pytest.raises(ConfigError):
        parse_point(g, "edge 1")
    assert parse_point(RevolutionMetric.round(), "1.0, 2.0") == SurfacePoint(1.0, 2.0)


def test_experiment_config(cfg):
    (cfg / "exp.cfg").write_text("operation = block\nspace = torus.cfg\nx = 0,0\ny = 1/2,1/2\nT = 5\n")
    exp = load_experiment(cfg / "exp.cfg")
    assert exp.operation == "block" and exp.space.kind == "torus"
    (cfg / "bad.cfg").write_text("operation = block\nspace = torus.cfg\ncolour = red\n")
    with pytest.raises(ConfigError):
        load_experiment(cfg / "bad.cfg")
    (cfg / "bad2.cfg").write_text("operation = fly\nspace = torus.cfg\n")
    with pytest.raises(ConfigError):
        load_experiment(cfg / "bad2.cfg")


def test_block_and_report(cfg, capsys):
    assert run(cfg, "block", "--space", "%torus.cfg", "--x", "0,0", "--y", "1/2,1/2",
               "--T", "8", "--out", "%cert.json", "--workers", "1") == 0
    data = json.loads((cfg / "cert.json").read_text())
    assert data["schema"] == SCHEMA_ID and data["kind"] == "certificate"
    assert len(data["result"]["blockers"]) == 4 and data["result"]["passed"]
    assert data["result"]["lower_bound"]["size"] == 4
    capsys.readouterr()
    assert run(cfg, "report", "%cert.json") == 0
    assert "b(x,y) <= 4 (horizon 8), lower bound 4" in capsys.readouterr().out


def test_verify_with_certificate(cfg):
    run(cfg, "block", "--space", "%torus.cfg", "--x", "0,0", "--y", "1/3,0", "--T", "5",
        "--out", "%c.json", "--workers", "1")
    assert run(cfg, "verify", "--space", "%torus.cfg", "--x", "0,0", "--y", "1/3,0", "--T", "9",
               "--certificate", "%c.json", "--out", "%v.json", "--workers", "1") == 0
    assert run(cfg, "verify", "--space", "%torus.cfg", "--x", "0,0", "--y", "1/3,0", "--T", "3",
               "--blockers", "1/6,0", "--out", "%f.json", "--workers", "1") == 1
    assert json.loads((cfg / "f.json").read_text())["kind"] == "failure"
    assert run(cfg, "report", "%v.json", "%f.json") == 1


def test_growth_csv(cfg):
    assert run(cfg, "growth", "--space", "%wedge.cfg", "--x", "v", "--y", "v", "--Tmax", "6",
               "--out", "%w.csv") == 0
    s = load_artifact((cfg / "w.csv").read_text())
    assert isinstance(s, GrowthSeries)
    assert s.n == tuple(2 * (3 ** T - 1) for T in range(1, 7)) and set(s.m) == {4}


def test_entropy_and_classify_artifacts(cfg, capsys):
    assert run(cfg, "entropy", "--space", "%wedge.cfg", "--x", "v", "--y", "v", "--Tmax", "10",
               "--out", "%e.json") == 0
    est = load_artifact((cfg / "e.json").read_text())
    assert isinstance(est, EntropyEstimate) and abs(est.estimate - 1.0986) < 0.05
    assert run(cfg, "classify", "--space", "%round.cfg", "--x", "1.0,0.0", "--y", "2.0,0.5",
               "--T", "6.283185307179586", "--out", "%r.json", "--workers", "1") == 0
    rep = load_artifact((cfg / "r.json").read_text())
    assert isinstance(rep, PairReport) and rep.m_T == 2
    capsys.readouterr()
    assert run(cfg, "report", "%e.json", "%r.json") == 0
    out = capsys.readouterr().out
    assert "estimate 1.10 vs oracle log 3" in out
    assert "cross-blocked-consistent, m_T = 2" in out


def test_certificate_round_trip(cfg):
    run(cfg, "block", "--space", "%wedge.cfg", "--x", "e0@1/4", "--y", "v", "--T", "4",
        "--out", "%g.json", "--workers", "1")
    cert = load_artifact((cfg / "g.json").read_text())
    assert isinstance(cert, BlockingCertificate)
    space = QuotientGraph.wedge()
    again = json.loads((cfg / "g.json").read_text())["result"]
    assert [b.to_json() for b in cert.blockers] == again["blockers"]
    assert all(space.point(b) == b for b in cert.blockers)


def test_apartment_block(cfg):
    assert run(cfg, "block", "--space", "%box.cfg", "--x", "0,0", "--y", "1/4,1/2", "--T", "3",
               "--out", "%a.json") == 0
    res = json.loads((cfg / "a.json").read_text())["result"]
    assert res["passed"] and res["m_T"] > 0


def test_errors_are_json(cfg, capsys):
    assert run(cfg, "block", "--space", "%torus.cfg", "--x", "0.5,0", "--y", "0,0", "--T", "3") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"]["type"] == "ConfigError"
    assert run(cfg, "block", "--space", "%missing.cfg", "--x", "0,0", "--y", "0,0", "--T", "3") == 2
    assert run(cfg, "scan", "--space", "%torus.cfg") == 2
    assert run(cfg, "block", "--space", "%round.cfg", "--x", "1,0", "--y", "2,0", "--T", "9") == 3
    (cfg / "junk.json").write_text("{}")
    assert run(cfg, "report", "%junk.json") == 2


def test_schema(capsys):
    assert main(["--schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema["$id"] == SCHEMA_ID
    assert "certificate" in schema["$defs"]


def test_run_config_and_determinism(cfg):
    (cfg / "exp.cfg").write_text(
        "operation = block\nspace = torus.cfg\nx = 1/3,1/5\ny = 1/2,2/3\nT = 12\nout = a.json\n")
    assert main(["run", str(cfg / "exp.cfg"), "--workers", "1"]) == 0
    first = (cfg / "a.json").read_bytes()
    assert main(["run", str(cfg / "exp.cfg"), "--workers", "8"]) == 0
    assert (cfg / "a.json").read_bytes() == first
