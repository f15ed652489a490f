import json

import numpy as np
import pytest

from bulksurf.cli import run
from bulksurf.mesh import load_mesh


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run(["mesh", "--n-radial", "4", "--n-angular", "16", "-o", str(d / "m.txt")]) == 0
    assert run(["solve", "--mesh", str(d / "m.txt"), "-k", "6", "-o", str(d / "s.json")]) == 0
    return d


def strip_created(text):
    return "\n".join(l for l in text.splitlines() if "created" not in l)


def test_mesh_vertex_count(tmp_path):
    out = tmp_path / "m.txt"
    assert run(["mesh", "--r-inner", "1", "--r-outer", "2", "--n-radial", "2",
                "--n-angular", "8", "-o", str(out)]) == 0
    assert load_mesh(out).n_vertices == 24


def test_mesh_refine(tmp_path):
    out = tmp_path / "m.txt"
    assert run(["mesh", "--n-radial", "2", "--n-angular", "8", "--refine", "1",
                "-o", str(out)]) == 0
    assert load_mesh(out).n_vertices == 5 * 16


def test_missing_mesh(tmp_path, capsys):
    path = tmp_path / "missing.txt"
    assert run(["solve", "--mesh", str(path), "-o", str(tmp_path / "s.json")]) == 3
    assert str(path) in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert run(["solve", "--bogus"]) == 2
    assert run(["frobnicate"]) == 2
    assert run([]) == 2
    assert run(["mesh", "-o", str(tmp_path / "m.txt"), "--n-radial", "x"]) == 2


def test_bad_parameters_exit_3(tmp_path):
    assert run(["mesh", "--r-inner", "3", "-o", str(tmp_path / "m.txt")]) == 3


def test_solve_output(workdir):
    payload = json.loads((workdir / "s.json").read_text())
    assert len(payload["lambda"]) == 6
    assert all(r <= 1e-10 for r in payload["residual"])
    assert len(payload["vectors"][0]) == 5 * 16
    meta = payload["meta"]
    assert meta["tool"] == "bulksurf" and meta["command"] == "solve"
    assert meta["config"]["k"] == 6 and meta["config"]["seed"] == 0x5EED
    assert list(meta["inputs"].values())[0] and len(list(meta["inputs"].values())[0]) == 64


def test_rerun_identical_modulo_timestamp(workdir, tmp_path):
    out = tmp_path / "s2.json"
    args = ["solve", "--mesh", str(workdir / "m.txt"), "-k", "6", "-o", str(out)]
    assert run(args) == 0
    first = out.read_text()
    assert run(args) == 0
    assert strip_created(first) == strip_created(out.read_text())
    assert sum("created" in l for l in first.splitlines()) == 1


def test_oracle_command(tmp_path):
    out = tmp_path / "o.json"
    assert run(["oracle", "-k", "4", "--no-profiles", "-o", str(out)]) == 0
    payload = json.loads(out.read_text())
    vals = sorted(m["lambda"] for m in payload["modes"] for _ in range(m["multiplicity"]))
    np.testing.assert_allclose(vals[:4], [1.055511821297987, 1.9563299573218687,
                                          1.9563299573218687, 4.615663064426045], rtol=1e-11)
    assert payload["meta"]["config"]["lambda_max"] == "auto"


def test_oracle_fixed_cutoff(tmp_path):
    out = tmp_path / "o.json"
    assert run(["oracle", "--lambda-max", "5", "--m-max", "2", "-o", str(out)]) == 0
    assert len(json.loads(out.read_text())["modes"]) == 3
    assert run(["oracle", "--lambda-max", "lots", "-o", str(out)]) == 3


def test_wave_command(workdir, tmp_path):
    out = tmp_path / "e.csv"
    assert run(["wave", "--mesh", str(workdir / "m.txt"), "--spectrum", str(workdir / "s.json"),
                "--modes", "1,3", "--samples", "11", "--probes", "0,20", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert any(l.startswith("# config:") for l in header)
    assert body[0] == "t,E,d0,d20" and len(body) == 12
    e = np.array([float(l.split(",")[1]) for l in body[1:]])
    assert np.abs(e - e[0]).max() <= 1e-9 * e[0]


def test_wave_init_file(workdir, tmp_path):
    init = tmp_path / "init.json"
    init.write_text(json.dumps({"w0": {"modes": {"1": 1.0}}, "w1": {"modes": {"2": 0.5}}}))
    out = tmp_path / "e.csv"
    assert run(["wave", "--mesh", str(workdir / "m.txt"), "--spectrum", str(workdir / "s.json"),
                "--init", str(init), "--samples", "3", "-o", str(out)]) == 0
    init.write_text(json.dumps({"w0": {"modes": {"99": 1.0}}}))
    assert run(["wave", "--mesh", str(workdir / "m.txt"), "--spectrum", str(workdir / "s.json"),
                "--init", str(init), "-o", str(out)]) == 3


def test_wave_bad_probe(workdir, tmp_path):
    assert run(["wave", "--mesh", str(workdir / "m.txt"), "--spectrum", str(workdir / "s.json"),
                "--probes", "9999", "-o", str(tmp_path / "e.csv")]) == 3


def test_spectrum_mesh_mismatch(workdir, tmp_path):
    other = tmp_path / "m2.txt"
    assert run(["mesh", "--n-radial", "4", "--n-angular", "20", "-o", str(other)]) == 0
    assert run(["export-vtk", "--mesh", str(other), "--spectrum", str(workdir / "s.json"),
                "-o", str(tmp_path / "u.vtk")]) == 3


def test_export_vtk(workdir, tmp_path):
    out = tmp_path / "u.vtk"
    assert run(["export-vtk", "--mesh", str(workdir / "m.txt"), "--spectrum",
                str(workdir / "s.json"), "--modes", "1,2", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 80 double" in lines and "CELL_TYPES 128" in lines
    assert "SCALARS u1 double 1" in lines and "SCALARS u2 double 1" in lines
    start = lines.index("SCALARS u1 double 1") + 2
    u1 = np.array([float(x) for x in lines[start:start + 80]])
    assert np.all(u1[-16:] == 0.0) and np.all(u1[:-16] > 0)


def test_verify_small_config(tmp_path):
    js, txt = tmp_path / "r.json", tmp_path / "r.txt"
    rc = run(["verify", "--n-radial", "6", "--n-angular", "32", "-k", "6",
              "-o", str(js), "--text", str(txt)])
    report = json.loads(js.read_text())
    assert rc == (0 if report["passed"] else 1)
    assert report["metadata"]["config"]["n_radial"] == 6
    assert txt.read_text().rstrip().splitlines()[-1].startswith("overall:")
