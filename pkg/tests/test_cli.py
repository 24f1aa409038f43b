import csv
import io
import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from glueopt import cli
from glueopt import geometry as geo

from conftest import star_net

SVG = "{http://www.w3.org/2000/svg}"


def write_cfg(path, extra=""):
    path.write_text("domain = disc 0 0 1\nsource = constant 1\nlambda = 1\nh = 1/32\n" + extra)
    return path


def run(*argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], stdout=buf)
    return code, buf.getvalue().splitlines()


@pytest.fixture
def ynet(tmp_path):
    path = tmp_path / "y.net"
    geo.write_network(star_net((0, 0), [90, 210, 330], 0.6), path)
    return path


def test_sci_format():
    assert cli.sci(0.19635) == "1.9635e-1"
    assert cli.sci(12345.0) == "1.2345e4"
    assert cli.sci(9.99996) == "1.0000e1"


def test_solve_empty_disc(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("domain = disc 0 0 1\nsource = constant 1\nlambda = 1\n")
    code, out = run("solve", "--config", cfg, "--out", tmp_path / "o")
    assert code == 0
    line = next(ln for ln in out if ln.startswith("compliance "))
    assert float(line.split()[1]) == pytest.approx(math.pi / 16, rel=0.02)
    for name in ("u.grid", "solve.json", "manifest.json", "config.echo"):
        assert (tmp_path / "o" / name).exists()
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(man) >= {"config_hash", "version", "seed", "command"}


def test_default_out_relative_to_config(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "out = here\n")
    assert run("solve", "--config", cfg)[0] == 0
    assert (tmp_path / "here" / "u.grid").exists()


def test_render_structure(tmp_path, ynet):
    cfg = write_cfg(tmp_path / "c.cfg", "probes = 0 0; 0.3 0.1\n")
    code, _ = run("render", "--config", cfg, "--network", ynet, "--out", tmp_path / "o")
    assert code == 0
    root = ET.parse(tmp_path / "o" / "render.svg").getroot()
    assert root.attrib["viewBox"] == "-1.0 -1.0 2.0 2.0"
    assert root.attrib["width"] == "192"
    assert len(root.findall(f".//{SVG}path")) == 3
    assert len(root.findall(f".//{SVG}image")) == 1
    assert len(root.findall(f".//{SVG}circle")) == 2


def test_diagnose_no_probes_header_only(tmp_path, ynet):
    cfg = write_cfg(tmp_path / "c.cfg")
    code, _ = run("diagnose", "--config", cfg, "--network", ynet, "--out", tmp_path / "o")
    assert code == 0
    lines = (tmp_path / "o" / "diagnostics.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].split(",") == list(cli.DIAGNOSTICS_COLUMNS)
    assert json.loads((tmp_path / "o" / "diagnostics.json").read_text())["h"] == 1 / 32


def test_diagnose_rows_and_rerun_bytes(tmp_path, ynet):
    cfg = write_cfg(tmp_path / "c.cfg", "probes = 0 0; 0 0.3\nradii = 0.125 0.25\n")
    for d in ("a", "b"):
        assert run("diagnose", "--config", cfg, "--network", ynet, "--out", tmp_path / d)[0] == 0
    a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_bytes()
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.decode())))
    assert len(rows) == 4 and rows[0]["dual_gap"] != ""


def test_blowup_and_duality(tmp_path, ynet):
    cfg = write_cfg(tmp_path / "c.cfg", "probes = 0 0\nradii = 0.25 0.5\n")
    code, out = run("blowup", "--config", cfg, "--network", ynet, "--out", tmp_path / "o")
    assert code == 0 and "Triple" in out[0]
    rows = list(csv.DictReader(open(tmp_path / "o" / "blowup.csv")))
    assert rows[0]["class"] == "Triple"
    code, _ = run("duality", "--config", cfg, "--network", ynet, "--out", tmp_path / "o")
    rows = list(csv.DictReader(open(tmp_path / "o" / "duality.csv")))
    assert code == 0 and float(rows[0]["dual_residual"]) <= 1e-8


def test_optimize_writes_trajectory(tmp_path, ynet):
    cfg = write_cfg(tmp_path / "c.cfg", "max_iter = 2\n")
    code, _ = run("optimize", "--config", cfg, "--network", ynet, "--out", tmp_path / "o")
    assert code == 0
    assert (tmp_path / "o" / "final.net").exists()
    assert (tmp_path / "o" / "trajectory" / "log.csv").exists()
    assert (tmp_path / "o" / "trajectory" / "state_0000.net").exists()


@pytest.mark.parametrize("extra,argv_net,expect", [
    ("p = 1.5\n", False, "error kind=ConfigError key=p line=5"),
    ("", False, "error kind=ValueError"),
    ("bogus = 1\n", True, "error kind=ConfigError key=bogus line=5"),
])
def test_error_last_line(tmp_path, ynet, extra, argv_net, expect):
    cfg = write_cfg(tmp_path / "c.cfg", extra)
    argv = ["optimize", "--config", cfg, "--out", tmp_path / "o"]
    if argv_net:
        argv += ["--network", ynet]
    code, out = run(*argv)
    assert code != 0 and out[-1].startswith(expect) and 'message="' in out[-1]


def test_missing_files(tmp_path):
    code, out = run("solve", "--config", tmp_path / "nope.cfg")
    assert code != 0 and out[-1].startswith("error kind=FileNotFoundError")
    cfg = write_cfg(tmp_path / "c.cfg")
    code, out = run("diagnose", "--config", cfg, "--network", tmp_path / "nope.net")
    assert code != 0 and out[-1].startswith("error ")


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg")
    proc = subprocess.run([sys.executable, "-m", "glueopt.cli", "solve", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("compliance ")
    proc = subprocess.run([sys.executable, "-m", "glueopt.cli", "frob", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode != 0 and proc.stdout.splitlines()[-1].startswith("error kind=UsageError")
