"""Command-line front end.

``glueopt solve|optimize|diagnose|blowup|duality|render --config <path>
[--network <path>] [--out <dir>]``

Every command writes ``manifest.json`` (config hash, tool version, seed) and
its artifacts into the output directory.  On failure the last output line
is ``error kind=<type> [key=<k>] [line=<n>] message="..."`` and the exit
status is nonzero.
"""

from __future__ import annotations

import argparse
import base64
import csv
import hashlib
import json
import math
import os
import struct
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from .config import ConfigError, RunConfig, config_hash, format_config, parse_config
from .diagnostics import DIAGNOSTICS_COLUMNS, blowup_classify, diagnostics_report
from .dualcheck import duality_gap
from .optimizer import evaluate_functional, run_optimize, save_trajectory
from .solver import compliance, dirichlet_energy, write_field

COMMANDS = ("solve", "optimize", "diagnose", "blowup", "duality", "render")
BLOWUP_COLUMNS = ("probe", "x", "y", "class", "e_x", "branch_counts", "angles",
                  "boundary_angle", "beta", "note")
DUALITY_COLUMNS = ("h", "cg_tol", "compliance", "dual_residual", "dual_primal", "dual_dual",
                   "dual_gap", "zero_source")


def sci(x: float) -> str:
    """Four-decimal scientific notation without exponent padding, e.g. ``1.9635e-1``."""
    if x == 0 or not math.isfinite(x):
        return repr(x)
    e = int(math.floor(math.log10(abs(x))))
    m = x / 10 ** e
    if round(abs(m), 4) >= 10:
        m /= 10
        e += 1
    return f"{m:.4f}e{e}"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _file_hash(path) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: RunConfig, network) -> None:
    write_json(out / "manifest.json", {
        "command": command,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "seed": cfg.schedule.seed,
        "network_sha256": _file_hash(network),
        "threads": int(os.environ.get("GLUEOPT_THREADS", "1") or 1),
    })
    (out / "config.echo").write_text(format_config(cfg))


def _network(path, required: bool, command: str):
    if path is None:
        if required:
            raise ValueError(f"{command} requires --network")
        return geo.CurveNetwork()
    return geo.read_network(path)


def _default_radii(cfg: RunConfig) -> list[float]:
    if cfg.radii:
        return list(cfg.radii)
    r, out = 4 * cfg.h, []
    while r <= 0.25 + 1e-12:
        out.append(r)
        r *= 2
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_solve(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, False, "solve")
    F, C, L = evaluate_functional(pb, net)
    u = pb.solve(net if len(net.edges) else None)
    write_field(u, out / "u.grid")
    write_json(out / "solve.json", {
        "compliance": C, "length": L, "F": F, "energy": 0.5 * dirichlet_energy(u),
        "residual": u.residual, "iterations": u.iterations, "h": pb.h, "cg_tol": pb.cg_tol,
    })
    echo(f"compliance {sci(C)}")
    echo(f"F {sci(F)}")


def cmd_optimize(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, True, "optimize")
    try:
        traj = run_optimize(pb, net, cfg.schedule)
    except Exception as exc:
        partial = getattr(exc, "trajectory", None)
        if partial:
            save_trajectory(partial, out / "trajectory")
        raise
    save_trajectory(traj, out / "trajectory")
    final = traj[-1]
    geo.write_network(final.network, out / "final.net")
    write_json(out / "optimize.json", {
        "F": final.F, "compliance": final.compliance, "length": final.length,
        "accepted": len(traj) - 1, "iterations": final.iteration,
        "contains_loop": bool(geo.contains_loop(final.network)),
    })
    echo(f"F {sci(final.F)}")
    echo(f"accepted {len(traj) - 1}")


def cmd_diagnose(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, True, "diagnose")
    u = pb.solve(net)
    dual = duality_gap(pb, net) if cfg.probes else None
    rep = diagnostics_report(pb, net, cfg.probes, _default_radii(cfg), u, dual)
    write_csv(out / "diagnostics.csv", DIAGNOSTICS_COLUMNS, rep.rows)
    write_json(out / "diagnostics.json", rep.summary)
    echo(f"rows {len(rep.rows)}")


def cmd_blowup(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, True, "blowup")
    u = pb.solve(net)
    radii = [r for r in _default_radii(cfg) if r >= 8 * pb.h * (1 - 1e-12)]
    rows = []
    for k, x in enumerate(cfg.probes):
        rep = blowup_classify(u, pb.grid, net, pb.domain, x, radii)
        rows.append({"probe": k, "x": float(x[0]), "y": float(x[1]), "class": rep.cls,
                     "e_x": rep.e_x, "branch_counts": list(rep.branch_counts),
                     "angles": list(rep.angles) if rep.angles else None,
                     "boundary_angle": rep.boundary_angle, "beta": rep.beta, "note": rep.note})
        echo(f"probe {k} {rep.cls} e_x {sci(rep.e_x)}")
    write_csv(out / "blowup.csv", BLOWUP_COLUMNS, rows)


def cmd_duality(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, False, "duality")
    rep = duality_gap(pb, net if len(net.edges) else None)
    row = {"h": pb.h, "cg_tol": pb.cg_tol, "compliance": rep.compliance,
           "dual_residual": rep.divergence_residual, "dual_primal": rep.primal,
           "dual_dual": rep.dual, "dual_gap": rep.gap, "zero_source": int(rep.zero_source)}
    write_csv(out / "duality.csv", DUALITY_COLUMNS, [row])
    echo(f"gap {sci(rep.gap)}")
    echo(f"residual {sci(rep.divergence_residual)}")


def _png(rgb: np.ndarray) -> bytes:
    """Minimal truecolour PNG encoder for an ``(H, W, 3)`` uint8 array."""
    hgt, wid, _ = rgb.shape
    raw = b"".join(b"\x00" + rgb[j].tobytes() for j in range(hgt))

    def chunk(tag, data):
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))

    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", struct.pack(">IIBBBBB", wid, hgt, 8, 2, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def _colormap(t: np.ndarray) -> np.ndarray:
    """White to dark blue ramp."""
    t = np.clip(t, 0.0, 1.0)[..., None]
    lo = np.array([255.0, 255.0, 255.0])
    hi = np.array([8.0, 48.0, 107.0])
    return (lo + t * (hi - lo)).astype(np.uint8)


def render_svg(pb, net, u=None, probes=()) -> str:
    x0, y0, x1, y1 = (float(v) for v in pb.domain.bbox)
    w, hgt = x1 - x0, y1 - y0
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{96 * w:.6g}" height="{96 * hgt:.6g}" '
        f'viewBox="{x0!r} {y0!r} {w!r} {hgt!r}">',
        f'<g transform="matrix(1 0 0 -1 0 {y0 + y1!r})">',
    ]
    if u is not None:
        g = pb.grid
        vals = np.where(g.inside, u.values, 0.0)
        vmax = float(vals.max()) if vals.max() > 0 else 1.0
        rgb = _colormap(vals / vmax)[::-1]
        data = base64.b64encode(_png(np.ascontiguousarray(rgb))).decode()
        gx0, gy0 = g.origin
        gw, gh = (g.nx - 1) * g.h, (g.ny - 1) * g.h
        # the image is drawn upright in the flipped frame
        parts.append(f'<g transform="matrix(1 0 0 -1 0 {2 * gy0 + gh!r})">'
                     f'<image class="field" x="{gx0!r}" y="{gy0!r}" width="{gw!r}" height="{gh!r}" '
                     f'preserveAspectRatio="none" href="data:image/png;base64,{data}"/></g>')
    for k in range(len(net.edges)):
        pl = net.polyline(k)
        d = "M " + " L ".join(f"{p[0]!r} {p[1]!r}" for p in pl)
        parts.append(f'<path class="edge" d="{d}" fill="none" stroke="#c0392b" '
                     f'stroke-width="{2 * pb.h!r}"/>')
    for k, (px, py) in enumerate(probes):
        parts.append(f'<circle class="probe" cx="{px!r}" cy="{py!r}" r="{2 * pb.h!r}" '
                     f'fill="#f1c40f"/>')
    parts.append("</g>")
    for k, (px, py) in enumerate(probes):
        parts.append(f'<text class="probe-label" x="{px + 3 * pb.h!r}" y="{y0 + y1 - py!r}" '
                     f'font-size="{6 * pb.h!r}">{k}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_render(cfg: RunConfig, network, out: Path, echo) -> None:
    pb = cfg.problem()
    net = _network(network, False, "render")
    u = pb.solve(net if len(net.edges) else None)
    (out / "render.svg").write_text(render_svg(pb, net, u, cfg.probes))
    echo(f"paths {len(net.edges)}")


_DISPATCH = {
    "solve": cmd_solve, "optimize": cmd_optimize, "diagnose": cmd_diagnose,
    "blowup": cmd_blowup, "duality": cmd_duality, "render": cmd_render,
}


def _error_line(exc: BaseException) -> str:
    msg = str(exc).replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    bits = [f"kind={type(exc).__name__}"]
    if isinstance(exc, ConfigError):
        if exc.key is not None:
            bits.append(f"key={exc.key}")
        if exc.line is not None:
            bits.append(f"line={exc.line}")
    return "error " + " ".join(bits) + f' message="{msg}"'


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glueopt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--network")
    ap.add_argument("--out")
    return ap


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout

    def echo(line):
        print(line, file=stdout, flush=True)

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            echo('error kind=UsageError message="invalid arguments"')
        return int(exc.code or 0)
    try:
        cfg = parse_config(args.config)
        out = Path(args.out or (Path(cfg.base_dir) / cfg.out))
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, args.command, cfg, args.network)
        _DISPATCH[args.command](cfg, args.network, out, echo)
    except Exception as exc:  # noqa: BLE001 - every failure becomes the error line
        echo(_error_line(exc))
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
