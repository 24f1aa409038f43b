"""Run configuration: a ``key = value`` text format with validation and canonical echo.

Format::

    # comment
    domain = disc 0 0 1                  # or: polygon x1 y1 x2 y2 ...
    source = constant 1                  # or: gaussian cx cy amp width; cx cy amp width
                                          #     gridfile path/to/values.grid
    p = inf
    lambda = 1
    h = 1/64
    probes = 0 0; 0.25 0                 # optional
    radii = 0.0625 0.125 0.25            # optional, diagnostics radii

Numbers accept ``a/b`` fractions and ``inf``.  Every key not given takes its
documented default; :func:`format_config` echoes all of them so that
parse -> echo -> parse is idempotent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .geometry import Disc, Polygon
from .optimizer import Schedule
from .problem import Problem
from .solver import ConstantSource, GaussianSource, GridFileSource

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "format_config",
           "config_hash"]

MAX_NODES = 4096


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class RunConfig:
    domain: tuple
    source: tuple
    lam: float
    p: float = math.inf
    h: float = 1 / 64
    cg_tol: float = 1e-10
    schedule: Schedule = field(default_factory=Schedule)
    probes: tuple = ()
    radii: tuple = ()
    out: str = "out"
    base_dir: str = field(default=".", compare=False)

    def make_domain(self):
        kind, vals = self.domain
        if kind == "disc":
            return Disc(vals[:2], vals[2])
        return Polygon([vals[k:k + 2] for k in range(0, len(vals), 2)])

    def make_source(self):
        kind, vals = self.source
        if kind == "constant":
            return ConstantSource(vals[0], self.p)
        if kind == "gaussian":
            return GaussianSource(tuple(((b[0], b[1]), b[2], b[3]) for b in vals), self.p)
        path = Path(vals)
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        return GridFileSource(str(path), self.p)

    def problem(self) -> Problem:
        return Problem(self.make_domain(), self.make_source(), self.lam, self.h, self.cg_tol)


_SCHEDULE_KEYS = {
    "max_iter": int, "step": float, "shrink": float, "grow": float, "period": int,
    "threshold": float, "seed": int, "spacing_h": float, "max_backtracks": int,
    "tip_step_h": float,
}
_KEYS = {"domain", "source", "lambda", "p", "h", "cg_tol", "probes", "radii", "out"} | set(_SCHEDULE_KEYS)
_REQUIRED = ("domain", "source", "lambda")


def _num(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if "/" in t:
        return float(Fraction(t))
    return float(t)


def _nums(text: str) -> list[float]:
    return [_num(t) for t in text.split()]


def _parse_domain(v: str):
    kind, _, rest = v.strip().partition(" ")
    vals = tuple(_nums(rest))
    if kind == "disc":
        if len(vals) != 3 or not vals[2] > 0:
            raise ValueError("disc needs 'cx cy radius' with radius > 0")
        return ("disc", vals)
    if kind == "polygon":
        if len(vals) < 6 or len(vals) % 2:
            raise ValueError("polygon needs at least three 'x y' pairs")
        Polygon([vals[k:k + 2] for k in range(0, len(vals), 2)])
        return ("polygon", vals)
    raise ValueError(f"unknown domain kind '{kind}'")


def _parse_source(v: str):
    kind, _, rest = v.strip().partition(" ")
    if kind == "constant":
        vals = _nums(rest)
        if len(vals) != 1:
            raise ValueError("constant source needs one value")
        return ("constant", tuple(vals))
    if kind == "gaussian":
        bumps = []
        for part in rest.split(";"):
            if part.strip():
                b = _nums(part)
                if len(b) != 4 or not b[3] > 0:
                    raise ValueError("gaussian bump needs 'cx cy amplitude width' with width > 0")
                bumps.append(tuple(b))
        if not bumps:
            raise ValueError("gaussian source needs at least one bump")
        return ("gaussian", tuple(bumps))
    if kind == "gridfile":
        if not rest.strip():
            raise ValueError("gridfile source needs a path")
        return ("gridfile", rest.strip())
    raise ValueError(f"unknown source kind '{kind}'")


def _parse_probes(v: str):
    out = []
    for part in v.split(";"):
        if part.strip():
            xy = _nums(part)
            if len(xy) != 2:
                raise ValueError("probe needs 'x y'")
            out.append(tuple(xy))
    return tuple(out)


def parse_config_text(text: str, base_dir: str = ".") -> RunConfig:
    raw: dict[str, tuple[str, int]] = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", None, n)
        key, _, val = body.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError("unknown key", key, n)
        if key in raw:
            raise ConfigError("duplicate key", key, n)
        raw[key] = (val.strip(), n)
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError("missing required key", key)

    def get(key, conv, default=None):
        if key not in raw:
            return default
        val, n = raw[key]
        try:
            return conv(val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc), key, n) from None

    def line(key):
        return raw[key][1] if key in raw else None

    cfg_kw = dict(
        domain=get("domain", _parse_domain),
        source=get("source", _parse_source),
        lam=get("lambda", _num),
        p=get("p", _num, math.inf),
        h=get("h", _num, 1 / 64),
        cg_tol=get("cg_tol", _num, 1e-10),
        probes=get("probes", _parse_probes, ()),
        radii=get("radii", lambda v: tuple(_nums(v)), ()),
        out=get("out", str, "out"),
    )
    if not cfg_kw["lam"] > 0:
        raise ConfigError("lambda must be positive", "lambda", line("lambda"))
    if not cfg_kw["p"] > 2:
        raise ConfigError("p must exceed 2", "p", line("p"))
    if not cfg_kw["h"] > 0:
        raise ConfigError("h must be positive", "h", line("h"))
    if not cfg_kw["cg_tol"] > 0:
        raise ConfigError("cg_tol must be positive", "cg_tol", line("cg_tol"))
    if any(not r > 0 for r in cfg_kw["radii"]):
        raise ConfigError("radii must be positive", "radii", line("radii"))
    sched_kw = {k: get(k, conv) for k, conv in _SCHEDULE_KEYS.items() if k in raw}
    try:
        sched = Schedule(**sched_kw)
    except (ValueError, TypeError) as exc:
        bad = next(iter(sched_kw), None)
        raise ConfigError(str(exc), bad, line(bad)) from None
    cfg = RunConfig(schedule=sched, base_dir=base_dir, **cfg_kw)
    dom = cfg.make_domain()
    x0, y0, x1, y1 = dom.bbox
    if max(x1 - x0, y1 - y0) / cfg.h + 3 > MAX_NODES:
        raise ConfigError(f"grid exceeds {MAX_NODES} nodes per side", "h", line("h"))
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path.parent))


def _fmt(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def format_config(cfg: RunConfig) -> str:
    """Canonical echo with every default made explicit."""
    kind, vals = cfg.domain
    lines = [f"domain = {kind} " + " ".join(_fmt(v) for v in vals)]
    kind, vals = cfg.source
    if kind == "constant":
        lines.append(f"source = constant {_fmt(vals[0])}")
    elif kind == "gaussian":
        lines.append("source = gaussian " + "; ".join(" ".join(_fmt(v) for v in b) for b in vals))
    else:
        lines.append(f"source = gridfile {vals}")
    lines += [
        f"lambda = {_fmt(cfg.lam)}",
        f"p = {_fmt(cfg.p)}",
        f"h = {_fmt(cfg.h)}",
        f"cg_tol = {_fmt(cfg.cg_tol)}",
    ]
    for f in fields(Schedule):
        if f.name in _SCHEDULE_KEYS:
            lines.append(f"{f.name} = {_fmt(getattr(cfg.schedule, f.name))}")
    if cfg.probes:
        lines.append("probes = " + "; ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in cfg.probes))
    if cfg.radii:
        lines.append("radii = " + " ".join(_fmt(r) for r in cfg.radii))
    lines.append(f"out = {cfg.out}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(format_config(cfg).encode()).hexdigest()
