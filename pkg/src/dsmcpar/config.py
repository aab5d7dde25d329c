"""INI problem files.

Sections: ``problem``, ``grid``, ``clock``, ``surfaces``, ``inflow``,
``initial_fill``, ``collision`` and ``strategy``.  Vectors are written as
comma-separated numbers.  Surface values are ``open``, ``specular`` or
``diffuse:<temperature>``.
"""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .gas import CollisionParams, FlowProblem, GasState, Inflow, SimulationClock
from .grid import DIFFUSE, FACE_NAMES, OPEN, SPECULAR, Body, CellGrid, Geometry
from .parallel import StrategyConfig

_KINDS = {"open": OPEN, "specular": SPECULAR, "diffuse": DIFFUSE}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _vec3(text: str | None) -> tuple:
    v = _floats(text) if text else ()
    if len(v) > 3:
        raise ConfigError(f"velocity has more than 3 components: {text!r}")
    return tuple(v) + (0.0,) * (3 - len(v))


def _surface(text: str, default_temp: float = 1.0):
    name, _, temp = text.strip().lower().partition(":")
    if name not in _KINDS:
        raise ConfigError(f"unknown surface kind {name!r}; use open, specular or diffuse:<T>")
    t = float(temp) if temp else default_temp
    return _KINDS[name], t


def _get(sec, key, conv=float, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"[{sec.name}] is missing required key {key!r}")
        return default
    try:
        return conv(sec[key])
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key}: {exc}") from None


def _section(cp, name):
    if not cp.has_section(name):
        raise ConfigError(f"missing section [{name}]")
    return cp[name]


def parse_problem(cp: configparser.ConfigParser) -> FlowProblem:
    g = _section(cp, "grid")
    lo, hi = _get(g, "lo", _floats, required=True), _get(g, "hi", _floats, required=True)
    counts = tuple(int(c) for c in _get(g, "counts", _floats, required=True))
    if not len(lo) == len(hi) == len(counts):
        raise ConfigError("[grid] lo, hi and counts need the same number of axes")
    try:
        grid = CellGrid(lo, hi, counts)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None

    c = _section(cp, "clock")
    clock = SimulationClock(
        _get(c, "dt", required=True), _get(c, "dt_s", required=True), _get(c, "dt_L", required=True),
        _get(c, "dt_av"), _get(c, "t_H"),
    )

    kinds, temps = [SPECULAR] * 4, [1.0] * 4
    body = None
    if cp.has_section("surfaces"):
        s = cp["surfaces"]
        for i, name in enumerate(FACE_NAMES):
            if name in s:
                kinds[i], temps[i] = _surface(s[name])
        if "body" in s:
            b = _floats(s["body"])
            if len(b) != 4:
                raise ConfigError("[surfaces] body needs x0, x1, y0, y1")
            kind, t = _surface(s.get("body_surface", "specular"))
            body = Body((b[0], b[2]), (b[1], b[3]), kind, t)
    geometry = Geometry(grid, tuple(kinds), tuple(temps), body)

    inflow = ()
    if cp.has_section("inflow"):
        s = cp["inflow"]
        faces = [f.strip() for f in s.get("faces", "").split(",") if f.strip()]
        for f in faces:
            if f not in FACE_NAMES:
                raise ConfigError(f"[inflow] unknown face {f!r}")
        n = _get(s, "number_density", required=True)
        t = _get(s, "temperature", required=True)
        u = _vec3(s.get("drift"))
        inflow = tuple(Inflow(FACE_NAMES.index(f), n, t, u) for f in faces)

    fill = None
    if cp.has_section("initial_fill"):
        s = cp["initial_fill"]
        region = None
        if "region_lo" in s or "region_hi" in s:
            region = (_get(s, "region_lo", _floats, required=True), _get(s, "region_hi", _floats, required=True))
        fill = GasState(_get(s, "number_density", required=True), _get(s, "temperature", required=True),
                        _vec3(s.get("drift")), region)

    s = _section(cp, "collision")
    collision = CollisionParams(
        _get(s, "diameter", required=True), _get(s, "weight", default=1.0), _get(s, "crmax_init"),
        s.getboolean("enabled", True),
    )
    name = cp.get("problem", "name", fallback="problem")
    return FlowProblem(geometry, clock, collision, inflow, fill, name).validate()


def parse_strategy(cp: configparser.ConfigParser) -> StrategyConfig:
    if not cp.has_section("strategy"):
        return StrategyConfig()
    s = cp["strategy"]
    return StrategyConfig(
        s.get("strategy", "sequential").strip().lower(),
        _get(s, "n", int, 1), _get(s, "p", int, 1), _get(s, "p1", int, 1), _get(s, "p2", int, 1),
        _get(s, "pri", float, 0.0), _get(s, "master_seed", int, 0),
    )


def read(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def load(path) -> tuple[FlowProblem, StrategyConfig]:
    cp = read(resolve(path))
    return parse_problem(cp), parse_strategy(cp)


def load_problem(path) -> FlowProblem:
    return load(path)[0]


def shipped_problems() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("dsmcpar").joinpath("problems").iterdir()
                  if p.name.endswith(".ini"))


def resolve(path) -> Path:
    """A file path, or the name of a shipped problem (``box``, ``expansion``, ``body``)."""
    p = Path(path)
    if p.exists():
        return p
    shipped = resources.files("dsmcpar").joinpath("problems", f"{path}.ini")
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"no such problem file or shipped problem: {path}")
