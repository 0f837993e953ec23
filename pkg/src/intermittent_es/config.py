"""Run configuration files.

A run is described by a sectioned TOML document::

    name = "fig2b"

    [scheme]
    kind = "classical-intermittent"
    omega = 62.83185307179586
    rho = 0.25

    [fields]
    kind = "affine"

    [cost]
    kind = "case-study"

    [measurement]
    period = 1.0
    eps = 0.1

    [engine]
    t_end = 100.0

    [run]
    x0 = [-1.0]
    band = 0.6

Every key is checked against :data:`SCHEMA`; unknown keys and bad values
raise :class:`ConfigurationError` with the offending line number.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli

from . import schemes as sch
from .checks import ConfigurationError
from .costs import CostField, case_study_cost
from .engine import EngineConfig
from .fields import FieldFamily
from .measurement import MeasurementSchedule
from .signals import DitherBank, DitherSignal, cos_sin_bank

# section -> key -> (accepted python types, description)
_NUM = (int, float)
SCHEMA: dict[str, dict[str, tuple[tuple, str]]] = {
    "": {"name": ((str,), "run label used in plot titles")},
    "scheme": {
        "kind": ((str,), "one of " + ", ".join(sch.KINDS)),
        "omega": (_NUM, "dither frequency in rad/s"),
        "rho": (_NUM, "descent gain in 1/s"),
        "rho2": (_NUM, "hold-phase gain in 1/s"),
        "eps_prime": (_NUM, "known lower bound on the pulse width in s"),
        "a": (_NUM, "adaptive amplitude floor parameter"),
        "b": (_NUM, "adaptive amplitude threshold parameter"),
        "tau0": (_NUM, "initial dither clock of the freeze scheme in s"),
        "g_init_norm": (_NUM, "gradient norm seeding the first adaptive amplitude"),
    },
    "fields": {
        "kind": ((str,), "affine or trig"),
    },
    "dithers": {
        "kinds": ((list,), "list of 'cos' / 'sin'"),
        "k": ((list,), "frequency multipliers: integers, decimals or 'p/q' strings"),
    },
    "cost": {
        "kind": ((str,), "case-study or quadratic"),
        "minimizer": ((list,), "minimizer x* of a quadratic cost"),
        "curvature": ((list,), "curvature matrix Q (rows)"),
        "offset": (_NUM, "value at the minimizer"),
    },
    "measurement": {
        "period": (_NUM, "transmission period T_s in s"),
        "eps": (_NUM, "pulse width in s, 0 < eps <= period"),
    },
    "engine": {
        "t0": (_NUM, "start time in s"),
        "t_end": (_NUM, "end time in s"),
        "steps_per_dither_period": ((int,), "RK4 steps per dither period, >= 32"),
        "method": ((str,), "rk4 or euler"),
        "sample_stride": ((int,), "record every k-th step"),
        "dt": (_NUM, "fixed nominal step in s (overrides steps_per_dither_period)"),
        "blowup": (_NUM, "divergence radius around x*"),
    },
    "run": {
        "x0": ((list, int, float), "initial state"),
        "band": (_NUM, "convergence band radius for metrics"),
    },
}

DEFAULT_BAND = 0.6


@dataclass(frozen=True)
class RunSpec:
    name: str
    scheme: sch.SchemeConfig
    sched: MeasurementSchedule
    cost: CostField
    eng: EngineConfig
    x0: np.ndarray
    band: float
    doc: dict


def _key_line(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    """1-based line of ``key`` inside ``[section]`` (or of the header itself)."""
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section:
            m = re.match(r'^"?([A-Za-z0-9_-]+)"?\s*=', line)
            if m and m.group(1) == key:
                return lineno
    return None


class _Doc:
    """Parsed document plus where its keys came from."""

    def __init__(self, data: dict, text: str = "", source: str = "<config>"):
        self.data = data
        self.text = text
        self.source = source

    def where(self, section: str, key: Optional[str] = None) -> str:
        line = _key_line(self.text, section, key) if self.text else None
        if line is None and key is not None and self.text:
            line = _key_line(self.text, section)
        return f"{self.source}:{line}" if line else self.source

    def error(self, section: str, key: Optional[str], message: str) -> ConfigurationError:
        label = f"{section}.{key}" if section and key else (key or section or "document")
        return ConfigurationError(f"{self.where(section, key)}: {label}: {message}")


def parse_text(text: str, source: str = "<config>") -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc


def validate_keys(doc: _Doc) -> None:
    for name, value in doc.data.items():
        if isinstance(value, dict):
            if name not in SCHEMA or name == "":
                raise doc.error(name, None, f"unknown section; expected one of "
                                f"{', '.join(s for s in SCHEMA if s)}")
            for key, item in value.items():
                if key not in SCHEMA[name]:
                    raise doc.error(name, key, f"unknown key; expected one of {', '.join(SCHEMA[name])}")
                types, _ = SCHEMA[name][key]
                if isinstance(item, bool) or not isinstance(item, types):
                    raise doc.error(name, key, f"expected {' or '.join(t.__name__ for t in types)}, "
                                    f"got {type(item).__name__} {item!r}")
        elif name not in SCHEMA[""]:
            raise doc.error("", name, "unknown top-level key")


def _section(doc: _Doc, name: str) -> dict:
    return doc.data.get(name, {})


def _floats(doc: _Doc, section: str, key: str, value) -> np.ndarray:
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise doc.error(section, key, f"expected numbers, got {value!r}") from exc
    if not np.all(np.isfinite(arr)):
        raise doc.error(section, key, "values must be finite")
    return arr


def _build_cost(doc: _Doc) -> CostField:
    sec = _section(doc, "cost")
    kind = sec.get("kind", "case-study")
    if kind == "case-study":
        extra = [k for k in ("minimizer", "curvature", "offset") if k in sec]
        if extra:
            raise doc.error("cost", extra[0], "not allowed with kind = \"case-study\"")
        return case_study_cost()
    if kind == "quadratic":
        if "minimizer" not in sec:
            raise doc.error("cost", None, "a quadratic cost needs 'minimizer'")
        x_star = _floats(doc, "cost", "minimizer", sec["minimizer"])
        Q = sec.get("curvature")
        try:
            return CostField.quadratic(x_star, None if Q is None else np.asarray(Q, dtype=float),
                                       float(sec.get("offset", 0.0)))
        except (ConfigurationError, ValueError) as exc:
            raise doc.error("cost", "curvature", str(exc)) from exc
    raise doc.error("cost", "kind", f"unknown cost kind {kind!r}; expected case-study or quadratic")


def _build_dithers(doc: _Doc, n: int) -> DitherBank:
    sec = _section(doc, "dithers")
    if not sec:
        return cos_sin_bank(n)
    kinds = sec.get("kinds")
    ks = sec.get("k")
    if kinds is None or ks is None:
        raise doc.error("dithers", None, "give both 'kinds' and 'k'")
    if len(kinds) != len(ks):
        raise doc.error("dithers", "k", f"{len(ks)} multipliers for {len(kinds)} dithers")
    makers = {"cos": DitherSignal.cosine, "sin": DitherSignal.sine}
    out = []
    for kind, k in zip(kinds, ks):
        if kind not in makers:
            raise doc.error("dithers", "kinds", f"unknown dither {kind!r}; expected cos or sin")
        try:
            out.append(makers[kind](k))
        except ConfigurationError as exc:
            raise doc.error("dithers", "k", str(exc)) from exc
    try:
        return DitherBank(tuple(out))
    except ConfigurationError as exc:
        raise doc.error("dithers", "kinds", str(exc)) from exc


def build_spec(data: dict, text: str = "", source: str = "<config>") -> RunSpec:
    """Turn a parsed document into validated run objects."""
    doc = _Doc(data, text, source)
    validate_keys(doc)
    cost = _build_cost(doc)
    n = cost.n

    run = _section(doc, "run")
    x0 = _floats(doc, "run", "x0", run.get("x0", [-1.0] * n))
    if x0.size != n:
        raise doc.error("run", "x0", f"has {x0.size} entries, the cost is {n}-dimensional")
    band = float(run.get("band", DEFAULT_BAND))
    if not band > 0:
        raise doc.error("run", "band", "must be positive")

    s = _section(doc, "scheme")
    if "kind" not in s:
        raise doc.error("scheme", None, "missing 'kind'")
    for key in ("omega", "rho"):
        if key not in s:
            raise doc.error("scheme", None, f"missing {key!r}")
    rho = float(s["rho"])
    fkind = _section(doc, "fields").get("kind", "affine")
    if fkind not in ("affine", "trig"):
        raise doc.error("fields", "kind", f"unknown field family {fkind!r}; expected affine or trig")
    try:
        fields = FieldFamily.affine(rho, n) if fkind == "affine" else FieldFamily.trig(rho, n)
    except ConfigurationError as exc:
        raise doc.error("scheme", "rho", str(exc)) from exc
    dithers = _build_dithers(doc, n)

    kwargs = {k: float(v) for k, v in s.items() if k not in ("kind", "omega", "rho")}
    try:
        scheme = sch.SchemeConfig(s["kind"], float(s["omega"]), rho, fields, dithers, **kwargs)
    except ConfigurationError as exc:
        raise doc.error("scheme", _blame(str(exc), s), str(exc)) from exc

    m = _section(doc, "measurement")
    period = float(m.get("period", 1.0))
    try:
        sched = MeasurementSchedule(period, float(m.get("eps", period)))
    except ConfigurationError as exc:
        raise doc.error("measurement", "eps" if "eps" in m else "period", str(exc)) from exc

    e = dict(_section(doc, "engine"))
    try:
        eng = EngineConfig(**{k: (float(v) if k in ("t0", "t_end", "dt", "blowup") else v)
                              for k, v in e.items()})
    except ConfigurationError as exc:
        raise doc.error("engine", _blame(str(exc), e), str(exc)) from exc
    if eng.blowup is not None and not eng.blowup > band:
        raise doc.error("engine", "blowup", f"must exceed run.band = {band}")

    return RunSpec(str(data.get("name", Path(source).stem)), scheme, sched, cost, eng, x0, band,
                   copy.deepcopy(data))


def _blame(message: str, section: dict) -> Optional[str]:
    """Best guess of which key an error message is about."""
    for key in sorted(section, key=len, reverse=True):
        if key in message:
            return key
    return None


def load(path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    return build_spec(parse_text(text, str(path)), text, str(path))


def preset_names() -> list[str]:
    files = resources.files("intermittent_es").joinpath("presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def preset_text(name: str) -> str:
    res = resources.files("intermittent_es").joinpath("presets").joinpath(f"{name}.toml")
    if not res.is_file():
        raise ConfigurationError(f"no bundled preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text()


def load_preset(name: str) -> RunSpec:
    text = preset_text(name)
    return build_spec(parse_text(text, f"preset:{name}"), text, f"preset:{name}")


def resolve(path_or_preset: str) -> tuple[dict, str, str]:
    """``(document, text, source)`` from a file path or a bundled preset name."""
    path = Path(path_or_preset)
    if path.is_file():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
        source = str(path)
    elif path.suffix == "" and path_or_preset in preset_names():
        text = preset_text(path_or_preset)
        source = f"preset:{path_or_preset}"
    else:
        raise ConfigurationError(f"{path_or_preset}: no such file or bundled preset")
    return parse_text(text, source), text, source


def parse_value(raw: str) -> Any:
    """A grid value: TOML scalar syntax, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        return raw


def check_key(key: str) -> tuple[str, str]:
    section, _, name = key.rpartition(".")
    if section not in SCHEMA or not section or name not in SCHEMA[section]:
        known = [f"{s}.{k}" for s in SCHEMA if s for k in SCHEMA[s]]
        raise ConfigurationError(f"unknown config key {key!r}; expected one of {', '.join(known)}")
    return section, name


def with_override(data: dict, key: str, value) -> dict:
    section, name = check_key(key)
    out = copy.deepcopy(data)
    if section == "run" and name == "x0" and not isinstance(value, list):
        value = [value]
    out.setdefault(section, {})[name] = value
    return out


def schema_text() -> str:
    """Human-readable schema for ``--help`` and the README."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]" if section else "(top level)")
        for key, (_, desc) in keys.items():
            lines.append(f"  {key:<24} {desc}")
    return "\n".join(lines)


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    if math.isnan(value):
        return "nan"
    return "%.17g" % value
