"""Run configuration: strict TOML schema, defaults and overrides.

Every section and key is listed in ``SCHEMA``; anything else is rejected.
Times accept a unit suffix (``"150ns"``, ``"2us"``, ``"1ms"``, ``"0.2s"``)
or a bare number of seconds.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import tomli

from .errors import ValidationError
from .params import MoleculeSpec, SystemParams, TrapSpec, derive_params, preset

_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9}
_TIME_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(s|ms|us|µs|μs|ns)?\s*$")


def parse_time(value, field: str = "time") -> float:
    """Seconds from a number or a string with an s/ms/us/ns suffix."""
    if isinstance(value, bool):
        raise ValidationError(field, f"expected a time, got {value!r}")
    if isinstance(value, (int, float)):
        t = float(value)
    elif isinstance(value, str):
        m = _TIME_RE.match(value)
        if not m:
            raise ValidationError(field, f"cannot parse time {value!r}; use e.g. '150ns', '2us', '1ms'")
        t = float(m.group(1)) * _TIME_UNITS[m.group(2) or "s"]
    else:
        raise ValidationError(field, f"expected a time, got {value!r}")
    if not math.isfinite(t) or t < 0:
        raise ValidationError(field, f"time must be finite and non-negative, got {value!r}")
    return t


# section -> key -> (type tag, default). None as default means "optional, unset".
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "molecule": {
        "preset": ("str", "nacs"),
        "name": ("str", None),
        "dipole_moment": ("float", None),
        "rotational_constant": ("float", None),
        "mass": ("float", None),
    },
    "trap": {
        "omega": ("float", 2 * math.pi * 50e3),
        "eta": ("float", 10.0),
        "separation": ("float", 10.4),
        "theta": ("float", 0.0),
    },
    "field": {
        "beta": ("float", 0.0),
        "contact_strength": ("float", 0.0),
    },
    "block": {
        "M": ("int", 1),
        "parity": ("parity", "auto"),
    },
    "numerics": {
        "j_max": ("int", 2),
        "n_max": ("int", 120),
        "dim_cap": ("int", 20000),
        "quadrature_tolerance": ("float", 1e-9),
        "k": ("int", 12),
        "floor": ("float", -20.0),
        "gap_max": ("float", 0.75),
        "propagation_tolerance": ("float", 1e-10),
        "window": ("float", 5.0),
        "reach": ("int", 2),
        "samples": ("int", 500),
        "report_states": ("int", 6),
    },
    "grids": {
        "a": ("grid", [4.0, 14.0, 201]),
        "beta": ("grid", [0.0, 0.2, 101]),
    },
    "pulse": {
        "kind": ("str", "sine"),
        "beta0": ("float", 0.16),
        "tau": ("time", 150e-9),
        "fourier": ("fourier", []),
        "normalization": ("str", "none"),
    },
    "gate": {
        "objective": ("str", "internal"),
        "max_iters": ("int", 50),
        "n_fourier": ("int", 3),
        "seed": ("int", 0),
        "fd_step": ("float", 1e-4),
        "waveform_dt": ("time", 1e-9),
    },
    "output": {
        "directory": ("str", None),
        "delimiter": ("str", "\t"),
        "cache_dir": ("str", None),
    },
}


def _coerce(section: str, key: str, tag: str, value):
    name = f"{section}.{key}"
    if tag == "str":
        if not isinstance(value, str):
            raise ValidationError(name, f"expected a string, got {value!r}")
        return value
    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(name, f"expected an integer, got {value!r}")
        return value
    if tag == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(name, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ValidationError(name, "must be finite")
        return float(value)
    if tag == "time":
        return parse_time(value, name)
    if tag == "parity":
        if value in ("auto", "none", 1, -1):
            return value
        raise ValidationError(name, f"expected 'auto', 'none', 1 or -1, got {value!r}")
    if tag == "grid":
        # an integer third entry marks [start, stop, points]; otherwise the list is explicit
        if (
            isinstance(value, list)
            and len(value) == 3
            and all(isinstance(v, (int, float)) for v in value)
            and isinstance(value[2], int)
        ):
            lo, hi, n = value
            if n < 1 or (n > 1 and not hi > lo):
                raise ValidationError(name, "grid is [start, stop, points] with stop > start and points >= 1")
            return [float(lo), float(hi), int(n)]
        if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
            return [float(v) for v in value]
        raise ValidationError(name, "expected [start, stop, points] or an explicit list of values")
    if tag == "fourier":
        if not isinstance(value, list):
            raise ValidationError(name, "expected a list of [A, B, xi] triples (xi in rad/s)")
        out = []
        for row in value:
            if not (isinstance(row, list) and len(row) == 3 and all(isinstance(v, (int, float)) for v in row)):
                raise ValidationError(name, "each Fourier term is [A, B, xi]")
            out.append([float(v) for v in row])
        return out
    raise AssertionError(tag)


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(d) for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def merge(base: dict, data: dict, origin: str = "config") -> dict:
    """Strictly merge ``data`` (section -> key -> value) into ``base``."""
    out = copy.deepcopy(base)
    if not isinstance(data, dict):
        raise ValidationError(origin, "top level must be a table of sections")
    for section, values in data.items():
        if section not in SCHEMA:
            raise ValidationError(section, f"unknown section in {origin}; expected one of {sorted(SCHEMA)}")
        if not isinstance(values, dict):
            raise ValidationError(section, "expected a table")
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ValidationError(f"{section}.{key}", f"unknown key; expected one of {sorted(SCHEMA[section])}")
            out[section][key] = _coerce(section, key, SCHEMA[section][key][0], value)
    return out


def load_toml(path) -> dict:
    """Parse a TOML file; OSError propagates for the caller to map to an I/O failure."""
    with open(path, "rb") as fh:
        try:
            return tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ValidationError(str(path), f"invalid TOML: {exc}") from exc


def default_config_text() -> str:
    return resources.files("moltweezer").joinpath("data/default.toml").read_text()


def parse_override(text: str) -> tuple[str, str, object]:
    """'section.key=value' with the value parsed as a TOML scalar or array."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ValidationError("--set", f"expected section.key=value, got {text!r}")
    lhs, rhs = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomli.loads(f"v = {rhs.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = rhs.strip()
    return section, key, value


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        data = merge(defaults(), tomli.loads(default_config_text()), "default config")
        if path is not None:
            data = merge(data, load_toml(Path(path)), str(path))
        for section, key, value in overrides:
            data = merge(data, {section: {key: value}}, "overrides")
        cfg = cls(data)
        cfg.validate()
        return cfg

    def __getitem__(self, section):
        return self.data[section]

    def molecule(self) -> MoleculeSpec:
        m = self.data["molecule"]
        explicit = [m[k] for k in ("dipole_moment", "rotational_constant", "mass")]
        if all(v is None for v in explicit):
            try:
                return preset(m["preset"])
            except KeyError as exc:
                raise ValidationError("molecule.preset", str(exc.args[0])) from None
        if any(v is None for v in explicit):
            raise ValidationError(
                "molecule", "explicit molecules need dipole_moment, rotational_constant and mass together"
            )
        return MoleculeSpec(m["name"] or "custom", *explicit)

    def trap(self) -> TrapSpec:
        t = self.data["trap"]
        return TrapSpec(t["omega"], t["eta"], t["separation"], t["theta"])

    def params(self) -> SystemParams:
        f = self.data["field"]
        return derive_params(self.molecule(), self.trap(), f["beta"], f["contact_strength"])

    def parity(self, M: int | None = None):
        M = self.data["block"]["M"] if M is None else M
        p = self.data["block"]["parity"]
        if p == "none":
            return None
        if p == "auto":
            return -1 if M == 1 else 1
        return p

    def grid(self, name: str) -> "list[float]":
        import numpy as np

        g = self.data["grids"][name]
        if len(g) == 3 and isinstance(g[2], int):
            return np.linspace(g[0], g[1], g[2])
        arr = np.asarray(g, dtype=float)
        if arr.size > 1 and np.any(np.diff(arr) <= 0):
            raise ValidationError(f"grids.{name}", "explicit grid must be strictly increasing")
        return arr

    def validate(self):
        self.params()  # physical validation names the failing field
        num = self.data["numerics"]
        for key in ("j_max", "n_max", "k", "samples", "reach", "report_states"):
            if num[key] < 0 or (key in ("k", "samples") and num[key] < 1):
                raise ValidationError(f"numerics.{key}", f"must be positive, got {num[key]}")
        for key in ("quadrature_tolerance", "propagation_tolerance", "gap_max", "window"):
            if not num[key] > 0:
                raise ValidationError(f"numerics.{key}", f"must be > 0, got {num[key]}")
        if num["dim_cap"] < 1:
            raise ValidationError("numerics.dim_cap", "must be >= 1")
        p = self.data["pulse"]
        if p["kind"] not in ("quench", "sine", "crab"):
            raise ValidationError("pulse.kind", f"expected quench, sine or crab, got {p['kind']!r}")
        if not p["tau"] > 0:
            raise ValidationError("pulse.tau", "must be > 0")
        if p["normalization"] not in ("none", "peak"):
            raise ValidationError("pulse.normalization", "expected 'none' or 'peak'")
        g = self.data["gate"]
        if g["objective"] not in ("internal", "full"):
            raise ValidationError("gate.objective", "expected 'internal' or 'full'")
        if g["max_iters"] < 0 or g["n_fourier"] < 0:
            raise ValidationError("gate", "max_iters and n_fourier must be >= 0")
        if self.data["field"]["beta"] < 0:
            raise ValidationError("field.beta", "must be >= 0")
        for name in ("a", "beta"):
            self.grid(name)
        if len(self.data["output"]["delimiter"]) != 1:
            raise ValidationError("output.delimiter", "must be a single character")
        return self
