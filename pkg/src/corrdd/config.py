"""Strict INI-style configuration for scenarios.

Sections are ``[drive]``, ``[noise]``, ``[lindblad]`` and ``[run]``; each
line is ``key = value``.  Frequencies take ``MHz``, ``kHz`` or ``Hz``
suffixes and are stored in rad/s.  Times take ``s``, ``ms``, ``us``
(or ``µs``) and ``ns``.  Rates are plain numbers in 1/s (a ``Hz`` or
``/s`` suffix is accepted and means the same).  Only keys that appear in
the file are stored; scenarios supply their own defaults for the rest.
"""

import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError

FREQ_UNITS = {"mhz": 1e6, "khz": 1e3, "hz": 1.0}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
SCENARIOS = ("memory_compare", "shift_scan", "corr_time_sweep", "sensing", "pulse_scan",
             "lindblad_limit", "sensitivity_report")


def _check(pred, msg):
    def check(v):
        if not pred(v):
            raise ValueError(msg)
        return v
    return check


def _any(v):
    return v


def _prob(v):
    return _check(lambda x: -1.0 <= x <= 1.0, "must satisfy |c| <= 1")(v)


def _pos(v):
    return _check(lambda x: x > 0, "must be positive")(v)


def _nonneg(v):
    return _check(lambda x: x >= 0, "must be non-negative")(v)


# key -> (value type, validator)
SCHEMA = {
    "drive": {
        "omega1": ("freq", _pos),
        "omega2": ("freq", _nonneg),
        "omega1_tilde": ("freq", _pos),
        "shift_policy": ("choice:auto,resonant,correlated,correlated_bs,explicit", _any),
        "shift_c": ("float", _prob),
    },
    "noise": {
        "t2_star": ("time", _pos),
        "tau_delta": ("time", _pos),
        "tau_omega": ("time", _pos),
        "delta_omega": ("float", _nonneg),
        "c": ("float", _prob),
        "seed": ("int", _nonneg),
    },
    "lindblad": {
        "t1": ("time", _pos),
        "gamma2_ratio": ("float", _nonneg),
        "gamma_phi": ("rate", _nonneg),
        "duration": ("time", _pos),
        "t2_total": ("time", _pos),
    },
    "run": {
        "n_realizations": ("int", _check(lambda x: x >= 1, "must be at least 1")),
        "n_points": ("int", _check(lambda x: x >= 8, "must be at least 8")),
        "burst": ("int", _check(lambda x: x >= 1, "must be at least 1")),
        "output_dir": ("str", _any),
        "duration_free": ("time", _pos),
        "duration_single": ("time", _pos),
        "duration_sdd": ("time", _pos),
        "duration_cdd": ("time", _pos),
        "n_list": ("floatlist", _any),
        "tau_list": ("timelist", _check(lambda xs: all(x > 0 for x in xs), "entries must be positive")),
        "delta_list": ("floatlist", _check(lambda xs: all(x >= 0 for x in xs), "entries must be >= 0")),
        "eps_max": ("float", _check(lambda x: 0 < x <= 0.5, "precondition |eps| <= 0.5 violated")),
        "eps_points": ("int", _check(lambda x: x >= 2, "must be at least 2")),
        "sensing_kind": ("choice:both,low_attenuation,high_attenuation", _any),
        "g0": ("freq", _nonneg),
        "omega0": ("freq", _pos),
        "sensing_duration": ("time", _pos),
        "sensing_noise": ("bool", _any),
        "stroboscopic": ("choice:none,omega2,omega1", _any),
        "alpha": ("float", _check(lambda x: x != 0, "must be non-zero")),
        "a": ("float", _any),
        "b": ("float", _any),
        "t2rho": ("time", _pos),
        "n_ph": ("float", _pos),
        "tau": ("time", _pos),
        "t_r": ("time", _nonneg),
        "overhead": ("float", _check(lambda x: x >= 1, "must be at least 1")),
        "contrast": ("float", _pos),
        "p": ("float", _pos),
    },
}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_freq(text):
    """``'2MHz'`` -> 2*pi*2e6 rad/s.  A bare number is taken as rad/s."""
    m = re.fullmatch(rf"\s*({_NUM})\s*([A-Za-z]*)\s*", text)
    if not m:
        raise ValueError(f"cannot read frequency {text!r}")
    unit = m.group(2).lower()
    if unit == "":
        return float(m.group(1))
    if unit not in FREQ_UNITS:
        raise ValueError(f"unknown frequency unit {m.group(2)!r} (use MHz, kHz or Hz)")
    return 2 * math.pi * float(m.group(1)) * FREQ_UNITS[unit]


def parse_time(text):
    m = re.fullmatch(rf"\s*({_NUM})\s*([A-Za-zµ]*)\s*", text)
    if not m:
        raise ValueError(f"cannot read time {text!r}")
    unit = m.group(2)
    if unit == "":
        return float(m.group(1))
    if unit not in TIME_UNITS:
        raise ValueError(f"unknown time unit {unit!r} (use s, ms, us or ns)")
    return float(m.group(1)) * TIME_UNITS[unit]


def parse_rate(text):
    t = text.strip()
    for suffix in ("/s", "Hz", "hz"):
        if t.endswith(suffix):
            t = t[: -len(suffix)]
            break
    return float(t)


def _convert(kind, text):
    text = text.strip()
    if kind == "freq":
        return parse_freq(text)
    if kind == "time":
        return parse_time(text)
    if kind == "rate":
        return parse_rate(text)
    if kind == "float":
        return float(text)
    if kind == "int":
        v = float(text)
        if v != int(v):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(v)
    if kind == "str":
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind == "floatlist":
        return tuple(float(x) for x in text.split(",") if x.strip())
    if kind == "timelist":
        return tuple(parse_time(x) for x in text.split(",") if x.strip())
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split(",")
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    raise AssertionError(kind)


@dataclass
class ScenarioConfig:
    """Parsed configuration: explicitly set values per section."""

    name: str = None
    values: dict = field(default_factory=lambda: {s: {} for s in SCHEMA})

    def get(self, section, key, default=None):
        return self.values[section].get(key, default)

    def set(self, section, key, raw, line=None, path=None):
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line, path)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line, path)
        kind, check = SCHEMA[section][key]
        try:
            value = check(_convert(kind, raw))
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}", line, path) from None
        self.values[section][key] = value

    def override(self, assignment):
        """Apply ``key=value`` or ``section.key=value``."""
        if "=" not in assignment:
            raise ConfigError(f"override {assignment!r} is not key=value")
        key, raw = (x.strip() for x in assignment.split("=", 1))
        if "." in key:
            section, key = key.split(".", 1)
        else:
            owners = [s for s in SCHEMA if key in SCHEMA[s]]
            if not owners:
                raise ConfigError(f"unknown key {key!r}")
            section = owners[0]
        self.set(section, key, raw)


def parse_config(path):
    """Parse a configuration file strictly; every error names its line."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(lines, path)


def parse_config_text(lines, path="<string>"):
    if isinstance(lines, str):
        lines = lines.splitlines()
    cfg = ScenarioConfig()
    section = None
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([A-Za-z_]+)\]", line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", no, path)
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line {raw.strip()!r}", no, path)
        if section is None:
            raise ConfigError("key outside of any section", no, path)
        key, value = (x.strip() for x in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"malformed line {raw.strip()!r}", no, path)
        cfg.set(section, key, value, no, path)
    return cfg


def _format(kind, value):
    if kind in ("freq", "rate"):
        return repr(value)  # bare numbers are rad/s (or 1/s), which round-trips exactly
    if kind == "time":
        return f"{value!r}s"
    if kind == "timelist":
        return ",".join(f"{v!r}s" for v in value)
    if kind == "floatlist":
        return ",".join(repr(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    return str(value) if not isinstance(value, float) else repr(value)


def serialize_config(cfg):
    out = []
    for section, keys in SCHEMA.items():
        vals = cfg.values[section]
        if not vals:
            continue
        out.append(f"[{section}]")
        for key in keys:
            if key in vals:
                out.append(f"{key} = {_format(keys[key][0], vals[key])}")
        out.append("")
    return "\n".join(out)
