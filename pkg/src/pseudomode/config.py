"""
Scenario configuration.

A configuration is a TOML document with the sections below.  Unknown
sections or keys are rejected, values are type-checked, and the resolved
configuration (defaults plus file plus ``--set`` overrides) is what every
scenario records in its manifest.

Required keys have no default: ``resonator.radius``, ``resonator.index`` and
``emitter.dipole``.
"""
import copy
import math
from pathlib import Path

import tomli

from .errors import ConfigError
from .poles import CALIBRATED_IM_MIN, DEFAULT_RE_MIN
from .pseudomodes import CALIBRATED_R_EMIT

REQUIRED = object()

SCENARIOS = ("spectrum", "poles", "portraits", "dynamics", "two_mode", "fieldmap", "oracle_compare",
             "acceptance")

# section -> key -> (type, default).  Types: float, int, str, bool, "float_or_tuned",
# "label" ([l, n]), "labels" (list of [l, n]).
SCHEMA = {
    "resonator": {
        "radius": (float, REQUIRED),
        "index": (float, REQUIRED),
    },
    "emitter": {
        "dipole": (float, REQUIRED),
        "r_emit": (float, CALIBRATED_R_EMIT),
        "omega0": ("float_or_tuned", "tuned"),
        "tune_target": ("label", [8, 3]),
        "lamb_convention": (str, "square"),
    },
    "window": {
        "l_max": (int, 30),
        "re_max": (float, 20.0),
        "im_min": (float, CALIBRATED_IM_MIN),
        "re_min": (float, DEFAULT_RE_MIN),
    },
    "spectrum": {
        "k_min": (float, 0.5),
        "k_max": (float, 12.0),
        "n_k": (int, 23001),
        "l_max": (int, 30),
    },
    "portraits": {
        "labels": ("labels", [[5, 4], [8, 3]]),
        "r_max": (float, 1.5),
        "n_r": (int, 151),
        "n_theta": (int, 91),
    },
    "dynamics": {
        "t_max": (float, 2.0e6),
        "n_t": (int, 20001),
        "method": (str, "auto"),
        "background_rows": (int, 401),
        "classify": (bool, False),
        "classify_tol": (float, 0.2),
    },
    "two_mode": {
        "keep": ("labels", [[5, 4], [8, 3]]),
    },
    "fieldmap": {
        "r_min": (float, 0.05),
        "r_max": (float, 20.0),
        "n_r": (int, 200),
        "t_max": (float, 20.0),
        "n_t": (int, 201),
        "filter": (str, "all"),
        "delay": (str, "optical"),
    },
    "oracle": {
        "box_radius": (float, 200.0),
        "k_max": (float, 25.0),
        "l_max": (int, 30),
        "t_max": (float, 320.0),
        "n_t": (int, 321),
    },
    "output": {
        "dir": (str, "out"),
    },
    "cache": {
        "dir": (str, "~/.cache/pseudomode"),
    },
}

PRESETS = {
    "d10": {"emitter": {"dipole": 10.0}},
    "d100": {"emitter": {"dipole": 100.0}, "dynamics": {"t_max": 2.0e5}},
    "d1e4": {"emitter": {"dipole": 1.0e4}, "dynamics": {"t_max": 3.0e4, "n_t": 6001, "classify": True}},
}
_PRESET_BASE = {"resonator": {"radius": 1.0, "index": 3.446}}


def _check_type(path, kind, value):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind == "float_or_tuned":
        if value == "tuned":
            return value
        return _check_type(path, float, value)
    if kind == "label":
        if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
            raise ConfigError(f"{path}: expected [l, n], got {value!r}")
        return list(value)
    if kind == "labels":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list of [l, n], got {value!r}")
        return [_check_type(path, "label", v) for v in value]
    raise AssertionError(kind)


def _merge(base, update, origin):
    for section, values in update.items():
        if section not in SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{origin}: unknown key {section}.{key}")
            base.setdefault(section, {})[key] = value
    return base


def parse_override(text):
    """``'section.key=value'`` -> ``({section: {key: value}})``; values use TOML syntax.

    A bare word that is not valid TOML is taken as a string.
    """
    if "=" not in text:
        raise ConfigError(f"--set {text!r}: expected key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    if key.count(".") != 1:
        raise ConfigError(f"--set {text!r}: key must look like section.name")
    section, name = key.split(".")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return {section: {name: value}}


def _validate(raw):
    resolved = {}
    missing = []
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        for key, (kind, default) in keys.items():
            path = f"{section}.{key}"
            if key in raw.get(section, {}):
                resolved[section][key] = _check_type(path, kind, raw[section][key])
            elif default is REQUIRED:
                missing.append(path)
            else:
                resolved[section][key] = copy.deepcopy(default)
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    positive = [("resonator", "radius"), ("emitter", "r_emit"), ("window", "re_max"),
                ("spectrum", "k_min"), ("spectrum", "k_max"), ("portraits", "r_max"),
                ("dynamics", "t_max"), ("fieldmap", "r_max"), ("fieldmap", "t_max"),
                ("oracle", "box_radius"), ("oracle", "k_max"), ("oracle", "t_max")]
    for section, key in positive:
        if not resolved[section][key] > 0:
            raise ConfigError(f"{section}.{key} must be positive")
    if resolved["resonator"]["index"] < 1:
        raise ConfigError("resonator.index must be >= 1")
    if resolved["emitter"]["dipole"] < 0:
        raise ConfigError("emitter.dipole must be non-negative")
    if resolved["window"]["im_min"] >= 0:
        raise ConfigError("window.im_min must be negative")
    if resolved["emitter"]["lamb_convention"] not in ("square", "modulus"):
        raise ConfigError("emitter.lamb_convention must be 'square' or 'modulus'")
    if resolved["dynamics"]["method"] not in ("auto", "eigen", "ode"):
        raise ConfigError("dynamics.method must be 'auto', 'eigen' or 'ode'")
    if resolved["fieldmap"]["delay"] not in ("optical", "surface"):
        raise ConfigError("fieldmap.delay must be 'optical' or 'surface'")
    parse_filter(resolved["fieldmap"]["filter"])
    for section, key in [("spectrum", "n_k"), ("portraits", "n_r"), ("portraits", "n_theta"),
                         ("dynamics", "n_t"), ("fieldmap", "n_r"), ("fieldmap", "n_t"), ("oracle", "n_t")]:
        if resolved[section][key] < 2:
            raise ConfigError(f"{section}.{key} must be at least 2")
    return resolved


def parse_filter(text):
    """Mode filter string -> argument for the field functions.

    ``all``; ``l,n`` or ``l,n;l,n`` (only those modes); ``except:l,n[;l,n]``.
    """
    text = text.strip()
    if text == "all":
        return None
    mode = "only"
    if text.startswith("except:"):
        mode, text = "except", text[len("except:"):]
    labels = []
    for part in text.split(";"):
        try:
            l, n = (int(v) for v in part.split(","))
        except ValueError:
            raise ConfigError(f"fieldmap.filter: cannot parse {part!r} as l,n") from None
        labels.append((l, n))
    return (mode, labels)


def load_config(path=None, overrides=(), preset=None):
    """Resolve a configuration from an optional preset, a TOML file and overrides."""
    raw = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        raw = _merge(raw, copy.deepcopy(_PRESET_BASE), f"preset {preset}")
        raw = _merge(raw, copy.deepcopy(PRESETS[preset]), f"preset {preset}")
    if path is not None:
        text = Path(path).read_text()
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        raw = _merge(raw, data, str(path))
    for item in overrides:
        raw = _merge(raw, parse_override(item), f"--set {item}")
    return _validate(raw)
