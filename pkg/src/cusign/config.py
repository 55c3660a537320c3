"""Scenario configuration files (INI syntax, one scenario per file).

Sections and keys (all optional; defaults in parentheses)::

    [scenario]  seed (0), duration (200.0), side_length (5.0), speed (0.5), warmup (5*window)
    [ugv]       mass (10), yaw_inertia (1), width (0.5), rolling_resistance (5),
                turning_resistance (2), sample_time (0.01)
    [controller] k_v (2), k_heading (3), k_omega (10), f_max (50), switch_radius (0.2)
    [noise]     Q, R: comma-separated diagonal entries
    [cusign]    tau (2), window (100), Z (3), z_ref ("median" or a number)
    [cusum]     bias (3.3), threshold (2.3226), target_rate (0.15), window (100), Z (3)
    [attack]    kind (none), onset (0), channel (1, 1-based), magnitude or
                relative_magnitude (fraction of the CUSUM threshold), period (1),
                cancel (full | payload)
"""

import configparser
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .attacks import AttackKind, AttackSpec
from .exceptions import ConfigError
from .ugv import ControllerGains, ScenarioConfig, UgvParams

SCHEMA = {
    "scenario": {"seed": int, "duration": float, "side_length": float, "speed": float, "warmup": int},
    "ugv": {
        "mass": float,
        "yaw_inertia": float,
        "width": float,
        "rolling_resistance": float,
        "turning_resistance": float,
        "sample_time": float,
    },
    "controller": {"k_v": float, "k_heading": float, "k_omega": float, "f_max": float, "switch_radius": float},
    "noise": {"q": "diag", "r": "diag"},
    "cusign": {"tau": int, "window": int, "z": float, "z_ref": "zref"},
    "cusum": {"bias": float, "threshold": float, "target_rate": float, "window": int, "z": float},
    "attack": {
        "kind": str,
        "onset": int,
        "channel": int,
        "magnitude": float,
        "relative_magnitude": float,
        "period": int,
        "cancel": str,
    },
}

UGV_KEYS = {
    "mass": "m",
    "yaw_inertia": "I_z",
    "width": "w",
    "rolling_resistance": "B_r",
    "turning_resistance": "B_l",
    "sample_time": "t_s",
}

BUNDLED = ("nominal", "persistent", "alternating")


def _key_lines(text):
    """Map (section, key) to its 1-based line number."""
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = lineno
    return lines


def _convert(kind, raw):
    if kind == "diag":
        values = [float(v) for v in raw.split(",") if v.strip()]
        if not values:
            raise ValueError("expected comma-separated diagonal entries")
        return np.diag(values)
    if kind == "zref":
        return None if raw.strip().lower() == "median" else float(raw)
    if kind is int:
        return int(raw)
    return kind(raw.strip())


def parse_config(text, path="<string>"):
    """Parse config text into a :class:`ScenarioConfig`; errors carry line numbers."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(exc.message.splitlines()[0], path, line) from exc

    lines = _key_lines(text)
    values = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", path, _section_line(text, section))
        for key, raw in parser.items(section):
            line = lines.get((sec, key))
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", path, line)
            try:
                values[(sec, key)] = _convert(SCHEMA[sec][key], raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}", path, line) from exc

    def get(sec, key, default):
        return values.get((sec, key), default)

    try:
        params = UgvParams(**{UGV_KEYS[k]: v for (sec, k), v in values.items() if sec == "ugv"})
        gains = ControllerGains(**{k: v for (sec, k), v in values.items() if sec == "controller"})
        cusum_threshold = get("cusum", "threshold", 2.3226)
        attack = _build_attack(values, cusum_threshold, path, lines)
        return ScenarioConfig(
            params=params,
            gains=gains,
            side_length=get("scenario", "side_length", 5.0),
            speed=get("scenario", "speed", 0.5),
            duration=get("scenario", "duration", 200.0),
            Q=get("noise", "q", ScenarioConfig().Q),
            R=get("noise", "r", ScenarioConfig().R),
            tau=get("cusign", "tau", 2),
            ell=get("cusign", "window", 100),
            Z=get("cusign", "z", 3.0),
            z_ref=get("cusign", "z_ref", None),
            cusum_bias=get("cusum", "bias", 3.3),
            cusum_threshold=cusum_threshold,
            cusum_target_rate=get("cusum", "target_rate", 0.15),
            cusum_window=get("cusum", "window", 100),
            cusum_Z=get("cusum", "z", 3.0),
            attack=attack,
            seed=get("scenario", "seed", 0),
            warmup=get("scenario", "warmup", None),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc


def _section_line(text, section):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.strip().lower() == f"[{section.lower()}]":
            return lineno
    return None


def _build_attack(values, cusum_threshold, path, lines):
    kind = values.get(("attack", "kind"), "none")
    try:
        kind = AttackKind(kind)
    except ValueError:
        choices = ", ".join(k.value for k in AttackKind)
        raise ConfigError(f"unknown attack kind '{kind}' (choose from {choices})", path, lines.get(("attack", "kind")))
    if kind is AttackKind.NONE:
        return AttackSpec()
    if ("attack", "magnitude") in values and ("attack", "relative_magnitude") in values:
        raise ConfigError("give either magnitude or relative_magnitude, not both", path, lines.get(("attack", "magnitude")))
    if ("attack", "magnitude") in values:
        magnitude = values[("attack", "magnitude")]
    elif ("attack", "relative_magnitude") in values:
        magnitude = values[("attack", "relative_magnitude")] * cusum_threshold
    else:
        raise ConfigError("attack needs magnitude or relative_magnitude", path, _section_line_from(lines, "attack"))
    channel = values.get(("attack", "channel"), 1)
    try:
        return AttackSpec.on_channel(
            kind,
            magnitude,
            channel - 1,
            3,
            onset=values.get(("attack", "onset"), 0),
            period=values.get(("attack", "period"), 1),
            cancel=values.get(("attack", "cancel"), "full"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), path, _section_line_from(lines, "attack")) from exc


def _section_line_from(lines, section):
    found = [ln for (sec, _), ln in lines.items() if sec == section]
    return min(found) if found else None


def bundled_config_path(name):
    return resources.files("cusign").joinpath("configs", f"{name}.cfg")


def load_config(path_or_name):
    """Load a scenario file, or one of the bundled scenarios by name."""
    if str(path_or_name) in BUNDLED:
        ref = bundled_config_path(str(path_or_name))
        return parse_config(ref.read_text(), f"{path_or_name}.cfg")
    path = Path(path_or_name)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from exc
    return parse_config(text, path)
