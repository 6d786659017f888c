"""INI-style configuration for experiments and the command line.

Files use sections and flat ``key = value`` lines::

    [model]
    kappa_phi = 1
    kappa_u = 10

    [experiment]
    filters = vm_increment, gauss_adf, pf(10000)
    runs = 2000

Resolution order for every key is command-line flag, then file, then the
documented default.  Unknown sections or keys are rejected with their line.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass

from .errors import DomainError
from .experiments import ExperimentConfig
from .models import CircularModelParams, LinearModelParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (file or flags)."""


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    parts, depth, cur = [], 0, ""
    for ch in str(text):
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return tuple(p for p in parts if p)


def _str(text):
    return str(text).strip()


def _optional_str(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return str(text).strip()


@dataclass(frozen=True)
class Key:
    section: str
    parse: object
    default: object
    help: str


KEYS = {
    "model": Key("model", _str, "circular", "circular or linear"),
    "kappa_phi": Key("model", float, 1.0, "state diffusion precision"),
    "kappa_u": Key("model", float, 10.0, "increment observation precision"),
    "kappa_z": Key("model", _optional_float, None, "direct observation information rate (none = absent)"),
    "dt": Key("model", float, 0.01, "time step"),
    "obs_stride": Key("model", int, 1, "steps between direct observations"),
    "alpha_mode": Key("model", _str, "ideal", "ideal, sqrt, sqrt_unscaled or linear"),
    "a": Key("model", float, -1.0, "linear drift coefficient"),
    "c": Key("model", float, 1.0, "linear increment coupling"),
    "sigma_x2": Key("model", float, 1.0, "linear state noise variance rate"),
    "sigma_u2": Key("model", float, 1.0, "linear observation noise variance rate"),
    "filters": Key("experiment", _list, ("circkf",), "comma-separated filters"),
    "runs": Key("experiment", int, 2000, "Monte Carlo runs"),
    "T": Key("experiment", float, 10.0, "duration"),
    "seed": Key("experiment", int, 0, "root seed"),
    "init": Key("experiment", _str, "prior", "prior, truth or uniform"),
    "mu0": Key("experiment", float, 0.0, "initial mean (circular)"),
    "kappa0": Key("experiment", float, 2.0, "initial concentration (circular)"),
    "phi0": Key("experiment", float, 0.0, "initial angle for simulate"),
    "x0": Key("experiment", float, 0.0, "initial mean (linear)"),
    "sigma0_2": Key("experiment", float, 0.5, "initial variance (linear)"),
    "increments": Key("experiment", _bool, True, "observe the increment channel"),
    "static": Key("experiment", _bool, False, "hold the hidden state fixed"),
    "gauss_variant": Key("experiment", _str, "verbatim", "Gauss ADF concentration law"),
    "gkbf_denominator": Key("experiment", _str, "consistent", "gKBF innovation variance form"),
    "gvm_scheme": Key("experiment", _str, "heun", "GvM integrator: heun or rk4"),
    "quad_points": Key("experiment", int, 512, "GvM quadrature points"),
    "record_every": Key("experiment", int, 1, "record statistics every k steps"),
    "jobs": Key("experiment", int, 1, "worker processes"),
    "chunk": Key("experiment", int, 250, "runs per work unit"),
    "output_dir": Key("output", _optional_str, None, "output directory"),
    "traces": Key("output", int, 0, "per-run trace files to write"),
    "plot": Key("output", _bool, False, "write SVG plots"),
    "parameter": Key("sweep", _str, "kappa_z", "kappa_u, kappa_z or dt"),
    "values": Key("sweep", _list, (), "comma-separated sweep values"),
    "repeats": Key("timing", int, 5, "timing repetitions"),
}
SECTIONS = sorted({k.section for k in KEYS.values()})


def _line_of(lines, section, key):
    current = None
    for no, raw in enumerate(lines, 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return no
    return 0


def read_config(path):
    """Parse a config file into ``{key: raw string}``; validates names only."""
    with open(path) as fh:
        text = fh.read()
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    lines = text.splitlines()
    raw = {}
    for section in parser.sections():
        if section not in SECTIONS:
            no = next((i for i, line in enumerate(lines, 1) if line.strip() == f"[{section}]"), 0)
            raise ConfigError(f"{path}:{no}: unknown section [{section}]; valid sections: {', '.join(SECTIONS)}")
        valid = [k for k, spec in KEYS.items() if spec.section == section]
        for key, value in parser.items(section):
            if key not in valid:
                no = _line_of(lines, section, key)
                raise ConfigError(
                    f"{path}:{no}: unknown key '{key}' in [{section}]; valid keys: {', '.join(valid)}"
                )
            raw[key] = (value, f"{path}:{_line_of(lines, section, key)}")
    return raw


def resolve(file_values=None, flags=None, fallback=None):
    """Merge flags > file > fallback > defaults and parse every value.

    ``file_values`` maps key to ``(text, location)``; ``flags`` and
    ``fallback`` map key to already typed or text values (``None`` = unset).
    """
    file_values = file_values or {}
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    fallback = fallback or {}
    out = {}
    for key, spec in KEYS.items():
        if key in flags:
            value, where = flags[key], f"--{key.replace('_', '-')}"
        elif key in file_values:
            value, where = file_values[key]
        elif key in fallback:
            value, where = fallback[key], "trajectory header"
        else:
            out[key] = spec.default
            continue
        try:
            out[key] = spec.parse(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad value for '{key}': {value!r} ({exc})") from None
    return out


def build_model(values):
    try:
        if values["model"] == "circular":
            return CircularModelParams(values["kappa_phi"], values["kappa_u"], values["kappa_z"],
                                       values["dt"], values["obs_stride"], values["alpha_mode"])
        if values["model"] == "linear":
            return LinearModelParams(values["a"], values["c"], values["sigma_x2"], values["sigma_u2"],
                                     values["dt"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"model must be circular or linear, got {values['model']!r}")


def build_experiment(values):
    model = build_model(values)
    fields = ("filters", "runs", "T", "seed", "init", "mu0", "kappa0", "x0", "sigma0_2",
              "increments", "static", "gauss_variant", "gkbf_denominator", "gvm_scheme",
              "quad_points", "record_every", "jobs", "chunk", "output_dir", "traces", "plot")
    kwargs = {k: values[k] for k in fields}
    if model.__class__ is LinearModelParams and kwargs["filters"] == KEYS["filters"].default:
        kwargs["filters"] = ("gkbf",)
    try:
        return ExperimentConfig(model, **kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
