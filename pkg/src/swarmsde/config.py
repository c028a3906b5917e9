"""Layered experiment configuration.

Configuration files are TOML with one table per section (``[swarm]``,
``[schedule]``, ...). Every setting has a dotted name such as ``swarm.m``.
Layers are applied in order: built-in defaults, then the file, then
``key=value`` overrides. An override may use a bare key (``sigma2=3``) when
exactly one section defines it.
"""

import math
import sys
from dataclasses import fields

from .runner import RunConfig
from .swarm import InitSpec, SwarmParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ConfigError", "DEFAULTS", "load_config", "dump_config", "build_run_config"]


class ConfigError(ValueError):
    """Invalid, unknown or ambiguous configuration key or value."""


# ``None`` marks an optional setting that is unset by default.
DEFAULTS = {
    "objective.name": "rastrigin",
    "swarm.m": 0.2,
    "swarm.gamma": None,
    "swarm.lambda1": 0.0,
    "swarm.lambda2": 1.0,
    "swarm.sigma1": 0.0,
    "swarm.sigma2": 1.0,
    "swarm.alpha": 100.0,
    "swarm.beta": math.inf,
    "swarm.theta": 0.0,
    "swarm.kappa": None,
    "swarm.dt": 0.01,
    "swarm.diffusion": "anisotropic",
    "swarm.memory": "hard",
    "swarm.n_particles": 100,
    "swarm.dim": 20,
    "init.position": "gaussian",
    "init.position_mean": 2.0,
    "init.position_var": 4.0,
    "init.position_low": -1.0,
    "init.position_high": 1.0,
    "init.velocity": "gaussian",
    "init.velocity_mean": 0.0,
    "init.velocity_var": 1.0,
    "init.velocity_low": -1.0,
    "init.velocity_high": 1.0,
    "run.n_epochs": None,
    "run.horizon": 100.0,
    "run.batch_size_data": None,
    "run.batch_size_particles": None,
    "run.update": "full",
    "run.stop_tol": 1e-8,
    "run.stop_window": 20,
    "run.record_every": 1,
    "run.success_tol": 0.25,
    "run.seed": 0,
    "schedule.cooling": False,
    "schedule.mu": 0.0,
    "schedule.min_particles": 2,
    "schedule.stagnation": False,
    "schedule.tau": None,
    "schedule.kick": 1.0,
    "schedule.kick_target": "velocity",
    "phase.m_grid": [0.2],
    "phase.sigma_grid": [0.5 * i for i in range(1, 13)],
    "phase.runs_per_cell": 25,
    "phase.n_jobs": 1,
    "mfa.ns": [50, 100, 200, 400, 800],
    "mfa.n_ref": 6400,
    "mfa.horizon": 5.0,
    "mfa.reps": 20,
    "mfa.statistic": "mean",
    "mfa.n_jobs": 1,
    "laplace.n_samples": 10000,
    "laplace.alphas": [2.0**j for j in range(11)],
    "bench.steps": 1000,
    "bench.repeats": 3,
}

# expected types of the optional settings whose default is None
_OPTIONAL_TYPES = {
    "swarm.gamma": float,
    "swarm.kappa": float,
    "run.n_epochs": int,
    "run.horizon": float,
    "run.batch_size_data": int,
    "run.batch_size_particles": int,
    "run.stop_tol": float,
    "schedule.tau": float,
}

_NONE_WORDS = ("none", "null")

# settings that take a scalar (broadcast) or one value per coordinate
_VECTOR_KEYS = {
    f"init.{which}_{part}"
    for which in ("position", "velocity")
    for part in ("mean", "var", "low", "high")
}


def _flatten(table, prefix=""):
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def resolve_key(key):
    """Map a dotted or bare key to its full dotted name."""
    if key in DEFAULTS:
        return key
    matches = [k for k in DEFAULTS if k.rsplit(".", 1)[-1] == key]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise ConfigError(f"unknown configuration key {key!r}")
    raise ConfigError(f"ambiguous key {key!r}: use one of {', '.join(sorted(matches))}")


def _coerce(key, value):
    default = DEFAULTS[key]
    if isinstance(value, str) and value.lower() in _NONE_WORDS:
        if default is not None and key not in _OPTIONAL_TYPES:
            raise ConfigError(f"{key} cannot be unset")
        return None
    if key in _VECTOR_KEYS and isinstance(value, list):
        if value and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return [float(v) for v in value]
        raise ConfigError(f"bad value for {key}: {value!r}")
    kind = _OPTIONAL_TYPES.get(key, type(default))
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    elif kind is list:
        if isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            elem = type(default[0]) if default else float
            return [elem(v) for v in value]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [type(default[0])(value)]
    raise ConfigError(f"bad value for {key}: {value!r}")


def _parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = resolve_key(key.strip())
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_config(path=None, overrides=()):
    """Return the effective flat configuration.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ConfigError
        On unknown or ambiguous keys and on ill-typed values.
    """
    cfg = dict(DEFAULTS)
    if path is not None:
        with open(path, "rb") as fh:
            try:
                table = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        for key, value in _flatten(table).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r} in {path}")
            cfg[key] = _coerce(key, value)
    for item in overrides:
        key, value = _parse_override(item)
        cfg[key] = _coerce(key, value)
    return cfg


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def dump_config(cfg):
    """Serialize a flat configuration as TOML; unset settings are written as ``"none"``."""
    sections = {}
    for key, value in cfg.items():
        if value is None:
            value = "none"
        section, name = key.split(".", 1)
        sections.setdefault(section, []).append(f"{name} = {_toml_value(value)}")
    blocks = [f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()]
    return "\n\n".join(blocks) + "\n"


def _section(cfg, name):
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}


def build_swarm_params(cfg):
    return SwarmParams(**_section(cfg, "swarm"))


def build_init_spec(cfg):
    init = _section(cfg, "init")
    known = {f.name for f in fields(InitSpec)}
    return InitSpec(seed=cfg["run.seed"], **{k: v for k, v in init.items() if k in known})


def build_run_config(cfg):
    """Turn a flat configuration into a :class:`RunConfig` (validated)."""
    params = build_swarm_params(cfg)
    run_opts = _section(cfg, "run")
    sched = _section(cfg, "schedule")
    config = RunConfig(
        objective=cfg["objective.name"],
        params=params,
        init=build_init_spec(cfg),
        **run_opts,
        **sched,
    )
    config.epochs()  # validates layout and time accounting
    return config
