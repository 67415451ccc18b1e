"""Run configuration files.

Configs are TOML with one table per concern. Every key is optional; the
resolved configuration (defaults filled in) is written back next to the
outputs so a run directory can be replayed exactly::

    [lattice]
    d = 1
    L = 3001
    boundary = "open"        # or "periodic"

    [model]
    a = 0.1
    mu = -0.25
    T = 0.0

    [potential]
    kind = "uniform"         # uniform | none | quasiperiodic
    W = 1.0

    [entropy]
    sizes = [151, 301, 601]
    renyi_alphas = [0.5, 2.0]
    cutoff = "full"          # "full", "auto" or a number of sites
    remainder_sizes = []

    [ensemble]
    realizations = 100
    base_seed = 0
    windowed = "auto"        # "auto", true, false
    pi_max_displacement = -1 # -1: default (60 in 1d, 6 otherwise)
    pi_radius = -1           # -1: default

    [single]
    seed = 0

    [ti]
    kappa = 1.5707963267948966  # Fermi momentum; -1: derive from [model] mu and a
    sizes = [11, 21, 41, 81, 161, 321, 641, 1281, 2001]

    [analysis]
    overlap_sizes = []       # empty: every size
    saturation_sizes = []
    convolution_size = -1    # -1: largest size
    ks_alpha = 0.05
    overlap_threshold = 0.05
    convolution_seed = 0

    [run]
    out = "run"
    workers = 0              # 0: $ANDERSON_ENTROPY_WORKERS or all cores
    format = "csv"           # csv | json
    verbosity = 1
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ensemble import EnsembleConfig
from .errors import ConfigError

__all__ = ["RunConfig", "SCHEMA", "load_config", "parse_config", "dump_config"]

_TI_SIZES = [11, 21, 41, 81, 161, 321, 641, 1281, 2001]

# section -> key -> default; the default's type is the accepted type
SCHEMA: dict[str, dict[str, object]] = {
    "lattice": {"d": 1, "L": 3001, "boundary": "open"},
    "model": {"a": 0.1, "mu": -0.25, "T": 0.0},
    "potential": {"kind": "uniform", "W": 1.0},
    "entropy": {"sizes": [151, 301, 601], "renyi_alphas": [0.5, 2.0], "cutoff": "full",
                "remainder_sizes": []},
    "ensemble": {"realizations": 100, "base_seed": 0, "windowed": "auto",
                 "pi_max_displacement": -1, "pi_radius": -1},
    "single": {"seed": 0},
    "ti": {"kappa": math.pi / 2, "sizes": _TI_SIZES},
    "analysis": {"overlap_sizes": [], "saturation_sizes": [], "convolution_size": -1,
                 "ks_alpha": 0.05, "overlap_threshold": 0.05, "convolution_seed": 0},
    "run": {"out": "run", "workers": 0, "format": "csv", "verbosity": 1},
}

# keys whose value may be either a string or a number/bool
_UNION = {("entropy", "cutoff"): (str, int), ("ensemble", "windowed"): (str, bool)}


@dataclass
class RunConfig:
    """Fully resolved configuration: ``values[section][key]``."""

    values: dict = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, section):
        return self.values[section]

    def ensemble_config(self) -> EnsembleConfig:
        v = self.values
        pmd = v["ensemble"]["pi_max_displacement"]
        pr = v["ensemble"]["pi_radius"]
        return EnsembleConfig(
            d=v["lattice"]["d"], L=v["lattice"]["L"], boundary=v["lattice"]["boundary"],
            a=v["model"]["a"], mu=v["model"]["mu"], T=v["model"]["T"],
            potential=v["potential"]["kind"], W=v["potential"]["W"],
            sizes=tuple(v["entropy"]["sizes"]), renyi_alphas=tuple(v["entropy"]["renyi_alphas"]),
            cutoff=v["entropy"]["cutoff"], remainder_sizes=tuple(v["entropy"]["remainder_sizes"]),
            realizations=v["ensemble"]["realizations"], base_seed=v["ensemble"]["base_seed"],
            windowed=v["ensemble"]["windowed"],
            pi_max_displacement=None if pmd < 0 else pmd,
            pi_radius=None if pr < 0 else pr,
        )


def _check_type(section, key, value, default, where):
    allowed = _UNION.get((section, key))
    if allowed is not None:
        ok = isinstance(value, allowed)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
        )
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(
            f"{where}[{section}] {key}: expected {type(default).__name__}, got {value!r}"
        )
    return value


def parse_config(data: dict, source: str | None = None) -> RunConfig:
    """Validate a parsed TOML mapping and fill in defaults."""
    where = f"{source}: " if source else ""
    values = {}
    for section in data:
        if section not in SCHEMA:
            raise ConfigError(f"{where}unknown section [{section}]")
        if not isinstance(data[section], dict):
            raise ConfigError(f"{where}[{section}] must be a table")
    for section, defaults in SCHEMA.items():
        given = data.get(section, {})
        unknown = sorted(set(given) - set(defaults))
        if unknown:
            raise ConfigError(f"{where}[{section}] unknown key(s): {', '.join(unknown)}")
        resolved = {}
        for key, default in defaults.items():
            value = given.get(key, default)
            resolved[key] = _check_type(section, key, value, default, where)
        values[section] = resolved
    cfg = RunConfig(values, source)
    try:
        cfg.ensemble_config()
    except ConfigError as exc:
        raise ConfigError(f"{where}{exc}") from exc
    if values["run"]["format"] not in ("csv", "json"):
        raise ConfigError(f"{where}[run] format: expected 'csv' or 'json'")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, str(path))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        # JSON string escapes are valid TOML basic-string escapes; TOML also forbids raw DEL
        return json.dumps(v, ensure_ascii=False).replace("\x7f", "\\u007f")
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            raise ConfigError("non-finite values cannot be stored in a config")
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """Serialize a resolved config as TOML (round-trips through ``load_config``)."""
    lines = []
    for section, entries in cfg.values.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in entries.items())
        lines.append("")
    return "\n".join(lines)
