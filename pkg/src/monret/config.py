"""Experiment configuration: JSON schema validation and model construction.

A config is a JSON object. Keys a command needs are validated; keys that no
command knows are rejected so typos fail loudly, while keys meant for other
commands are ignored so one file can drive several commands::

    {
      "model": {"energies": [-1.0, 1.0], "weights": [0.5, 0.5]},
      "dist": {"dist": "exponential", "rate": 1.0},
      "seed": 7,
      "samples": 100000
    }

``model`` may instead be ``{"hamiltonian": H, "initial_state": psi}`` with
complex entries written as numbers or ``[re, im]`` pairs, or
``{"two_level": J}`` for the symmetric two-level system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distributions, spectral
from .errors import ConfigError

DEFAULT_SEED = 0
U64_MAX = 2 ** 64 - 1

COMMANDS = ("exact", "sample", "trajectory", "fluctuations", "verify")
_NEEDS_MODEL = {"exact", "sample", "trajectory", "verify"}
_STOCHASTIC = {"sample", "trajectory"}

_INT_KEYS = {
    "samples": 100_000,
    "k_max": 1_000_000,
    "omega_points": 64,
    "m_max": 2,
    "realizations": 3,
    "steps": 8,
    "winding_points": 1024,
}
_ALLOWED = {
    "exact": {"model", "dist", "m_max", "omega_points"},
    "sample": {"model", "dist", "seed", "samples", "k_max", "m_max"},
    "trajectory": {"model", "dist", "seed", "realizations", "steps", "omega_points",
                   "winding_points"},
    "fluctuations": {"j_grid", "tau"},
    "verify": {"model", "dist", "omega_points"},
}
_KNOWN = set().union(*_ALLOWED.values())
_MODEL_KEYS = {"energies", "weights", "hamiltonian", "initial_state", "two_level",
               "degeneracy_tol", "weight_floor"}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    model: spectral.CanonicalSpectralModel | None = None
    dist: distributions.TimeDistribution | None = None
    seed: int | None = None
    seed_defaulted: bool = False
    samples: int = _INT_KEYS["samples"]
    k_max: int = _INT_KEYS["k_max"]
    omega_points: int = _INT_KEYS["omega_points"]
    m_max: int = _INT_KEYS["m_max"]
    realizations: int = _INT_KEYS["realizations"]
    steps: int = _INT_KEYS["steps"]
    winding_points: int = _INT_KEYS["winding_points"]
    j_grid: tuple = ()
    tau: float = 1.0
    raw: dict = field(default_factory=dict, compare=False)


def _complex_entry(x, what):
    if isinstance(x, bool):
        raise ConfigError(f"{what}: booleans are not numbers")
    if isinstance(x, (int, float)):
        return complex(x)
    if (isinstance(x, list) and len(x) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)):
        return complex(x[0], x[1])
    raise ConfigError(f"{what}: expected a number or [re, im], got {x!r}")


def _complex_vector(value, what):
    items = _list(value, what)
    if not items:
        raise ConfigError(f"{what} must be nonempty")
    return np.array([_complex_entry(x, what) for x in items])


def _complex_matrix(value, what):
    rows = _list(value, what)
    if not rows:
        raise ConfigError(f"{what} must be nonempty")
    out = [_complex_vector(r, what) for r in rows]
    if len({r.size for r in out}) != 1:
        raise ConfigError(f"{what} rows have unequal lengths")
    return np.array(out)


def _list(value, what):
    if not isinstance(value, list):
        raise ConfigError(f"{what} must be a list")
    return value


def _real_list(value, what):
    items = _list(value, what)
    if not items:
        raise ConfigError(f"{what} must be nonempty")
    out = []
    for x in items:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ConfigError(f"{what}: expected finite numbers, got {x!r}")
        out.append(float(x))
    return out


def _positive_real(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number")
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{what} must be finite and positive")
    return float(value)


def parse_model(cfg) -> spectral.CanonicalSpectralModel:
    if not isinstance(cfg, dict):
        raise ConfigError("model must be an object")
    unknown = set(cfg) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"unknown model keys {sorted(unknown)}")
    opts = {}
    if "degeneracy_tol" in cfg:
        opts["degeneracy_tol"] = _positive_real(cfg["degeneracy_tol"], "degeneracy_tol")
    if "weight_floor" in cfg:
        opts["weight_floor"] = _positive_real(cfg["weight_floor"], "weight_floor")
    forms = [k for k in ("energies", "hamiltonian", "two_level") if k in cfg]
    if len(forms) != 1:
        raise ConfigError("model needs exactly one of 'energies', 'hamiltonian', 'two_level'")
    form = forms[0]
    if form == "two_level":
        if set(cfg) - {"two_level"}:
            raise ConfigError("'two_level' takes no other model keys")
        return spectral.two_level(_positive_real(cfg["two_level"], "two_level"))
    if form == "energies":
        if "weights" not in cfg or "initial_state" in cfg:
            raise ConfigError("'energies' requires 'weights' and excludes 'initial_state'")
        return spectral.from_levels(_real_list(cfg["energies"], "energies"),
                                    _real_list(cfg["weights"], "weights"), **opts)
    if "initial_state" not in cfg or "weights" in cfg:
        raise ConfigError("'hamiltonian' requires 'initial_state' and excludes 'weights'")
    h = _complex_matrix(cfg["hamiltonian"], "hamiltonian")
    psi = _complex_vector(cfg["initial_state"], "initial_state")
    return spectral.from_hamiltonian(h, psi, **opts)


def parse_j_grid(value):
    if isinstance(value, dict):
        if set(value) != {"start", "stop", "num"}:
            raise ConfigError("j_grid object needs exactly 'start', 'stop', 'num'")
        start = _positive_real(value["start"], "j_grid.start")
        stop = _positive_real(value["stop"], "j_grid.stop")
        num = value["num"]
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError("j_grid.num must be a positive integer")
        if stop < start:
            raise ConfigError("j_grid.stop must not be below j_grid.start")
        return tuple(np.linspace(start, stop, num).tolist())
    grid = _real_list(value, "j_grid")
    if any(j <= 0 for j in grid):
        raise ConfigError("j_grid values must be positive")
    return tuple(grid)


def parse_config(data, command: str, seed_override: int | None = None) -> ExperimentConfig:
    """Validate a decoded JSON object for ``command``.

    Raises
    ------
    ConfigError
        On any schema violation, before any computation is attempted.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kw = {"command": command, "raw": data}

    if command in _NEEDS_MODEL:
        for key in ("model", "dist"):
            if key not in data:
                raise ConfigError(f"'{command}' requires '{key}'")
        kw["model"] = parse_model(data["model"])
        kw["dist"] = distributions.from_dict(data["dist"])

    for key in _INT_KEYS:
        if key in data:
            v = data[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"'{key}' must be a positive integer")
            kw[key] = v

    if command in _STOCHASTIC:
        seed = seed_override if seed_override is not None else data.get("seed")
        kw["seed_defaulted"] = seed is None
        seed = DEFAULT_SEED if seed is None else seed
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
            raise ConfigError("'seed' must be an integer in [0, 2^64)")
        kw["seed"] = seed

    if command == "fluctuations":
        if "j_grid" not in data:
            raise ConfigError("'fluctuations' requires 'j_grid'")
        kw["j_grid"] = parse_j_grid(data["j_grid"])
        if "tau" in data:
            kw["tau"] = _positive_real(data["tau"], "tau")
    return ExperimentConfig(**kw)


def load_config(path, command: str, seed_override: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(data, command, seed_override)
