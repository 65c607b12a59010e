"""Waiting-time laws for the interval between successive measurements.

Each law is an immutable value exposing ``sample``, ``char_fn`` (the
characteristic function ``<exp(i z tau)>``), its ``z``-derivatives and the
closed-form ``mean``. The characteristic function is the only channel
through which a law enters the averaged theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import poch

from .errors import ConfigError


class TimeDistribution:
    """Common interface; concrete laws are the dataclasses below."""

    name = "abstract"

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def char_fn(self, z):
        raise NotImplementedError

    def char_fn_deriv(self, z, order: int):
        """``d^order/dz^order <exp(i z tau)> = <(i tau)^order exp(i z tau)>``."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    @property
    def is_continuous(self) -> bool:
        return True

    def to_dict(self) -> dict:
        raise NotImplementedError


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be finite and positive, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class Fixed(TimeDistribution):
    """Point mass at ``tau0``: the stroboscopic protocol."""

    tau0: float
    name = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "tau0", _positive("tau0", self.tau0))

    def sample(self, rng, size=None):
        if size is None:
            return self.tau0
        return np.full(size, self.tau0)

    def char_fn(self, z):
        return np.exp(1j * np.asarray(z, dtype=float) * self.tau0)

    def char_fn_deriv(self, z, order):
        return (1j * self.tau0) ** order * self.char_fn(z)

    def mean(self):
        return self.tau0

    @property
    def is_continuous(self):
        return False

    def to_dict(self):
        return {"dist": self.name, "tau0": self.tau0}


@dataclass(frozen=True)
class Exponential(TimeDistribution):
    """Density ``rate * exp(-rate * tau)``."""

    rate: float
    name = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def char_fn(self, z):
        return self.rate / (self.rate - 1j * np.asarray(z, dtype=float))

    def char_fn_deriv(self, z, order):
        z = np.asarray(z, dtype=float)
        return (math.factorial(order) * 1j ** order * self.rate
                / (self.rate - 1j * z) ** (order + 1))

    def mean(self):
        return 1.0 / self.rate

    def to_dict(self):
        return {"dist": self.name, "rate": self.rate}


@dataclass(frozen=True)
class Uniform(TimeDistribution):
    """Uniform density on ``[a, b]`` with ``0 <= a < b``."""

    a: float
    b: float
    name = "uniform"

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b) and 0 <= a < b):
            raise ConfigError(f"uniform bounds need 0 <= a < b, got a={a!r}, b={b!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def sample(self, rng, size=None):
        # 1 - U lies in (0, 1], keeping samples strictly positive when a == 0
        return self.a + (self.b - self.a) * (1.0 - rng.random(size))

    def char_fn(self, z):
        z = np.asarray(z, dtype=float)
        c, h = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
        return np.exp(1j * z * c) * np.sinc(z * h / np.pi)

    def char_fn_deriv(self, z, order):
        if order == 0:
            return self.char_fn(z)
        z = np.asarray(z, dtype=float)
        h = 0.5 * (self.b - self.a)
        # Gauss-Legendre is exact to rounding once 2m exceeds e*|z|*h by a margin
        m = 20 + order + int(np.ceil(1.5 * np.max(np.abs(z), initial=0.0) * h))
        nodes, wts = np.polynomial.legendre.leggauss(m)
        tau = 0.5 * (self.a + self.b) + h * nodes
        integrand = (1j * tau) ** order * np.exp(1j * np.multiply.outer(z, tau))
        return 0.5 * (integrand @ wts)

    def mean(self):
        return 0.5 * (self.a + self.b)

    def to_dict(self):
        return {"dist": self.name, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Gamma(TimeDistribution):
    """Gamma law with ``shape`` and ``rate`` (mean ``shape / rate``)."""

    shape: float
    rate: float
    name = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def char_fn(self, z):
        # Re(1 - iz/rate) = 1, so the principal log is continuous in z
        w = 1.0 - 1j * np.asarray(z, dtype=float) / self.rate
        return np.exp(-self.shape * np.log(w))

    def char_fn_deriv(self, z, order):
        w = 1.0 - 1j * np.asarray(z, dtype=float) / self.rate
        return (poch(self.shape, order) * (1j / self.rate) ** order
                * np.exp(-(self.shape + order) * np.log(w)))

    def mean(self):
        return self.shape / self.rate

    def to_dict(self):
        return {"dist": self.name, "shape": self.shape, "rate": self.rate}


def sample(d: TimeDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def char_fn(d: TimeDistribution, z):
    return d.char_fn(z)


def mean(d: TimeDistribution) -> float:
    return d.mean()


_PARAMS = {
    "fixed": (Fixed, ("tau0",)),
    "exponential": (Exponential, ("rate",)),
    "uniform": (Uniform, ("a", "b")),
    "gamma": (Gamma, ("shape", "rate")),
}


def from_dict(cfg: dict) -> TimeDistribution:
    """Build a law from ``{"dist": "exponential", "rate": 1.0}`` and friends."""
    if not isinstance(cfg, dict) or "dist" not in cfg:
        raise ConfigError("distribution config must be an object with a 'dist' key")
    kind = str(cfg["dist"]).lower()
    if kind not in _PARAMS:
        raise ConfigError(f"unknown distribution {cfg['dist']!r}; expected one of {sorted(_PARAMS)}")
    cls, names = _PARAMS[kind]
    values = dict(cfg)
    if kind == "fixed" and "tau0" not in values and "tau" in values:
        values["tau0"] = values["tau"]
    missing = [n for n in names if n not in values]
    if missing:
        raise ConfigError(f"{kind} distribution is missing {missing}")
    try:
        args = [float(values[n]) for n in names]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric {kind} parameter: {exc}") from None
    return cls(*args)
