"""Symmetric noise families: sampling, variance, and mean excess.

Each family is symmetric about 0 and sampled as an independent fair
sign times a magnitude drawn by inverse transform from the law of
|eps| (gaussian magnitudes go through the ziggurat in `_fast`).  The
mean-excess function G(s) = E(eps - s)^+ drives the certified lower
bounds, so it is computed deterministically: closed forms where they
are simple, adaptive tail quadrature for the stretched-exponential and
pareto families.

Scale conventions, fixed once:
  rademacher(a)              eps = +-a
  uniform(a)                 eps ~ U[-a, a]
  gaussian(sigma)            std sigma
  laplace(b)                 density exp(-|x|/b) / (2b)
  stretched_exponential(alpha, scale)   P(|eps| > x) = exp(-(x/scale)^alpha)
  pareto_symmetric(a, x_min)            P(|eps| > x) = (x_min/x)^a, x >= x_min
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import quad

from . import _fast, streams
from .errors import InfiniteVariance, InvalidParams, NegativeArgument

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TailClass:
    """Tail label: 'bounded', 'stretched' (rate alpha), or 'polynomial' (rate a)."""

    kind: str
    alpha: Optional[float] = None

    def __str__(self):
        if self.kind == "bounded":
            return "bounded"
        return f"{self.kind}({self.alpha:g})"


@dataclass(frozen=True)
class NoiseModel:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidParams(f"unknown noise family {self.family!r}")
        _FAMILIES[self.family].check(self.params)

    @property
    def tail_class(self) -> TailClass:
        return _FAMILIES[self.family].tail(self.params)

    @property
    def spec(self) -> str:
        args = ", ".join(f"{p:g}" for p in self.params)
        return f"{self.family}({args})"


class _Family:
    name: str
    n_params = 1

    def check(self, p):
        pass

    def tail(self, p) -> TailClass:
        raise NotImplementedError

    def variance(self, p) -> float:
        raise NotImplementedError

    def mean_abs(self, p) -> float:
        raise NotImplementedError

    def magnitude(self, p, u):
        """Inverse CDF of |eps| at u in [0, 1), vectorized."""
        raise NotImplementedError

    def mean_excess(self, p, s: float) -> float:
        raise NotImplementedError


class _Rademacher(_Family):
    name = "rademacher"

    def check(self, p):
        if p[0] <= 0:
            raise InvalidParams("rademacher scale must be positive")

    def tail(self, p):
        return TailClass("bounded")

    def variance(self, p):
        return p[0] ** 2

    def mean_abs(self, p):
        return p[0]

    def magnitude(self, p, u):
        return np.full_like(u, p[0])

    def mean_excess(self, p, s):
        a = p[0]
        return 0.5 * (a - s) if s <= a else 0.0


class _Uniform(_Family):
    name = "uniform"

    def check(self, p):
        if p[0] <= 0:
            raise InvalidParams("uniform half-width must be positive")

    def tail(self, p):
        return TailClass("bounded")

    def variance(self, p):
        return p[0] ** 2 / 3.0

    def mean_abs(self, p):
        return 0.5 * p[0]

    def magnitude(self, p, u):
        return p[0] * u

    def mean_excess(self, p, s):
        a = p[0]
        return (a - s) ** 2 / (4.0 * a) if s <= a else 0.0


class _Gaussian(_Family):
    name = "gaussian"

    def check(self, p):
        if p[0] <= 0:
            raise InvalidParams("gaussian sigma must be positive")

    def tail(self, p):
        return TailClass("stretched", 2.0)

    def variance(self, p):
        return p[0] ** 2

    def mean_abs(self, p):
        return p[0] * math.sqrt(2.0 / math.pi)

    def magnitude(self, p, u):
        # not used: gaussian draws go through the ziggurat
        raise NotImplementedError("gaussian magnitudes are sampled in _fast")

    def mean_excess(self, p, s):
        sig = p[0]
        z = s / sig
        phi = _INV_SQRT2PI * math.exp(-0.5 * z * z)
        q = 0.5 * math.erfc(z / _SQRT2)
        return sig * phi - s * q


class _Laplace(_Family):
    name = "laplace"

    def check(self, p):
        if p[0] <= 0:
            raise InvalidParams("laplace scale must be positive")

    def tail(self, p):
        return TailClass("stretched", 1.0)

    def variance(self, p):
        return 2.0 * p[0] ** 2

    def mean_abs(self, p):
        return p[0]

    def magnitude(self, p, u):
        return -p[0] * np.log1p(-u)

    def mean_excess(self, p, s):
        b = p[0]
        return 0.5 * b * math.exp(-s / b)


class _Stretched(_Family):
    name = "stretched_exponential"
    n_params = 2

    def check(self, p):
        if p[0] <= 0 or p[1] <= 0:
            raise InvalidParams("stretched_exponential needs alpha > 0, scale > 0")

    def tail(self, p):
        return TailClass("stretched", p[0])

    def variance(self, p):
        alpha, c = p
        return c * c * math.gamma(1.0 + 2.0 / alpha)

    def mean_abs(self, p):
        alpha, c = p
        return c * math.gamma(1.0 + 1.0 / alpha)

    def magnitude(self, p, u):
        alpha, c = p
        return c * np.power(-np.log1p(-u), 1.0 / alpha)

    def mean_excess(self, p, s):
        alpha, c = p
        return _tail_quad(lambda y: 0.5 * math.exp(-((y / c) ** alpha)), s)


class _Pareto(_Family):
    name = "pareto_symmetric"
    n_params = 2

    def check(self, p):
        if p[0] <= 1:
            raise InvalidParams("pareto_symmetric needs a > 1 for integrability")
        if p[1] <= 0:
            raise InvalidParams("pareto_symmetric needs x_min > 0")

    def tail(self, p):
        return TailClass("polynomial", p[0])

    def variance(self, p):
        a, xm = p
        if a <= 2:
            raise InfiniteVariance(f"pareto_symmetric({a:g}) has no second moment")
        return xm * xm * a / (a - 2.0)

    def mean_abs(self, p):
        a, xm = p
        return xm * a / (a - 1.0)

    def magnitude(self, p, u):
        a, xm = p
        return xm * np.power(1.0 - u, -1.0 / a)

    def mean_excess(self, p, s):
        a, xm = p

        def upper_tail(y):
            return 0.5 if y <= xm else 0.5 * (xm / y) ** a

        return _tail_quad(upper_tail, s, split=xm)


_FAMILIES = {
    f.name: f
    for f in (_Rademacher(), _Uniform(), _Gaussian(), _Laplace(), _Stretched(), _Pareto())
}

_ALIASES = {
    "rademacher": "rademacher",
    "uniform": "uniform",
    "gaussian": "gaussian",
    "normal": "gaussian",
    "laplace": "laplace",
    "stretched_exponential": "stretched_exponential",
    "stretched_exp": "stretched_exponential",
    "pareto_symmetric": "pareto_symmetric",
    "pareto": "pareto_symmetric",
}

_PARAM_NAMES = {
    "rademacher": ("a",),
    "uniform": ("a",),
    "gaussian": ("sigma",),
    "laplace": ("b",),
    "stretched_exponential": ("alpha", "scale"),
    "pareto_symmetric": ("a", "x_min"),
}

_DEFAULTS = {"stretched_exponential": {"scale": 1.0}, "pareto_symmetric": {"x_min": 1.0}}


def _tail_quad(upper_tail, s: float, split: Optional[float] = None) -> float:
    # G(s) = int_s^inf P(eps > y) dy, adaptive to relative error 1e-10.
    pieces = []
    if split is not None and split > s:
        pieces.append((s, split))
        lo = split
    else:
        lo = s
    pieces.append((lo, np.inf))
    total = 0.0
    for a, b in pieces:
        val, _ = quad(upper_tail, a, b, epsabs=1e-300, epsrel=1e-11, limit=200)
        total += val
    return total


def rademacher(a: float = 1.0) -> NoiseModel:
    return NoiseModel("rademacher", (float(a),))


def uniform(a: float = 1.0) -> NoiseModel:
    return NoiseModel("uniform", (float(a),))


def gaussian(sigma: float = 1.0) -> NoiseModel:
    return NoiseModel("gaussian", (float(sigma),))


def laplace(b: float = 1.0) -> NoiseModel:
    return NoiseModel("laplace", (float(b),))


def stretched_exponential(alpha: float, scale: float = 1.0) -> NoiseModel:
    return NoiseModel("stretched_exponential", (float(alpha), float(scale)))


def pareto_symmetric(a: float, x_min: float = 1.0) -> NoiseModel:
    return NoiseModel("pareto_symmetric", (float(a), float(x_min)))


def variance(model: NoiseModel) -> float:
    """Closed-form variance of eps; raises InfiniteVariance where absent."""
    return _FAMILIES[model.family].variance(model.params)


def mean_abs(model: NoiseModel) -> float:
    """Closed-form E|eps|; by symmetry G(0) = mean_abs / 2."""
    return _FAMILIES[model.family].mean_abs(model.params)


def mean_excess(model: NoiseModel, s: float) -> float:
    """G(s) = E(eps - s)^+ for s >= 0."""
    if s < 0:
        raise NegativeArgument(f"mean_excess needs s >= 0, got {s}")
    return _FAMILIES[model.family].mean_excess(model.params, float(s))


def mean_excess_grid(model: NoiseModel, grid) -> np.ndarray:
    return np.array([mean_excess(model, float(s)) for s in grid])


def magnitude_from_unit(model: NoiseModel, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of |eps| on uniforms in [0, 1); not defined for gaussian."""
    return _FAMILIES[model.family].magnitude(model.params, np.asarray(u, dtype=np.float64))


def field_values(model: NoiseModel, u: np.ndarray, sgn: np.ndarray) -> np.ndarray:
    """Noise values from uniform/sign arrays filled by `_fast.fill_unit_sign`."""
    out = magnitude_from_unit(model, u)
    out *= sgn
    return out


def sample(
    model: NoiseModel, stream: streams.RandomStream, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """Draw from the model on a sequential stream, reproducibly.

    Consumes one stream position per draw regardless of family.
    """
    n = 1 if size is None else int(size)
    keys = stream.next_keys(n)
    if model.family == "gaussian":
        out = _fast.gaussian_from_keys(keys, model.params[0])
    else:
        u = streams.unit_from_keys(keys)
        out = magnitude_from_unit(model, u)
        out *= streams.signs_from_keys(keys)
    return float(out[0]) if size is None else out


def parse_noise(spec: str) -> NoiseModel:
    """Parse 'family(arg, key=value, ...)' strings from configs.

    Examples: 'rademacher(1)', 'stretched_exp(alpha=2.5, scale=1.0)'.
    """
    spec = spec.strip()
    m = re.fullmatch(r"([A-Za-z_]+)\s*(?:\(([^)]*)\))?", spec)
    if not m:
        raise InvalidParams(f"cannot parse noise spec {spec!r}")
    name = _ALIASES.get(m.group(1).lower())
    if name is None:
        raise InvalidParams(f"unknown noise family {m.group(1)!r}")
    arg_names = _PARAM_NAMES[name]
    values = dict(_DEFAULTS.get(name, {}))
    pos = 0
    body = (m.group(2) or "").strip()
    if body:
        for piece in body.split(","):
            piece = piece.strip()
            if "=" in piece:
                key, _, raw = piece.partition("=")
                key = key.strip()
                if key not in arg_names:
                    raise InvalidParams(f"{name} has no parameter {key!r}")
                values[key] = float(raw)
            else:
                if pos >= len(arg_names):
                    raise InvalidParams(f"too many arguments for {name}")
                values[arg_names[pos]] = float(piece)
                pos += 1
    missing = [a for a in arg_names if a not in values]
    if missing:
        raise InvalidParams(f"{name} missing parameter(s): {', '.join(missing)}")
    return NoiseModel(name, tuple(values[a] for a in arg_names))
