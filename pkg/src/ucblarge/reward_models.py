"""Arm reward distributions and the large-deviations rate kernels.

Three arm families are supported: unit-variance normal, normal with unknown
variance, and Bernoulli. Sampling goes through fixed transforms of uniform
draws so a reward stream is reproducible given the generator state:

* Bernoulli consumes one uniform ``u`` and returns ``1`` iff ``u < p``.
* Normal variants consume two uniforms (Box-Muller, cosine branch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar, Union

import numba
import numpy as np

TWO_PI = 2.0 * math.pi


class Family(IntEnum):
    NORMAL_KNOWN = 0
    NORMAL_UNKNOWN = 1
    BERNOULLI = 2


@dataclass(frozen=True)
class NormalKnownVar:
    """Normal rewards with mean ``mu`` and variance 1."""

    mu: float
    family: ClassVar[Family] = Family.NORMAL_KNOWN

    @property
    def scale(self) -> float:
        return 1.0


@dataclass(frozen=True)
class NormalUnknownVar:
    """Normal rewards with mean ``mu`` and variance ``sigma2``."""

    mu: float
    sigma2: float
    family: ClassVar[Family] = Family.NORMAL_UNKNOWN

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def scale(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class Bernoulli:
    p: float
    family: ClassVar[Family] = Family.BERNOULLI

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def scale(self) -> float:
        return 0.0


ArmDistribution = Union[NormalKnownVar, NormalUnknownVar, Bernoulli]


def dist_mean(dist: ArmDistribution) -> float:
    if isinstance(dist, Bernoulli):
        return dist.p
    return dist.mu


def env_arrays(env) -> tuple[int, np.ndarray, np.ndarray]:
    """Pack an environment into ``(family, loc, scale)`` arrays for compiled code.

    ``loc`` holds the arm means (``p`` for Bernoulli arms) and ``scale`` the
    reward standard deviations. All arms must share one family.
    """
    families = {d.family for d in env}
    if len(families) != 1:
        raise ValueError("all arms of an environment must share one family")
    loc = np.array([dist_mean(d) for d in env], dtype=np.float64)
    scale = np.array([d.scale for d in env], dtype=np.float64)
    return int(families.pop()), loc, scale


@numba.njit(cache=True)
def std_normal(rng):
    """Standard normal deviate from exactly two uniforms (Box-Muller)."""
    u1 = rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(TWO_PI * u2)


@numba.njit(cache=True)
def draw_from(family, loc, scale, rng):
    if family == 2:
        return 1.0 if rng.random() < loc else 0.0
    return loc + scale * std_normal(rng)


def draw_reward(dist: ArmDistribution, rng: np.random.Generator) -> float:
    return draw_from(int(dist.family), float(dist_mean(dist)), dist.scale, rng)


@numba.njit(cache=True)
def rate_normal_known(u, x):
    d = u - x
    return 0.5 * d * d


@numba.njit(cache=True)
def _xlogy_ratio(a, b):
    # a * log(a / b) with 0 log 0 = 0; returns inf when a > 0 and b == 0
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return math.inf
    ratio = a / b
    if ratio == 0.0 or math.isinf(ratio):
        return a * (math.log(a) - math.log(b))
    return a * math.log(ratio)


@numba.njit(cache=True)
def rate_bernoulli(u, x):
    """Bernoulli rate ``x log(x/u) + (1-x) log((1-x)/(1-u))``.

    Equal to the KL divergence between Bernoulli(x) and Bernoulli(u). Returns
    ``inf`` (never raises) when ``u`` is 0 or 1 and ``x`` differs from it.
    """
    if not (0.0 <= x <= 1.0) or not (0.0 <= u <= 1.0):
        raise ValueError("rate_bernoulli: u and x must lie in [0, 1]")
    return _xlogy_ratio(x, u) + _xlogy_ratio(1.0 - x, 1.0 - u)


@numba.njit(cache=True)
def m_function(z):
    return 0.5 * math.log1p(z * z)
