"""Model constants, scaling, equilibria, and closed-form delay thresholds.

The package integrates the dimensionless planar system with one discrete
delay

    x'(t) = x(t) (1 - x(t)) - x(t) y(t)
    y'(t) = -s y(t) + Y exp(-s tau) x(t - tau) y(t - tau)

where x is prey density (in units of its carrying capacity), y predator
density, s the predator death rate, Y the prey-to-predator conversion
yield, and tau the time needed to convert captured prey into predator
biomass.  The factor exp(-s tau) discounts predators that die before the
conversion completes; it is what makes the delay qualitatively different
from a pure lag.

Everything in this module is closed-form: the raw->dimensionless parameter
map, the three equilibria together with the delay thresholds where they
appear or change character, the predator reproduction number, and the
explicit predator upper bound used as an integration invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams

__all__ = [
    "RawParams",
    "Params",
    "ScaleFactors",
    "EquilibriumSet",
    "scale",
    "equilibria",
    "coexistence_prey",
    "reproduction_number",
    "predator_ceiling",
    "predator_bound",
]


def _require_positive(name: str, value: float) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidParams(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class RawParams:
    """Unscaled model constants.

    r    intrinsic prey growth rate (1/time)
    K    prey carrying capacity (density)
    m    capture rate of prey per predator (1/(density*time))
    s    predator death rate (1/time)
    Y    conversion yield of captured prey into predators (dimensionless)
    tau  prey-to-biomass conversion delay (time)
    """

    r: float
    K: float
    m: float
    s: float
    Y: float
    tau: float

    def __post_init__(self) -> None:
        for name in ("r", "K", "m", "s", "Y"):
            _require_positive(name, getattr(self, name))
        if not math.isfinite(self.tau) or self.tau < 0.0:
            raise InvalidParams(f"tau must be nonnegative and finite, got {self.tau!r}")


@dataclass(frozen=True)
class Params:
    """Dimensionless constants of the scaled system: death rate s, yield Y,
    delay tau (all in units of the prey growth timescale)."""

    s: float
    Y: float
    tau: float

    def __post_init__(self) -> None:
        _require_positive("s", self.s)
        _require_positive("Y", self.Y)
        if not math.isfinite(self.tau) or self.tau < 0.0:
            raise InvalidParams(f"tau must be nonnegative and finite, got {self.tau!r}")


@dataclass(frozen=True)
class ScaleFactors:
    """Conversion factors between raw and dimensionless variables.

    scaled time = time * t,  scaled prey = x / prey,  scaled predator
    = predator * y.  Inverting them maps dimensionless trajectories back
    to raw units.
    """

    time: float      # r
    prey: float      # K
    predator: float  # m / r


def scale(raw: RawParams) -> tuple[Params, ScaleFactors]:
    """Map raw constants to the dimensionless triple (s, Y, tau).

    Returns the scaled parameters together with the factors needed to move
    trajectories between the two descriptions.
    """
    p = Params(
        s=raw.s / raw.r,
        Y=raw.Y * raw.K * raw.m / raw.r,
        tau=raw.r * raw.tau,
    )
    return p, ScaleFactors(time=raw.r, prey=raw.K, predator=raw.m / raw.r)


@dataclass(frozen=True)
class EquilibriumSet:
    """The three equilibria and the delay thresholds of the scaled system.

    e_plus is the coexistence state; it exists exactly for 0 <= tau < tau_c
    and collides with e1 = (1, 0) as tau -> tau_c.  tau_star < tau_c marks
    where purely imaginary characteristic roots stop being possible; all
    oscillatory instability lives in [0, tau_star).  Either threshold may
    be negative, meaning the corresponding regime is empty for these
    parameters.
    """

    e0: tuple[float, float]
    e1: tuple[float, float]
    e_plus: Optional[tuple[float, float]]
    tau_c: float
    tau_star: float


def coexistence_prey(p: Params, tau: Optional[float] = None) -> float:
    """Prey component (s/Y) e^{s tau} of the coexistence state.

    No existence gate: the value is returned even where it exceeds 1 and the
    state has ceased to be an equilibrium of the positive cone.  The delay
    defaults to p.tau but may be overridden, which the spectral scans use.
    """
    t = p.tau if tau is None else tau
    return (p.s / p.Y) * math.exp(p.s * t)


def equilibria(p: Params) -> EquilibriumSet:
    """All equilibria at the given parameters, plus tau_c and tau_star."""
    tau_c = math.log(p.Y / p.s) / p.s
    tau_star = math.log(p.Y / (3.0 * p.s)) / p.s
    e_plus = None
    if 0.0 <= p.tau < tau_c:
        x = coexistence_prey(p)
        e_plus = (x, 1.0 - x)
    return EquilibriumSet(
        e0=(0.0, 0.0),
        e1=(1.0, 0.0),
        e_plus=e_plus,
        tau_c=tau_c,
        tau_star=tau_star,
    )


def reproduction_number(p: Params, x: float) -> float:
    """Expected offspring per predator over its lifetime at fixed prey x.

    Equals (Y e^{-s tau} / s) x; it crosses 1 exactly at the coexistence
    prey level, which is why x_plus + y_plus = 1 pins the predator
    equilibrium.
    """
    if not math.isfinite(x) or x < 0.0:
        raise InvalidParams(f"prey density must be nonnegative, got {x!r}")
    return p.Y * math.exp(-p.s * p.tau) * x / p.s


def predator_ceiling(p: Params) -> float:
    """Asymptotic predator bound Y e^{-s tau} (s+1)^2 / (4 s)."""
    return p.Y * math.exp(-p.s * p.tau) * (p.s + 1.0) ** 2 / (4.0 * p.s)


def predator_bound(p: Params, w0: float) -> Callable[[float], float]:
    """Explicit pointwise predator bound as a function of time.

    w0 is the initial value of the bounding combination
    w(0) = Y e^{-s tau} x(-tau) + y(0) computed from the initial data
    (see HistorySpec.initial_predator_load).  The returned callable
    accepts scalars or arrays and satisfies y(t) <= bound(t) for every
    nonnegative solution.
    """
    if not math.isfinite(w0) or w0 < 0.0:
        raise InvalidParams(f"w0 must be nonnegative, got {w0!r}")
    cap = predator_ceiling(p)

    def bound(t):
        decay = np.exp(-p.s * np.asarray(t, dtype=float))
        out = w0 * decay + cap * (1.0 - decay)
        return float(out) if np.ndim(t) == 0 else out

    return bound
