"""Linear stability of the coexistence state: characteristic function,
crossing frequencies, and delay values where root pairs cross the
imaginary axis.

Linearising about the coexistence state gives the transcendental
characteristic function

    P(lam) = lam^2 + p lam + (q lam + c) e^{-lam tau} + alpha

whose coefficients depend on the delay through the equilibrium itself
(writing xp for the coexistence prey level):

    p = s + xp,   q = -s,   c = s (1 - 2 xp),   alpha = s xp.

A purely imaginary root i*omega requires omega^2 to solve the quadratic
(in omega^2)

    w^2 + (p^2 - q^2 - 2 alpha) w + (alpha^2 - c^2) = 0,

whose '+' branch is the only admissible one; it is real and positive
exactly while xp < 1/3, i.e. for tau below the oscillation cutoff
tau_star.  At such a frequency the delay must satisfy both

    sin(tau omega) = phase_sin(omega, tau),
    cos(tau omega) = phase_cos(omega, tau),

so candidate crossings are the intersections of tau*omega(tau) with
arccos(phase_cos) + 2 n pi.  The scanner below locates them on a grid,
refines by bisection, and classifies the crossing direction by the sign
of the slope gap between the two curves, which matches the sign of
d(Re lam)/d(tau) at the crossing.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .csvio import write_csv
from .errors import ConsistencyError, DomainError, InvalidParams
from .model import Params, coexistence_prey, equilibria

__all__ = [
    "CharCoeffs",
    "Crossing",
    "HopfCandidate",
    "EPlusStability",
    "StabilityProfile",
    "char_coeffs",
    "char_eval",
    "omega_squared_branches",
    "crossing_frequency",
    "phase_sin",
    "phase_cos",
    "phase_angle",
    "hopf_candidates",
    "stability_profile",
    "crossing_curves",
    "write_crossing_curves_csv",
]

# |F| target for the bisection refinement of a crossing, and the slope-gap
# magnitude below which a crossing is reported as a suspected tangency
# rather than classified with confidence.
ROOT_TOL = 1e-9
TANGENCY_TOL = 1e-6


@dataclass(frozen=True)
class CharCoeffs:
    """Coefficients of the characteristic function at the coexistence state."""

    p: float
    q: float
    c: float
    alpha: float


def char_coeffs(p: Params, tau: float) -> CharCoeffs:
    """Characteristic coefficients at delay tau (p.tau is not consulted)."""
    if not math.isfinite(tau) or tau < 0.0:
        raise InvalidParams(f"tau must be nonnegative and finite, got {tau!r}")
    xp = coexistence_prey(p, tau)
    return CharCoeffs(p=p.s + xp, q=-p.s, c=p.s * (1.0 - 2.0 * xp), alpha=p.s * xp)


def char_eval(p: Params, tau: float, lam: complex) -> complex:
    """Evaluate the characteristic function at lam.

    Raises DomainError when the coexistence state does not exist at this
    delay, since the linearisation then has no meaning.
    """
    eq = equilibria(Params(p.s, p.Y, tau))
    if eq.e_plus is None:
        raise DomainError(
            f"coexistence state absent at tau={tau!r} (tau_c={eq.tau_c!r})"
        )
    cc = char_coeffs(p, tau)
    lam = complex(lam)
    return lam * lam + cc.p * lam + (cc.q * lam + cc.c) * np.exp(-lam * tau) + cc.alpha


def omega_squared_branches(p: Params, tau: float) -> tuple[float, float]:
    """Both quadratic-formula branches for omega^2 (may be negative).

    Only the '+' branch can produce a crossing frequency for this model;
    the '-' branch is exposed for reuse and for tests of its sign.
    """
    xp = coexistence_prey(p, tau)
    # p^2 - q^2 - 2 alpha = xp^2 and alpha^2 - c^2 = s^2 (3 xp - 1)(xp - 1)
    # after substituting the coefficient formulas; delta is the discriminant.
    delta = 4.0 * p.s * p.s * (1.0 - 3.0 * xp) * (1.0 - xp)
    root = math.sqrt(max(xp ** 4 + delta, 0.0))
    # The '+' branch written in a cancellation-free form.
    if root + xp * xp > 0.0:
        plus = delta / (2.0 * (root + xp * xp))
    else:
        plus = 0.0
    minus = 0.5 * (-xp * xp - root)
    return plus, minus


def crossing_frequency(p: Params, tau: float) -> Optional[float]:
    """Frequency omega > 0 of a potential imaginary root pair at delay tau.

    Returns None for tau >= tau_star (no purely imaginary roots possible).
    """
    if not math.isfinite(tau) or tau < 0.0:
        raise InvalidParams(f"tau must be nonnegative and finite, got {tau!r}")
    tau_star = equilibria(Params(p.s, p.Y, 0.0)).tau_star
    if tau_star <= 0.0 or tau >= tau_star:
        return None
    plus, _ = omega_squared_branches(p, tau)
    if plus <= 0.0:
        return None
    return math.sqrt(plus)


def _phase_den(s: float, xp: float, omega: float) -> float:
    return s * ((1.0 - 2.0 * xp) ** 2 + omega * omega)


def phase_sin(p: Params, omega: float, tau: float) -> float:
    """Value that sin(tau*omega) must take for i*omega to be a root."""
    xp = coexistence_prey(p, tau)
    s = p.s
    num = omega * (s + xp - s * xp - 2.0 * xp * xp - omega * omega)
    return num / _phase_den(s, xp, omega)


def phase_cos(p: Params, omega: float, tau: float) -> float:
    """Value that cos(tau*omega) must take for i*omega to be a root."""
    xp = coexistence_prey(p, tau)
    s = p.s
    num = omega * omega * (1.0 + s - xp) - (1.0 - 2.0 * xp) * s * xp
    return num / _phase_den(s, xp, omega)


def phase_angle(p: Params, tau: float) -> float:
    """Principal angle arccos(phase_cos) at the crossing frequency.

    Defined on [0, tau_star]; increases to pi at tau_star, where the
    crossing frequency vanishes.
    """
    tau_star = equilibria(Params(p.s, p.Y, 0.0)).tau_star
    slack = 1e-12 * max(1.0, abs(tau_star))
    if tau_star <= 0.0 or tau < -slack or tau > tau_star + slack:
        raise DomainError(f"phase angle defined on [0, tau_star], got tau={tau!r}")
    tau = min(max(tau, 0.0), tau_star)
    omega = crossing_frequency(p, tau)
    if omega is None:
        omega = 0.0  # boundary tau = tau_star
    h2 = phase_cos(p, omega, tau)
    return math.acos(min(1.0, max(-1.0, h2)))


# ----------------------------------------------------------------------
# crossing scan


class Crossing(str, enum.Enum):
    LEFT_TO_RIGHT = "left_to_right"   # a root pair enters the right half plane
    RIGHT_TO_LEFT = "right_to_left"   # a root pair returns to the left half plane


@dataclass(frozen=True)
class HopfCandidate:
    """A delay where a purely imaginary root pair crosses the axis.

    n is the winding index of the matched branch, j the 1-based ordinal of
    the crossing within that branch (by increasing tau), slope_gap the
    difference of slopes between the two intersecting curves, whose sign
    gives the crossing direction.
    """

    n: int
    j: int
    tau: float
    omega: float
    crossing: Crossing
    slope_gap: float


def _curves_on_grid(p: Params, taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (tau*omega, angle) along a grid inside (0, tau_star)."""
    s, Y = p.s, p.Y
    xp = (s / Y) * np.exp(s * taus)
    delta = 4.0 * s * s * (1.0 - 3.0 * xp) * (1.0 - xp)
    root = np.sqrt(np.maximum(xp ** 4 + delta, 0.0))
    w2 = np.where(delta > 0.0, delta / (2.0 * (root + xp * xp)), np.nan)
    w = np.sqrt(w2)
    den = s * ((1.0 - 2.0 * xp) ** 2 + w2)
    h2 = (w2 * (1.0 + s - xp) - (1.0 - 2.0 * xp) * s * xp) / den
    theta = np.arccos(np.clip(h2, -1.0, 1.0))
    return taus * w, theta


def _gap(p: Params, tau: float) -> float:
    """tau*omega - angle, the function whose 2*n*pi level sets are crossings."""
    omega = crossing_frequency(p, tau)
    if omega is None:
        omega = 0.0
    return tau * omega - phase_angle(p, tau)


def _slope_gap(p: Params, tau: float, tau_star: float) -> float:
    h = 1e-4 * tau_star
    h = min(h, 0.5 * (tau_star - tau), 0.5 * tau)
    return (_gap(p, tau + h) - _gap(p, tau - h)) / (2.0 * h)


def _bisect(f: Callable[[float], float], a: float, b: float, fa: float, fb: float) -> float:
    """Bisection to |f| < ROOT_TOL; the bracket must change sign."""
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) < ROOT_TOL:
            return mid
        if (fa < 0.0) != (fm < 0.0):
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def hopf_candidates(p: Params, grid_points: int = 10000) -> list[HopfCandidate]:
    """All crossing delays in (0, tau_star), sorted by tau.

    Scans every admissible branch on a uniform grid, refines each sign
    change by bisection, and warns (without failing) when a grid cell
    hides a root pair, which signals that grid_points should be raised.
    """
    if grid_points < 16:
        raise InvalidParams("grid_points must be at least 16")
    eq = equilibria(Params(p.s, p.Y, 0.0))
    tau_star = eq.tau_star
    if tau_star <= 0.0:
        return []
    taus = np.linspace(0.0, tau_star, grid_points + 2)[1:-1]
    tw, theta = _curves_on_grid(p, taus)
    tw_max = float(np.nanmax(tw))
    n_max = int(tw_max / (2.0 * math.pi))

    out: list[HopfCandidate] = []
    for n in range(n_max + 1):
        offset = 2.0 * math.pi * n

        def f(t: float, offset: float = offset) -> float:
            return _gap(p, t) - offset

        vals = tw - theta - offset
        roots: list[float] = []
        for i in range(len(taus) - 1):
            a, b = float(taus[i]), float(taus[i + 1])
            fa, fb = float(vals[i]), float(vals[i + 1])
            if not (math.isfinite(fa) and math.isfinite(fb)):
                continue
            if (fa < 0.0) != (fb < 0.0):
                roots.append(_bisect(f, a, b, fa, fb))
            elif fa != 0.0:
                # same sign at both ends: a double crossing may hide inside
                mid = 0.5 * (a + b)
                fm = f(mid)
                if math.isfinite(fm) and (fm < 0.0) != (fa < 0.0):
                    warnings.warn(
                        f"two crossings inside one grid cell near tau={mid:.6g}; "
                        "consider raising grid_points",
                        stacklevel=2,
                    )
                    roots.append(_bisect(f, a, mid, fa, fm))
                    roots.append(_bisect(f, mid, b, fm, fb))
        for j, tau_root in enumerate(sorted(roots), start=1):
            omega = crossing_frequency(p, tau_root)
            if omega is None:
                continue
            gap = _slope_gap(p, tau_root, tau_star)
            if abs(gap) < TANGENCY_TOL:
                warnings.warn(
                    f"tangency suspected at tau={tau_root:.6g} "
                    f"(slope gap {gap:.3e}); crossing direction unreliable",
                    stacklevel=2,
                )
            crossing = Crossing.LEFT_TO_RIGHT if gap > 0.0 else Crossing.RIGHT_TO_LEFT
            out.append(
                HopfCandidate(
                    n=n, j=j, tau=tau_root, omega=omega,
                    crossing=crossing, slope_gap=gap,
                )
            )
    out.sort(key=lambda cand: cand.tau)
    return out


# ----------------------------------------------------------------------
# stability profile


class EPlusStability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    ABSENT = "absent"


@dataclass(frozen=True)
class StabilityProfile:
    """Half-open delay intervals [lo, hi) with the coexistence-state label,
    partitioning [0, inf), plus the crossings that separate them."""

    intervals: tuple[tuple[float, float, EPlusStability], ...]
    candidates: tuple[HopfCandidate, ...]


def stability_profile(p: Params, grid_points: int = 10000) -> StabilityProfile:
    """Stability of the coexistence state as a function of the delay.

    Starts from the zero-delay state (always stable when the state exists:
    the zero-delay root test is re-checked here) and flips a crossing
    counter at every candidate.  A negative counter would mean the scan
    missed a crossing, which is reported instead of silently mislabelled.
    """
    eq = equilibria(Params(p.s, p.Y, 0.0))
    cands = tuple(hopf_candidates(p, grid_points))
    if eq.tau_c <= 0.0:
        return StabilityProfile(((0.0, math.inf, EPlusStability.ABSENT),), cands)

    cc = char_coeffs(p, 0.0)
    if not (cc.p + cc.q > 0.0 and cc.alpha + cc.c > 0.0):
        raise ConsistencyError("zero-delay root test failed; coefficients inconsistent")

    intervals: list[tuple[float, float, EPlusStability]] = []
    lo = 0.0
    unstable_pairs = 0
    for cand in cands:
        label = EPlusStability.STABLE if unstable_pairs == 0 else EPlusStability.UNSTABLE
        intervals.append((lo, cand.tau, label))
        unstable_pairs += 1 if cand.crossing is Crossing.LEFT_TO_RIGHT else -1
        if unstable_pairs < 0:
            raise ConsistencyError(
                f"crossing count went negative at tau={cand.tau:.6g}; scan incomplete"
            )
        lo = cand.tau
    if unstable_pairs != 0:
        warnings.warn(
            f"{unstable_pairs} root pair(s) unaccounted for at tau_star; "
            "profile beyond the last crossing may be mislabelled",
            stacklevel=2,
        )
    label = EPlusStability.STABLE if unstable_pairs == 0 else EPlusStability.UNSTABLE
    intervals.append((lo, eq.tau_c, label))
    intervals.append((eq.tau_c, math.inf, EPlusStability.ABSENT))
    return StabilityProfile(tuple(intervals), cands)


# ----------------------------------------------------------------------
# report output


def crossing_curves(
    p: Params, n_points: int = 2000
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Sampled (tau, tau*omega, angle) curves on (0, tau_star) plus the
    largest branch index the tau*omega curve can reach."""
    tau_star = equilibria(Params(p.s, p.Y, 0.0)).tau_star
    if tau_star <= 0.0:
        raise DomainError("no oscillatory window: tau_star <= 0")
    taus = np.linspace(0.0, tau_star, n_points + 2)[1:-1]
    tw, theta = _curves_on_grid(p, taus)
    n_max = int(float(np.nanmax(tw)) / (2.0 * math.pi))
    return taus, tw, theta, n_max


def write_crossing_curves_csv(
    path: str, p: Params, n_points: int = 2000, comment: Optional[str] = None
) -> None:
    """CSV with tau, tau_omega and one angle column per branch, for plotting
    the intersection picture behind hopf_candidates."""
    taus, tw, theta, n_max = crossing_curves(p, n_points)
    header = ["tau", "tau_omega"] + [f"theta_plus_2npi_{n}" for n in range(n_max + 1)]
    rows = []
    for i in range(len(taus)):
        row = [taus[i], tw[i]]
        row += [theta[i] + 2.0 * math.pi * n for n in range(n_max + 1)]
        rows.append(row)
    write_csv(path, header, rows, comment=comment)
