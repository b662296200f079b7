"""Fixed-step RK4 integration of the delayed system by the method of steps.

The step is chosen as dt = tau / ceil(tau / dt_target), i.e. the largest
step not exceeding the request that divides the delay exactly.  With the
delay an integer multiple of dt, every delayed lookup during a step hits
either a stored node or the midpoint of a stored interval, where cubic
Hermite interpolation of (state, derivative) pairs preserves the scheme's
fourth order between the derivative-discontinuity points that any delayed
system propagates from t = 0 (at multiples of tau; each round trip smooths
the solution by one more derivative).

Initial data is a constant function on [-tau, 0) with an optional separate
state at t = 0 itself, which is how distinct attractor basins are selected
at identical parameters.

Storage can be decimated: integration always runs at full resolution (the
compiled kernel keeps the last tau-window internally) while only every
`decimation`-th node is kept, which makes long parameter sweeps affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .csvio import write_csv
from .errors import DomainError, IntegrationError, InvalidParams
from .model import Params

__all__ = [
    "HistorySpec",
    "TailHistory",
    "History",
    "Trajectory",
    "integrate",
    "sample",
    "convergence_check",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class HistorySpec:
    """Constant initial data: (x_hist, y_hist) on [-tau, 0), with optional
    override (x0, y0) at t = 0 exactly."""

    x_hist: float
    y_hist: float
    x0: Optional[float] = None
    y0: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("x_hist", "y_hist", "x0", "y0"):
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0.0:
                raise InvalidParams(f"{name} must be nonnegative and finite, got {v!r}")

    def state0(self) -> tuple[float, float]:
        """State at t = 0 (override where given, history otherwise)."""
        x = self.x_hist if self.x0 is None else self.x0
        y = self.y_hist if self.y0 is None else self.y0
        return x, y

    def in_interior_class(self, tau: float) -> bool:
        """Whether this data selects the eventually-positive class: prey
        positive at t = 0 and predator-times-prey positive somewhere on
        [-tau, 0].  Solutions from this class stay bounded away from the
        axes in the long run whenever the coexistence state exists."""
        x0, y0 = self.state0()
        if x0 <= 0.0:
            return False
        if tau > 0.0 and self.x_hist * self.y_hist > 0.0:
            return True
        return x0 * y0 > 0.0

    def initial_predator_load(self, p: Params) -> float:
        """w(0) = Y e^{-s tau} x(-tau) + y(0), the seed of predator_bound."""
        x0, y0 = self.state0()
        past_x = self.x_hist if p.tau > 0.0 else x0
        return p.Y * math.exp(-p.s * p.tau) * past_x + y0


@dataclass(frozen=True, eq=False)
class TailHistory:
    """Initial data taken from the tail of an earlier run: the new solution
    continues the source trajectory from its final time, which is what makes
    warm-continuation sweeps follow one attractor branch instead of
    re-drawing a basin each step.  The delay of the new run may differ from
    the source's; the tail must reach back far enough to cover it."""

    source: "Trajectory"

    def state0(self) -> tuple[float, float]:
        return self.source.final_state()

    def in_interior_class(self, tau: float) -> bool:
        """Node-level check of the inherited tail: prey positive at the new
        t = 0 and prey-times-predator positive somewhere on the tail."""
        x0, y0 = self.state0()
        if x0 <= 0.0:
            return False
        src = self.source
        t = src.times
        tail = src.states[t >= src.t_end - tau]
        if tail.size and np.any(tail[:, 0] * tail[:, 1] > 0.0):
            return True
        return x0 * y0 > 0.0

    def initial_predator_load(self, p: Params) -> float:
        """w(0) = Y e^{-s tau} x(-tau) + y(0), the seed of predator_bound."""
        x0, y0 = self.state0()
        if p.tau <= 0.0:
            return p.Y * x0 + y0
        past_x, _ = sample(self.source, self.source.t_end - p.tau)
        return p.Y * math.exp(-p.s * p.tau) * past_x + y0


History = Union[HistorySpec, TailHistory]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored solution nodes plus enough structure to interpolate.

    data has one row (x, y, xdot, ydot) per stored node; stored nodes are
    dt * decimation apart starting at t = 0.  Derivatives are the exact
    right-hand-side values at the nodes, which is what makes cubic Hermite
    resampling fourth-order accurate.
    """

    params: Params
    history: History
    dt: float
    decimation: int
    data: np.ndarray
    # initial-data node table (k + 1 rows like `data`) when the history is
    # not constant; None means "evaluate t < 0 from the constant history"
    history_nodes: Optional[np.ndarray] = None

    @property
    def dt_out(self) -> float:
        return self.dt * self.decimation

    @property
    def t_end(self) -> float:
        return (self.data.shape[0] - 1) * self.dt_out

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.data.shape[0]) * self.dt_out

    @property
    def states(self) -> np.ndarray:
        return self.data[:, :2]

    @property
    def derivs(self) -> np.ndarray:
        return self.data[:, 2:]

    def final_state(self) -> tuple[float, float]:
        return float(self.data[-1, 0]), float(self.data[-1, 1])

    def sample(self, t, derivs: bool = False):
        return sample(self, t, derivs)


def _history_table(p: Params, h: History, k: int, dt: float) -> np.ndarray:
    """Initial-data nodes for the kernel: k + 1 rows (x, y, xdot, ydot) at
    t = -k dt, ..., 0, the last row being the left limit at 0."""
    if isinstance(h, TailHistory):
        src = h.source
        if src.params.s != p.s or src.params.Y != p.Y:
            raise InvalidParams(
                "TailHistory source was integrated with different (s, Y); "
                "continuation across model parameters is not meaningful"
            )
        offsets = (np.arange(k + 1) - k) * dt
        back = src.t_end + float(offsets[0])
        if back < -src.params.tau:
            raise InvalidParams(
                f"TailHistory source is too short: the new delay needs data "
                f"back to t={back:.6g} of a run covering [-{src.params.tau!r}, "
                f"{src.t_end!r}]"
            )
        vals, ders = sample(src, src.t_end + offsets, derivs=True)
        return np.ascontiguousarray(np.concatenate([vals, ders], axis=1))
    table = np.empty((k + 1, 4), dtype=np.float64)
    table[:, 0] = h.x_hist
    table[:, 1] = h.y_hist
    table[:, 2:] = 0.0
    return table


def integrate(
    p: Params,
    h: History,
    t_end: float,
    dt_target: float = 0.05,
    decimation: int = 1,
) -> Trajectory:
    """Integrate from the given initial data up to (at least) t_end.

    The horizon is rounded up to a whole number of stored nodes, so
    Trajectory.t_end may exceed the request by less than one output step.
    dt_target must not exceed the delay: the delayed argument must stay at
    least one full step in the past for the stage interpolation to read
    already-computed nodes only.

    Initial data is either a constant HistorySpec or the tail of an earlier
    Trajectory (TailHistory), which continues that run seamlessly.

    Raises IntegrationError if the state leaves the nonnegative region by
    more than 1e-12 or stops being finite (undershoot within that tolerance
    is clamped to zero).
    """
    if not math.isfinite(t_end) or t_end <= 0.0:
        raise InvalidParams(f"t_end must be positive and finite, got {t_end!r}")
    if not math.isfinite(dt_target) or dt_target <= 0.0:
        raise InvalidParams(f"dt_target must be positive and finite, got {dt_target!r}")
    if not isinstance(decimation, (int, np.integer)) or decimation < 1:
        raise InvalidParams(f"decimation must be a positive integer, got {decimation!r}")
    decimation = int(decimation)

    x0, y0 = h.state0()
    tau = p.tau
    hist = None
    if tau > 0.0:
        if dt_target > tau:
            raise InvalidParams(
                f"dt_target={dt_target!r} exceeds the delay tau={tau!r}; "
                "the delayed argument must lie at least one step in the past"
            )
        k = math.ceil(tau / dt_target - 1e-12)
        dt = tau / k
        hist = _history_table(p, h, k, dt)
        n_raw = math.ceil(t_end / dt - 1e-9)
        n_steps = decimation * math.ceil(n_raw / decimation)
        out = np.empty((n_steps // decimation + 1, 4), dtype=np.float64)
        status = _kernels.rk4_delay(
            p.s, p.Y * math.exp(-p.s * tau), dt, n_steps, k, decimation,
            hist, x0, y0, out,
        )
    else:
        n_raw = math.ceil(t_end / dt_target - 1e-9)
        n_steps = decimation * math.ceil(n_raw / decimation)
        dt = t_end / n_steps  # land exactly on the requested horizon
        out = np.empty((n_steps // decimation + 1, 4), dtype=np.float64)
        status = _kernels.rk4_plain(
            p.s, p.Y, dt, n_steps, decimation, x0, y0, out,
        )
    if status != 0:
        raise IntegrationError(
            f"state left the admissible region at t~{status * dt:.6g} "
            f"(step {status} of {n_steps})"
        )
    keep_nodes = hist if isinstance(h, TailHistory) else None
    return Trajectory(
        params=p, history=h, dt=dt, decimation=decimation, data=out,
        history_nodes=keep_nodes,
    )


def _hermite_rows(data: np.ndarray, h: float, u: np.ndarray, want_deriv: bool):
    """Cubic Hermite evaluation on a uniform (n, 4) node table.

    u is the query position in units of h from the first node.  Queries are
    snapped to nodes within 1e-9 steps (stored states return exactly) and
    clamped to the table.  Returns values, or (values, derivatives)."""
    j = np.floor(u).astype(np.int64)
    frac = u - j
    near = np.abs(u - np.round(u)) < 1e-9
    j = np.where(near, np.round(u).astype(np.int64), j)
    frac = np.where(near, 0.0, frac)
    last = data.shape[0] - 1
    over = j >= last
    j = np.where(over, last - 1, j)
    frac = np.where(over, 1.0, frac)
    j = np.maximum(j, 0)

    ua = data[j, 0:2]
    ub = data[j + 1, 0:2]
    da = data[j, 2:4]
    db = data[j + 1, 2:4]
    f = frac[:, None]
    f2 = f * f
    f3 = f2 * f
    h00 = 2.0 * f3 - 3.0 * f2 + 1.0
    h10 = f3 - 2.0 * f2 + f
    h01 = -2.0 * f3 + 3.0 * f2
    h11 = f3 - f2
    val = h00 * ua + h10 * h * da + h01 * ub + h11 * h * db
    if not want_deriv:
        return val
    der = (
        (6.0 * f2 - 6.0 * f) / h * ua
        + (3.0 * f2 - 4.0 * f + 1.0) * da
        + (6.0 * f - 6.0 * f2) / h * ub
        + (3.0 * f2 - 2.0 * f) * db
    )
    return val, der


def sample(tr: Trajectory, t, derivs: bool = False):
    """Solution value at time(s) t in [-tau, t_end].

    Exactly the stored state on nodes, the initial data for t < 0, and the
    cubic Hermite interpolant (states and derivatives of the bracketing
    nodes) in between.  Scalars map to an (x, y) tuple, arrays to an (n, 2)
    array; with derivs=True a (values, derivatives) pair of the same shape
    is returned.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    tt = np.atleast_1d(t_arr).astype(float)
    tau = tr.params.tau
    t_end = tr.t_end
    slack = 1e-9 * max(1.0, t_end)
    if np.any(tt < -tau - slack) or np.any(tt > t_end + slack):
        raise DomainError(
            f"sample times must lie in [-tau, t_end] = [{-tau!r}, {t_end!r}]"
        )

    res = np.empty((tt.size, 2), dtype=float)
    der = np.zeros((tt.size, 2), dtype=float) if derivs else None
    past = tt < 0.0
    if np.any(past):
        if tr.history_nodes is not None:
            u = (tt[past] + tau) / tr.dt
            got = _hermite_rows(tr.history_nodes, tr.dt, u, derivs)
            if derivs:
                res[past], der[past] = got
            else:
                res[past] = got
        else:
            res[past, 0] = tr.history.x_hist
            res[past, 1] = tr.history.y_hist
    cur = ~past
    if np.any(cur):
        u = tt[cur] / tr.dt_out
        got = _hermite_rows(tr.data, tr.dt_out, u, derivs)
        if derivs:
            res[cur], der[cur] = got
        else:
            res[cur] = got
    if scalar:
        if derivs:
            return (
                (float(res[0, 0]), float(res[0, 1])),
                (float(der[0, 0]), float(der[0, 1])),
            )
        return float(res[0, 0]), float(res[0, 1])
    if derivs:
        return res, der
    return res


def convergence_check(
    p: Params,
    h: History,
    t_end: float,
    dt: float,
    window: Optional[tuple[float, float]] = None,
) -> float:
    """Observed convergence order from runs at dt, dt/2 and dt/4.

    Errors are max-norm state differences at the coarse-run node times
    inside `window` (default: the whole run).  Meaningful away from the
    stepwise-propagated discontinuity points (multiples of tau) and above
    the roundoff floor; expect about 4, and at least 3.5, in smooth
    regimes.
    """
    base = integrate(p, h, t_end, dt)
    dt0 = base.dt  # actual step; halving it keeps the delay divisible
    half = integrate(p, h, t_end, dt0 / 2.0)
    quarter = integrate(p, h, t_end, dt0 / 4.0)

    n = base.data.shape[0]
    idx = np.arange(n)
    if window is not None:
        t = base.times
        keep = (t >= window[0]) & (t <= window[1])
        if not np.any(keep):
            raise InvalidParams("window contains no coarse-run nodes")
        idx = idx[keep]
    # coarse node i coincides with node 2i of the half run, 4i of the quarter
    e12 = np.max(np.linalg.norm(base.states[idx] - half.states[2 * idx], axis=1))
    e23 = np.max(np.linalg.norm(half.states[2 * idx] - quarter.states[4 * idx], axis=1))
    if e23 == 0.0:
        return math.inf
    return math.log2(e12 / e23)


def write_trajectory_csv(
    path: str,
    tr: Trajectory,
    decimate: int = 1,
    comment: Optional[str] = None,
) -> None:
    """t,x,y rows at stored nodes, optionally keeping every decimate-th."""
    if not isinstance(decimate, (int, np.integer)) or decimate < 1:
        raise InvalidParams(f"decimate must be a positive integer, got {decimate!r}")
    t = tr.times[::decimate]
    s = tr.states[::decimate]
    rows = ([float(t[i]), float(s[i, 0]), float(s[i, 1])] for i in range(len(t)))
    write_csv(path, ["t", "x", "y"], rows, comment=comment)
