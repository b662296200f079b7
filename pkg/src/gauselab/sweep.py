"""Delay sweeps: orbit diagrams, hysteresis (bistability) windows, and
period-doubling detection.

A sweep integrates one long trajectory per delay on a uniform grid, throws
away a transient, and condenses the rest into filtered extrema plus a
recurrence-based period.  Two continuation policies matter: ColdStart
restarts every row from the same initial data, WarmStart hands the final
state of one row to the next as its constant history, which is what makes
forward and backward passes trace different branches through a hysteresis
window.  Comparing the amplitude envelopes of a forward and a backward
WarmStart pass exposes exactly the delays where two attractors coexist.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .analysis import (
    ExtremaSeries,
    estimate_period,
    extrema,
    filter_kinks,
)
from .csvio import write_csv
from .errors import GauselabError, InvalidParams
from .integrator import History, HistorySpec, TailHistory, Trajectory, integrate
from .model import Params
from .spectral import hopf_candidates

__all__ = [
    "AttractorClass",
    "SweepPlan",
    "OrbitDiagramRow",
    "BistabilityWindow",
    "DoublingEvent",
    "tau_grid",
    "run_sweep",
    "detect_bistability",
    "detect_period_doublings",
    "write_orbit_csv",
    "write_bistability_csv",
    "write_doublings_csv",
]


class AttractorClass:
    EQUILIBRIUM = "Equilibrium"
    PERIODIC = "Periodic"
    APERIODIC = "Aperiodic"


@dataclass(frozen=True)
class SweepPlan:
    """Grid and per-row integration budget for a delay sweep.

    Near a predicted oscillation-onset delay (within two grid steps) the
    transient is stretched by near_onset_factor: convergence is critically
    slow there and a normal budget misclassifies tiny limit cycles as
    equilibria.
    """

    tau_min: float
    tau_max: float
    steps: int
    direction: str = "forward"        # forward | backward | both
    continuation: str = "cold"        # cold | warm
    t_transient: float = 30000.0
    t_record: float = 10000.0
    dt_target: float = 0.05
    history: HistorySpec = field(default_factory=lambda: HistorySpec(0.1, 0.1))
    kappa: float = 0.2
    eq_amplitude: float = 1e-5
    recurrence_eps: float = 1e-3
    decimation: int = 10
    near_onset_factor: float = 5.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau_min) and math.isfinite(self.tau_max)):
            raise InvalidParams("tau range must be finite")
        if self.tau_min < 0.0 or self.tau_max < self.tau_min:
            raise InvalidParams(
                f"need 0 <= tau_min <= tau_max, got [{self.tau_min!r}, {self.tau_max!r}]"
            )
        if self.steps < 1:
            raise InvalidParams("steps must be at least 1")
        if self.direction not in ("forward", "backward", "both"):
            raise InvalidParams(f"unknown direction {self.direction!r}")
        if self.continuation not in ("cold", "warm"):
            raise InvalidParams(f"unknown continuation {self.continuation!r}")
        if self.t_transient < 0.0 or self.t_record <= 0.0:
            raise InvalidParams("t_transient must be >= 0 and t_record > 0")

    @property
    def grid_step(self) -> float:
        if self.steps == 1:
            return 0.0
        return (self.tau_max - self.tau_min) / (self.steps - 1)


def tau_grid(plan: SweepPlan) -> np.ndarray:
    return np.linspace(plan.tau_min, plan.tau_max, plan.steps)


@dataclass(frozen=True)
class OrbitDiagramRow:
    """One delay's condensed attractor: filtered extrema, period/loop count
    where found, a coarse class label, and the final state.  error records
    an integration failure without aborting the sweep.

    tail keeps the last stretch of the solution (times re-based, long
    enough for any delay the plan can ask for) so WarmStart continuation
    and window refinement can seed the next run with the true final
    segment; a delay equation's state is a segment, and handing over only
    the final point would re-draw the basin at every step."""

    tau: float
    direction: str
    attractor_class: Optional[str]
    extrema: Optional[ExtremaSeries]
    period: Optional[float]
    loops: Optional[int]
    final_state: Optional[tuple[float, float]]
    error: Optional[str] = None
    tail: Optional[Trajectory] = None


def _onset_taus(p: Params) -> tuple[float, ...]:
    try:
        return tuple(c.tau for c in hopf_candidates(p))
    except GauselabError:
        return ()


def _tail_of(tr: Trajectory, plan: SweepPlan) -> Trajectory:
    """Trimmed copy holding just enough of the record's end to serve as
    initial data for any delay on the plan's grid (plus refinement slack).
    Node times are re-based, which is harmless: continuation only ever
    samples relative to the final time."""
    need = plan.tau_max + 2.0 * plan.grid_step + 2.0 * tr.dt_out
    m = min(tr.data.shape[0], int(math.ceil(need / tr.dt_out)) + 2)
    return Trajectory(
        params=tr.params, history=tr.history, dt=tr.dt,
        decimation=tr.decimation, data=np.ascontiguousarray(tr.data[-m:]),
    )


def _analyze_one(
    p: Params,
    tau: float,
    plan: SweepPlan,
    hist: History,
    direction: str,
    onset_taus: tuple[float, ...],
) -> OrbitDiagramRow:
    t_transient = plan.t_transient
    reach = 2.0 * plan.grid_step
    if any(abs(tau - tc) <= reach for tc in onset_taus):
        t_transient *= plan.near_onset_factor
    t_end = t_transient + plan.t_record
    try:
        tr = integrate(
            Params(p.s, p.Y, tau), hist, t_end, plan.dt_target, plan.decimation
        )
    except GauselabError as exc:
        return OrbitDiagramRow(
            tau=tau, direction=direction, attractor_class=None, extrema=None,
            period=None, loops=None, final_state=None, error=str(exc),
        )
    tail = _tail_of(tr, plan)
    t_cut = tr.t_end - plan.t_record
    post = tr.states[tr.times > t_cut, 1]
    if float(np.ptp(post)) < plan.eq_amplitude:
        return OrbitDiagramRow(
            tau=tau, direction=direction,
            attractor_class=AttractorClass.EQUILIBRIUM,
            extrema=None, period=None, loops=None,
            final_state=tr.final_state(), tail=tail,
        )
    es = filter_kinks(extrema(tr, "y", t_cut), plan.kappa)
    pe = estimate_period(tr, t_cut, eps=plan.recurrence_eps, kappa=plan.kappa, es=es)
    if pe is None:
        return OrbitDiagramRow(
            tau=tau, direction=direction,
            attractor_class=AttractorClass.APERIODIC,
            extrema=es, period=None, loops=None,
            final_state=tr.final_state(), tail=tail,
        )
    return OrbitDiagramRow(
        tau=tau, direction=direction,
        attractor_class=AttractorClass.PERIODIC,
        extrema=es, period=pe.period, loops=pe.loops,
        final_state=tr.final_state(), tail=tail,
    )


def _cold_task(args) -> OrbitDiagramRow:
    p, tau, plan, direction, onset_taus = args
    return _analyze_one(p, tau, plan, plan.history, direction, onset_taus)


def run_sweep(p: Params, plan: SweepPlan, jobs: int = 1) -> list[OrbitDiagramRow]:
    """Execute the sweep; p supplies (s, Y), the grid supplies tau.

    Returns rows in execution order (forward pass first when both run).
    Rows that fail to integrate carry their error and a None class; the
    sweep continues.  ColdStart rows are independent and can fan out over
    `jobs` processes; WarmStart is inherently sequential.
    """
    if jobs < 1:
        raise InvalidParams("jobs must be at least 1")
    taus = tau_grid(plan)
    onsets = _onset_taus(p)
    passes: list[str] = (
        ["forward", "backward"] if plan.direction == "both" else [plan.direction]
    )
    rows: list[OrbitDiagramRow] = []
    for direction in passes:
        ordered = taus if direction == "forward" else taus[::-1]
        if plan.continuation == "cold" and jobs > 1:
            args = [(p, float(tau), plan, direction, onsets) for tau in ordered]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows.extend(pool.map(_cold_task, args))
            continue
        hist: History = plan.history
        for tau in ordered:
            row = _analyze_one(p, float(tau), plan, hist, direction, onsets)
            rows.append(row)
            if plan.continuation == "warm" and row.tail is not None:
                hist = TailHistory(row.tail)
    return rows


# ----------------------------------------------------------------------
# hysteresis windows


@dataclass(frozen=True)
class BistabilityWindow:
    """Delay interval where forward and backward passes disagree, i.e. two
    attractors coexist.  evidence is the largest envelope gap inside."""

    tau_low: float
    tau_high: float
    evidence: float


def _envelope(row: OrbitDiagramRow) -> tuple[float, float]:
    """Robust (low, high) bounds of the surviving extrema values; quantiles
    keep chaotic records from flapping on a single deep excursion."""
    if row.extrema is None:
        return 0.0, 0.0
    vals = np.array([e.value for e in row.extrema.active()], dtype=float)
    if vals.size == 0:
        return 0.0, 0.0
    return float(np.quantile(vals, 0.02)), float(np.quantile(vals, 0.98))


def detect_bistability(
    fwd: list[OrbitDiagramRow],
    bwd: list[OrbitDiagramRow],
    rel_gap: float = 0.05,
    p: Optional[Params] = None,
    plan: Optional[SweepPlan] = None,
    refine_steps: int = 0,
) -> list[BistabilityWindow]:
    """Windows where the two passes sit on different attractors.

    Both row lists must cover the same grid (any order).  A grid point
    disagrees when the amplitude envelopes differ by more than rel_gap of
    the larger one.  With p, plan and refine_steps given, each window
    endpoint is sharpened by bisection: the surviving branch's final state
    is continued into the bracket and re-classified by envelope proximity.
    """
    f = sorted(fwd, key=lambda r: r.tau)
    b = sorted(bwd, key=lambda r: r.tau)
    if len(f) != len(b) or any(
        abs(rf.tau - rb.tau) > 1e-9 * max(1.0, abs(rf.tau)) for rf, rb in zip(f, b)
    ):
        raise InvalidParams("forward and backward passes must share one tau grid")

    def env_amp(bounds: tuple[float, float]) -> float:
        return bounds[1] - bounds[0]

    n = len(f)
    disagree = np.zeros(n, dtype=bool)
    gaps = np.zeros(n)
    for i, (rf, rb) in enumerate(zip(f, b)):
        ef, eb = _envelope(rf), _envelope(rb)
        af, ab = env_amp(ef), env_amp(eb)
        scale = max(af, ab)
        if scale < 1e-5:
            continue
        gap = abs(af - ab)
        gaps[i] = gap
        disagree[i] = gap > rel_gap * scale

    windows: list[BistabilityWindow] = []
    i = 0
    while i < n:
        if not disagree[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and disagree[j + 1]:
            j += 1
        lo, hi = f[i].tau, f[j].tau
        if refine_steps > 0 and p is not None and plan is not None:
            if i > 0:
                lo = _refine_edge(p, plan, b[i], f[i - 1], b[i - 1].tau, f[i].tau,
                                  refine_steps)
            if j + 1 < n:
                hi = _refine_edge(p, plan, f[j], b[j + 1], f[j].tau, f[j + 1].tau,
                                  refine_steps, upper=True)
        windows.append(
            BistabilityWindow(
                tau_low=lo, tau_high=hi, evidence=float(np.max(gaps[i : j + 1]))
            )
        )
        i = j + 1
    return windows


def _refine_edge(
    p: Params,
    plan: SweepPlan,
    inside_row: OrbitDiagramRow,
    outside_row: OrbitDiagramRow,
    tau_out: float,
    tau_in: float,
    steps: int,
    upper: bool = False,
) -> float:
    """Bisect the delay where the minority branch dies.

    inside_row sits on the branch that only exists inside the window; its
    final segment is continued to the midpoint and the resulting envelope
    is matched against the two known branches.  Whenever a midpoint stays
    on the branch it becomes the new seed, so the continuation never jumps
    across the basin."""
    if inside_row.tail is None or inside_row.extrema is None:
        return tau_in
    seed: History = TailHistory(inside_row.tail)
    env_in = _envelope(inside_row)
    env_out = _envelope(outside_row)
    a, c = (tau_in, tau_out) if upper else (tau_out, tau_in)
    # bracket [a, c]: branch known dead at tau_out, alive at tau_in
    for _ in range(steps):
        mid = 0.5 * (a + c)
        row = _analyze_one(p, mid, plan, seed, "refine", ())
        if row.extrema is None and row.attractor_class != AttractorClass.EQUILIBRIUM:
            break  # integration failure: stop refining, keep the bracket
        env_mid = _envelope(row)
        da = abs((env_mid[1] - env_mid[0]) - (env_in[1] - env_in[0]))
        db = abs((env_mid[1] - env_mid[0]) - (env_out[1] - env_out[0]))
        minority_alive = da <= db
        if minority_alive and row.tail is not None:
            seed = TailHistory(row.tail)
        if upper:
            if minority_alive:
                a = mid
            else:
                c = mid
        else:
            if minority_alive:
                c = mid
            else:
                a = mid
    return 0.5 * (a + c)


# ----------------------------------------------------------------------
# period doublings


@dataclass(frozen=True)
class DoublingEvent:
    """A loop-count doubling (or halving, scanning the other way) located
    between two grid delays."""

    tau: float
    tau_lo: float
    tau_hi: float
    loops_before: int
    loops_after: int


def detect_period_doublings(
    rows: list[OrbitDiagramRow],
    p: Optional[Params] = None,
    plan: Optional[SweepPlan] = None,
    refine_steps: int = 0,
) -> list[DoublingEvent]:
    """Delays where the recurrence period jumps by a factor of about two
    between neighbouring Periodic rows of one pass.

    The period ratio is the primary signature: loop counts flutter near a
    doubling (the newly split extremum pair straddles the kink threshold),
    but the measured period switches cleanly.  Recorded loop counts ride
    along in the event for context.

    With p, plan and refine_steps the bracket is narrowed by bisection,
    re-running a cold row at each midpoint and asking which side's period
    it reproduces.
    """
    ordered = sorted(
        (r for r in rows if r.attractor_class == AttractorClass.PERIODIC and r.period),
        key=lambda r: r.tau,
    )
    events: list[DoublingEvent] = []
    for r1, r2 in zip(ordered, ordered[1:]):
        p1, p2 = float(r1.period), float(r2.period)
        ratio = max(p1, p2) / min(p1, p2)
        if not 1.6 <= ratio <= 2.6:
            continue
        lo, hi = r1.tau, r2.tau
        if refine_steps > 0 and p is not None and plan is not None:
            for _ in range(refine_steps):
                mid = 0.5 * (lo + hi)
                row = _analyze_one(p, mid, plan, plan.history, "refine", ())
                if row.attractor_class != AttractorClass.PERIODIC or not row.period:
                    break  # ambiguous midpoint: keep the bracket honest
                pm = float(row.period)
                if abs(math.log(pm / p1)) <= abs(math.log(pm / p2)):
                    lo = mid
                else:
                    hi = mid
        events.append(
            DoublingEvent(
                tau=0.5 * (lo + hi), tau_lo=lo, tau_hi=hi,
                loops_before=int(r1.loops or 0), loops_after=int(r2.loops or 0),
            )
        )
    return events


# ----------------------------------------------------------------------
# CSV emitters


def write_orbit_csv(path: str, rows: list[OrbitDiagramRow], comment: Optional[str] = None) -> None:
    """One line per surviving-or-kink extremum plus one summary line per row."""
    header = ["tau", "direction", "kind", "value", "kink", "period", "loops", "class"]
    out = []
    for row in rows:
        if row.extrema is not None:
            for e in row.extrema.events:
                out.append([row.tau, row.direction, e.kind, e.value, e.kink,
                            None, None, None])
        out.append([
            row.tau, row.direction, "summary", None, None,
            row.period, row.loops,
            row.attractor_class if row.error is None else f"error:{row.error}",
        ])
    write_csv(path, header, out, comment=comment)


def write_bistability_csv(
    path: str, windows: list[BistabilityWindow], comment: Optional[str] = None
) -> None:
    rows = ([w.tau_low, w.tau_high, w.evidence] for w in windows)
    write_csv(path, ["tau_low", "tau_high", "gap"], rows, comment=comment)


def write_doublings_csv(
    path: str, events: list[DoublingEvent], comment: Optional[str] = None
) -> None:
    rows = (
        [e.tau, e.tau_lo, e.tau_hi, e.loops_before, e.loops_after] for e in events
    )
    write_csv(
        path, ["tau", "tau_lo", "tau_hi", "loops_before", "loops_after"],
        rows, comment=comment,
    )
