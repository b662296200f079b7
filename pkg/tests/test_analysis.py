"""Diagnostics layer, exercised on synthetic trajectories with known
extrema, periods, and geometry, plus short real runs for the divergence
probe."""

import math

import numpy as np
import pytest

from gauselab.analysis import (
    Extremum,
    ExtremaSeries,
    delay_embed,
    divergence,
    estimate_period,
    extrema,
    filter_kinks,
    return_map,
    write_divergence_csv,
    write_embedding_csv,
    write_extrema_csv,
    write_return_map_csv,
)
from gauselab.errors import DomainError, InvalidParams
from gauselab.integrator import HistorySpec, TailHistory, Trajectory, integrate
from gauselab.model import Params

S, Y = 0.02, 0.6


def synthetic(t_end, dt, fx, fy, dfx, dfy, tau=12.5):
    """Trajectory whose nodes and derivative columns follow given callables,
    so every detector can be checked against closed-form answers."""
    t = np.arange(0.0, t_end + 0.5 * dt, dt)
    data = np.column_stack([fx(t), fy(t), dfx(t), dfy(t)])
    return Trajectory(
        params=Params(S, Y, tau),
        history=HistorySpec(0.5, 0.5),
        dt=dt,
        decimation=1,
        data=data,
    )


def single_scale(t_end=260.0, dt=0.05):
    """One clean loop per period 50: y in [0.3, 0.9], x in [0.3, 0.7]."""
    w = 2.0 * math.pi / 50.0
    return synthetic(
        t_end, dt,
        fx=lambda t: 0.5 + 0.2 * np.cos(w * t),
        fy=lambda t: 0.6 + 0.3 * np.sin(w * t),
        dfx=lambda t: -0.2 * w * np.sin(w * t),
        dfy=lambda t: 0.3 * w * np.cos(w * t),
    )


def two_scale(t_end=520.0, dt=0.05):
    """Alternating deep and shallow loops: true period 100, two maxima
    and two minima per period."""
    w = 2.0 * math.pi / 50.0
    return synthetic(
        t_end, dt,
        fx=lambda t: 0.5 + 0.2 * np.cos(w * t),
        fy=lambda t: 0.6 + 0.3 * np.sin(w * t) + 0.15 * np.sin(0.5 * w * t),
        dfx=lambda t: -0.2 * w * np.sin(w * t),
        dfy=lambda t: 0.3 * w * np.cos(w * t) + 0.075 * w * np.cos(0.5 * w * t),
    )


class TestExtrema:
    def test_sine_locations_values_and_alternation(self):
        es = extrema(single_scale(), "y")
        assert es.component == "y"
        assert len(es.events) == 10
        kinds = [e.kind for e in es.events]
        assert kinds == ["max", "min"] * 5
        for i, e in enumerate(e for e in es.events if e.kind == "max"):
            assert e.t == pytest.approx(12.5 + 50.0 * i, abs=1e-3)
            assert e.value == pytest.approx(0.9, abs=1e-4)
        for i, e in enumerate(e for e in es.events if e.kind == "min"):
            assert e.t == pytest.approx(37.5 + 50.0 * i, abs=1e-3)
            assert e.value == pytest.approx(0.3, abs=1e-4)

    def test_cut_drops_early_events(self):
        es = extrema(single_scale(), "y", t_cut=100.0)
        assert [e.kind for e in es.events] == ["max", "min"] * 3
        assert es.events[0].t == pytest.approx(112.5, abs=1e-3)

    def test_prey_component(self):
        es = extrema(single_scale(), "x")
        assert es.component == "x"
        first = es.events[0]
        assert (first.kind, first.t) == ("min", pytest.approx(25.0, abs=1e-3))

    def test_constant_record_is_empty(self):
        tr = synthetic(
            100.0, 0.05,
            fx=lambda t: np.full_like(t, 0.5), fy=lambda t: np.full_like(t, 0.7),
            dfx=np.zeros_like, dfy=np.zeros_like,
        )
        assert extrema(tr, "y").events == ()

    def test_too_few_nodes_past_cut(self):
        with pytest.raises(DomainError):
            extrema(single_scale(), "y", t_cut=259.91)

    def test_unknown_component(self):
        with pytest.raises(InvalidParams):
            extrema(single_scale(), "z")


class TestKinkFilter:
    @staticmethod
    def series():
        return ExtremaSeries("y", (
            Extremum(10.0, 1.00, "max"),
            Extremum(12.0, 0.90, "min"),
            Extremum(14.0, 1.02, "max"),
            Extremum(20.0, 0.20, "min"),
            Extremum(30.0, 1.00, "max"),
            Extremum(40.0, 0.21, "min"),
        ))

    def test_small_wiggle_pair_is_flagged(self):
        out = filter_kinks(self.series(), kappa=0.2)
        assert [e.kink for e in out.events] == [True, True, False, False, False, False]
        assert [e.kind for e in out.active()] == ["max", "min", "max", "min"]

    def test_series_metadata_preserved(self):
        out = filter_kinks(self.series(), kappa=0.2)
        assert out.component == "y"
        assert [e.t for e in out.events] == [e.t for e in self.series().events]
        assert out.amplitude() == pytest.approx(1.02 - 0.20)

    def test_idempotent(self):
        once = filter_kinks(self.series(), kappa=0.2)
        twice = filter_kinks(once, kappa=0.2)
        assert twice == once

    def test_large_kappa_flags_more(self):
        out = filter_kinks(self.series(), kappa=0.99)
        # everything within one pair of the extremes collapses
        assert len(out.active()) <= 2

    @pytest.mark.parametrize("kappa", [0.0, 1.0, -0.5, 2.0])
    def test_kappa_domain(self, kappa):
        with pytest.raises(InvalidParams):
            filter_kinks(self.series(), kappa=kappa)

    def test_clean_series_untouched(self):
        es = ExtremaSeries("y", (
            Extremum(10.0, 1.0, "max"),
            Extremum(20.0, 0.2, "min"),
            Extremum(30.0, 1.0, "max"),
        ))
        assert filter_kinks(es, kappa=0.2) == es


class TestPeriodEstimate:
    def test_single_scale_period(self):
        est = estimate_period(single_scale(), t_cut=60.0)
        assert est is not None
        assert est.period == pytest.approx(50.0, rel=1e-6)
        assert est.loops == 1
        assert est.confidence < 1e-6

    def test_two_scale_period_counts_both_loops(self):
        est = estimate_period(two_scale(), t_cut=60.0)
        assert est is not None
        assert est.period == pytest.approx(100.0, rel=1e-3)
        assert est.loops == 2

    def test_short_record_declines_to_answer(self):
        # fewer than two full traversals after the cut: the doubled-lag
        # check cannot be verified, so no period is claimed
        assert estimate_period(single_scale(t_end=190.0), t_cut=100.0) is None

    def test_constant_record_has_no_period(self):
        tr = synthetic(
            200.0, 0.05,
            fx=lambda t: np.full_like(t, 0.5), fy=lambda t: np.full_like(t, 0.7),
            dfx=np.zeros_like, dfy=np.zeros_like,
        )
        assert estimate_period(tr, t_cut=10.0) is None

    def test_parameter_domain(self):
        tr = single_scale()
        with pytest.raises(InvalidParams):
            estimate_period(tr, t_cut=60.0, eps=0.0)
        with pytest.raises(InvalidParams):
            estimate_period(tr, t_cut=60.0, d_min=-1.0)


class TestDelayEmbedding:
    def test_quarter_period_lag_draws_a_circle(self):
        emb = delay_embed(single_scale(), lag=12.5, t_cut=100.0)
        assert emb.shape == (3201, 2)
        radii = np.hypot(emb[:, 0] - 0.6, emb[:, 1] - 0.6)
        assert np.max(np.abs(radii - 0.3)) < 1e-9

    def test_validations(self):
        tr = single_scale()
        with pytest.raises(InvalidParams):
            delay_embed(tr, lag=0.0, t_cut=10.0)
        with pytest.raises(InvalidParams):
            delay_embed(tr, lag=12.5, t_cut=5.0)
        with pytest.raises(DomainError):
            delay_embed(tr, lag=12.5, t_cut=500.0)


class TestReturnMap:
    def test_cycle_shows_as_fixed_point(self):
        es = filter_kinks(extrema(single_scale(), "y", t_cut=30.0))
        rm = return_map(es, threshold=0.5)
        assert rm.pairs.shape == (4, 2)
        assert np.max(np.abs(rm.pairs[:, 0] - rm.pairs[:, 1])) < 1e-9
        assert np.max(np.abs(rm.pairs - 0.3)) < 1e-4

    def test_alternating_minima_show_two_branches(self):
        es = filter_kinks(extrema(two_scale(), "y"))
        rm = return_map(es, threshold=0.9)
        assert rm.pairs.shape[0] >= 8
        levels = np.unique(np.round(rm.pairs[:, 0], 3))
        assert levels.size == 2
        # deep maps to shallow and back
        for a, b in rm.pairs:
            assert (a < 0.3) != (b < 0.3)

    def test_threshold_below_shallow_minima_empties_the_map(self):
        es = filter_kinks(extrema(two_scale(), "y"))
        rm = return_map(es, threshold=0.35)
        assert rm.pairs.shape == (0, 2)

    def test_prey_series_rejected(self):
        with pytest.raises(InvalidParams):
            return_map(extrema(single_scale(), "x"), threshold=0.5)

    def test_threshold_must_be_finite(self):
        es = extrema(single_scale(), "y")
        with pytest.raises(InvalidParams):
            return_map(es, threshold=math.nan)


class TestDivergence:
    def test_zero_perturbation_is_bitwise_null(self):
        res = divergence(Params(S, Y, 0.0), HistorySpec(0.1, 0.1),
                         delta=0.0, t_end=2000.0, dt_target=0.5)
        assert np.all(res.sep == 0.0)
        assert res.slope == 0.0
        assert res.t.size == res.sep.size == res.log_sep.size

    def test_stable_regime_separation_decays(self):
        res = divergence(Params(S, Y, 0.0), HistorySpec(0.1, 0.1),
                         delta=0.01, t_end=2000.0, dt_target=0.5)
        assert res.sep[0] == pytest.approx(0.01, rel=1e-12)
        assert math.isfinite(res.slope)
        assert res.slope < 0.01
        assert res.sep[-1] < res.sep[0]

    def test_validations(self):
        p, h = Params(S, Y, 0.0), HistorySpec(0.1, 0.1)
        with pytest.raises(InvalidParams):
            divergence(p, h, delta=-0.01)
        with pytest.raises(InvalidParams):
            divergence(p, h, sat_frac=0.0)
        with pytest.raises(InvalidParams):
            divergence(p, h, sat_frac=1.0)
        with pytest.raises(InvalidParams):
            divergence(p, h, block=0.0)

    def test_warm_tail_rejected(self):
        tr = integrate(Params(S, Y, 1.0), HistorySpec(0.1, 0.1), 10.0)
        with pytest.raises(InvalidParams):
            divergence(Params(S, Y, 1.0), TailHistory(tr))


class TestCsvEmitters:
    def test_extrema_csv(self, tmp_path):
        es = filter_kinks(extrema(single_scale(), "y"))
        path = tmp_path / "ex.csv"
        write_extrema_csv(str(path), es, comment="probe")
        lines = path.read_text().splitlines()
        assert lines[0] == "# probe"
        assert lines[1] == "t,value,kind,kink"
        assert len(lines) == 2 + len(es.events)
        assert lines[2].split(",")[2] == "max"
        assert lines[2].split(",")[3] == "false"

    def test_embedding_csv(self, tmp_path):
        emb = delay_embed(single_scale(), lag=12.5, t_cut=100.0)
        path = tmp_path / "emb.csv"
        write_embedding_csv(str(path), emb)
        lines = path.read_text().splitlines()
        assert lines[0] == "y_t,y_lag"
        assert len(lines) == 1 + emb.shape[0]

    def test_return_map_csv(self, tmp_path):
        rm = return_map(filter_kinks(extrema(single_scale(), "y")), threshold=0.5)
        path = tmp_path / "rm.csv"
        write_return_map_csv(str(path), rm)
        lines = path.read_text().splitlines()
        assert lines[0] == "min_k,min_k1"
        assert len(lines) == 1 + rm.pairs.shape[0]

    def test_divergence_csv(self, tmp_path):
        res = divergence(Params(S, Y, 0.0), HistorySpec(0.1, 0.1),
                         delta=0.01, t_end=500.0, dt_target=0.5)
        path = tmp_path / "dv.csv"
        write_divergence_csv(str(path), res)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,log_sep"
        assert len(lines) == 1 + res.t.size
