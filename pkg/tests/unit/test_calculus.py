"""Unit tests for component bounds and the end-to-end delay algorithm."""

import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from ncsbound.calculus import (
    DELAY_CSV_HEADER,
    LINK_RATE,
    MuxInput,
    aggregate,
    analyze,
    assemble_system,
    backlog_at,
    bursty_period,
    capacity_sweep,
    end_to_end_delay,
    link_backlog_bound,
    mux_backlog_bound,
    mux_delay_bound,
    propagate_envelope,
    queue_delay_bound,
    solve_burstiness,
    switch_delay_bound,
    ubd_from_burstiness,
    write_capacity_sweep_csv,
    write_delay_csv,
    write_delay_json,
)
from ncsbound.errors import ModelError, NonConvergent, UnstableInput
from ncsbound.net_model import Link, NetworkModel, Stream, TrafficEnvelope, random_model

CASE_STUDY_UBD = 4.9006e-3


class TestMultiplexer:
    """Test the FIFO multiplexer bounds."""

    def test_backlog_at_start(self, two_inputs) -> None:
        """Test the backlog at t = 0 holds the bursts plus the shifted inputs."""
        assert backlog_at(0.0, two_inputs[:1], 1e6) == pytest.approx(1000.0)

    def test_backlog_at_bursty_period(self, two_inputs) -> None:
        """Test the backlog at the end of the dominant bursty period."""
        assert backlog_at(1.1111e-3, two_inputs, 1e6) == pytest.approx(621.1, rel=1e-3)

    def test_backlog_drains(self, two_inputs) -> None:
        """Test the backlog is clamped at zero."""
        assert backlog_at(1.0, two_inputs, 1e6) == 0.0
        with pytest.raises(ValueError):
            backlog_at(-1.0, two_inputs, 1e6)

    def test_bursty_period(self, two_inputs) -> None:
        """Test dominant and non-dominant forms."""
        assert bursty_period(two_inputs[0], True) == pytest.approx(1.1111e-3, rel=1e-4)
        assert bursty_period(two_inputs[1], False) == pytest.approx(4.5556e-4, rel=1e-4)

    def test_bursty_period_clamped(self) -> None:
        """Test the non-dominant form never goes negative."""
        inp = MuxInput(TrafficEnvelope(10.0, 1e5), 1e6, 100.0, "x")
        assert bursty_period(inp, False) == 0.0
        assert bursty_period(MuxInput(TrafficEnvelope(0.0, 1e5), 1e6, 100.0, "z"), True) == 0.0

    def test_input_at_capacity(self) -> None:
        """Test rho >= C is rejected."""
        with pytest.raises(UnstableInput):
            MuxInput(TrafficEnvelope(1.0, 1e6), 1e6, 100.0, "x")

    def test_backlog_bounds(self, two_inputs) -> None:
        """Test both bursty periods seen from input 0."""
        assert mux_backlog_bound(0, 0, two_inputs, 1e6) == pytest.approx(621.11, rel=1e-4)
        assert mux_backlog_bound(0, 1, two_inputs, 1e6) == pytest.approx(1145.56, rel=1e-4)

    def test_delay_bound(self, two_inputs) -> None:
        """Test the delay bound takes the smallest backlog."""
        result = mux_delay_bound(0, two_inputs, 1e6)
        assert result.delay_bound == pytest.approx(6.2111e-4, rel=1e-4)
        assert result.backlog_bound == pytest.approx(621.11, rel=1e-4)
        assert result.argmin_k == "a"

    def test_single_input_matching_output(self) -> None:
        """Test one input with C = C_out never queues."""
        inp = [MuxInput(TrafficEnvelope(1000.0, 1e5), 1e6, 100.0, "a")]
        assert mux_delay_bound(0, inp, 1e6).delay_bound == 0.0

    def test_tie_goes_to_first(self) -> None:
        """Test equal backlogs pick the smallest index."""
        inputs = [
            MuxInput(TrafficEnvelope(100.0, 1e5), 1e6, 100.0, "first"),
            MuxInput(TrafficEnvelope(190.0, 1e5), 1e6, 100.0, "second"),
        ]
        assert mux_backlog_bound(0, 0, inputs, 1e8) == mux_backlog_bound(0, 1, inputs, 1e8) == 200.0
        result = mux_delay_bound(0, inputs, 1e8)
        assert result.delay_bound == pytest.approx(2e-6)
        assert result.argmin_k == "first"

    def test_fast_output_never_negative(self) -> None:
        """Test an output faster than every input keeps each bound at or above the others' bursts."""
        inputs = [
            MuxInput(TrafficEnvelope(100.0, 1e5), 1e6, 100.0, "first"),
            MuxInput(TrafficEnvelope(100.0, 1e5), 1e6, 100.0, "second"),
        ]
        assert mux_backlog_bound(0, 0, inputs, 1e8) == pytest.approx(110.0)
        assert mux_backlog_bound(0, 1, inputs, 1e8) == pytest.approx(200.0)

    def test_link_backlog(self, two_inputs) -> None:
        """Test the link-rate bound of both inputs stays under the bursty-period bounds."""
        assert link_backlog_bound(0, two_inputs, 1e6) == pytest.approx(611.11, rel=1e-4)
        assert link_backlog_bound(1, two_inputs, 1e6) == pytest.approx(700.0, rel=1e-9)
        for i in range(2):
            assert link_backlog_bound(i, two_inputs, 1e6) <= mux_delay_bound(i, two_inputs, 1e6).backlog_bound
        with pytest.raises(UnstableInput):
            link_backlog_bound(0, two_inputs, 2e5)

    def test_aggregate_rate(self, two_inputs) -> None:
        """Test the summed rate must stay below the output capacity."""
        with pytest.raises(UnstableInput, match="aggregate"):
            mux_delay_bound(0, two_inputs, 2e5)


class TestQueue:
    """Test the FIFO queue bound."""

    def test_slower_output(self) -> None:
        """Test C_in above C_out."""
        delay = queue_delay_bound(TrafficEnvelope(1000.0, 1e5), 1e6, 5e5)
        assert delay == pytest.approx(1.1111e-3, rel=1e-4)

    def test_no_burst(self) -> None:
        """Test sigma = 0 gives zero delay."""
        assert queue_delay_bound(TrafficEnvelope(0.0, 1e5), 1e6, 5e5) == 0.0

    def test_equal_capacities(self) -> None:
        """Test C_in = C_out gives zero delay."""
        assert queue_delay_bound(TrafficEnvelope(1000.0, 1e5), 1e6, 1e6) == 0.0

    def test_saturated(self) -> None:
        """Test rho at the slower capacity."""
        with pytest.raises(UnstableInput):
            queue_delay_bound(TrafficEnvelope(1.0, 5e5), 1e6, 5e5)


class TestEnvelopes:
    """Test burstiness propagation helpers."""

    def test_propagate(self) -> None:
        """Test sigma grows by rho times the delay."""
        out = propagate_envelope(TrafficEnvelope(72.0, 7200.0), 3.5e-3)
        assert (out.sigma, out.rho) == (pytest.approx(97.2), 7200.0)
        out = propagate_envelope(TrafficEnvelope(1526.0, 305200.0), 1e-3)
        assert (out.sigma, out.rho) == (pytest.approx(1831.2), 305200.0)

    def test_propagate_zero_delay(self) -> None:
        """Test a zero-delay element leaves the envelope unchanged."""
        env = TrafficEnvelope(72.0, 7200.0)
        assert propagate_envelope(env, 0.0) == env
        with pytest.raises(ValueError):
            propagate_envelope(env, -1.0)

    def test_ubd_from_burstiness(self) -> None:
        """Test the delay recovered from the burstiness growth."""
        assert ubd_from_burstiness(97.2, 72.0, 7200.0) == pytest.approx(3.5e-3)

    def test_aggregate(self) -> None:
        """Test aggregation sums both parameters."""
        env = aggregate([TrafficEnvelope(1.0, 2.0), TrafficEnvelope(3.0, 4.0)])
        assert env == TrafficEnvelope(4.0, 6.0)
        with pytest.raises(ValueError):
            aggregate([])


class TestBurstinessSystem:
    """Test assembly and solution of the burstiness equations."""

    def test_dimension(self, case_study_model, chain_model) -> None:
        """Test one unknown per (stream, crossed switch)."""
        assert assemble_system(case_study_model).dimension == 6
        assert assemble_system(chain_model).dimension == 4

    def test_idle_switch(self, single_switch_model) -> None:
        """Test one stream through a switch with equal capacities keeps its burst."""
        [(sid, hop, sigma)] = solve_burstiness(assemble_system(single_switch_model))
        assert (sid, hop) == ("1", 1)
        assert sigma == pytest.approx(72.0)
        assert end_to_end_delay(single_switch_model, "1") == pytest.approx(0.0, abs=1e-15)

    def test_solution_satisfies_rows(self, chain_model) -> None:
        """Test the solution is a fixed point of the assembled system."""
        system = assemble_system(chain_model)
        solution = solve_burstiness(system)
        values = [sigma for _, _, sigma in solution]
        at_solution = assemble_system(chain_model, values)
        residual = at_solution.matrix @ values - at_solution.rhs
        assert max(abs(r) for r in residual) <= 1e-6 * max(values)

    def test_hops_never_shrink(self, chain_model) -> None:
        """Test burstiness is non-decreasing along a route."""
        for result in analyze(chain_model).streams.values():
            assert list(result.sigmas) == sorted(result.sigmas)


class TestAnalyze:
    """Test the end-to-end algorithm."""

    def test_case_study(self, case_study_model) -> None:
        """Test the control streams' bound."""
        analysis = analyze(case_study_model)
        ubd1, ubd2 = analysis.ubd("1"), analysis.ubd("2")
        assert ubd1 == ubd2
        assert 2.5e-3 <= ubd1 <= 5e-3
        assert ubd1 == pytest.approx(CASE_STUDY_UBD, rel=1e-3)

    def test_breakdown(self, case_study_model) -> None:
        """Test the per-component split of stream 1."""
        (switch,) = analyze(case_study_model).streams["1"].switches
        mux, queue, demux, output = switch.components
        # one 1526-byte frame from every other port plus the control frame, at the backplane rate
        assert mux.delay_bound == pytest.approx(3124 / 5e6, rel=1e-9)
        assert mux.argmin_k == LINK_RATE
        assert demux.delay_bound == 0.0
        assert queue.delay_bound == pytest.approx(3124 * 2.5e6 / 3132400 / 1.25e6, rel=1e-9)
        # bursts toward the controller station after the shared-memory stage
        assert output.delay_bound == pytest.approx(3332.37216 * 3.75e6 / 4382400 / 1.25e6, rel=1e-6)

    def test_switch_sum_matches_ubd(self, case_study_model, chain_model) -> None:
        """Test the UBD equals the sum of the per-switch bounds."""
        for model in (case_study_model, chain_model):
            for result in analyze(model).streams.values():
                assert result.ubd == pytest.approx(result.switch_sum, rel=1e-9, abs=1e-15)

    def test_background_burst_monotone(self, case_study_model) -> None:
        """Test a larger competing burst never lowers the bound."""
        base = analyze(case_study_model).ubd("1")
        streams = [
            replace(s, envelope0=TrafficEnvelope(2 * s.envelope0.sigma, s.envelope0.rho))
            if s.id == "4"
            else s
            for s in case_study_model.streams
        ]
        assert analyze(case_study_model.with_streams(streams)).ubd("1") > base

    def test_background_growth_monotone_random(self) -> None:
        """Test doubling a competing burst and raising its rate 5 % never lowers any other bound."""
        rng = np.random.default_rng(2024)
        checked = 0
        for _ in range(40):
            model = random_model(rng)
            if len(model.streams) < 2:
                continue
            base = analyze(model)
            for bumped in model.streams:
                streams = [
                    replace(s, envelope0=TrafficEnvelope(2 * s.envelope0.sigma, 1.05 * s.envelope0.rho))
                    if s.id == bumped.id
                    else s
                    for s in model.streams
                ]
                try:
                    grown = analyze(model.with_streams(streams))
                except (NonConvergent, UnstableInput):
                    continue
                for s in model.streams:
                    if s.id != bumped.id:
                        assert grown.ubd(s.id) >= base.ubd(s.id) * (1 - 1e-9), (bumped.id, s.id)
                checked += 1
        assert checked > 0

    def test_switch_delay_bound(self, case_study_model) -> None:
        """Test the single-switch helper against the analysis."""
        state = {s.id: s.envelope0 for s in case_study_model.streams}
        delay = switch_delay_bound("1", state, case_study_model)
        assert delay == pytest.approx(analyze(case_study_model).ubd("1"), rel=1e-9)

    def test_switch_delay_bound_missing_state(self, case_study_model) -> None:
        """Test every crossing stream needs an envelope."""
        with pytest.raises(ModelError, match="no envelope"):
            switch_delay_bound("1", {"1": TrafficEnvelope(72.0, 7200.0)}, case_study_model)

    def test_empty_route(self) -> None:
        """Test two stations on one cable have zero delay."""
        model = NetworkModel(
            ("a", "b"),
            (),
            (Link("a", "b", 1e6), Link("b", "a", 1e6)),
            (Stream("1", "a", "b", TrafficEnvelope(100.0, 1e3), 100.0),),
        )
        assert end_to_end_delay(model, "1") == 0.0

    def test_no_streams(self, single_switch_model) -> None:
        """Test a model without streams analyses to nothing."""
        analysis = analyze(single_switch_model.with_streams([]))
        assert analysis.streams == {}
        assert analysis.method == "empty"

    def test_saturated_names_component(self, single_switch_model) -> None:
        """Test over-utilization reports the saturated element."""
        s = single_switch_model.stream("1")
        heavy = single_switch_model.with_streams(
            [replace(s, envelope0=TrafficEnvelope(72.0, 2e6))]
        )
        with pytest.raises(NonConvergent) as info:
            analyze(heavy)
        assert info.value.component == "a->s"

    def test_invalid_model(self, single_switch_model) -> None:
        """Test a structural problem is a model error."""
        s = single_switch_model.stream("1")
        bad = single_switch_model.with_streams([replace(s, route=("ghost",))])
        with pytest.raises(ModelError, match="unknown switch"):
            analyze(bad)


class TestCapacitySweep:
    """Test the capacity comparison."""

    def test_faster_links_lower_bound(self, case_study_model) -> None:
        """Test 5, 10 and 100 Mb/s in decreasing order of bound."""
        table = capacity_sweep(case_study_model)
        ubds = [table[c]["1"] for c in (6.25e5, 1.25e6, 1.25e7)]
        assert ubds[0] > ubds[1] > ubds[2] > 0
        assert ubds[1] == pytest.approx(CASE_STUDY_UBD, rel=1e-3)

    def test_saturated_capacity_is_infinite(self, case_study_model) -> None:
        """Test a capacity below the load maps to inf."""
        table = capacity_sweep(case_study_model, (1e5,))
        assert all(math.isinf(v) for v in table[1e5].values())


class TestExports:
    """Test CSV and JSON exports."""

    def test_delay_csv(self, case_study_model, tmp_path) -> None:
        """Test four component rows per stream plus one summary row each."""
        path = write_delay_csv(analyze(case_study_model), tmp_path / "delays.csv")
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == DELAY_CSV_HEADER
        assert len(rows) == 1 + 6 * 4 + 6
        summary = [r for r in rows if r[2] == "end-to-end"]
        assert float(summary[0][4]) == pytest.approx(CASE_STUDY_UBD, rel=1e-3)

    def test_delay_json(self, case_study_model, tmp_path) -> None:
        """Test the JSON summary carries extra keys."""
        path = write_delay_json(analyze(case_study_model), tmp_path / "d.json", note="x")
        payload = json.loads(path.read_text())
        assert payload["note"] == "x"
        assert set(payload["streams"]) == {"1", "2", "3", "4", "5", "6"}

    def test_capacity_sweep_csv(self, case_study_model, tmp_path) -> None:
        """Test one row per capacity and stream."""
        table = capacity_sweep(case_study_model, (1.25e6,))
        path = write_capacity_sweep_csv(table, tmp_path / "sweep.csv")
        assert len(path.read_text().splitlines()) == 1 + 6
