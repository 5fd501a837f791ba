import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipative_modes.domains import (
    MemoryRegistry,
    StimulusSpectrum,
    fig1_curves,
    fig2_curves,
    lifetime_curve,
    parse_event_script,
)
from dissipative_modes.errors import ClockError, DomainError, ParameterError, UnknownRecordError
from dissipative_modes.formulas import Mode, ModelParams, domain_size, lifetime_lambda, recording_deadline

PARAMS = ModelParams(L=1.0, c=1.0)
K0 = PARAMS.k0


def test_spectrum_validation():
    with pytest.raises(ParameterError):
        StimulusSpectrum(())
    with pytest.raises(ParameterError):
        StimulusSpectrum((Mode(1.0, 0), Mode(2.0, 1)))
    with pytest.raises(ParameterError):
        StimulusSpectrum.of(0, [1.0, 2.0], [1.0])
    with pytest.raises(ParameterError):
        StimulusSpectrum.of(0, [1.0], [0.0])


class TestRecordEvent:
    def test_filters_below_threshold(self):
        reg = MemoryRegistry(PARAMS)
        rec = reg.record_event(StimulusSpectrum.of(2, [K0 / 2, 2 * K0]), 0.0)
        assert [m.k for m in rec.modes] == [2 * K0]
        assert rec.death_times == (recording_deadline(Mode(2 * K0, 2), PARAMS).deadline,)

    def test_empty_record_is_flagged(self):
        reg = MemoryRegistry(PARAMS)
        rec = reg.record_event(StimulusSpectrum.of(0, [0.1, 0.2]), 0.0)
        assert rec.empty and rec.modes == () and rec.max_death_time is None
        assert len(reg.records) == 1

    def test_later_recording_keeps_no_more_modes(self):
        ks = list(np.geomspace(0.3, 20, 25))
        early, late = MemoryRegistry(PARAMS), MemoryRegistry(PARAMS)
        a = early.record_event(StimulusSpectrum.of(1, ks), 0.0)
        b = late.record_event(StimulusSpectrum.of(1, ks), 2.5)
        assert set(b.modes) <= set(a.modes)
        assert len(b.modes) < len(a.modes)

    def test_death_time_counts_from_recording(self):
        reg = MemoryRegistry(PARAMS)
        rec = reg.record_event(StimulusSpectrum.of(0, [5.0]), 0.3)
        T = recording_deadline(Mode(5.0, 0), PARAMS).deadline
        assert rec.death_times[0] == pytest.approx(0.3 + T)

    def test_clock(self):
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, [5.0]), 1.0)
        assert reg.clock == 1.0
        reg.record_event(StimulusSpectrum.of(0, [5.0]), 1.0)
        with pytest.raises(ClockError):
            reg.record_event(StimulusSpectrum.of(0, [5.0]), 0.5)
        assert len(reg.records) == 2

    def test_records_are_immutable_snapshots(self):
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, [5.0]), 0.0)
        snapshot = reg.records
        reg.record_event(StimulusSpectrum.of(0, [6.0]), 1.0)
        assert len(snapshot) == 1
        with pytest.raises(Exception):
            snapshot[0].t_recorded = 3.0

    def test_concurrent_writers_get_distinct_ids(self):
        reg = MemoryRegistry(PARAMS)

        def work():
            for _ in range(50):
                reg.record_event(StimulusSpectrum.of(0, [5.0]), 0.0)

        threads = [threading.Thread(target=work) for _ in range(4)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert sorted(r.id for r in reg.records) == list(range(200))

    @settings(max_examples=50)
    @given(ks=st.lists(st.floats(0.05, 50), min_size=1, max_size=12),
           n=st.integers(0, 6), t1=st.floats(0, 5), dt=st.floats(0, 5))
    def test_threshold_monotone_in_time(self, ks, n, t1, dt):
        a = MemoryRegistry(PARAMS).record_event(StimulusSpectrum.of(n, ks), t1)
        b = MemoryRegistry(PARAMS).record_event(StimulusSpectrum.of(n, ks), t1 + dt)
        assert set(b.modes) <= set(a.modes)


class TestAliveModes:
    def setup_method(self):
        self.reg = MemoryRegistry(PARAMS)
        self.rec = self.reg.record_event(StimulusSpectrum.of(1, [0.8, 1.5, 3.0, 9.0]), 0.0)

    def test_full_set_at_recording(self):
        assert self.reg.alive_modes(0, 0.0) == frozenset(self.rec.modes)

    def test_empty_after_last_death(self):
        assert self.reg.alive_modes(0, max(self.rec.death_times) + 1e-9) == frozenset()

    def test_larger_k_dies_last(self):
        order = sorted(zip(self.rec.death_times, [m.k for m in self.rec.modes]))
        assert [k for _, k in order] == sorted(m.k for m in self.rec.modes)
        survivors = [self.reg.alive_modes(0, t) for t in sorted(self.rec.death_times)]
        for alive in survivors:
            if alive:
                assert min(m.k for m in alive) > max(
                    m.k for m in set(self.rec.modes) - alive)

    def test_monotone_decay(self):
        times = np.linspace(0, max(self.rec.death_times) * 1.1, 60)
        sets = [self.reg.alive_modes(0, t) for t in times]
        for earlier, later in zip(sets, sets[1:]):
            assert later <= earlier

    def test_errors(self):
        with pytest.raises(UnknownRecordError):
            self.reg.alive_modes(7, 1.0)
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, [5.0]), 2.0)
        with pytest.raises(DomainError):
            reg.alive_modes(0, 1.0)


class TestPersistenceReport:
    def test_empty_registry(self):
        report = MemoryRegistry(PARAMS).persistence_report(0.0)
        assert report["records"] == [] and report["overlaps"] == []

    def test_all_alive_at_start(self):
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(1, [0.8, 2.0, 5.0]), 0.0)
        row = reg.persistence_report(0.0)["records"][0]
        assert row["fraction_alive"] == 1.0
        assert row["domain_size"] == pytest.approx(domain_size(1, 0.0, PARAMS))

    def test_high_k_spectrum_ranks_first_and_is_more_localised(self):
        reg = MemoryRegistry(PARAMS)
        low = reg.record_event(StimulusSpectrum.of(1, [0.6, 0.8, 1.2]), 0.0)
        high = reg.record_event(StimulusSpectrum.of(1, [4.0, 8.0, 16.0]), 0.0)
        rows = reg.persistence_report(1.0)["records"]
        assert [r["id"] for r in rows] == [high.id, low.id]
        assert rows[0]["mean_wavelength"] < rows[1]["mean_wavelength"]

    def test_weights_break_ties_and_are_scale_invariant(self):
        ks = [1.0, 2.0, 8.0]
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, ks, [10.0, 1.0, 1.0]), 0.0)
        reg.record_event(StimulusSpectrum.of(0, ks, [1.0, 1.0, 10.0]), 0.0)
        rows = reg.persistence_report(0.5)["records"]
        assert [r["id"] for r in rows] == [1, 0]

        scaled = MemoryRegistry(PARAMS)
        scaled.record_event(StimulusSpectrum.of(0, ks, [1e3, 1e2, 1e2]), 0.0)
        scaled.record_event(StimulusSpectrum.of(0, ks, [0.1, 0.1, 1.0]), 0.0)
        assert [r["id"] for r in scaled.persistence_report(0.5)["records"]] == [1, 0]

    def test_overlaps_listed(self):
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, [2.0, 3.0]), 0.0)
        reg.record_event(StimulusSpectrum.of(0, [3.0, 4.0]), 0.1)
        overlaps = reg.persistence_report(0.2)["overlaps"]
        assert overlaps == [{"records": [0, 1], "shared_k": [3.0]}]

    def test_future_records_hidden(self):
        reg = MemoryRegistry(PARAMS)
        reg.record_event(StimulusSpectrum.of(0, [2.0]), 0.0)
        reg.record_event(StimulusSpectrum.of(0, [3.0]), 5.0)
        assert [r["id"] for r in reg.persistence_report(1.0)["records"]] == [0]


def test_round_trip_through_dict():
    reg = MemoryRegistry(ModelParams(L=0.5, c=2.0))
    reg.record_event(StimulusSpectrum.of(0, [0.2, 1.0], [1.0, 2.0]), 0.0)
    reg.record_event(StimulusSpectrum.of(3, [0.1, 0.5]), 1.5)
    data = json.loads(json.dumps(reg.to_dict()))
    again = MemoryRegistry.from_dict(data)
    assert again.to_dict() == reg.to_dict()
    assert [r.modes for r in again.records] == [r.modes for r in reg.records]


class TestEventScript:
    def test_parse(self):
        events = parse_event_script("# demo\n0 1 1.0,2.0\n\n0.5 2 3.0,4.0 1,2  # weighted\n")
        assert [e.t for e in events] == [0.0, 0.5]
        assert events[1].spectrum.weights == (1.0, 2.0)
        assert events[1].spectrum.n == 2

    @pytest.mark.parametrize("text", ["0 1", "a 1 2.0", "0 -1 2.0", "0 1 2.0 1,2", "0 1.5 2.0"])
    def test_bad_lines(self, text):
        with pytest.raises(ParameterError):
            parse_event_script(text)


class TestCurves:
    def test_every_curve_starts_at_origin(self):
        fam = fig1_curves([0.8, 2.0, 5.0], 1, PARAMS, np.linspace(0.5, 10, 40))
        for curve in fam.curves:
            assert curve.t[0] == 0.0 and curve.lam[0] == 0.0

    def test_larger_k_larger_deadline(self):
        fam = fig1_curves([0.8, 2.0, 5.0, 11.0], 1, PARAMS, np.linspace(0, 20, 100))
        deadlines = [c.deadline for c in fam.curves]
        assert deadlines == sorted(deadlines) and len(set(deadlines)) == 4

    def test_non_recordable_skipped(self):
        fam = fig1_curves([0.3, 2.0], 0, PARAMS, np.linspace(0, 2, 10))
        assert len(fam.curves) == 1
        assert fam.skipped == ({"k": 0.3, "n": 0, "reason": "not recordable"},)

    def test_singleton_reduces_to_lifetime(self):
        grid = np.linspace(0, 3, 31)
        fam = fig1_curves([2.0], 2, PARAMS, grid)
        curve = fam.curves[0]
        np.testing.assert_array_equal(curve.lam, lifetime_lambda(curve.t, Mode(2.0, 2), PARAMS))
        fam2 = fig2_curves([2], 2.0, PARAMS, grid)
        np.testing.assert_array_equal(fam2.curves[0].lam, curve.lam)

    def test_clipping(self):
        mode = Mode(2.0, 0)
        T = recording_deadline(mode, PARAMS).deadline
        curve = lifetime_curve(mode, PARAMS, np.linspace(0, T, 2001), lambda_max=5.0)
        assert curve.clipped
        assert curve.lam[-1] == 5.0
        assert np.all(curve.lam <= 5.0)
        assert np.all(np.diff(curve.lam) > 0)

    def test_fig2_curves_never_cross(self):
        grid = np.linspace(0, 40, 4001)
        fam = fig2_curves([0, 1, 2, 3, 4], 2.0, PARAMS, grid)
        for lo, hi in zip(fam.curves, fam.curves[1:]):
            shared = np.intersect1d(lo.t, hi.t)
            shared = shared[shared > 0]
            lam_lo = lifetime_lambda(shared, Mode(2.0, lo.n), PARAMS)
            lam_hi = lifetime_lambda(shared, Mode(2.0, hi.n), PARAMS)
            assert np.all(lam_lo > lam_hi)

    def test_fig2_deadlines_affine(self):
        fam = fig2_curves(range(8), 2.0, PARAMS, np.linspace(0, 5, 10))
        diffs = np.diff([c.deadline for c in fam.curves])
        np.testing.assert_allclose(diffs, diffs[0], rtol=1e-13)
        assert diffs[0] > 0
