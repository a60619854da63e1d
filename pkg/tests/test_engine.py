import math

import numpy as np
import pytest

from romkit.config import EngineConfig
from romkit.engine import (
    AngleSeries,
    SegmentVector,
    angle_series,
    evaluate_movement,
    extract_rom,
    resolve_period,
    segment_vectors,
)
from romkit.errors import (
    DegenerateSegmentError,
    UnusableRecordingError,
)
from romkit.landmarks import LandmarkFrame, Recording, SegmentSpec, registry_lookup

from conftest import make_rotation_recording
from oracles import local_maxima_oracle, rotation_matrix


def _recording_from_points(points, source="webcam-pose"):
    frames = tuple(
        LandmarkFrame(t=i / 15, positions={"LHIP": tuple(p1), "LSHO": tuple(p2)},
                      visibility={})
        for i, (p1, p2) in enumerate(points)
    )
    return Recording(frames=frames, source=source, nominal_rate=15,
                     movement="Back Flexion and Extension", subject="s",
                     repetition=1)


class TestSegmentVectors:
    SPEC = SegmentSpec("LHIP", "LSHO")

    def test_already_unit(self):
        rec = _recording_from_points([((1, 0, 0), (0, 0, 0))])
        (sv,) = segment_vectors(rec, self.SPEC)
        assert np.allclose(sv.v, [1, 0, 0])

    def test_three_four_five(self):
        rec = _recording_from_points([((3, 4, 0), (0, 0, 0))])
        (sv,) = segment_vectors(rec, self.SPEC)
        assert np.allclose(sv.v, [0.6, 0.8, 0.0])

    def test_degenerate_segment(self):
        rec = _recording_from_points([((0.5, 0.5, 0.5), (0.5, 0.5, 0.5))])
        with pytest.raises(DegenerateSegmentError):
            segment_vectors(rec, self.SPEC)

    def test_unit_norm_invariant(self, rng):
        pts = [(rng.normal(size=3), rng.normal(size=3)) for _ in range(50)]
        rec = _recording_from_points(pts)
        for sv in segment_vectors(rec, self.SPEC):
            assert abs(np.linalg.norm(sv.v) - 1.0) < 1e-9


class TestAngleSeries:
    def _vectors(self, dirs):
        return [SegmentVector(t=i / 15, v=np.asarray(d, dtype=float))
                for i, d in enumerate(dirs)]

    def test_identity_is_zero(self):
        series = angle_series(self._vectors([(1, 0, 0), (1, 0, 0)]))
        assert series.alpha_deg[0] == 0.0
        assert series.alpha_deg[1] == 0.0

    def test_orthogonal_is_ninety(self):
        series = angle_series(self._vectors([(1, 0, 0), (0, 1, 0)]))
        assert series.alpha_deg[1] == pytest.approx(90.0, abs=1e-12)

    def test_known_rotation(self):
        # oracle: rotate the reference explicitly by 137 degrees about z
        v0 = np.array([1.0, 0.0, 0.0])
        vt = rotation_matrix(np.array([0, 0, 1.0]), math.radians(137.0)) @ v0
        series = angle_series(self._vectors([v0, vt]))
        assert series.alpha_deg[1] == pytest.approx(137.0, abs=1e-9)

    def test_first_sample_exactly_zero(self, rng):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        series = angle_series(self._vectors([d, d, -d]))
        assert series.alpha_deg[0] == 0.0

    def test_clamping_near_poles(self):
        v0 = np.array([1.0, 0.0, 0.0])
        almost_same = np.array([1.0 - 1e-13, 0.0, 0.0])
        almost_opposite = np.array([-1.0 + 1e-13, 0.0, 0.0])
        series = angle_series(self._vectors([v0, almost_same, almost_opposite]))
        assert series.alpha_deg[1] == 0.0
        assert series.alpha_deg[2] == 180.0

    def test_range_invariant(self, rng):
        dirs = rng.normal(size=(100, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        series = angle_series(self._vectors(dirs))
        assert np.all(series.alpha_deg >= 0.0)
        assert np.all(series.alpha_deg <= 180.0)

    def test_baseline_window_blends_reference(self):
        vecs = self._vectors([(1, 0, 0), (0, 1, 0), (1, 0, 0)])
        series = angle_series(vecs, baseline_window=2)
        # reference = normalized mean of first two -> 45 degrees from both
        assert series.alpha_deg[0] == pytest.approx(45.0, abs=1e-9)
        assert series.alpha_deg[1] == pytest.approx(45.0, abs=1e-9)

    def test_empty_is_unusable(self):
        with pytest.raises(UnusableRecordingError):
            angle_series([])


class TestExtractRom:
    def _series(self, alphas):
        alphas = np.asarray(alphas, dtype=float)
        return AngleSeries(t=np.arange(len(alphas)) / 15.0, alpha_deg=alphas,
                           reference=np.array([1.0, 0, 0]))

    def test_triangle_single_peak(self):
        series = self._series([0, 15, 30, 45, 30, 15, 0])
        res = extract_rom(series, [])
        assert res.rom_deg == 45.0
        assert res.peak_t == pytest.approx(3 / 15)
        assert len(res.candidate_peaks) == 1
        assert not res.needs_review

    def test_near_tie_flags_review(self):
        series = self._series([0, 60, 100, 60, 98, 50, 0])
        res = extract_rom(series, [])
        assert res.rom_deg == 100.0
        got = {a for _, a in res.candidate_peaks}
        expected = {series.alpha_deg[i] for i
                    in local_maxima_oracle(series.alpha_deg.tolist())}
        assert got == expected
        assert res.needs_review

    def test_distant_second_peak_is_no_tie(self):
        series = self._series([0, 60, 100, 60, 80, 50, 0])
        res = extract_rom(series, [])
        assert res.rom_deg == 100.0
        assert len(res.candidate_peaks) == 2
        assert not res.needs_review

    def test_plateau_collapses_to_one_candidate(self):
        series = self._series([0, 50, 50, 50, 0])
        res = extract_rom(series, [])
        assert len(res.candidate_peaks) == 1
        assert res.rom_deg == 50.0

    def test_anomalies_removed_before_max(self):
        series = self._series([0, 10, 20, 95, 30, 40, 30, 10])
        res = extract_rom(series, [3])
        assert res.rom_deg == 40.0
        assert res.anomalies == ((3 / 15, 95.0),)

    def test_all_removed_is_unusable(self):
        series = self._series([0, 1, 2])
        with pytest.raises(UnusableRecordingError):
            extract_rom(series, [0, 1, 2])

    def test_monotone_ramp_keeps_endpoint_peak(self):
        series = self._series([0, 10, 20, 30, 40])
        res = extract_rom(series, [])
        assert res.rom_deg == 40.0
        assert res.candidate_peaks == ((4 / 15, 40.0),)


class TestEvaluateMovement:
    MOVEMENT = registry_lookup("Back Flexion and Extension")

    def test_rotation_fixture_exact(self):
        rec = make_rotation_recording(137.0)
        ev = evaluate_movement(rec, self.MOVEMENT)
        assert ev.result.rom_deg == pytest.approx(137.0, abs=1e-6)
        assert not ev.result.needs_review
        assert ev.anomaly_indices == ()

    def test_low_visibility_frames_do_not_move_the_peak(self):
        rec = make_rotation_recording(137.0)
        vis = np.ones(len(rec))
        # drop ~20% of frames, away from the reference and the peak
        drop = [3, 8, 13, 18, 23, 36, 41, 46, 51, 56, 58, 59]
        vis[drop] = 0.3
        noisy = make_rotation_recording(137.0, visibility=vis)
        ev_clean = evaluate_movement(rec, self.MOVEMENT)
        ev_noisy = evaluate_movement(noisy, self.MOVEMENT)
        assert ev_noisy.visibility.dropped_count == len(drop)
        assert ev_noisy.result.rom_deg == ev_clean.result.rom_deg

    def test_empty_recording_is_unusable(self):
        rec = Recording(frames=(), source="webcam-pose", nominal_rate=15,
                        movement="Back Flexion and Extension", subject="s",
                        repetition=1)
        with pytest.raises(UnusableRecordingError):
            evaluate_movement(rec, self.MOVEMENT)

    def test_errors_carry_context(self):
        rec = Recording(frames=(), source="webcam-pose", nominal_rate=15,
                        movement="Back Flexion and Extension", subject="S07",
                        repetition=2)
        with pytest.raises(UnusableRecordingError) as exc:
            evaluate_movement(rec, self.MOVEMENT)
        assert "S07" in str(exc.value)
        assert "rep=2" in str(exc.value)

    def test_short_series_skips_anomaly_removal(self):
        rec = make_rotation_recording(45.0, n_frames=17)
        with pytest.warns(UserWarning, match="anomaly removal skipped"):
            ev = evaluate_movement(rec, self.MOVEMENT)
        assert ev.decomposition is None
        assert ev.result.rom_deg == pytest.approx(45.0, abs=1e-6)
        assert ev.messages

    def test_period_flag_overrides_auto(self):
        rec = make_rotation_recording(45.0)
        ev = evaluate_movement(rec, self.MOVEMENT,
                               EngineConfig(decomposition_period=5))
        assert ev.period == 5

    def test_resolve_period_auto_tracks_rate(self):
        rec = make_rotation_recording(45.0, rate=30.0)
        assert resolve_period("auto", rec) == 30
        assert resolve_period("auto", make_rotation_recording(45.0)) == 15
        assert resolve_period(7, rec) == 7

    def test_running_max_bound(self):
        # cleaned rom never exceeds the raw maximum
        rec = make_rotation_recording(90.0, spike_deg={20: 50.0})
        ev = evaluate_movement(rec, self.MOVEMENT)
        raw_max = ev.series.alpha_deg.max()
        assert ev.result.rom_deg <= raw_max


class TestInvarianceProperties:
    MOVEMENT = registry_lookup("Back Flexion and Extension")

    def _alphas(self, recording):
        ev = evaluate_movement(recording, self.MOVEMENT)
        return ev.series.alpha_deg

    def test_rigid_motion_and_scale_invariance(self, rng):
        base = make_rotation_recording(120.0)
        ref = self._alphas(base)
        for _ in range(10):
            rot = rotation_matrix(rng.normal(size=3), rng.uniform(0, 2 * math.pi))
            shift = rng.normal(size=3) * 5.0
            scale = rng.uniform(0.2, 8.0)
            frames = []
            for f in base.frames:
                pos = {
                    name: tuple(scale * (rot @ np.asarray(p)) + shift)
                    for name, p in f.positions.items()
                }
                frames.append(LandmarkFrame(t=f.t, positions=pos,
                                            visibility=dict(f.visibility)))
            moved = Recording(frames=tuple(frames), source=base.source,
                              nominal_rate=base.nominal_rate,
                              movement=base.movement, subject=base.subject,
                              repetition=base.repetition)
            assert np.max(np.abs(self._alphas(moved) - ref)) < 1e-9
