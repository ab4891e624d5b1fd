import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clippair.inference import ClipOutputs, assemble_windows, clip_centers, nms_1d
from clippair.metrics import iou
from clippair.types import PredictionWindow, Segment


def outputs(saliency, start, end):
    return ClipOutputs(np.asarray(saliency, float), np.asarray(start, float),
                       np.asarray(end, float))


def simulate_nms(windows, threshold, max_keep):
    """Independent suppression simulation: mark-and-sweep over a sorted list."""
    order = sorted(range(len(windows)),
                   key=lambda i: (-windows[i].score, windows[i].segment.start, i))
    alive = [True] * len(windows)
    kept = []
    for pos, i in enumerate(order):
        if not alive[i]:
            continue
        kept.append(windows[i])
        if len(kept) == max_keep:
            break
        for j in order[pos + 1:]:
            if alive[j] and iou(windows[i].segment, windows[j].segment) >= threshold:
                alive[j] = False
    return kept


class TestAssembleWindows:
    def test_center_anchored_offsets(self):
        sal = np.zeros(10)
        start = np.zeros(10)
        end = np.zeros(10)
        sal[4], start[4], end[4] = 0.8, -15.0, 25.0
        wins, dropped = assemble_windows(outputs(sal, start, end), duration=100.0)
        # clip 4 center = 45; all other clips are zero-length and dropped
        assert dropped == 9
        assert wins == [PredictionWindow(Segment(30.0, 70.0), 0.8)]

    def test_zero_offsets_dropped(self):
        wins, dropped = assemble_windows(outputs([1.0], [0.0], [0.0]), 100.0)
        assert wins == [] and dropped == 1

    def test_clamped_to_video(self):
        wins, _ = assemble_windows(outputs([0.5], [-200.0], [200.0]), 100.0)
        assert wins[0].segment == Segment(0.0, 100.0)

    def test_all_windows_inside_video(self):
        rng = np.random.default_rng(0)
        sal = rng.uniform(size=16)
        start = rng.uniform(-80, 20, 16)
        end = rng.uniform(-20, 80, 16)
        wins, _ = assemble_windows(outputs(sal, start, end), 60.0)
        for w in wins:
            assert 0.0 <= w.segment.start < w.segment.end <= 60.0

    def test_centers(self):
        np.testing.assert_allclose(clip_centers(4, 100.0), [12.5, 37.5, 62.5, 87.5])

    def test_bad_duration(self):
        with pytest.raises(ValueError):
            assemble_windows(outputs([1.0], [0.0], [1.0]), 0.0)

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            ClipOutputs(np.zeros(3), np.zeros(2), np.zeros(3))


class TestNms:
    def test_duplicate_suppressed(self):
        wins = [PredictionWindow(Segment(10, 20), 0.9),
                PredictionWindow(Segment(10, 20), 0.8)]
        kept = nms_1d(wins, 0.5, 10)
        assert kept == [wins[0]]

    def test_disjoint_all_kept(self):
        wins = [PredictionWindow(Segment(i * 10, i * 10 + 5), 1.0 - 0.1 * i)
                for i in range(4)]
        assert nms_1d(wins, 0.5, 10) == wins

    def test_max_keep(self):
        wins = [PredictionWindow(Segment(i * 10, i * 10 + 5), 1.0 - 0.1 * i)
                for i in range(6)]
        assert len(nms_1d(wins, 0.5, 3)) == 3

    def test_empty(self):
        assert nms_1d([], 0.5, 10) == []

    def test_matches_simulation_on_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            wins = []
            for _ in range(10):
                a, b = np.sort(rng.uniform(0, 100, 2))
                wins.append(PredictionWindow(Segment(a, b + 0.5), float(rng.uniform())))
            threshold = float(rng.uniform(0.2, 0.9))
            assert nms_1d(wins, threshold, 10) == simulate_nms(wins, threshold, 10)

    @given(st.integers(0, 10_000), st.floats(0.2, 0.95))
    @settings(max_examples=50)
    def test_antichain_and_sorted(self, seed, threshold):
        rng = np.random.default_rng(seed)
        wins = []
        for _ in range(8):
            a, b = np.sort(rng.uniform(0, 50, 2))
            wins.append(PredictionWindow(Segment(a, b + 0.25), float(rng.uniform())))
        kept = nms_1d(wins, threshold, 5)
        assert len(kept) <= 5
        scores = [w.score for w in kept]
        assert scores == sorted(scores, reverse=True)
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                assert iou(kept[i].segment, kept[j].segment) < threshold
