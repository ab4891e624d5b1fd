import numpy as np
import pytest

from clippair.types import (
    ClipEmbeddings,
    GroundTruthEntry,
    LossResult,
    LossWeights,
    MarginParams,
    PredictionWindow,
    Segment,
    validate_ground_truth,
)


def entry(segments, duration=150.0, qid=1):
    return GroundTruthEntry(
        query_id=qid, video_id="v", duration=duration,
        segments=tuple(Segment(s, e) for s, e in segments),
    )


class TestSegment:
    def test_valid(self):
        seg = Segment(10.0, 20.0)
        assert seg.length == 10.0

    @pytest.mark.parametrize("start,end", [(20, 10), (10, 10), (-1, 5)])
    def test_rejects_bad_bounds(self, start, end):
        with pytest.raises(ValueError):
            Segment(start, end)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Segment(0.0, float("inf"))

    def test_normalized(self):
        assert Segment(30.0, 75.0).normalized(150.0) == Segment(0.2, 0.5)


class TestValidateGroundTruth:
    def test_already_valid_unchanged(self):
        e = entry([(10, 20)])
        assert validate_ground_truth(e) is e

    def test_reorders_by_start(self):
        e = validate_ground_truth(entry([(30, 40), (10, 20)]))
        assert [s.as_tuple() for s in e.segments] == [(10, 20), (30, 40)]

    def test_segment_exceeding_duration(self):
        with pytest.raises(ValueError, match="exceeds duration"):
            validate_ground_truth(entry([(140, 160)]))

    def test_empty_segments(self):
        e = GroundTruthEntry(query_id=1, video_id="v", duration=150, segments=())
        with pytest.raises(ValueError, match="empty"):
            validate_ground_truth(e)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            validate_ground_truth(entry([(10, 20), (10, 20)]))

    def test_idempotent(self):
        once = validate_ground_truth(entry([(30, 40), (10, 20)]))
        assert validate_ground_truth(once) == once


class TestClipEmbeddings:
    def test_shape_properties(self):
        emb = ClipEmbeddings(np.ones((4, 3)))
        assert emb.num_clips == 4 and emb.dim == 3

    def test_rejects_non_finite(self):
        data = np.ones((2, 2))
        data[1, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ClipEmbeddings(data)

    def test_immutable(self):
        emb = ClipEmbeddings(np.ones((2, 2)))
        with pytest.raises(ValueError):
            emb.data[0, 0] = 5.0


class TestParams:
    def test_margin_defaults(self):
        params = MarginParams()
        assert (params.threshold, params.base, params.length_scaling) == (0.3, 0.1, 0.1)

    def test_margin_base_above_threshold(self):
        with pytest.raises(ValueError):
            MarginParams(threshold=0.1, base=0.2)

    def test_weights_defaults(self):
        w = LossWeights()
        assert (w.lambda_basic, w.lambda_clip, w.lambda_boun, w.lambda_b_aux) == (1, 3, 3, 2)
        assert w.k == 20 and w.tau == 0.07

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            LossWeights(tau=0.0)
        with pytest.raises(ValueError):
            LossWeights(k=0)
        with pytest.raises(ValueError):
            LossWeights(lambda_clip=-1.0)


class TestLossResult:
    def test_rejects_negative_value(self):
        with pytest.raises(ValueError):
            LossResult(-0.5, np.zeros(2))

    def test_rejects_non_finite_grad(self):
        with pytest.raises(ValueError):
            LossResult(0.5, np.array([np.inf]))

    def test_prediction_window_score_finite(self):
        with pytest.raises(ValueError):
            PredictionWindow(Segment(0, 1), float("nan"))
