import numpy as np
import pytest

from clippair.losses import similarity_matrix
from clippair.pairs import build_pair_sets
from clippair.synth import (
    SyntheticDatasetSpec,
    foreground_clips,
    generate_dataset,
)


def small_spec(**kw):
    defaults = dict(num_queries=6, clips_per_video=24, seed=123)
    defaults.update(kw)
    return SyntheticDatasetSpec(**defaults)


class TestSpecValidation:
    def test_defaults(self):
        spec = SyntheticDatasetSpec()
        assert spec.num_queries == 64 and spec.clips_per_video == 32
        assert spec.noise_sigma == 0.1 and spec.seed == 0
        # mean segments per query = 2.4
        probs = spec.segments_per_query
        assert sum(p * n for p, n in zip(probs, (1, 2, 3))) == pytest.approx(2.4)

    def test_bad_probs(self):
        with pytest.raises(ValueError):
            SyntheticDatasetSpec(segments_per_query=(0.5, 0.5, 0.5))

    def test_odd_raw_dim(self):
        with pytest.raises(ValueError):
            SyntheticDatasetSpec(raw_dim=15)


class TestGenerate:
    def test_deterministic_bitwise(self):
        a = generate_dataset(small_spec())
        b = generate_dataset(small_spec())
        assert a.entries == b.entries
        for fa, fb in zip(a.features, b.features):
            assert np.array_equal(fa, fb)
        assert np.array_equal(a.readout_start, b.readout_start)

    def test_seed_changes_data(self):
        a = generate_dataset(small_spec(seed=1))
        b = generate_dataset(small_spec(seed=2))
        assert not np.array_equal(a.features[0], b.features[0])

    def test_shapes_and_validity(self):
        ds = generate_dataset(small_spec())
        assert len(ds.features) == len(ds.entries) == 6
        for feats, entry in zip(ds.features, ds.entries):
            assert feats.shape == (24, 16)
            assert np.all(np.isfinite(feats))
            assert entry.duration == 150.0
            for seg in entry.segments:
                assert 0 <= seg.start < seg.end <= entry.duration

    def test_every_segment_has_clips_and_pairs(self):
        ds = generate_dataset(small_spec(num_queries=12))
        for feats, entry in zip(ds.features, ds.entries):
            total = feats.shape[0]
            fg = foreground_clips(entry, total)
            assert len(fg) >= 3
            normalized = [s.normalized(entry.duration) for s in entry.segments]
            pairs = build_pair_sets(total, normalized)
            assert pairs.positives and pairs.negatives

    def test_memberships_do_not_touch(self):
        ds = generate_dataset(small_spec(num_queries=12))
        for feats, entry in zip(ds.features, ds.entries):
            per_segment = [
                set(foreground_clips(
                    entry.__class__(**{**entry.__dict__, "segments": (seg,)}),
                    feats.shape[0],
                ))
                for seg in entry.segments
            ]
            for a in range(len(per_segment)):
                for b in range(a + 1, len(per_segment)):
                    gap = min(abs(i - j) for i in per_segment[a] for j in per_segment[b])
                    assert gap >= 2  # at least one background clip between segments

    def test_noise_free_same_segment_clips_identical(self):
        ds = generate_dataset(small_spec(noise_sigma=0.0))
        for feats, entry in zip(ds.features, ds.entries):
            sims = similarity_matrix(feats)
            normalized = [s.normalized(entry.duration) for s in entry.segments]
            pairs = build_pair_sets(feats.shape[0], normalized)
            for i, j in pairs.positives:
                # same-segment clips share concept and differ only in nuisance
                if any(
                    i in fg and j in fg
                    for fg in [
                        set(foreground_clips(
                            entry.__class__(**{**entry.__dict__, "segments": (seg,)}),
                            feats.shape[0]))
                        for seg in entry.segments
                    ]
                ):
                    assert sims[i, j] <= 1.0

    def test_planted_fraction_reasonable(self):
        ds = generate_dataset(SyntheticDatasetSpec(num_queries=32, seed=5))
        fractions = [
            len(foreground_clips(e, f.shape[0])) / f.shape[0]
            for f, e in zip(ds.features, ds.entries)
        ]
        # ~2.4 segments of 4-6 clips each over 32 clips
        assert 0.2 < float(np.mean(fractions)) < 0.6

    def test_readout_vectors_unit_norm(self):
        ds = generate_dataset(small_spec())
        assert np.linalg.norm(ds.readout_start) == pytest.approx(1.0)
        assert np.linalg.norm(ds.readout_end) == pytest.approx(1.0)
