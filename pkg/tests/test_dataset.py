from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest

from tekws.dataset import (LabeledSample, TrajectoryTemplate, balance_dataset,
                           balanced_indices, derive_seed, mirrored_sweep_templates,
                           read_manifest, synth_keyword_dataset, write_manifest)
from tekws.raster import SpikeRaster, spike_counts


def test_derive_seed_stable_and_label_sensitive():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert derive_seed(1, "a") != derive_seed(2, "a")


def test_synth_deterministic():
    a = synth_keyword_dataset(2, 5, 16, seed=11)
    b = synth_keyword_dataset(2, 5, 16, seed=11)
    assert len(a) == len(b) == 10
    for sa, sb in zip(a, b):
        assert sa.label == sb.label and sa.speaker_id == sb.speaker_id
        np.testing.assert_array_equal(sa.raster.dense(), sb.raster.dense())


def test_synth_counts_per_class():
    samples = synth_keyword_dataset(2, 50, 16, seed=3)
    assert len(samples) == 100
    assert sum(1 for s in samples if s.label == 0) == 50
    assert sum(1 for s in samples if s.label == 1) == 50


def test_synth_zero_jitter_constant_template_identical():
    template = TrajectoryTemplate(tracks=tuple(((0.0, 2.0 + i), (1.0, 2.0 + i))
                                               for i in range(4)))
    samples = synth_keyword_dataset(1, 4, 16, duration_ms=(100.0, 0.0),
                                    band_jitter=0.0, templates=[template], seed=5)
    ref = samples[0].raster.dense()
    for s in samples[1:]:
        np.testing.assert_array_equal(s.raster.dense(), ref)
    # constant tracks: every bin spikes on bands 2..5
    assert spike_counts(samples[0].raster).counts.tolist() == \
        [0, 0, 100, 100, 100, 100] + [0] * 10


def test_mirrored_sweeps_reverse_each_other():
    rising, falling = mirrored_sweep_templates(32)
    r0 = synth_keyword_dataset(2, 1, 32, duration_ms=(100.0, 0.0), band_jitter=0.0,
                               templates=[rising, falling], seed=1)
    up, down = r0[0].raster.dense(), r0[1].raster.dense()
    # same total activity, opposite temporal order
    assert up.sum() == down.sum()
    first_up = up.argmax(axis=1)[up.any(axis=1)]
    first_down = down.argmax(axis=1)[down.any(axis=1)]
    assert first_up[0] < first_up[-1]      # low channels fire first when rising
    assert first_down[0] > first_down[-1]  # low channels fire last when falling


def test_synthetic_sample_invariant():
    with pytest.raises(ValueError, match="at least one bin"):
        LabeledSample(raster=SpikeRaster.empty(4, 0), label=0, speaker_id="x")


def make_labeled(label, n=1):
    return [LabeledSample(raster=SpikeRaster.empty(4, 5), label=label, speaker_id=f"{label}-{i}")
            for i in range(n)]


def test_balance_paper_shaped_train():
    samples = []
    for label in range(11):
        samples.extend(make_labeled(label, 224))
    split = balance_dataset(samples, keyword=3, seed=0, role="train")
    assert len(split.positives) == 224
    assert len(split.negatives) == 10 * 22


def test_balance_paper_shaped_test():
    samples = []
    for label in range(11):
        samples.extend(make_labeled(label, 226))
    split = balance_dataset(samples, keyword=3, seed=0, role="test")
    assert len(split.positives) == 226
    assert len(split.negatives) == 10 * 23


def test_balance_rounding_rule_matches_half_up_oracle():
    for count in range(1, 31):
        labels = [0] * 5 + [1] * count
        pos, neg = balanced_indices(labels, keyword=0, n_nonkeyword_classes=10, seed=1)
        oracle = int((Decimal(count) / Decimal(10)).quantize(Decimal(1),
                                                             rounding=ROUND_HALF_UP))
        assert len(neg) == min(oracle, count), f"count={count}"


def test_balance_half_rounds_up():
    labels = [0] * 3 + [1] * 15
    _, neg = balanced_indices(labels, keyword=0, n_nonkeyword_classes=10, seed=1)
    assert len(neg) == 2  # round(1.5) = 2 under half-up


def test_balance_keeps_all_keywords_no_duplicate_negatives():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 4, size=200).tolist()
    pos, neg = balanced_indices(labels, keyword=2, seed=9)
    assert len(pos) == labels.count(2)
    assert all(labels[i] == 2 for i in pos)
    assert len(set(neg)) == len(neg)
    assert all(labels[i] != 2 for i in neg)


def test_balance_missing_keyword_rejected():
    with pytest.raises(ValueError, match="not present"):
        balanced_indices([0, 0, 1], keyword=7)


def test_balance_deterministic():
    labels = ([0] * 30) + ([1] * 40) + ([2] * 50)
    a = balanced_indices(labels, keyword=0, seed=4)
    b = balanced_indices(labels, keyword=0, seed=4)
    assert a == b


def test_manifest_round_trip(tmp_path):
    entries = [("a.csv", 0, "spk1", "train"), ("b.csv", 3, "spk2", "test")]
    path = tmp_path / "manifest.csv"
    write_manifest(path, entries)
    assert read_manifest(path) == entries
