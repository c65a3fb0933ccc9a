import numpy as np
import pytest

from tekws.raster import (SpikeRaster, concat_channels, read_raster_csv,
                          spike_counts, write_raster_csv)


def random_raster(rng, n_channels, n_bins, p=0.1):
    return SpikeRaster.from_dense(rng.random((n_channels, n_bins)) < p)


def test_empty_raster_counts_zero():
    r = SpikeRaster.empty(5, 0)
    assert spike_counts(r).counts.tolist() == [0] * 5


def test_saturated_channel_counts_bins():
    dense = np.zeros((3, 100), dtype=bool)
    dense[0, :] = True
    counts = spike_counts(SpikeRaster.from_dense(dense)).counts
    assert counts.tolist() == [100, 0, 0]


def test_counts_match_event_enumeration():
    rng = np.random.default_rng(1234)
    bins = rng.integers(0, 50, size=37)
    chans = rng.integers(0, 4, size=37)
    # enumeration oracle: count distinct (bin, channel) events per channel
    events = sorted(set(zip(bins.tolist(), chans.tolist())))
    expected = [sum(1 for _, c in events if c == ch) for ch in range(4)]
    r = SpikeRaster.from_events(4, 50, bins, chans)
    assert spike_counts(r).counts.tolist() == expected
    assert spike_counts(r).counts.sum() == len(events)


def test_concat_channel_counts():
    a = SpikeRaster.empty(32, 10)
    b = SpikeRaster.empty(174, 10)
    assert concat_channels(a, b).n_channels == 206
    c = SpikeRaster.empty(180, 10)
    assert concat_channels(a, c).n_channels == 212


def test_concat_preserves_events_and_order():
    rng = np.random.default_rng(7)
    a = random_raster(rng, 3, 20)
    b = random_raster(rng, 5, 20)
    out = concat_channels(a, b)
    assert out.n_channels == 8
    np.testing.assert_array_equal(out.dense()[:3], a.dense())
    np.testing.assert_array_equal(out.dense()[3:], b.dense())


def test_concat_bin_mismatch_rejected():
    a = SpikeRaster.empty(2, 10)
    b = SpikeRaster.empty(2, 11)
    with pytest.raises(ValueError, match="bin counts"):
        concat_channels(a, b)


def test_counts_commute_with_concat():
    rng = np.random.default_rng(42)
    for _ in range(20):
        a = random_raster(rng, int(rng.integers(1, 8)), 30)
        b = random_raster(rng, int(rng.integers(1, 8)), 30)
        joint = spike_counts(concat_channels(a, b)).counts
        parts = np.concatenate([spike_counts(a).counts, spike_counts(b).counts])
        np.testing.assert_array_equal(joint, parts)


def test_event_validation():
    with pytest.raises(ValueError, match="channel index"):
        SpikeRaster.from_events(2, 10, [0], [5])
    with pytest.raises(ValueError, match="bin index"):
        SpikeRaster.from_events(2, 10, [12], [0])


def test_sparse_storage_beyond_limit():
    n_bins = 1_000_001
    r = SpikeRaster.from_events(3, n_bins, [0, 999_999, 1_000_000], [2, 0, 0])
    assert r.is_sparse
    assert spike_counts(r).counts.tolist() == [2, 0, 1]
    other = SpikeRaster.from_events(2, n_bins, [5], [1])
    joint = concat_channels(r, other)
    assert joint.n_channels == 5
    assert spike_counts(joint).counts.tolist() == [2, 0, 1, 0, 1]


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(99)
    r = random_raster(rng, 6, 40)
    path = tmp_path / "raster.csv"
    write_raster_csv(r, path)
    text = path.read_bytes().decode("utf-8")
    assert text.startswith("bin,channel\n")
    assert "\r" not in text
    back = read_raster_csv(path, n_channels=6, n_bins=40)
    np.testing.assert_array_equal(spike_counts(back).counts, spike_counts(r).counts)
    np.testing.assert_array_equal(back.dense(), r.dense())


def test_csv_rows_sorted(tmp_path):
    r = SpikeRaster.from_events(3, 5, [4, 0, 2, 0], [1, 2, 0, 1])
    path = tmp_path / "raster.csv"
    write_raster_csv(r, path)
    rows = path.read_text().splitlines()[1:]
    parsed = [tuple(int(x) for x in row.split(",")) for row in rows]
    assert parsed == sorted(parsed)
