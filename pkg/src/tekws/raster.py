"""Time-binned spike rasters and spike-count features.

The raster is the currency passed between the frontend, the encoder layers
and the readout: binary events on a fixed set of channels over 1 ms bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BIN_WIDTH_MS = 1.0

# Dense boolean storage up to this many bins; event lists beyond. Utterances
# are well under a second at 1 ms bins, the sparse path exists for long
# synthetic stress inputs.
DENSE_BIN_LIMIT = 1_000_000


class SpikeRaster:
    """Binary spike events on ``n_channels`` channels over ``n_bins`` 1 ms bins.

    At most one spike per channel per bin. Rasters are immutable after
    construction and safe to share between workers.
    """

    __slots__ = ("n_channels", "n_bins", "bin_width_ms", "_dense", "_ev_bins", "_ev_chans")

    def __init__(self, n_channels, n_bins, *, dense=None, ev_bins=None, ev_chans=None,
                 bin_width_ms=BIN_WIDTH_MS):
        if n_channels < 1:
            raise ValueError(f"n_channels must be positive, got {n_channels}")
        if n_bins < 0:
            raise ValueError(f"n_bins must be non-negative, got {n_bins}")
        self.n_channels = int(n_channels)
        self.n_bins = int(n_bins)
        self.bin_width_ms = float(bin_width_ms)
        self._dense = dense
        self._ev_bins = ev_bins
        self._ev_chans = ev_chans

    @classmethod
    def from_dense(cls, matrix, bin_width_ms=BIN_WIDTH_MS):
        """Build from a channels x bins boolean matrix."""
        matrix = np.asarray(matrix, dtype=bool)
        if matrix.ndim != 2:
            raise ValueError(f"dense raster must be 2-D (channels x bins), got shape {matrix.shape}")
        matrix = matrix.copy()
        matrix.setflags(write=False)
        return cls(matrix.shape[0], matrix.shape[1], dense=matrix, bin_width_ms=bin_width_ms)

    @classmethod
    def from_events(cls, n_channels, n_bins, bins, channels, bin_width_ms=BIN_WIDTH_MS):
        """Build from parallel event arrays of bin and channel indices."""
        bins = np.asarray(bins, dtype=np.int64)
        channels = np.asarray(channels, dtype=np.int64)
        if bins.shape != channels.shape or bins.ndim != 1:
            raise ValueError("bins and channels must be equal-length 1-D arrays")
        if bins.size:
            if bins.min() < 0 or bins.max() >= n_bins:
                raise ValueError("event bin index out of range")
            if channels.min() < 0 or channels.max() >= n_channels:
                raise ValueError("event channel index out of range")
        order = np.lexsort((channels, bins))
        bins, channels = bins[order], channels[order]
        if n_bins <= DENSE_BIN_LIMIT:
            dense = np.zeros((n_channels, n_bins), dtype=bool)
            dense[channels, bins] = True
            dense.setflags(write=False)
            return cls(n_channels, n_bins, dense=dense, bin_width_ms=bin_width_ms)
        # drop duplicate events so the one-spike-per-bin invariant holds
        if bins.size:
            keep = np.ones(bins.size, dtype=bool)
            keep[1:] = (np.diff(bins) != 0) | (np.diff(channels) != 0)
            bins, channels = bins[keep], channels[keep]
        bins.setflags(write=False)
        channels.setflags(write=False)
        return cls(n_channels, n_bins, ev_bins=bins, ev_chans=channels, bin_width_ms=bin_width_ms)

    @classmethod
    def empty(cls, n_channels, n_bins, bin_width_ms=BIN_WIDTH_MS):
        return cls.from_events(n_channels, n_bins, [], [], bin_width_ms=bin_width_ms)

    @property
    def is_sparse(self):
        return self._dense is None

    def dense(self):
        """Channels x bins boolean matrix (read-only view)."""
        if self._dense is not None:
            return self._dense
        dense = np.zeros((self.n_channels, self.n_bins), dtype=bool)
        dense[self._ev_chans, self._ev_bins] = True
        dense.setflags(write=False)
        return dense

    def events(self):
        """Event arrays (bins, channels), sorted by (bin, channel)."""
        if self._dense is not None:
            chans, bins = np.nonzero(self._dense)
            order = np.lexsort((chans, bins))
            return bins[order], chans[order]
        return self._ev_bins, self._ev_chans

    @property
    def n_events(self):
        if self._dense is not None:
            return int(self._dense.sum())
        return int(self._ev_bins.size)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return (f"SpikeRaster(n_channels={self.n_channels}, n_bins={self.n_bins}, "
                f"events={self.n_events}, {kind})")


@dataclass(frozen=True)
class CountVector:
    """Per-channel spike counts of one raster."""

    counts: np.ndarray
    n_channels: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size != self.n_channels:
            raise ValueError("counts length must equal n_channels")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def spike_counts(raster: SpikeRaster) -> CountVector:
    """Number of bins in which each channel fires."""
    if raster.is_sparse:
        _, chans = raster.events()
        counts = np.bincount(chans, minlength=raster.n_channels)
    else:
        counts = raster.dense().sum(axis=1)
    return CountVector(counts.astype(np.int64), raster.n_channels)


def concat_channels(a: SpikeRaster, b: SpikeRaster) -> SpikeRaster:
    """Stack the channels of two rasters covering the same bins (a's first)."""
    if a.n_bins != b.n_bins:
        raise ValueError(
            f"cannot concatenate rasters with different bin counts ({a.n_bins} vs {b.n_bins})")
    if a.bin_width_ms != b.bin_width_ms:
        raise ValueError(
            f"cannot concatenate rasters with different bin widths "
            f"({a.bin_width_ms} ms vs {b.bin_width_ms} ms)")
    n_channels = a.n_channels + b.n_channels
    if not a.is_sparse and not b.is_sparse:
        return SpikeRaster.from_dense(np.vstack([a.dense(), b.dense()]),
                                      bin_width_ms=a.bin_width_ms)
    ab, ac = a.events()
    bb, bc = b.events()
    bins = np.concatenate([ab, bb])
    chans = np.concatenate([ac, bc + a.n_channels])
    return SpikeRaster.from_events(n_channels, a.n_bins, bins, chans, bin_width_ms=a.bin_width_ms)


def write_raster_csv(raster: SpikeRaster, path):
    """Write the event-list CSV format: header ``bin,channel``, one row per
    event, sorted by (bin, channel), UTF-8 with LF line endings."""
    bins, chans = raster.events()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("bin,channel\n")
        for b, c in zip(bins, chans):
            f.write(f"{b},{c}\n")


def read_raster_csv(path, n_channels=None, n_bins=None, bin_width_ms=BIN_WIDTH_MS):
    """Read the event-list CSV format back into a raster.

    The file format carries no shape metadata; pass n_channels/n_bins when the
    raster has silent trailing channels or bins, otherwise they are inferred
    from the largest event index.
    """
    bins, chans = [], []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "bin,channel":
            raise ValueError(f"unexpected raster CSV header: {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            b, c = line.split(",")
            bins.append(int(b))
            chans.append(int(c))
    if n_channels is None:
        n_channels = (max(chans) + 1) if chans else 1
    if n_bins is None:
        n_bins = (max(bins) + 1) if bins else 0
    return SpikeRaster.from_events(n_channels, n_bins, bins, chans, bin_width_ms=bin_width_ms)
