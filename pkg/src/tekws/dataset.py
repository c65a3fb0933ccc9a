"""Labeled spike datasets: synthetic keyword generator and class balancing."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .frontend import FormantFrame, encode_formant_spikes
from .raster import SpikeRaster


def derive_seed(master, *labels) -> int:
    """Stable 64-bit seed derived from a master seed and a label path.

    Labeled derivation keeps unrelated random draws independent: adding a
    stage or unit never perturbs the streams of the others.
    """
    digest = hashlib.sha256(repr((int(master),) + tuple(labels)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class LabeledSample:
    """One utterance: a formant spike raster plus its class label."""

    raster: SpikeRaster
    label: int
    speaker_id: str

    def __post_init__(self):
        if self.raster.n_bins < 1:
            raise ValueError("sample raster must contain at least one bin")


@dataclass(frozen=True)
class BalancedSplit:
    """One-vs-rest split: all keyword samples vs a balanced non-keyword pool."""

    keyword: int
    positives: tuple[LabeledSample, ...]
    negatives: tuple[LabeledSample, ...]
    role: str  # "train" or "test"

    def __post_init__(self):
        if any(s.label != self.keyword for s in self.positives):
            raise ValueError("positives must all carry the keyword label")
        if any(s.label == self.keyword for s in self.negatives):
            raise ValueError("negatives must not carry the keyword label")


@dataclass(frozen=True)
class TrajectoryTemplate:
    """Piecewise-linear formant band tracks over normalized time.

    tracks[i] is a sequence of (time_fraction, band) breakpoints for formant
    track i; samples interpolate the tracks over their own duration.
    """

    tracks: tuple[tuple[tuple[float, float], ...], ...]

    def n_tracks(self):
        return len(self.tracks)

    def bands_at(self, time_fractions):
        """Track positions (float bands) at the given time fractions: k x T."""
        out = np.empty((len(self.tracks), len(time_fractions)))
        for i, track in enumerate(self.tracks):
            ts = np.array([p[0] for p in track])
            bs = np.array([p[1] for p in track])
            out[i] = np.interp(time_fractions, ts, bs)
        return out


def mirrored_sweep_templates(n_bands, k=4, low_band=4, high_band=None):
    """Two classes covering the same bands in opposite temporal order:
    class 0 rises low->high, class 1 falls high->low.

    Per-channel spike counts of the two classes are identical in expectation
    (jitter aside), so the classes are distinguishable by spike-timing
    structure but not by formant counts alone.
    """
    if high_band is None:
        high_band = n_bands - k - 4
    if high_band + k > n_bands or low_band < 0 or high_band <= low_band:
        raise ValueError("sweep range does not fit inside the band range")
    rising = tuple(((0.0, low_band + i), (1.0, high_band + i)) for i in range(k))
    falling = tuple(((0.0, high_band + i), (1.0, low_band + i)) for i in range(k))
    return (TrajectoryTemplate(tracks=rising), TrajectoryTemplate(tracks=falling))


def random_templates(n_classes, n_bands, k=4, n_segments=3, seed=0):
    """One random piecewise-linear template per class (k adjacent tracks)."""
    rng = np.random.default_rng(derive_seed(seed, "templates"))
    templates = []
    for _ in range(n_classes):
        times = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 0.9, n_segments - 1)), [1.0]])
        bases = rng.integers(0, n_bands - k, size=times.size)
        tracks = tuple(
            tuple((float(t), float(b + i)) for t, b in zip(times, bases))
            for i in range(k)
        )
        templates.append(TrajectoryTemplate(tracks=tracks))
    return templates


def _distinct_bands(candidates, n_bands):
    """Resolve collisions after jitter: bump duplicates upward, then shift the
    frame back down if it overflows the band range."""
    bands = sorted(int(b) for b in candidates)
    for i in range(1, len(bands)):
        if bands[i] <= bands[i - 1]:
            bands[i] = bands[i - 1] + 1
    overflow = bands[-1] - (n_bands - 1)
    if overflow > 0:
        bands = [b - overflow for b in bands]
    return tuple(bands)


def _render_sample(template, n_bands, n_bins, band_jitter, rng):
    times = (np.arange(n_bins) + 0.5) / n_bins
    tracks = template.bands_at(times)
    if band_jitter > 0:
        tracks = tracks + rng.normal(0.0, band_jitter, size=tracks.shape)
    tracks = np.clip(np.rint(tracks), 0, n_bands - 1)
    frames = [FormantFrame(_distinct_bands(tracks[:, t], n_bands)) for t in range(n_bins)]
    return encode_formant_spikes(frames, n_bands)


def synth_keyword_dataset(n_classes, samples_per_class, n_bands,
                          duration_ms=(300.0, 30.0), seed=0, k=4,
                          band_jitter=1.0, templates=None, mode="random"):
    """Deterministic synthetic dataset: one trajectory template per class,
    per-sample duration and band jitter.

    duration_ms is (mean, std); each sample draws its own duration (>= 20 ms).
    mode="mirrored-sweep" builds the two-class opposite-direction task,
    mode="random" draws a template per class from the seed. Passing templates
    explicitly overrides mode.
    """
    if templates is None:
        if mode == "mirrored-sweep":
            if n_classes != 2:
                raise ValueError("mirrored-sweep mode defines exactly 2 classes")
            templates = list(mirrored_sweep_templates(n_bands, k=k))
        elif mode == "random":
            templates = random_templates(n_classes, n_bands, k=k, seed=seed)
        else:
            raise ValueError(f"unknown synthetic mode {mode!r}")
    if len(templates) != n_classes:
        raise ValueError("need one template per class")
    mean_ms, std_ms = duration_ms
    samples = []
    for c in range(n_classes):
        for i in range(samples_per_class):
            rng = np.random.default_rng(derive_seed(seed, "sample", c, i))
            n_bins = max(20, int(round(rng.normal(mean_ms, std_ms))))
            raster = _render_sample(templates[c], n_bands, n_bins, band_jitter, rng)
            samples.append(LabeledSample(raster=raster, label=c, speaker_id=f"synth-{c}-{i}"))
    return samples


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def balanced_indices(labels, keyword, n_nonkeyword_classes=None, seed=0, role="train"):
    """Index-level balancing: keep every keyword sample, and per non-keyword
    class keep round-half-up(count / n_nonkeyword_classes) samples drawn
    without replacement. Classes absent from the data contribute nothing.

    Returns (positive indices, negative indices) into the labels sequence.
    """
    labels = list(labels)
    present = sorted(set(labels))
    if keyword not in present:
        raise ValueError(f"keyword {keyword} not present among labels {present}")
    if n_nonkeyword_classes is None:
        n_nonkeyword_classes = len(present) - 1
    if n_nonkeyword_classes < 1:
        raise ValueError("need at least one non-keyword class")
    positives = [i for i, lab in enumerate(labels) if lab == keyword]
    negatives = []
    rng = np.random.default_rng(derive_seed(seed, "balance", role, keyword))
    for label in present:
        if label == keyword:
            continue
        pool = [i for i, lab in enumerate(labels) if lab == label]
        n_keep = min(_round_half_up(len(pool) / n_nonkeyword_classes), len(pool))
        drawn = rng.choice(len(pool), size=n_keep, replace=False)
        negatives.extend(pool[j] for j in sorted(drawn))
    return positives, negatives


def balance_dataset(samples, keyword, n_nonkeyword_classes=None, seed=0, role="train"):
    """Balanced one-vs-rest split over labeled samples (see balanced_indices)."""
    pos_idx, neg_idx = balanced_indices([s.label for s in samples], keyword,
                                        n_nonkeyword_classes, seed, role)
    return BalancedSplit(keyword=keyword,
                         positives=tuple(samples[i] for i in pos_idx),
                         negatives=tuple(samples[i] for i in neg_idx),
                         role=role)


def write_manifest(path, entries):
    """Write a dataset manifest: rows of (path, label, speaker, split)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("path,label,speaker,split\n")
        for p, label, speaker, split in entries:
            f.write(f"{p},{label},{speaker},{split}\n")


def read_manifest(path):
    """Read a dataset manifest into a list of (path, label, speaker, split)."""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["path", "label", "speaker", "split"]:
            raise ValueError(f"unexpected manifest header: {header!r}")
        for row in reader:
            if not row:
                continue
            entries.append((row[0], int(row[1]), row[2], row[3]))
    return entries
