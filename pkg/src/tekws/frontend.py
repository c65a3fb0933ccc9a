"""Formant spike encoding frontend.

Audio is reduced to the indices of the k most energetic filterbank bands per
1 ms bin ("formants" in the spectral-maxima sense), and each voiced bin emits
one spike on each of those k channels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io.wavfile

from .raster import SpikeRaster

DEFAULT_N_BANDS = 32
DEFAULT_K = 4
DEFAULT_FMIN_HZ = 100.0
DEFAULT_FMAX_HZ = 4000.0
WINDOW_MS = 16.0
HOP_MS = 1.0
# Relative to the loudest 1 ms frame of the utterance.
SILENCE_THRESHOLD_REL = 1e-6


@dataclass(frozen=True)
class FormantFrame:
    """Band indices of the spectral maxima in one 1 ms bin; empty = silence."""

    bands: tuple[int, ...]

    def __post_init__(self):
        if any(b < 0 for b in self.bands):
            raise ValueError("band indices must be non-negative")
        if any(b1 <= b0 for b0, b1 in zip(self.bands, self.bands[1:])):
            raise ValueError("band indices must be distinct and strictly increasing")

    @property
    def is_silence(self):
        return len(self.bands) == 0


def load_wav(path):
    """Load a 16-bit PCM WAV file as float samples in [-1, 1].

    Stereo files are reduced to their first channel with a warning.
    Returns (samples, sample_rate).
    """
    rate, data = scipy.io.wavfile.read(path)
    if data.ndim == 2:
        warnings.warn(f"{path}: multi-channel WAV, using first channel only")
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV sample format {data.dtype}")
    return samples, int(rate)


def band_edges(n_bands, fmin_hz=DEFAULT_FMIN_HZ, fmax_hz=DEFAULT_FMAX_HZ):
    """Geometric corner-frequency grid for the triangular filterbank.

    Band j has corners (edges[j], edges[j+2]) and peaks at edges[j+1].
    """
    return np.geomspace(fmin_hz, fmax_hz, n_bands + 2)


def _triangle_weights(n_bands, freqs, fmin_hz, fmax_hz):
    edges = band_edges(n_bands, fmin_hz, fmax_hz)
    weights = np.zeros((n_bands, freqs.size))
    for j in range(n_bands):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        rising = (freqs >= lo) & (freqs < mid)
        falling = (freqs >= mid) & (freqs <= hi)
        weights[j, rising] = (freqs[rising] - lo) / (mid - lo)
        weights[j, falling] = (hi - freqs[falling]) / (hi - mid)
    return weights


def filterbank_energies(samples, sample_rate, n_bands=DEFAULT_N_BANDS,
                        fmin_hz=DEFAULT_FMIN_HZ, fmax_hz=DEFAULT_FMAX_HZ):
    """Per-bin band energies: n_bands x n_bins with a 1 ms hop.

    Short-time power spectra (16 ms Hann window, 1 ms hop) are pooled through
    a log-spaced triangular filterbank. n_bins = floor(duration / 1 ms).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"audio must be mono (1-D), got shape {samples.shape}")
    if samples.size == 0:
        raise ValueError("audio is empty")
    if sample_rate < 8000:
        raise ValueError(f"sample rate must be >= 8 kHz, got {sample_rate}")
    if n_bands < 4:
        raise ValueError(f"n_bands must be >= 4, got {n_bands}")
    fmax_hz = min(fmax_hz, sample_rate / 2.0)

    n_bins = int(samples.size * 1000 // sample_rate)
    win_len = int(round(sample_rate * WINDOW_MS / 1000.0))
    starts = np.round(np.arange(n_bins) * sample_rate * HOP_MS / 1000.0).astype(np.int64)
    padded = np.concatenate([samples, np.zeros(win_len)])
    frames = padded[starts[:, None] + np.arange(win_len)[None, :]]
    window = np.hanning(win_len)
    spectra = np.abs(np.fft.rfft(frames * window[None, :], axis=1)) ** 2
    freqs = np.fft.rfftfreq(win_len, d=1.0 / sample_rate)
    weights = _triangle_weights(n_bands, freqs, fmin_hz, fmax_hz)
    return weights @ spectra.T


def extract_formants(energies, k=DEFAULT_K, silence_threshold=None):
    """The k highest-energy bands per bin, ties broken toward lower indices.

    Bins whose total energy falls below silence_threshold (default: 1e-6 of
    the loudest bin of the utterance) yield empty frames.
    """
    energies = np.asarray(energies, dtype=np.float64)
    n_bands, n_bins = energies.shape
    if k > n_bands:
        raise ValueError(f"k={k} exceeds n_bands={n_bands}")
    totals = energies.sum(axis=0)
    if silence_threshold is None:
        silence_threshold = SILENCE_THRESHOLD_REL * (totals.max() if n_bins else 0.0)
    # stable sort on -energy keeps lower band indices first among ties
    top = np.argsort(-energies, axis=0, kind="stable")[:k, :]
    frames = []
    for t in range(n_bins):
        if totals[t] < silence_threshold:
            frames.append(FormantFrame(()))
        else:
            frames.append(FormantFrame(tuple(sorted(int(b) for b in top[:, t]))))
    return frames


def encode_formant_spikes(frames, n_bands) -> SpikeRaster:
    """One spike per formant band per voiced bin; silence bins emit none."""
    dense = np.zeros((n_bands, len(frames)), dtype=bool)
    for t, frame in enumerate(frames):
        for b in frame.bands:
            if b >= n_bands:
                raise ValueError(f"band index {b} out of range for n_bands={n_bands}")
            dense[b, t] = True
    return SpikeRaster.from_dense(dense)


def encode_audio(samples, sample_rate, n_bands=DEFAULT_N_BANDS, k=DEFAULT_K,
                 fmin_hz=DEFAULT_FMIN_HZ, fmax_hz=DEFAULT_FMAX_HZ,
                 silence_threshold=None) -> SpikeRaster:
    """Audio -> formant spike raster (filterbank + top-k + spike encoding)."""
    energies = filterbank_energies(samples, sample_rate, n_bands, fmin_hz, fmax_hz)
    frames = extract_formants(energies, k=k, silence_threshold=silence_threshold)
    return encode_formant_spikes(frames, n_bands)


def write_formant_csv(frames, path):
    """Write frames as ``bin,b0,b1,b2,b3`` rows, -1 marking silence."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("bin,b0,b1,b2,b3\n")
        for t, frame in enumerate(frames):
            if frame.is_silence:
                f.write(f"{t},-1,-1,-1,-1\n")
            else:
                if len(frame.bands) != 4:
                    raise ValueError("formant CSV format carries exactly 4 bands per voiced bin")
                f.write(f"{t}," + ",".join(str(b) for b in frame.bands) + "\n")


def read_formant_csv(path):
    """Read pre-extracted formants (``bin,b0,b1,b2,b3``; -1 = silence)."""
    frames = {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "bin,b0,b1,b2,b3":
            raise ValueError(f"unexpected formant CSV header: {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = [int(x) for x in line.split(",")]
            t, bands = parts[0], [b for b in parts[1:] if b >= 0]
            frames[t] = FormantFrame(tuple(sorted(bands)))
    if not frames:
        return []
    n_bins = max(frames) + 1
    return [frames.get(t, FormantFrame(())) for t in range(n_bins)]
