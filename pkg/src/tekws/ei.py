"""Paired excitatory/inhibitory synapse elements with delayed net excitation.

One element per presynaptic channel: a fast inhibitory and a slower excitatory
exponential current whose sum is negative right after the spike and peaks
positive a couple of milliseconds later. Four elements feed one
integrate-and-fire neuron whose threshold is calibrated so that four
coincident input spikes fire it and three do not. Device heterogeneity is
modeled as multiplicative Gaussian jitter on the element parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import derive_seed
from .raster import SpikeRaster

DT_MS = 1.0
MISMATCH_PARAM_NAMES = ("tau_e", "tau_i", "w_e", "w_i")


@dataclass(frozen=True)
class EiElementParams:
    tau_e: float = 1.5     # ms, excitatory decay
    tau_i: float = 1.0     # ms, inhibitory decay
    w_e: float = 105.0     # nA
    w_i: float = -147.0    # nA

    def __post_init__(self):
        if not (self.tau_e > self.tau_i > 0):
            raise ValueError("need tau_e > tau_i > 0 (slow excitation, fast inhibition)")
        if not (self.w_e > 0 > self.w_i):
            raise ValueError("need w_e > 0 and w_i < 0")
        if self.w_e + self.w_i >= 0:
            raise ValueError("need w_e + w_i < 0 so the net current starts inhibitory")


@dataclass(frozen=True)
class MismatchSpec:
    sigma_tau: float = 0.5
    sigma_w: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_tau", "sigma_w"):
            sigma = getattr(self, name)
            if not (0.0 <= sigma < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {sigma}")


@dataclass(frozen=True)
class EiNeuronParams:
    elements: tuple[EiElementParams, ...]
    tau_mem: float = 10.0
    theta: float = 1.0      # calibrated, see calibrate_threshold
    v_reset: float = 0.0
    refractory: float = 0.0

    def __post_init__(self):
        if len(self.elements) < 1:
            raise ValueError("neuron needs at least one element")
        if self.tau_mem <= 0:
            raise ValueError("tau_mem must be positive")
        if self.theta <= self.v_reset:
            raise ValueError("theta must exceed v_reset")


def ei_kernel(p: EiElementParams, t):
    """Summed synaptic current (nA) at time t (ms) after one input spike."""
    t = np.asarray(t, dtype=np.float64)
    return p.w_e * np.exp(-t / p.tau_e) + p.w_i * np.exp(-t / p.tau_i)


def kernel_zero_crossing(p: EiElementParams):
    """Time where the kernel turns from inhibitory to excitatory (ms)."""
    return np.log(-p.w_i / p.w_e) / (1.0 / p.tau_i - 1.0 / p.tau_e)


def kernel_peak_time(p: EiElementParams):
    """Time of maximal net excitation (ms); the element's effective delay."""
    return np.log((-p.w_i / p.tau_i) / (p.w_e / p.tau_e)) / (1.0 / p.tau_i - 1.0 / p.tau_e)


def kernel_charge(p: EiElementParams):
    """Integral of the kernel over [0, inf): net transferred charge (nA*ms)."""
    return p.w_e * p.tau_e + p.w_i * p.tau_i


def _factor_stream(seed, element_id, param_index):
    """Counter-based stream for one (element, parameter) slot; stable across
    runs and platforms and independent of all other slots."""
    if isinstance(element_id, (tuple, list)):
        labels = tuple(element_id)
    else:
        labels = (element_id,)
    key = derive_seed(seed, "mismatch", *labels, param_index)
    return np.random.Generator(np.random.Philox(key=key))


def _positive_factor(rng, sigma, limit, counter):
    while True:
        f = rng.normal(1.0, sigma)
        if f > 0:
            return f
        counter[0] += 1
        if counter[0] > limit:
            raise ValueError("mismatch sampling rejected too many consecutive draws")


def apply_mismatch(nominal: EiElementParams, spec: MismatchSpec, element_id,
                   max_rejections=1000) -> EiElementParams:
    """Multiply each element parameter by an independent N(1, sigma^2) factor.

    Draws violating the element invariants are rejected and redrawn: factors
    must stay positive (sign preservation), tau_e must stay above tau_i, and
    the net current must stay inhibitory at onset (w_e + w_i < 0). Each
    parameter has its own counter-based stream keyed by
    (seed, element_id, parameter index), so draws are reproducible per slot.
    """
    streams = [_factor_stream(spec.seed, element_id, i)
               for i in range(len(MISMATCH_PARAM_NAMES))]
    sigmas = (spec.sigma_tau, spec.sigma_tau, spec.sigma_w, spec.sigma_w)
    rejections = [0]
    f_te = _positive_factor(streams[0], sigmas[0], max_rejections, rejections)
    f_ti = _positive_factor(streams[1], sigmas[1], max_rejections, rejections)
    while nominal.tau_e * f_te <= nominal.tau_i * f_ti:
        rejections[0] += 1
        if rejections[0] > max_rejections:
            raise ValueError("mismatch sampling rejected too many consecutive draws")
        f_te = _positive_factor(streams[0], sigmas[0], max_rejections, rejections)
        f_ti = _positive_factor(streams[1], sigmas[1], max_rejections, rejections)
    f_we = _positive_factor(streams[2], sigmas[2], max_rejections, rejections)
    f_wi = _positive_factor(streams[3], sigmas[3], max_rejections, rejections)
    while nominal.w_e * f_we + nominal.w_i * f_wi >= 0:
        rejections[0] += 1
        if rejections[0] > max_rejections:
            raise ValueError("mismatch sampling rejected too many consecutive draws")
        f_we = _positive_factor(streams[2], sigmas[2], max_rejections, rejections)
        f_wi = _positive_factor(streams[3], sigmas[3], max_rejections, rejections)
    return EiElementParams(tau_e=nominal.tau_e * f_te, tau_i=nominal.tau_i * f_ti,
                           w_e=nominal.w_e * f_we, w_i=nominal.w_i * f_wi)


def _charge_factors(taus, dt):
    """Per-bin integral of a unit exponential with decay tau: the membrane
    accumulates the exact within-bin charge of each synaptic current, so the
    summed drive matches the analytic kernel integral instead of the badly
    aliased 1 ms point samples (the inhibitory tau equals the bin width)."""
    taus = np.asarray(taus, dtype=np.float64)
    return taus * (1.0 - np.exp(-dt / taus))


def simulate_ei_neuron(neuron: EiNeuronParams, inputs, dt=DT_MS):
    """Simulate one neuron over per-element boolean input trains.

    inputs is (n_elements, n_bins). Each element keeps two exponential state
    variables (excitatory and inhibitory current) with per-bin decay and spike
    increments w_e, w_i; increments superpose linearly. The membrane
    integrates the exact per-bin time integral of the currents.
    Returns (output spike train, spike count).
    """
    inputs = np.asarray(inputs, dtype=bool)
    if inputs.ndim != 2 or inputs.shape[0] != len(neuron.elements):
        raise ValueError(
            f"inputs must be (n_elements={len(neuron.elements)}, n_bins), got {inputs.shape}")
    n_el, n_bins = inputs.shape
    tau_e = np.array([e.tau_e for e in neuron.elements])
    tau_i = np.array([e.tau_i for e in neuron.elements])
    d_e = np.exp(-dt / tau_e)
    d_i = np.exp(-dt / tau_i)
    g_e = _charge_factors(tau_e, dt) / neuron.tau_mem
    g_i = _charge_factors(tau_i, dt) / neuron.tau_mem
    w_e = np.array([e.w_e for e in neuron.elements])
    w_i = np.array([e.w_i for e in neuron.elements])
    d_mem = np.exp(-dt / neuron.tau_mem)
    exc = np.zeros(n_el)
    inh = np.zeros(n_el)
    v = 0.0
    refractory = 0.0
    out = np.zeros(n_bins, dtype=bool)
    for t in range(n_bins):
        exc *= d_e
        inh *= d_i
        v *= d_mem
        spikes = inputs[:, t]
        exc += w_e * spikes
        inh += w_i * spikes
        refractory = max(0.0, refractory - dt)
        if refractory > 0:
            v = neuron.v_reset
        else:
            v += (exc * g_e + inh * g_i).sum()
            if v >= neuron.theta:
                out[t] = True
                v = neuron.v_reset
                refractory = neuron.refractory
    return out, int(out.sum())


def _coincident_inputs(n_elements, active, n_bins):
    inputs = np.zeros((n_elements, n_bins), dtype=bool)
    inputs[list(active), 0] = True
    return inputs


def _fires(neuron, theta, inputs, dt):
    _, count = simulate_ei_neuron(replace(neuron, theta=theta), inputs, dt=dt)
    return count >= 1


def _sup_firing_theta(neuron, inputs, dt, theta_hi_start=1.0, iters=60):
    """Largest threshold at which the input volley still fires, by bisection."""
    hi = theta_hi_start
    while _fires(neuron, hi, inputs, dt):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("threshold calibration diverged")
    lo = neuron.v_reset + 1e-12
    if not _fires(neuron, lo, inputs, dt):
        return lo  # never fires above reset: sup is (numerically) the floor
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _fires(neuron, mid, inputs, dt):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_threshold(neuron: EiNeuronParams, dt=DT_MS, horizon_ms=50.0):
    """Threshold at which 4 coincident input spikes fire the neuron and any 3
    do not, found by bisecting on the simulated responses.

    Raises RuntimeError when no such threshold exists for these elements.
    """
    if len(neuron.elements) != 4:
        raise ValueError("coincidence calibration expects exactly 4 elements")
    n_bins = int(round(horizon_ms / dt))
    all_four = _coincident_inputs(4, range(4), n_bins)
    theta4 = _sup_firing_theta(neuron, all_four, dt)
    theta3 = max(
        _sup_firing_theta(neuron, _coincident_inputs(4, [a for a in range(4) if a != drop], n_bins), dt)
        for drop in range(4)
    )
    if theta4 <= theta3 or theta4 <= neuron.v_reset + 1e-9:
        raise RuntimeError(
            "no threshold separates 4-coincident from 3-coincident input for these elements")
    theta = 0.5 * (theta3 + theta4)
    if not _fires(neuron, theta, all_four, dt):
        raise RuntimeError("calibration verification failed for 4 coincident spikes")
    for drop in range(4):
        if _fires(neuron, theta, _coincident_inputs(4, [a for a in range(4) if a != drop], n_bins), dt):
            raise RuntimeError("calibration verification failed for 3 coincident spikes")
    return theta


def simulate_ei_layer(neurons, input_channels, raster: SpikeRaster, dt=DT_MS) -> SpikeRaster:
    """Simulate a layer of neurons in parallel over a shared input raster.

    neurons: sequence of EiNeuronParams (equal element counts);
    input_channels: (n_neurons, n_elements) channel indices into the raster.
    Matches simulate_ei_neuron semantics exactly.
    """
    dense = raster.dense()
    input_channels = np.asarray(input_channels, dtype=np.int64)
    n_neurons, n_el = input_channels.shape
    if len(neurons) != n_neurons:
        raise ValueError("one wiring row per neuron required")
    flat = [e for nr in neurons for e in nr.elements]
    if len(flat) != n_neurons * n_el:
        raise ValueError("all neurons must have the same element count")
    tau_e = np.array([e.tau_e for e in flat])
    tau_i = np.array([e.tau_i for e in flat])
    d_e = np.exp(-dt / tau_e)
    d_i = np.exp(-dt / tau_i)
    w_e = np.array([e.w_e for e in flat])
    w_i = np.array([e.w_i for e in flat])
    thetas = np.array([nr.theta for nr in neurons])
    resets = np.array([nr.v_reset for nr in neurons])
    refr_len = np.array([nr.refractory for nr in neurons])
    d_mem = np.array([np.exp(-dt / nr.tau_mem) for nr in neurons])
    tau_mem_el = np.repeat([nr.tau_mem for nr in neurons], n_el)
    g_e = _charge_factors(tau_e, dt) / tau_mem_el
    g_i = _charge_factors(tau_i, dt) / tau_mem_el
    chan_flat = input_channels.reshape(-1)
    exc = np.zeros(n_neurons * n_el)
    inh = np.zeros(n_neurons * n_el)
    v = np.zeros(n_neurons)
    refractory = np.zeros(n_neurons)
    out = np.zeros((n_neurons, raster.n_bins), dtype=bool)
    for t in range(raster.n_bins):
        exc *= d_e
        inh *= d_i
        v *= d_mem
        spikes = dense[chan_flat, t]
        exc += w_e * spikes
        inh += w_i * spikes
        refractory = np.maximum(0.0, refractory - dt)
        blocked = refractory > 0
        drive = (exc * g_e + inh * g_i).reshape(n_neurons, n_el).sum(axis=1)
        v = np.where(blocked, resets, v + drive)
        fired = (v >= thetas) & ~blocked
        out[:, t] = fired
        v[fired] = resets[fired]
        refractory[fired] = refr_len[fired]
    return SpikeRaster.from_dense(out, bin_width_ms=raster.bin_width_ms)
