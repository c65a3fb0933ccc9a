"""Network wiring: time-difference pairs and windowed coincidence layers.

Input channels feed (a) one time-difference unit per ordered channel pair
within a maximum lateral distance and (b) a first coincidence layer with one
neuron per contiguous 4-channel window, duplicated several times so device
heterogeneity yields distinct detectors. A second coincidence layer repeats
the window pattern over each duplicate group of the first layer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import derive_seed
from .ei import EiElementParams, EiNeuronParams, MismatchSpec, apply_mismatch, calibrate_threshold
from .tde import TdeParams, calibrate_w_trig


@dataclass(frozen=True)
class NetworkConfig:
    n_inputs: int = 32
    d_max: int = 3
    window: int = 4
    duplicates: int = 6

    def __post_init__(self):
        if self.n_inputs < 2:
            raise ValueError("need at least 2 input channels")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.window > self.n_inputs:
            raise ValueError("window must not exceed n_inputs")
        if self.duplicates < 1:
            raise ValueError("duplicates must be >= 1")


def tde_pairs(n_channels, d_max):
    """All ordered channel pairs (fac, trig) with 1 <= |fac - trig| <= d_max,
    sorted lexicographically. Both directions are instantiated so opposite
    sweep directions excite different units."""
    if n_channels < 2:
        raise ValueError("need at least 2 channels")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    return [(i, j) for i in range(n_channels) for j in range(n_channels)
            if i != j and abs(i - j) <= d_max]


def ei_windows(n_channels, width=4, n_duplicates=6):
    """First-layer neurons as (window_start, duplicate_index), duplicate-major.

    One neuron per contiguous width-channel window, n_duplicates copies each.
    """
    if width > n_channels:
        raise ValueError("window width exceeds channel count")
    n_windows = n_channels - width + 1
    return [(s, g) for g in range(n_duplicates) for s in range(n_windows)]


def ei_layer2(layer1, width=4):
    """Second-layer neurons as (group_index, window_start over that group).

    The window pattern repeats inside each duplicate group of the first layer;
    groups smaller than the window contribute no neurons.
    """
    groups = {}
    for start, dup in layer1:
        groups.setdefault(dup, []).append(start)
    out = []
    for g in sorted(groups):
        size = len(groups[g])
        if size < width:
            warnings.warn(f"duplicate group {g} has only {size} neurons; no layer-2 windows")
            continue
        out.extend((g, s) for s in range(size - width + 1))
    return out


@dataclass(frozen=True)
class NetworkTopology:
    n_inputs: int
    d_max: int
    tde_pairs: tuple[tuple[int, int], ...]
    ei_layer1: tuple[tuple[int, int], ...]   # (window_start, duplicate_index)
    ei_layer2: tuple[tuple[int, int], ...]   # (group_index, window_start)
    window: int = 4

    def layer1_inputs(self, index):
        """Input channels wired to first-layer neuron `index`."""
        start, _ = self.ei_layer1[index]
        return tuple(range(start, start + self.window))

    def layer1_group_size(self):
        return self.n_inputs - self.window + 1

    def layer2_inputs(self, index):
        """First-layer neuron ids wired to second-layer neuron `index`."""
        group, start = self.ei_layer2[index]
        base = group * self.layer1_group_size()
        return tuple(base + start + i for i in range(self.window))


@dataclass(frozen=True)
class NetworkBuild:
    """Topology plus instantiated unit parameters for one run."""

    topology: NetworkTopology
    tde_params: TdeParams
    ei1_neurons: tuple[EiNeuronParams, ...]
    ei2_neurons: tuple[EiNeuronParams, ...]
    ei_theta: float
    seed: int

    def layer_sizes(self):
        return {
            "formants": self.topology.n_inputs,
            "tde": len(self.topology.tde_pairs),
            "ei1": len(self.ei1_neurons),
            "ei2": len(self.ei2_neurons),
        }


def build_network(config: NetworkConfig, tde_nominal: TdeParams,
                  ei_nominal: EiElementParams, mismatch: MismatchSpec,
                  tau_mem=10.0, tde_target_count=10, calibrate_tde=True) -> NetworkBuild:
    """Construct the wiring and instantiate unit parameters.

    Time-difference units share one calibrated parameter set. Every
    coincidence-layer synapse element gets an independent mismatched draw
    keyed by (seed, layer, neuron, slot); the firing threshold is calibrated
    once on the nominal elements and shared, mirroring a process where the
    weights are set globally and heterogeneity is applied afterwards.
    """
    if config.window != 4:
        raise ValueError("coincidence calibration is defined for 4-channel windows")
    topo = NetworkTopology(
        n_inputs=config.n_inputs,
        d_max=config.d_max,
        tde_pairs=tuple(tde_pairs(config.n_inputs, config.d_max)),
        ei_layer1=tuple(ei_windows(config.n_inputs, config.window, config.duplicates)),
        ei_layer2=tuple(ei_layer2(ei_windows(config.n_inputs, config.window, config.duplicates),
                                  width=config.window)),
        window=config.window,
    )
    tde = calibrate_w_trig(tde_nominal, target_count=tde_target_count) if calibrate_tde else tde_nominal
    nominal_neuron = EiNeuronParams(elements=(ei_nominal,) * config.window, tau_mem=tau_mem)
    theta = calibrate_threshold(nominal_neuron)

    def mismatched_neuron(layer_tag, neuron_idx):
        elements = tuple(
            apply_mismatch(ei_nominal, mismatch, (layer_tag, neuron_idx, slot))
            for slot in range(config.window)
        )
        return EiNeuronParams(elements=elements, tau_mem=tau_mem, theta=theta)

    ei1 = tuple(mismatched_neuron("ei1", i) for i in range(len(topo.ei_layer1)))
    ei2 = tuple(mismatched_neuron("ei2", i) for i in range(len(topo.ei_layer2)))
    return NetworkBuild(topology=topo, tde_params=tde, ei1_neurons=ei1,
                        ei2_neurons=ei2, ei_theta=theta, seed=mismatch.seed)
