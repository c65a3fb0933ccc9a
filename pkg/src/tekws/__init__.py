"""Spiking temporal encoders for few-neuron keyword spotting.

Two encoder families turn formant spike rasters into spike-count features: a
time-difference unit per ordered channel pair, and windowed coincidence
neurons built from paired excitatory/inhibitory synapse elements with device
mismatch. A logistic readout and permutation-importance analysis compare the
feature sets, and a CLI drives seeded end-to-end experiments that emit CSV
reports and SVG figures.
"""

from .analysis import (ImportanceReport, SelectionResult, mean_spikes_per_utterance,
                       permutation_importance, select_few, single_neuron_scores)
from .dataset import (BalancedSplit, LabeledSample, balance_dataset, balanced_indices,
                      derive_seed, mirrored_sweep_templates, synth_keyword_dataset)
from .ei import (EiElementParams, EiNeuronParams, MismatchSpec, apply_mismatch,
                 calibrate_threshold, ei_kernel, kernel_charge, kernel_peak_time,
                 kernel_zero_crossing, simulate_ei_layer, simulate_ei_neuron)
from .frontend import (FormantFrame, encode_audio, encode_formant_spikes,
                       extract_formants, filterbank_energies, load_wav)
from .raster import (CountVector, SpikeRaster, concat_channels, read_raster_csv,
                     spike_counts, write_raster_csv)
from .readout import (FeatureMatrix, LinearModel, accuracy, fit_logreg,
                      logistic_objective, predict)
from .tde import (TdeParams, TdeState, calibrate_w_trig, simulate_tde,
                  simulate_tde_layer, tde_response_curve, tde_step)
from .topology import (NetworkBuild, NetworkConfig, NetworkTopology, build_network,
                       ei_layer2, ei_windows, tde_pairs)

__version__ = "0.1.0"
