"""End-to-end experiment harness: ingest, encode, classify, analyze, report.

A run is fully determined by its config and seed: rerunning emits
byte-identical CSV artifacts.
"""

from __future__ import annotations

import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .analysis import (mean_spikes_per_utterance, permutation_importance,
                       select_few, single_neuron_scores)
from .config import ConfigError, config_hash
from .dataset import (LabeledSample, balanced_indices, derive_seed,
                      read_manifest, synth_keyword_dataset)
from .ei import EiElementParams, MismatchSpec, simulate_ei_layer
from .frontend import encode_audio, encode_formant_spikes, load_wav, read_formant_csv
from .raster import spike_counts
from .readout import FeatureMatrix, accuracy, fit_logreg, save_model
from .tde import TdeParams, simulate_tde_layer
from .topology import NetworkBuild, NetworkConfig, build_network

LAYER_ORDER = ("formants", "tde", "ei1", "ei2")
ARCH_LAYERS = {
    "formants": ("formants",),
    "ei1": ("formants", "ei1"),
    "tde": ("formants", "tde"),
    "ei2": ("formants", "ei1", "ei2"),
    "all": ("formants", "tde", "ei1", "ei2"),
}


class StageError(Exception):
    """A pipeline stage failed; carries the stage name for reporting."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class RunResult:
    out_dir: Path
    cfg: dict
    cfg_hash: str
    build: NetworkBuild
    features: dict          # split -> layer -> (n_samples, n_units) int matrix
    labels: dict            # split -> label array
    accuracy_rows: list


def build_from_config(cfg) -> NetworkBuild:
    topo_cfg = NetworkConfig(**cfg["topology"])
    tde_cfg = dict(cfg["tde"])
    target = tde_cfg.pop("calibration_target")
    w_trig = tde_cfg.pop("w_trig")
    tde_nominal = TdeParams(**tde_cfg, w_trig=w_trig if w_trig is not None else 1.0)
    ei_cfg = dict(cfg["ei"])
    ei_nominal = EiElementParams(tau_e=ei_cfg["tau_e"], tau_i=ei_cfg["tau_i"],
                                 w_e=ei_cfg["w_e"], w_i=ei_cfg["w_i"])
    mismatch = MismatchSpec(sigma_tau=cfg["mismatch"]["sigma_tau"],
                            sigma_w=cfg["mismatch"]["sigma_w"],
                            seed=derive_seed(cfg["seed"], "mismatch"))
    return build_network(topo_cfg, tde_nominal, ei_nominal, mismatch,
                         tau_mem=ei_cfg["tau_mem"], tde_target_count=target,
                         calibrate_tde=w_trig is None)


def load_dataset(cfg):
    """Materialize (train samples, test samples) from the configured source."""
    ds = cfg["dataset"]
    if ds["source"] == "synthetic":
        out = {}
        for split, per_class in (("train", ds["train_per_class"]),
                                 ("test", ds["test_per_class"])):
            out[split] = synth_keyword_dataset(
                ds["classes"], per_class, ds["n_bands"],
                duration_ms=tuple(ds["duration_ms"]), k=ds["k"],
                band_jitter=ds["band_jitter"], mode=ds["mode"],
                seed=derive_seed(cfg["seed"], "synth", split))
        return out["train"], out["test"]
    entries = read_manifest(ds["manifest"])
    base = Path(ds["manifest"]).parent
    n_bands = cfg["topology"]["n_inputs"]
    train, test = [], []
    for path, label, speaker, split in entries:
        full = base / path
        if ds["source"] == "formant-csv":
            frames = read_formant_csv(full)
            raster = encode_formant_spikes(frames, n_bands)
        else:
            samples, rate = load_wav(full)
            raster = encode_audio(samples, rate, n_bands=n_bands, k=ds["k"])
        sample = LabeledSample(raster=raster, label=label, speaker_id=speaker)
        (train if split == "train" else test).append(sample)
    if not train or not test:
        raise ValueError("manifest must provide both train and test samples")
    return train, test


def _wiring(build):
    topo = build.topology
    w1 = np.array([topo.layer1_inputs(i) for i in range(len(topo.ei_layer1))])
    w2 = np.array([topo.layer2_inputs(i) for i in range(len(topo.ei_layer2))])
    return w1, w2


def encode_sample_features(build: NetworkBuild, raster):
    """Spike counts of every layer for one input raster."""
    if raster.n_channels != build.topology.n_inputs:
        raise ValueError(
            f"raster has {raster.n_channels} channels, network expects "
            f"{build.topology.n_inputs}")
    w1, w2 = _wiring(build)
    out = {"formants": spike_counts(raster).counts}
    tde_raster = simulate_tde_layer(build.tde_params, raster, build.topology.tde_pairs)
    out["tde"] = spike_counts(tde_raster).counts
    ei1_raster = simulate_ei_layer(build.ei1_neurons, w1, raster)
    out["ei1"] = spike_counts(ei1_raster).counts
    ei2_raster = simulate_ei_layer(build.ei2_neurons, w2, ei1_raster)
    out["ei2"] = spike_counts(ei2_raster).counts
    return out


_WORKER_BUILD = None


def _init_worker(build):
    global _WORKER_BUILD
    _WORKER_BUILD = build


def _encode_worker(args):
    idx, speaker, raster = args
    try:
        return encode_sample_features(_WORKER_BUILD, raster)
    except Exception as e:
        raise RuntimeError(f"encoding failed for sample {idx} ({speaker}): {e}") from e


def encode_features(build, samples, jobs=1):
    """Per-layer spike-count matrices for a sample list (rows in order)."""
    tasks = [(i, s.speaker_id, s.raster) for i, s in enumerate(samples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(build,)) as pool:
            per_sample = list(pool.map(_encode_worker, tasks, chunksize=8))
    else:
        _init_worker(build)
        per_sample = [_encode_worker(t) for t in tasks]
    return {layer: np.vstack([c[layer] for c in per_sample])
            for layer in LAYER_ORDER}


def architecture_matrix(layer_mats, arch) -> FeatureMatrix:
    """Stack the architecture's layers (input channels first, bypass style)."""
    layers = ARCH_LAYERS[arch]
    values = np.hstack([layer_mats[l] for l in layers])
    columns = tuple((l, u) for l in layers for u in range(layer_mats[l].shape[1]))
    return FeatureMatrix(values=values, columns=columns)


def _keyword_labels(labels, keyword):
    return (np.asarray(labels) == keyword).astype(np.int64)


def run_experiment(cfg, out_dir):
    """Execute the full pipeline and emit all artifacts into out_dir.

    Raises StageError on failure; partial outputs stay on disk next to a
    FAILED marker naming the stage.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    seed = cfg["seed"]
    stage = "setup"

    def fail(exc):
        (out_dir / "FAILED").write_text(
            f"stage={stage}\nerror={exc}\n\n{traceback.format_exc()}",
            encoding="utf-8")
        return StageError(stage, exc)

    try:
        stage = "build-network"
        build = build_from_config(cfg)

        stage = "dataset"
        train_samples, test_samples = load_dataset(cfg)
        labels = {
            "train": np.array([s.label for s in train_samples]),
            "test": np.array([s.label for s in test_samples]),
        }
        speakers = {
            "train": [s.speaker_id for s in train_samples],
            "test": [s.speaker_id for s in test_samples],
        }

        stage = "encode"
        features = {
            "train": encode_features(build, train_samples, jobs=cfg["jobs"]),
            "test": encode_features(build, test_samples, jobs=cfg["jobs"]),
        }

        stage = "report-structure"
        _write_topology_csv(out_dir / "topology.csv", build, chash, seed)
        _write_ei_parameters_csv(out_dir / "ei_parameters.csv", build, chash, seed)
        for split in ("train", "test"):
            _write_features_csv(out_dir / f"features_{split}.csv", features[split],
                                labels[split], speakers[split], chash, seed)

        stage = "classify"
        lam = cfg["classifier"]["lambda"]
        tol = cfg["classifier"]["tol"]
        max_iter = cfg["classifier"]["max_iter"]
        models_dir = out_dir / "models"
        models_dir.mkdir(exist_ok=True)
        accuracy_rows = []
        balanced = {}
        for keyword in cfg["keywords"]:
            balanced[keyword] = {}
            for split in ("train", "test"):
                pos, neg = balanced_indices(labels[split], keyword, seed=seed, role=split)
                balanced[keyword][split] = np.array(pos + neg, dtype=np.int64)
            for arch in cfg["architectures"]:
                fm = {s: architecture_matrix(features[s], arch) for s in ("train", "test")}
                rows = {s: balanced[keyword][s] for s in ("train", "test")}
                y = {s: _keyword_labels(labels[s][rows[s]], keyword) for s in ("train", "test")}
                model = fit_logreg(
                    FeatureMatrix(fm["train"].values[rows["train"]], fm["train"].columns),
                    y["train"], lam=lam, tol=tol, max_iter=max_iter)
                save_model(model, models_dir / f"keyword{keyword}_{arch}.csv",
                           extra={"keyword": keyword, "architecture": arch,
                                  "config_hash": chash, "seed": seed})
                for split in ("train", "test"):
                    acc = accuracy(model, fm[split].values[rows[split]], y[split])
                    accuracy_rows.append({
                        "keyword": keyword, "architecture": arch, "split": split,
                        "n_samples": int(rows[split].size), "accuracy": float(acc)})
        _write_rows(out_dir / "accuracy.csv",
                    ("keyword", "architecture", "split", "n_samples", "accuracy"),
                    accuracy_rows, chash, seed)

        stage = "importance"
        repeats = cfg["analysis"]["repeats"]
        importance_rows = []
        for keyword in cfg["keywords"]:
            archs = list(cfg["architectures"])
            if "all" not in archs:
                archs.append("all")
            for arch in archs:
                fm = {s: architecture_matrix(features[s], arch) for s in ("train", "test")}
                rows = {s: balanced[keyword][s] for s in ("train", "test")}
                y = {s: _keyword_labels(labels[s][rows[s]], keyword) for s in ("train", "test")}
                model = fit_logreg(fm["train"].values[rows["train"]], y["train"],
                                   lam=lam, tol=tol, max_iter=max_iter)
                report = permutation_importance(
                    model, fm["test"].values[rows["test"]], y["test"],
                    repeats=repeats, seed=derive_seed(seed, "importance", keyword, arch))
                for (layer, unit), imp, std in zip(fm["train"].columns,
                                                   report.importances, report.stds):
                    importance_rows.append({
                        "keyword": keyword, "architecture": arch, "layer": layer,
                        "unit": unit, "importance_mean": float(imp),
                        "importance_std": float(std), "repeats": repeats, "split": "test"})
        _write_rows(out_dir / "importance.csv",
                    ("keyword", "architecture", "layer", "unit", "importance_mean",
                     "importance_std", "repeats", "split"),
                    importance_rows, chash, seed)

        stage = "few-neuron"
        single_rows, few_rows = [], []
        k_max = cfg["analysis"]["k_max"]
        for keyword in cfg["keywords"]:
            rows = {s: balanced[keyword][s] for s in ("train", "test")}
            y = {s: _keyword_labels(labels[s][rows[s]], keyword) for s in ("train", "test")}
            for layer in LAYER_ORDER:
                Xtr = features["train"][layer][rows["train"]].astype(np.float64)
                Xte = features["test"][layer][rows["test"]].astype(np.float64)
                scores = single_neuron_scores(Xtr, y["train"], Xte, y["test"],
                                              lam=lam, tol=tol, max_iter=max_iter)
                for u in range(Xtr.shape[1]):
                    single_rows.append({
                        "keyword": keyword, "layer": layer, "unit": u,
                        "train_accuracy": float(scores["train_accuracy"][u]),
                        "test_accuracy": float(scores["test_accuracy"][u]),
                        "tp_share": float(scores["tp_share"][u]),
                        "tn_share": float(scores["tn_share"][u]),
                        "degenerate": bool(scores["degenerate"][u])})
                # layer-only model importance drives the few-neuron ordering
                layer_model = fit_logreg(Xtr, y["train"], lam=lam, tol=tol, max_iter=max_iter)
                layer_report = permutation_importance(
                    layer_model, Xte, y["test"], repeats=repeats,
                    seed=derive_seed(seed, "importance-layer", keyword, layer))
                selection = select_few(Xtr, y["train"], layer_report.importances,
                                       k_max=k_max, X_test=Xte, y_test=y["test"],
                                       lam=lam, tol=tol, max_iter=max_iter)
                for k in range(selection.train_accuracy.size):
                    few_rows.append({
                        "keyword": keyword, "layer": layer, "k": k + 1,
                        "unit": selection.order[k],
                        "train_accuracy": float(selection.train_accuracy[k]),
                        "test_accuracy": float(selection.test_accuracy[k])})
        _write_rows(out_dir / "single_neuron.csv",
                    ("keyword", "layer", "unit", "train_accuracy", "test_accuracy",
                     "tp_share", "tn_share", "degenerate"),
                    single_rows, chash, seed)
        _write_rows(out_dir / "few_neuron.csv",
                    ("keyword", "layer", "k", "unit", "train_accuracy", "test_accuracy"),
                    few_rows, chash, seed)

        stage = "spike-stats"
        spike_rows = []
        for keyword in cfg["keywords"]:
            pos_rows = {s: np.nonzero(labels[s] == keyword)[0] for s in ("train", "test")}
            for layer in LAYER_ORDER:
                counts = np.vstack([features[s][layer][pos_rows[s]] for s in ("train", "test")])
                means, stds = mean_spikes_per_utterance(counts)
                for u in range(means.size):
                    spike_rows.append({
                        "keyword": keyword, "layer": layer, "unit": u,
                        "mean_spikes": float(means[u]), "std_spikes": float(stds[u])})
        _write_rows(out_dir / "spikes_per_utterance.csv",
                    ("keyword", "layer", "unit", "mean_spikes", "std_spikes"),
                    spike_rows, chash, seed)

        stage = "config-echo"
        echo = dict(cfg)
        echo["config_hash"] = chash
        echo["calibration"] = {
            "tde_w_trig": build.tde_params.w_trig,
            "ei_theta": build.ei_theta,
        }
        echo["layer_sizes"] = build.layer_sizes()
        with open(out_dir / "config_echo.json", "w", encoding="utf-8", newline="\n") as f:
            json.dump(echo, f, indent=2, sort_keys=True)
            f.write("\n")

        stage = "plots"
        plots.render_run(out_dir, cfg_hash=chash)

    except ConfigError:
        raise
    except StageError:
        raise
    except Exception as e:
        raise fail(e) from e

    return RunResult(out_dir=out_dir, cfg=cfg, cfg_hash=chash, build=build,
                     features=features, labels=labels, accuracy_rows=accuracy_rows)


def _write_rows(path, fieldnames, rows, chash, seed):
    from .reports import write_rows
    write_rows(path, fieldnames, rows, chash, seed)


def _write_topology_csv(path, build, chash, seed):
    topo = build.topology
    rows = []
    for i, (fac, trig) in enumerate(topo.tde_pairs):
        rows.append({"layer": "tde", "unit": i, "inputs": f"{fac}|{trig}"})
    for i in range(len(topo.ei_layer1)):
        rows.append({"layer": "ei1", "unit": i,
                     "inputs": "|".join(str(c) for c in topo.layer1_inputs(i))})
    for i in range(len(topo.ei_layer2)):
        rows.append({"layer": "ei2", "unit": i,
                     "inputs": "|".join(str(c) for c in topo.layer2_inputs(i))})
    _write_rows(path, ("layer", "unit", "inputs"), rows, chash, seed)


def _write_ei_parameters_csv(path, build, chash, seed):
    rows = []
    for layer, neurons in (("ei1", build.ei1_neurons), ("ei2", build.ei2_neurons)):
        for n, neuron in enumerate(neurons):
            for slot, el in enumerate(neuron.elements):
                rows.append({"neuron_id": f"{layer}:{n}", "element_id": slot,
                             "tau_e": el.tau_e, "tau_i": el.tau_i,
                             "w_e": el.w_e, "w_i": el.w_i, "theta": neuron.theta})
    _write_rows(path, ("neuron_id", "element_id", "tau_e", "tau_i", "w_e", "w_i", "theta"),
                rows, chash, seed)


def _write_features_csv(path, layer_mats, labels, speakers, chash, seed):
    fieldnames = ["sample", "label", "speaker"]
    for layer in LAYER_ORDER:
        fieldnames.extend(f"{layer}:{u}" for u in range(layer_mats[layer].shape[1]))
    rows = []
    for i in range(labels.size):
        row = {"sample": i, "label": int(labels[i]), "speaker": speakers[i]}
        for layer in LAYER_ORDER:
            for u in range(layer_mats[layer].shape[1]):
                row[f"{layer}:{u}"] = int(layer_mats[layer][i, u])
        rows.append(row)
    _write_rows(path, tuple(fieldnames), rows, chash, seed)


def read_features_csv(path):
    """Load a persisted feature matrix back into per-layer arrays."""
    from .reports import read_rows
    _, rows = read_rows(path)
    labels = np.array([int(r["label"]) for r in rows])
    speakers = [r["speaker"] for r in rows]
    layer_cols = {layer: [] for layer in LAYER_ORDER}
    for name in rows[0]:
        if ":" in name:
            layer, unit = name.split(":")
            layer_cols[layer].append((int(unit), name))
    mats = {}
    for layer in LAYER_ORDER:
        cols = sorted(layer_cols[layer])
        mats[layer] = np.array([[float(r[name]) for _, name in cols] for r in rows])
    return mats, labels, speakers


def recompute_accuracy(run_dir):
    """Re-run the classification stage from the persisted feature matrices.

    Writes accuracy_refit.csv; with an untouched run directory its rows are
    identical to accuracy.csv.
    """
    run_dir = Path(run_dir)
    with open(run_dir / "config_echo.json", "r", encoding="utf-8") as f:
        echo = json.load(f)
    chash, seed = echo["config_hash"], echo["seed"]
    lam = echo["classifier"]["lambda"]
    tol = echo["classifier"]["tol"]
    max_iter = echo["classifier"]["max_iter"]
    features, labels = {}, {}
    for split in ("train", "test"):
        features[split], labels[split], _ = read_features_csv(run_dir / f"features_{split}.csv")
    rows_out = []
    for keyword in echo["keywords"]:
        rows = {}
        for split in ("train", "test"):
            pos, neg = balanced_indices(labels[split], keyword, seed=seed, role=split)
            rows[split] = np.array(pos + neg, dtype=np.int64)
        for arch in echo["architectures"]:
            fm = {s: architecture_matrix(features[s], arch) for s in ("train", "test")}
            y = {s: _keyword_labels(labels[s][rows[s]], keyword) for s in ("train", "test")}
            model = fit_logreg(fm["train"].values[rows["train"]], y["train"],
                               lam=lam, tol=tol, max_iter=max_iter)
            for split in ("train", "test"):
                acc = accuracy(model, fm[split].values[rows[split]], y[split])
                rows_out.append({
                    "keyword": keyword, "architecture": arch, "split": split,
                    "n_samples": int(rows[split].size), "accuracy": float(acc)})
    _write_rows(run_dir / "accuracy_refit.csv",
                ("keyword", "architecture", "split", "n_samples", "accuracy"),
                rows_out, chash, seed)
    return run_dir / "accuracy_refit.csv"
