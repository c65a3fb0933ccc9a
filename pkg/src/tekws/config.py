"""Experiment configuration: JSON schema, defaults, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

ARCHITECTURES = ("formants", "ei1", "tde", "ei2")

DEFAULTS = {
    "dataset": {
        "source": "synthetic",          # synthetic | formant-csv | wav-dir
        "manifest": None,               # for formant-csv / wav-dir sources
        "classes": 2,
        "train_per_class": 100,
        "test_per_class": 50,
        "n_bands": 32,
        "mode": "mirrored-sweep",       # synthetic template family
        "duration_ms": [300.0, 30.0],
        "band_jitter": 1.0,
        "k": 4,
    },
    "keywords": [0],
    "architectures": list(ARCHITECTURES),
    "topology": {"n_inputs": 32, "d_max": 3, "window": 4, "duplicates": 6},
    "tde": {
        "tau_fac": 8.0,
        "tau_trig": 2.0,
        "w_fac": 1.0,
        "w_trig": None,                 # None -> calibrated at build time
        "tau_mem": 10.0,
        "theta": 1.0,
        "v_reset": 0.0,
        "refractory": 0.0,
        "calibration_target": 10,
    },
    "ei": {
        "tau_e": 1.5,
        "tau_i": 1.0,
        "w_e": 105.0,
        "w_i": -147.0,
        "tau_mem": 10.0,
        "v_reset": 0.0,
        "refractory": 0.0,
    },
    "mismatch": {"sigma_tau": 0.5, "sigma_w": 0.5},
    "classifier": {"lambda": 1.0, "tol": 1e-8, "max_iter": 10000},
    "analysis": {"repeats": 10, "k_max": 10},
    "seed": None,                       # mandatory
    "jobs": 1,
}

REQUIRED_KEYS = ("seed",)


class ConfigError(Exception):
    """Aggregated configuration problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _check_unknown(section_name, given, known, errors):
    for key in given:
        if key not in known:
            errors.append(f"unknown key {section_name}{key!r}")


def _merge(defaults, given, section_name, errors):
    out = copy.deepcopy(defaults)
    if not isinstance(given, dict):
        errors.append(f"section {section_name.rstrip('.')!r} must be a mapping")
        return out
    _check_unknown(section_name, given, defaults, errors)
    for key, value in given.items():
        if key in defaults:
            out[key] = value
    return out


def normalize_config(raw):
    """Fill defaults, validate ranges, and collect every problem found.

    Returns (normalized config dict, list of error strings). The normalized
    config echoes all filled defaults so a run records exactly what it used.
    """
    errors = []
    if not isinstance(raw, dict):
        return copy.deepcopy(DEFAULTS), ["top-level config must be a JSON object"]
    cfg = {}
    _check_unknown("", raw, DEFAULTS, errors)
    for section in ("dataset", "topology", "tde", "ei", "mismatch", "classifier", "analysis"):
        cfg[section] = _merge(DEFAULTS[section], raw.get(section, {}), section + ".", errors)
    for key in ("keywords", "architectures", "seed", "jobs"):
        cfg[key] = copy.deepcopy(raw.get(key, DEFAULTS[key]))

    if cfg["seed"] is None:
        errors.append("required key 'seed' is missing (runs must be reproducible)")
    elif not isinstance(cfg["seed"], int):
        errors.append("'seed' must be an integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        errors.append("'jobs' must be a positive integer")

    ds = cfg["dataset"]
    if ds["source"] not in ("synthetic", "formant-csv", "wav-dir"):
        errors.append(f"dataset.source must be synthetic|formant-csv|wav-dir, got {ds['source']!r}")
    if ds["source"] in ("formant-csv", "wav-dir"):
        if not ds["manifest"]:
            errors.append(f"dataset.source={ds['source']!r} requires dataset.manifest")
        elif not Path(ds["manifest"]).exists():
            errors.append(f"dataset.manifest path does not exist: {ds['manifest']}")
    if ds["source"] == "synthetic":
        if ds["mode"] not in ("random", "mirrored-sweep"):
            errors.append(f"dataset.mode must be random|mirrored-sweep, got {ds['mode']!r}")
        if ds["mode"] == "mirrored-sweep" and ds["classes"] != 2:
            errors.append("mirrored-sweep mode requires dataset.classes = 2")
        for key in ("classes", "train_per_class", "test_per_class", "n_bands"):
            if not isinstance(ds[key], int) or ds[key] < 1:
                errors.append(f"dataset.{key} must be a positive integer")

    topo = cfg["topology"]
    for key in ("n_inputs", "d_max", "window", "duplicates"):
        if not isinstance(topo[key], int) or topo[key] < 1:
            errors.append(f"topology.{key} must be a positive integer")
    if isinstance(topo["n_inputs"], int) and isinstance(ds.get("n_bands"), int) \
            and ds["source"] == "synthetic" and topo["n_inputs"] != ds["n_bands"]:
        errors.append("topology.n_inputs must equal dataset.n_bands")

    for name in ("tau_fac", "tau_trig", "tau_mem"):
        if not _positive_number(cfg["tde"][name]):
            errors.append(f"tde.{name} must be a positive number")
    for name in ("tau_e", "tau_i", "tau_mem"):
        if not _positive_number(cfg["ei"][name]):
            errors.append(f"ei.{name} must be a positive number")
    if _numeric(cfg["ei"]["tau_e"]) and _numeric(cfg["ei"]["tau_i"]) \
            and not cfg["ei"]["tau_e"] > cfg["ei"]["tau_i"]:
        errors.append("ei.tau_e must exceed ei.tau_i")
    if _numeric(cfg["ei"]["w_e"]) and _numeric(cfg["ei"]["w_i"]):
        if not (cfg["ei"]["w_e"] > 0 > cfg["ei"]["w_i"]):
            errors.append("need ei.w_e > 0 and ei.w_i < 0")
        elif cfg["ei"]["w_e"] + cfg["ei"]["w_i"] >= 0:
            errors.append("need ei.w_e + ei.w_i < 0 (net inhibition at spike onset)")

    for name in ("sigma_tau", "sigma_w"):
        sigma = cfg["mismatch"][name]
        if not _numeric(sigma) or not (0.0 <= sigma < 1.0):
            errors.append(f"mismatch.{name} must lie in [0, 1)")

    if not _positive_number(cfg["classifier"]["lambda"]) and cfg["classifier"]["lambda"] != 0:
        errors.append("classifier.lambda must be a non-negative number")
    if not _positive_number(cfg["classifier"]["tol"]):
        errors.append("classifier.tol must be a positive number")

    if not isinstance(cfg["keywords"], list) or not cfg["keywords"]:
        errors.append("'keywords' must be a non-empty list of class labels")
    if not isinstance(cfg["architectures"], list) or not cfg["architectures"]:
        errors.append("'architectures' must be a non-empty list")
    else:
        for arch in cfg["architectures"]:
            if arch not in ARCHITECTURES:
                errors.append(f"unknown architecture {arch!r} (choose from {ARCHITECTURES})")

    for name in ("repeats", "k_max"):
        if not isinstance(cfg["analysis"][name], int) or cfg["analysis"][name] < 1:
            errors.append(f"analysis.{name} must be a positive integer")

    return cfg, errors


def _numeric(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _positive_number(x):
    return _numeric(x) and x > 0


def load_config(path, seed_override=None, jobs_override=None):
    """Read a JSON config file, normalize it, and raise ConfigError on problems."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigError(["config file is empty; required keys: "
                           + ", ".join(REQUIRED_KEYS)
                           + " (all other sections have defaults)"])
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config is not valid JSON: {e}"]) from e
    if seed_override is not None:
        raw["seed"] = seed_override
    if jobs_override is not None:
        raw["jobs"] = jobs_override
    cfg, errors = normalize_config(raw)
    if errors:
        raise ConfigError(errors)
    return cfg


def config_hash(cfg) -> str:
    """Stable short hash of the normalized config."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
