"""Command-line harness: validate configs, run experiments, generate
synthetic datasets, and re-render figures.

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, config_hash, load_config
from .dataset import write_manifest
from .experiment import StageError, load_dataset, run_experiment
from .frontend import FormantFrame, write_formant_csv


def _add_common(parser):
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=None, help="worker pool size")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tekws",
        description="Spiking temporal-encoder keyword spotting experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file and echo the normalized form")
    _add_common(p)

    p = sub.add_parser("run", help="run the full pipeline and emit artifacts")
    _add_common(p)
    p.add_argument("--out", required=True, help="run output directory")

    p = sub.add_parser("synth", help="materialize the synthetic dataset as formant CSVs")
    _add_common(p)
    p.add_argument("--out", required=True, help="dataset output directory")

    p = sub.add_parser("plot", help="re-render the SVG figures of a finished run")
    p.add_argument("--run", required=True, help="run directory containing the CSVs")
    return parser


def cmd_validate(args):
    cfg = load_config(args.config, seed_override=args.seed, jobs_override=args.jobs)
    print(f"config ok (hash {config_hash(cfg)})")
    for key in ("dataset", "topology", "tde", "ei", "mismatch", "classifier", "analysis"):
        print(f"  {key}: {cfg[key]}")
    print(f"  keywords: {cfg['keywords']}  architectures: {cfg['architectures']}")
    print(f"  seed: {cfg['seed']}  jobs: {cfg['jobs']}")
    return 0


def cmd_run(args):
    cfg = load_config(args.config, seed_override=args.seed, jobs_override=args.jobs)
    result = run_experiment(cfg, Path(args.out))
    print(f"run complete: {result.out_dir} (config hash {result.cfg_hash})")
    for row in result.accuracy_rows:
        print(f"  keyword {row['keyword']} {row['architecture']:>8s} "
              f"{row['split']:>5s}: accuracy {row['accuracy']:.3f} "
              f"({row['n_samples']} samples)")
    return 0


def cmd_synth(args):
    cfg = load_config(args.config, seed_override=args.seed, jobs_override=args.jobs)
    if cfg["dataset"]["source"] != "synthetic":
        raise ConfigError(["synth requires dataset.source = 'synthetic'"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = load_dataset(cfg)
    entries = []
    for split, samples in (("train", train), ("test", test)):
        for i, sample in enumerate(samples):
            name = f"{split}_{i:05d}.csv"
            dense = sample.raster.dense()
            frames = [FormantFrame(tuple(int(b) for b in np.flatnonzero(dense[:, t])))
                      for t in range(sample.raster.n_bins)]
            write_formant_csv(frames, out / name)
            entries.append((name, sample.label, sample.speaker_id, split))
    write_manifest(out / "manifest.csv", entries)
    print(f"wrote {len(entries)} samples and manifest.csv to {out}")
    return 0


def cmd_plot(args):
    from .plots import render_run
    paths = render_run(Path(args.run))
    for p in paths:
        print(f"rendered {p}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"validate": cmd_validate, "run": cmd_run,
                "synth": cmd_synth, "plot": cmd_plot}
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print("configuration errors:", file=sys.stderr)
        for msg in e.errors:
            print(f"  - {msg}", file=sys.stderr)
        return 1
    except StageError as e:
        print(f"runtime error in stage {e.stage!r}: {e.cause}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
