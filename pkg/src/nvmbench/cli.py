"""Command-line entry point.

Subcommands map one-to-one onto the experiment suite:

* ``sweep``       pattern-dependent write current (per-k sweep data)
* ``aging``       current/latency trace under repeated random writes
* ``endurance``   k-bit error histogram at one page
* ``fnw-compare`` paired endurance study with/without Flip-N-Write
* ``train``       differential-evolution training of the integer network
* ``infer``       single-image classification from a parameter file
* ``bench``       cross-technology latency/current table

Each subcommand accepts flags and/or a JSON config file (``--config``);
flags take precedence over the file, which takes precedence over defaults.
Config files are schema-validated: unknown keys and out-of-range values are
rejected. Results are written as canonical JSON plus CSV next to it, named
``<experiment>_<technology>_<seed>.{json,csv}`` under ``--out-dir`` (default:
``$NVMBENCH_OUT_DIR`` or the working directory).

Exit codes: 0 success, 2 usage error, 3 invalid configuration, 4 I/O
failure, 5 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, characterization, encoding, nn, reports, train as train_mod
from . import device as dev
from .profiles import ProfileError, Technology, default_profile, load_profile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_RUNTIME = 5

OUT_DIR_ENV = "NVMBENCH_OUT_DIR"

TECH_CHOICES = [t.value for t in Technology]

_INT = {"type": "integer"}
_SEED = {"type": "integer", "minimum": 0}

CONFIG_SCHEMAS = {
    "sweep": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "technology": {"enum": TECH_CHOICES},
            "cycles": {"type": "integer", "minimum": 1},
            "seed": _SEED,
        },
    },
    "aging": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "technology": {"enum": TECH_CHOICES},
            "cycles": {"type": "integer", "minimum": 1},
            "sample_every": {"type": "integer", "minimum": 1},
            "seed": _SEED,
        },
    },
    "endurance": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "technology": {"enum": TECH_CHOICES},
            "cycles": {"type": "integer", "minimum": 1},
            "fnw": {"type": "boolean"},
            "seed": _SEED,
        },
    },
    "fnw-compare": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "technology": {"enum": TECH_CHOICES},
            "cycles": {"type": "integer", "minimum": 1},
            "seeds": {"type": "array", "items": _SEED, "minItems": 1},
        },
    },
    "train": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "samples": {"type": "integer", "minimum": 2},
            "dark": {"type": "number", "minimum": 0, "maximum": 255},
            "bright": {"type": "number", "minimum": 0, "maximum": 255},
            "noise_sigma": {"type": "number", "minimum": 0},
            "dataset_seed": _SEED,
            "population_size": {"type": "integer", "minimum": 4},
            "differential_weight": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
            "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
            "generations": {"type": "integer", "minimum": 0},
            "seed": _SEED,
            "target_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        },
    },
    "infer": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "technology": {"enum": TECH_CHOICES},
            "seed": _SEED,
        },
    },
    "bench": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "profiles": {
                "oneOf": [
                    {"const": "default"},
                    {"type": "array", "items": {"type": "string"}, "minItems": 1},
                ]
            },
            "seed": _SEED,
        },
    },
}


class ConfigError(ValueError):
    pass


def _resolve_config(args, command: str, keys: dict) -> dict:
    """defaults < config file < explicit flags; validate the result."""
    config = dict(keys)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        try:
            jsonschema.validate(file_cfg, CONFIG_SCHEMAS[command])
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config file rejected: {exc.message}") from exc
        config.update(file_cfg)
    for key in keys:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            config[key] = flag
    try:
        jsonschema.validate({k: v for k, v in config.items() if v is not None},
                            CONFIG_SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.message}") from exc
    return config


def _out_dir(args) -> Path:
    out = getattr(args, "out_dir", None) or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _device_for(technology: str, seed: int) -> dev.DeviceInstance:
    return dev.create_device(default_profile(technology), seed=seed)


def _write_experiment(out_dir: Path, experiment: str, technology: str, seed,
                      payload: dict, csv_header, csv_rows) -> Path:
    json_path = out_dir / reports.experiment_filename(experiment, technology, seed, "json")
    reports.write_json(json_path, payload)
    reports.write_csv(out_dir / reports.experiment_filename(experiment, technology, seed, "csv"),
                      csv_header, csv_rows)
    return json_path


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    cfg = _resolve_config(args, "sweep", {"technology": "cbram", "cycles": 500, "seed": 1})
    profile = default_profile(cfg["technology"])

    def factory(k, initial_state):
        child = np.random.SeedSequence([cfg["seed"], k, 0 if initial_state == "zeros" else 1])
        return dev.create_device(profile, seed=child.generate_state(1)[0])

    result = characterization.run_pattern_sweep(factory, cycles=cfg["cycles"])
    payload = {"meta": reports.make_meta(cfg["seed"], {"command": "sweep", **cfg}),
               "result": result.to_json_dict()}
    rows = [[c.k, c.initial_state, c.mean_page_current, c.std_page_current, c.trials]
            for c in result.cells]
    path = _write_experiment(_out_dir(args), "sweep", cfg["technology"], cfg["seed"], payload,
                             ["k", "initial_state", "mean_page_current", "std_page_current", "trials"],
                             rows)
    print(path)
    return EXIT_OK


def cmd_aging(args) -> int:
    cfg = _resolve_config(args, "aging",
                          {"technology": "cbram", "cycles": 200_000, "sample_every": 100, "seed": 1})
    device = _device_for(cfg["technology"], cfg["seed"])
    trace = characterization.run_aging(device, cycles=cfg["cycles"], sample_every=cfg["sample_every"])
    payload = {"meta": reports.make_meta(cfg["seed"], {"command": "aging", **cfg}),
               "result": trace.to_json_dict()}
    rows = list(zip(trace.cycle_index.tolist(), trace.page_current.tolist(),
                    trace.page_latency_cycles.tolist(), trace.mean_wvw_attempts.tolist()))
    path = _write_experiment(_out_dir(args), "aging", cfg["technology"], cfg["seed"], payload,
                             ["cycle_index", "page_current", "page_latency_cycles", "mean_wvw_attempts"],
                             rows)
    print(path)
    return EXIT_OK


def cmd_endurance(args) -> int:
    cfg = _resolve_config(args, "endurance",
                          {"technology": "cbram", "cycles": 200_000, "fnw": False, "seed": 1})
    device = _device_for(cfg["technology"], cfg["seed"])
    encoder = encoding.FnwEncoder() if cfg["fnw"] else None
    hist = characterization.run_endurance(device, cycles=cfg["cycles"], encoder=encoder)
    payload = {"meta": reports.make_meta(cfg["seed"], {"command": "endurance", **cfg}),
               "result": hist.to_json_dict()}
    rows = [[addr] + hist.per_byte[addr, 1:].tolist() for addr in range(hist.per_byte.shape[0])]
    path = _write_experiment(_out_dir(args), "endurance", cfg["technology"], cfg["seed"], payload,
                             ["byte_addr"] + [f"count_{k}bit" for k in range(1, 9)], rows)
    print(path)
    return EXIT_OK


def cmd_fnw_compare(args) -> int:
    cfg = _resolve_config(args, "fnw-compare",
                          {"technology": "cbram", "cycles": 200_000, "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]})
    profile = default_profile(cfg["technology"])
    comparison = encoding.compare_endurance(profile, cycles=cfg["cycles"], seeds=cfg["seeds"])
    payload = {"meta": reports.make_meta(cfg["seeds"][0], {"command": "fnw-compare", **cfg}),
               "result": comparison.to_json_dict()}
    rows = [[f.seed, f.baseline_total, f.fnw_total, f.baseline_2bit, f.fnw_2bit,
             f.factor_total, f.factor_2bit] for f in comparison.per_seed]
    path = _write_experiment(_out_dir(args), "fnw_compare", cfg["technology"], cfg["seeds"][0], payload,
                             ["seed", "baseline_total", "fnw_total", "baseline_2bit", "fnw_2bit",
                              "factor_total", "factor_2bit"], rows)
    print(path)
    print(f"reduction_factor_2bit  (geo mean): {comparison.reduction_factor_2bit:.3f}")
    print(f"reduction_factor_total (geo mean): {comparison.reduction_factor_total:.3f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args, "train", {
        "samples": 209, "dark": 70.0, "bright": 185.0, "noise_sigma": 80.0, "dataset_seed": 7,
        "population_size": 40, "differential_weight": 0.7, "crossover_rate": 0.9,
        "generations": 300, "seed": 1, "target_accuracy": None,
    })
    dataset = train_mod.make_contrast_dataset(
        count=cfg["samples"], dark=cfg["dark"], bright=cfg["bright"],
        noise_sigma=cfg["noise_sigma"], seed=cfg["dataset_seed"])
    de_config = train_mod.DEConfig(
        population_size=cfg["population_size"],
        differential_weight=cfg["differential_weight"],
        crossover_rate=cfg["crossover_rate"],
        generations=cfg["generations"],
        seed=cfg["seed"],
        target_accuracy=cfg["target_accuracy"],
    )
    result = train_mod.de_train(dataset, de_config)
    out_dir = _out_dir(args)
    params_path = Path(args.out) if args.out else out_dir / f"params_{cfg['seed']}.bin"
    result.best.save(params_path)
    reports.write_csv(str(params_path) + ".history.csv", ["generation", "best_fitness"],
                      list(enumerate(result.history)))
    cfg_clean = {k: v for k, v in cfg.items() if v is not None}
    payload = {
        "meta": reports.make_meta(cfg["seed"], {"command": "train", **cfg_clean}),
        "result": {
            "accuracy": result.accuracy,
            "generations_run": result.generations_run,
            "history": result.history,
            "params_file": params_path.name,
        },
    }
    json_path = Path(str(params_path) + ".train.json")
    reports.write_json(json_path, payload)
    print(json_path)
    print(f"accuracy: {result.accuracy:.4f}")
    return EXIT_OK


def _load_image(path: str) -> np.ndarray:
    if path.lower().endswith(".png"):
        from PIL import Image

        with Image.open(path) as img:
            rgb = img.convert("RGB")
            if rgb.size != (train_mod.IMAGE_SIDE, train_mod.IMAGE_SIDE):
                raise ConfigError(f"image must be {train_mod.IMAGE_SIDE}x{train_mod.IMAGE_SIDE}, got {rgb.size}")
            return np.asarray(rgb, dtype=np.uint8).reshape(-1)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) != nn.INPUT_NEURONS:
        raise ConfigError(f"raw image file must be exactly {nn.INPUT_NEURONS} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8)


def cmd_infer(args) -> int:
    cfg = _resolve_config(args, "infer", {"technology": "sram", "seed": 1})
    params = nn.NNParameters.load(args.params)
    image = _load_image(args.image)
    device = _device_for(cfg["technology"], cfg["seed"])
    nn.store_parameters(device, params)
    report = nn.infer(device, image)
    payload = {
        "meta": reports.make_meta(cfg["seed"], {"command": "infer", **cfg}),
        "result": {
            "prediction": report.prediction,
            "hidden_activations": list(report.hidden_activations),
            "weight_load": {
                "byte_reads": report.weight_load.byte_reads,
                "latency_cycles": report.weight_load.latency_cycles,
                "current_au": report.weight_load.current_au,
            },
            "compute": {"mac_count": report.compute.mac_count, "cycles": report.compute.cycles},
        },
    }
    if args.out:
        reports.write_json(args.out, payload)
        print(args.out)
        print(f"prediction: {report.prediction}")
    else:
        sys.stdout.write(reports.canonical_json(payload))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _resolve_config(args, "bench", {"profiles": "default", "seed": 0})
    if cfg["profiles"] == "default":
        profiles = [default_profile(t) for t in TECH_CHOICES]
    else:
        profiles = [load_profile(p) for p in cfg["profiles"]]
    table = nn.benchmark_technologies(profiles, nn.NNParameters.zeros(),
                                      np.zeros(nn.INPUT_NEURONS, dtype=np.uint8), seed=cfg["seed"])
    payload = {"meta": reports.make_meta(cfg["seed"], {"command": "bench", **cfg}),
               "result": table.to_json_dict()}
    out = args.out or str(_out_dir(args) / "bench_table.json")
    reports.write_json(out, payload)
    print(table.to_text())
    print(out)
    return EXIT_OK


HANDLERS = {
    "sweep": cmd_sweep,
    "aging": cmd_aging,
    "endurance": cmd_endurance,
    "fnw-compare": cmd_fnw_compare,
    "train": cmd_train,
    "infer": cmd_infer,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmbench",
        description="Behavioral NVM characterization and benchmarking suite.")
    parser.add_argument("--version", action="version", version=f"nvmbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_tech=True):
        p.add_argument("--config", help="JSON config file (schema-validated)")
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
        if with_tech:
            p.add_argument("--technology", choices=TECH_CHOICES)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("sweep", help="pattern-dependent write current sweep")
    common(p)
    p.add_argument("--cycles", type=int, help="measured writes per (k, initial-state) cell")

    p = sub.add_parser("aging", help="write current/latency trace over cycling")
    common(p)
    p.add_argument("--cycles", type=int)
    p.add_argument("--sample-every", type=int)

    p = sub.add_parser("endurance", help="k-bit error histogram at one page")
    common(p)
    p.add_argument("--cycles", type=int)
    p.add_argument("--fnw", action="store_const", const=True, default=None,
                   help="write through the Flip-N-Write encoder")

    p = sub.add_parser("fnw-compare", help="paired endurance study with/without Flip-N-Write")
    p.add_argument("--config", help="JSON config file (schema-validated)")
    p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
    p.add_argument("--technology", choices=TECH_CHOICES)
    p.add_argument("--cycles", type=int)
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated seed list")

    p = sub.add_parser("train", help="train the integer network with differential evolution")
    p.add_argument("--config", help="JSON config file (schema-validated)")
    p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
    p.add_argument("--out", help="parameter file path (default <out-dir>/params_<seed>.bin)")
    p.add_argument("--samples", type=int)
    p.add_argument("--dark", type=float)
    p.add_argument("--bright", type=float)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--dataset-seed", type=int)
    p.add_argument("--population-size", type=int)
    p.add_argument("--differential-weight", type=float)
    p.add_argument("--crossover-rate", type=float)
    p.add_argument("--generations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--target-accuracy", type=float)

    p = sub.add_parser("infer", help="classify one image from a parameter file")
    common(p)
    p.add_argument("--params", required=True, help="5391-byte parameter file")
    p.add_argument("--image", required=True, help="768-byte raw image or 16x16 RGB PNG")
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("bench", help="cross-technology latency/current table")
    p.add_argument("--config", help="JSON config file (schema-validated)")
    p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or cwd)")
    p.add_argument("--profiles", nargs="+", help="'default' or profile JSON paths")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="table JSON path (default <out-dir>/bench_table.json)")
    return parser


def _normalize_bench_profiles(args) -> None:
    if getattr(args, "profiles", None) is not None:
        if args.profiles == ["default"]:
            args.profiles = "default"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors with exit code 2
        return int(exc.code or 0)
    _normalize_bench_profiles(args)
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, ProfileError, train_mod.DatasetError, ValueError) as exc:
        print(f"nvmbench: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nvmbench: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - defensive
        print(f"nvmbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
