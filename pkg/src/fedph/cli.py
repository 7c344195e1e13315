"""Command-line entry point.

Subcommands:
  generate-data --config <path> --out <dir>
  run           --config <path> --out <dir>
  bench-crypto  --bits <n> --dims <k[,k...]> --out <file>
  privacy-sweep --config <path> --eps <list> --out <dir>

The config file is a single JSON document mirroring ExperimentConfig field
names, plus "methods" (or "method") and "seeds"; unknown keys are errors.
The FEDPH_SEED environment variable overrides the seed list.  Exit code is
0 on success; failures print one machine-parseable line to stderr of the
form `error: <ExceptionType>: <message>` and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from . import paillier
from .datagen import DataConfig, generate, write_features_csv
from .federation import ExperimentConfig, head_param_count, run_experiment
from .mathcore import RngStream
from .metrics import MetricsRow, summarize, write_metrics_csv
from .model import OptimConfig
from .objective import LossConfig
from .privacy import DpConfig, noise_spec_for

BENCH_REPS = 20


class ConfigFileError(ValueError):
    pass


def _check_keys(obj: dict, allowed, where: str) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigFileError(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}"
        )


def _build_section(cls, obj: dict | None, where: str):
    if obj is None:
        return cls()
    names = [f.name for f in fields(cls)]
    _check_keys(obj, names, where)
    return cls(**obj)


_TOP_LEVEL_KEYS = (
    "method",
    "methods",
    "seeds",
    "out_dir",
    "rounds",
    "local_epochs",
    "data",
    "optim",
    "loss",
    "clip_bound",
    "backbone_dim",
    "embed_dim",
    "hidden_dim",
    "projection_depths",
    "dp",
    "noise_mode",
    "crypto",
    "crypto_bits",
    "crypto_honest_min",
    "aggregation",
    "fedprox_mu",
    "fedproto_weight",
)


def load_run_config(path) -> dict:
    """Parse and validate the JSON run config into a plain dict."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigFileError("config root must be a JSON object")
    _check_keys(raw, _TOP_LEVEL_KEYS, "config")
    methods = raw.get("methods")
    if methods is None:
        methods = [raw["method"]] if "method" in raw else ["fedph"]
    if not isinstance(methods, list) or not methods:
        raise ConfigFileError("methods must be a nonempty list")
    seeds = raw.get("seeds", [0])
    env_seed = os.environ.get("FEDPH_SEED")
    if env_seed:
        seeds = [int(s) for s in env_seed.split(",")]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigFileError("seeds must be a nonempty list")
    return {"raw": raw, "methods": methods, "seeds": [int(s) for s in seeds]}


def experiment_config(parsed: dict, method: str, seed: int) -> ExperimentConfig:
    """Materialize one ExperimentConfig for a (method, seed) pair."""
    raw = parsed["raw"]
    data = _build_section(DataConfig, raw.get("data"), "data")
    optim = _build_section(OptimConfig, raw.get("optim"), "optim")
    loss = _build_section(LossConfig, raw.get("loss"), "loss")
    dp = None
    if raw.get("dp") is not None:
        dp = _build_section(DpConfig, raw["dp"], "dp")
    depths = raw.get("projection_depths", 1)
    if isinstance(depths, list):
        depths = tuple(depths)
    kwargs = dict(
        method=method,
        seed=seed,
        data=data,
        optim=optim,
        loss=loss,
        dp=dp,
        projection_depths=depths,
    )
    for name in (
        "rounds",
        "local_epochs",
        "clip_bound",
        "backbone_dim",
        "embed_dim",
        "hidden_dim",
        "noise_mode",
        "crypto",
        "crypto_bits",
        "crypto_honest_min",
        "aggregation",
    ):
        if name in raw:
            kwargs[name] = raw[name]
    if method == "fedprox":
        kwargs["fedprox_mu"] = raw.get("fedprox_mu", 0.01)
    if method == "fedproto":
        kwargs["fedproto_weight"] = raw.get("fedproto_weight", 1.0)
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate_data(config_path, out_dir) -> int:
    with open(config_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    section = raw.get("data", raw) if isinstance(raw, dict) else None
    if section is None:
        raise ConfigFileError("config root must be a JSON object")
    data_cfg = _build_section(DataConfig, section, "data")
    datasets = generate(data_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": asdict(data_cfg), "files": []}
    for ds in datasets:
        name = f"client_{ds.client_id:03d}.csv"
        rows = write_features_csv([ds], out / name)
        manifest["files"].append(
            {
                "file": name,
                "client_id": ds.client_id,
                "condition": ds.condition,
                "rows": rows,
            }
        )
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    total = sum(e["rows"] for e in manifest["files"])
    print(f"wrote {len(datasets)} client files, {total} samples, to {out}")
    return 0


def cmd_run(config_path, out_dir) -> int:
    parsed = load_run_config(config_path)
    configs = [
        experiment_config(parsed, method, seed)
        for method in parsed["methods"]
        for seed in parsed["seeds"]
    ]  # validate everything before any run
    rows: list[MetricsRow] = []
    for cfg in configs:
        print(f"running method={cfg.method} seed={cfg.seed} ...", flush=True)
        try:
            rows.extend(run_experiment(cfg))
        except Exception as exc:
            raise RuntimeError(
                f"method={cfg.method} seed={cfg.seed}: {exc}"
            ) from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, out / "metrics.csv")
    summary = summarize(rows)
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(summary + "\n")
    print(summary)
    return 0


def cmd_bench_crypto(bits: int, dims: list[int], out_path) -> int:
    """Mean +/- std wall time of encrypting payloads of each size."""
    if not dims:
        raise ValueError("need at least one payload size")
    if any(d < 1 for d in dims):
        raise ValueError("payload sizes must be positive")
    rng = RngStream(0, 999)
    pk, _ = paillier.keygen(bits, 2, 2, rng)
    codec = paillier.FixedPointCodec(frac_bits=24, value_bound=1.0, max_summands=1)
    paillier.encrypt_vector(pk, np.zeros(4), codec, rng)  # warm the base table
    results = []
    for dim in dims:
        values = rng.uniform(-1.0, 1.0, dim)
        times = []
        for _ in range(BENCH_REPS):
            t0 = time.perf_counter()
            paillier.encrypt_vector(pk, values, codec, rng)
            times.append(time.perf_counter() - t0)
        results.append((dim, float(np.mean(times)), float(np.std(times))))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bits", "dim", "reps", "mean_s", "std_s", "ratio_to_first"])
        base = results[0][1]
        for dim, mean, std in results:
            writer.writerow(
                [bits, dim, BENCH_REPS, repr(mean), repr(std), repr(mean / base)]
            )
            print(
                f"bits={bits} dim={dim}: {mean:.4f}s +/- {std:.4f}s "
                f"(x{mean / base:.1f} vs dim {results[0][0]})"
            )
    return 0


def cmd_privacy_sweep(config_path, epsilons: list[float], out_dir) -> int:
    """Final accuracy of fedph under split vs unsplit noise at each epsilon,
    plus a no-noise control per seed."""
    parsed = load_run_config(config_path)
    raw = parsed["raw"]
    dp_raw = dict(raw.get("dp") or {})
    delta = dp_raw.get("delta", 1e-5)
    honest_min = dp_raw.get("honest_min", 3)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []

    def final_row(cfg) -> MetricsRow:
        rows = run_experiment(cfg)
        return rows[-1]

    for seed in parsed["seeds"]:
        base = experiment_config(
            {
                "raw": {
                    k: v for k, v in raw.items() if k not in ("dp", "methods", "method")
                },
                "methods": ["fedph"],
                "seeds": [seed],
            },
            "fedph",
            seed,
        )
        control = replace_cfg(base, dp=None, aggregation="uniform")
        control.validate()
        row = final_row(control)
        results.append(("inf", "none", seed, row.round, row.mean_accuracy, 0.0))
        for eps in epsilons:
            for mode in ("split", "local"):
                dp = DpConfig(
                    epsilon=eps,
                    delta=delta,
                    clip_bound=base.clip_bound,
                    honest_min=honest_min,
                    n_clients=base.data.n_clients,
                )
                cfg = replace_cfg(
                    base, dp=dp, noise_mode=mode, aggregation="uniform"
                )
                cfg.validate()
                row = final_row(cfg)
                std = _run_noise_std(cfg)
                print(
                    f"eps={eps} mode={mode} seed={seed}: "
                    f"acc={row.mean_accuracy:.4f} per-client noise std {std:.4g}"
                )
                results.append(
                    (repr(float(eps)), mode, seed, row.round, row.mean_accuracy, std)
                )
    with open(out / "privacy_sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["epsilon", "mode", "seed", "final_round", "final_mean_accuracy",
             "per_client_noise_std"]
        )
        for row in results:
            writer.writerow([row[0], row[1], row[2], row[3], repr(row[4]), repr(row[5])])
    print(f"wrote {len(results)} sweep rows to {out / 'privacy_sweep.csv'}")
    return 0


def replace_cfg(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)


def _run_noise_std(cfg: ExperimentConfig) -> float:
    """The per-client noise std a run actually applies, from its own data."""
    from fedph.federation import min_class_count

    data_cfg = replace(cfg.data, seed=cfg.seed, ensure_class_coverage=True)
    spec = noise_spec_for(cfg.dp, min_class_count(generate(data_cfg)))
    return spec.per_client_std if cfg.noise_mode == "split" else spec.full_std


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parse_eps(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        value = math.inf if part.lower() in ("inf", "infinity") else float(part)
        if value <= 0:
            raise ValueError(f"epsilon must be positive, got {part}")
        out.append(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedph",
        description="Prototype-sharing federated learning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write per-client feature CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run experiments and write metrics CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench-crypto", help="time payload encryption")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--dims", required=True, help="comma-separated payload sizes")
    p.add_argument("--out", required=True)

    p = sub.add_parser("privacy-sweep", help="accuracy across privacy budgets")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", required=True, help="comma-separated epsilons (inf ok)")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate-data":
            return cmd_generate_data(args.config, args.out)
        if args.command == "run":
            return cmd_run(args.config, args.out)
        if args.command == "bench-crypto":
            dims = [int(d) for d in args.dims.split(",")]
            return cmd_bench_crypto(args.bits, dims, args.out)
        if args.command == "privacy-sweep":
            return cmd_privacy_sweep(args.config, _parse_eps(args.eps), args.out)
        raise ValueError(f"unknown command {args.command}")
    except Exception as exc:  # noqa: BLE001 - single CLI failure funnel
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
