"""Command-line interface.

Subcommands cover the full pipeline: ``datagen`` (synthetic bundles),
``encode`` (provider-side Bloom filter encoding + LDP perturbation into
exchange files), ``cluster`` (k-means on pooled exchange files),
``estimate`` (cardinality from exchange files), ``grid`` (experiment
matrix) and ``theory-curves`` (closed-form noise curves).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen as dg
from .clustering import ReferenceConfig, SweepSettings, estimate_cardinality, kmeans
from .encoding import EncodingParams, encode_dataset
from .grid import GridConfig, derive_seed, run_cell, write_grid_csv
from .ldp import PrivacyParams, perturb_dataset, read_exchange, write_exchange

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class ConfigError(Exception):
    """Invalid parameters or unreadable configuration."""


class DataError(Exception):
    """Missing or malformed input data files."""


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def _merge(args: argparse.Namespace, config: dict) -> argparse.Namespace:
    """Config file values fill in flags the user did not set (flags win)."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            setattr(args, attr, value)
    return args


def _encoding_params(args) -> EncodingParams:
    return EncodingParams(
        q=args.q if args.q is not None else 2,
        ell=args.ell if args.ell is not None else 200,
        num_hashes=args.hashes if args.hashes is not None else 20,
        hash_seed=args.hash_seed if args.hash_seed is not None else 0,
        numeric_interval=args.numeric_interval if args.numeric_interval is not None else 0.0,
        numeric_step=args.numeric_step if args.numeric_step is not None else 1.0,
    )


def _add_encoding_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=int, help="q-gram length (default 2)")
    p.add_argument("--ell", type=int, help="Bloom filter length in bits (default 200)")
    p.add_argument("--hashes", type=int, help="hash functions per token (default 20)")
    p.add_argument("--hash-seed", type=int, help="keyed-hash seed (default 0)")
    p.add_argument("--numeric-interval", type=float, help="numeric neighbourhood half-width")
    p.add_argument("--numeric-step", type=float, help="numeric neighbourhood grid step")


def _read_provider_csvs(schema_path, csv_paths):
    try:
        schema = dg.read_schema(schema_path)
    except FileNotFoundError as e:
        raise DataError(f"schema file not found: {schema_path}") from e
    except (KeyError, json.JSONDecodeError, TypeError) as e:
        raise DataError(f"malformed schema file {schema_path}: {e}") from e
    providers = []
    for path in csv_paths:
        try:
            providers.append(dg.read_records_csv(path, schema))
        except FileNotFoundError as e:
            raise DataError(f"records file not found: {path}") from e
        except ValueError as e:
            raise DataError(str(e)) from e
    return schema, providers


def _read_exchanges(paths):
    datasets = []
    for path in paths:
        try:
            datasets.append(read_exchange(path))
        except FileNotFoundError as e:
            raise DataError(f"exchange file not found: {path}") from e
        except ValueError as e:
            raise DataError(str(e)) from e
    ells = {d.ell for d in datasets}
    if len(ells) > 1:
        raise DataError(f"exchange files disagree on ell: {sorted(ells)}")
    return datasets


def _attach_sidecars(datasets, sidecar_paths):
    if not sidecar_paths:
        return
    if len(sidecar_paths) != len(datasets):
        raise ConfigError("need one truth sidecar per exchange file")
    for ds, path in zip(datasets, sidecar_paths):
        try:
            truth = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise DataError(f"sidecar not found: {path}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"malformed sidecar {path}: {e}") from e
        if len(truth) != len(ds):
            raise DataError(f"sidecar {path} has {len(truth)} ids for {len(ds)} filters")
        ds.ground_truth = [str(t) for t in truth]


# --- subcommands ------------------------------------------------------------


def cmd_datagen(args) -> int:
    seed = args.seed if args.seed is not None else 0
    n = args.entities if args.entities is not None else 171
    dups = args.duplicates if args.duplicates is not None else 1
    n_prov = args.providers if args.providers is not None else 2
    corruption = args.corruption if args.corruption is not None else 0.0
    cfg = dg.CorruptionConfig(
        record_corruption_fraction=corruption,
        min_edits=args.min_edits if args.min_edits is not None else 1,
        max_edits=args.max_edits if args.max_edits is not None else 2,
        seed=seed,
    )
    entities = dg.generate_entities(n, seed=seed)
    records = dg.duplicate_and_corrupt(entities, dups, cfg)
    bundle = dg.split_providers(records, n_prov, seed=seed)
    bundle.manifest.update(
        {
            "seed": seed,
            "entities": n,
            "duplicates_per_entity": dups,
            "record_corruption_fraction": corruption,
        }
    )
    files = dg.write_bundle(args.out_dir, bundle)
    print(f"wrote bundle with k_true={bundle.k_true} to {args.out_dir}")
    for pid, path in files["providers"].items():
        print(f"  {pid}: {path}")
    return EXIT_OK


def cmd_encode(args) -> int:
    if args.epsilon is None:
        raise ConfigError("--epsilon is required (filters are released perturbed)")
    schema, providers = _read_provider_csvs(args.schema, [args.input])
    records = providers[0]
    params = _encoding_params(args)
    seed = args.seed if args.seed is not None else 0
    filters = encode_dataset(records, schema, params)
    truth = [r.entity_id for r in records]
    ds = perturb_dataset(
        filters,
        PrivacyParams(epsilon=args.epsilon, seed=seed),
        provider_id=args.provider or "",
        ground_truth=truth if all(t is not None for t in truth) else None,
    )
    write_exchange(args.out, ds)
    print(f"wrote {len(ds)} filters (ell={ds.ell}, epsilon={ds.epsilon}) to {args.out}")
    if args.truth_sidecar:
        if ds.ground_truth is None:
            raise DataError("input has no entity_id column; cannot write truth sidecar")
        Path(args.truth_sidecar).write_text(json.dumps(ds.ground_truth) + "\n")
        print(f"wrote truth sidecar to {args.truth_sidecar}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    datasets = _read_exchanges(args.inputs)
    X = np.concatenate([d.filters for d in datasets]).astype(np.float64)
    if args.k is None or not 1 <= args.k <= X.shape[0]:
        raise ConfigError(f"--k must be in [1, {X.shape[0]}]")
    result = kmeans(X, args.k, seed=args.seed if args.seed is not None else 0)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["provider", "row", "cluster"])
        i = 0
        for ds in datasets:
            for row in range(len(ds)):
                writer.writerow([ds.provider_id, row, int(result.assignments[i])])
                i += 1
    print(f"k={result.k} inertia={result.inertia:.3f} iterations={result.iterations}")
    print(f"wrote assignments to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    datasets = _read_exchanges(args.inputs)
    _attach_sidecars(datasets, args.truth_sidecars)
    seed = args.seed if args.seed is not None else 0
    n_pool_estimate = sum(len(d) for d in datasets)
    k_min = args.k_min if args.k_min is not None else 2
    k_max = args.k_max if args.k_max is not None else 0
    cfg = ReferenceConfig(
        method=args.method or "B",
        pick_ratio=args.pick_ratio if args.pick_ratio is not None else 0.1,
        dummy_ratio=args.dummy_ratio if args.dummy_ratio is not None else 0.1,
        p_flip=args.p_flip if args.p_flip is not None else 0.1,
        seed=seed,
    )
    n_ref = max(1, round(cfg.pick_ratio * n_pool_estimate))
    n_dum = max(n_ref, round(cfg.dummy_ratio * n_pool_estimate))
    if not k_max:
        k_max = n_pool_estimate + n_ref + n_dum
    settings = SweepSettings(seed=seed, compute_silhouette=bool(args.silhouette))
    report = estimate_cardinality(datasets, cfg, range(k_min, k_max + 1), settings)

    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "k_star": report.k_star,
        "k_true": report.k_true,
        "error": report.error,
        "error_rate": report.error_rate,
        "k_silhouette": report.k_silhouette,
        "config": report.config,
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "purity_total", "inertia", "silhouette"])
        for e in report.sweep.entries:
            writer.writerow([e.k, e.purity_total, e.inertia, "" if e.silhouette is None else e.silhouette])
    print(f"K* = {report.k_star}" + (f" (k_true={report.k_true}, error_rate={report.error_rate:.4f})" if report.k_true is not None else ""))
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'sweep.csv'}")
    return EXIT_OK


def _parse_float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(","))


def _pf_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise ConfigError("p-flip step must be > 0")
    n = int(round((stop - start) / step))
    grid = tuple(round(start + i * step, 10) for i in range(n + 1))
    if not grid:
        raise ConfigError("empty p_flip grid")
    return grid


def cmd_grid(args) -> int:
    if not args.bundle_dir:
        raise ConfigError("--bundle-dir is required")
    bundle = Path(args.bundle_dir)
    manifest_path = bundle / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError as e:
        raise DataError(f"manifest not found: {manifest_path}") from e
    provider_files = manifest.get("files", {}).get("providers", {})
    if not provider_files:
        raise DataError(f"{manifest_path} lists no provider files")
    schema, providers = _read_provider_csvs(
        manifest["files"]["schema"], [provider_files[p] for p in sorted(provider_files)]
    )
    params = _encoding_params(args)
    seed = args.seed if args.seed is not None else 0
    epsilons = _parse_float_list(args.epsilons if args.epsilons is not None else "1,2,3,4,5,10")
    p_flips = _pf_grid(
        args.p_flip_start if args.p_flip_start is not None else 0.10,
        args.p_flip_stop if args.p_flip_stop is not None else 0.30,
        args.p_flip_step if args.p_flip_step is not None else 0.01,
    )
    methods = tuple((args.methods or "A,B").split(","))
    cfg = GridConfig(
        epsilons=epsilons,
        p_flips=p_flips,
        methods=methods,
        reps=args.reps if args.reps is not None else 1,
        k_min=args.k_min if args.k_min is not None else 2,
        k_max=args.k_max if args.k_max is not None else 0,
        pick_ratio=args.pick_ratio if args.pick_ratio is not None else 0.1,
        dummy_ratio=args.dummy_ratio if args.dummy_ratio is not None else 0.1,
        master_seed=seed,
        compute_silhouette=bool(args.silhouette),
    )

    out_dir = Path(args.out_dir or ".")
    exchange_dir = out_dir / "exchange"
    exchange_dir.mkdir(parents=True, exist_ok=True)

    filters = [encode_dataset(rs, schema, params) for rs in providers]
    truth = [[r.entity_id for r in rs] for rs in providers]
    have_truth = all(all(t is not None for t in ts) for ts in truth)

    rows = []
    failures = []
    for epsilon in cfg.epsilons:
        for rep in range(cfg.reps):
            # provider-side release: one exchange file per provider
            pseed = derive_seed(cfg.master_seed, 0xE9, round(epsilon * 1000), rep)
            privacy = PrivacyParams(epsilon=epsilon, seed=pseed)
            paths = []
            for i, B in enumerate(filters):
                ds = perturb_dataset(B, privacy, provider_id=f"p{i}")
                path = exchange_dir / f"eps{epsilon}_rep{rep}_p{i}.bf"
                write_exchange(path, ds)
                paths.append(path)
            # linkage-unit side: consume only the exchange files
            datasets = _read_exchanges(paths)
            if have_truth:
                for i, ds in enumerate(datasets):
                    ds.ground_truth = list(truth[i])
            for method in cfg.methods:
                for p_flip in cfg.p_flips:
                    try:
                        rows.append(run_cell(datasets, method, epsilon, p_flip, rep, cfg))
                    except Exception as e:  # record the failed cell, keep the grid going
                        failures.append(
                            {"method": method, "epsilon": epsilon, "p_flip": p_flip, "rep": rep, "error": str(e)}
                        )
    rows.sort(key=lambda r: (r.method, r.epsilon, r.p_flip, r.rep))
    csv_path = out_dir / "grid.csv"
    write_grid_csv(csv_path, rows)
    summary = {
        "master_seed": cfg.master_seed,
        "epsilons": list(cfg.epsilons),
        "p_flips": list(cfg.p_flips),
        "methods": list(cfg.methods),
        "reps": cfg.reps,
        "k_range": [cfg.k_min, cfg.k_max],
        "rows": len(rows),
        "failures": failures,
    }
    (out_dir / "grid_manifest.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {len(rows)} rows to {csv_path} ({len(failures)} cell failures)")
    return EXIT_OK


def cmd_theory_curves(args) -> int:
    from .theory import emit_curves

    epsilons = _parse_float_list(args.epsilons if args.epsilons is not None else "1,2,3,4,5,10")
    rs = None
    if args.r_start is not None or args.r_stop is not None:
        if args.r_start is None or args.r_stop is None:
            raise ConfigError("need both --r-start and --r-stop")
        step = args.r_step if args.r_step is not None else 1.0
        if step <= 0:
            raise ConfigError("--r-step must be > 0")
        n = int(round((args.r_stop - args.r_start) / step))
        rs = [args.r_start + i * step for i in range(n + 1)]
    r_fracs = _parse_float_list(args.r_fracs) if args.r_fracs is not None else None
    if rs is None and r_fracs is None:
        r_fracs = tuple(round(0.01 * i, 2) for i in range(1, 26))
    ell = args.ell if args.ell is not None else 200
    try:
        points = emit_curves(
            epsilons,
            rs=rs,
            r_fracs=r_fracs,
            ell=ell,
            mc_trials=args.mc_trials if args.mc_trials is not None else 0,
            seed=args.seed if args.seed is not None else 0,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    out = Path(args.out or "theory_curves.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "r", "r_frac", "ell", "mu", "sigma", "p_closed", "p_mc"])
        for p in points:
            writer.writerow(
                [p.epsilon, p.r, p.r_frac, p.ell, p.mu, p.sigma, p.p_closed, "" if p.p_mc is None else p.p_mc]
            )
    print(f"wrote {len(points)} points to {out}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppcard",
        description="Privacy-preserving cardinality estimation over Bloom-filter-encoded records.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, help="master RNG seed (default 0)")
    common.add_argument("--out-dir", help="output directory (default .)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", parents=[common], help="generate a synthetic multi-provider bundle")
    p.add_argument("--entities", type=int, help="distinct entities (default 171)")
    p.add_argument("--duplicates", type=int, help="duplicates per entity (default 1)")
    p.add_argument("--providers", type=int, help="provider count (default 2)")
    p.add_argument("--corruption", type=float, help="corrupted share of duplicates (default 0)")
    p.add_argument("--min-edits", type=int, help="min edits per corrupted record (default 1)")
    p.add_argument("--max-edits", type=int, help="max edits per corrupted record (default 2)")
    p.set_defaults(func=cmd_datagen, out_dir_required=True)

    p = sub.add_parser("encode", parents=[common], help="encode + perturb one provider's records")
    p.add_argument("--schema", help="schema JSON file")
    p.add_argument("--input", help="records CSV file")
    p.add_argument("--provider", help="provider id recorded in the exchange header")
    p.add_argument("--epsilon", type=float, help="privacy budget (required)")
    p.add_argument("--out", help="output exchange file")
    p.add_argument("--truth-sidecar", help="optional JSON sidecar of entity ids (evaluation only)")
    _add_encoding_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("cluster", parents=[common], help="k-means on pooled exchange files")
    p.add_argument("--inputs", nargs="+", help="exchange files")
    p.add_argument("--k", type=int, help="cluster count")
    p.add_argument("--out", help="assignments CSV")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("estimate", parents=[common], help="estimate cardinality from exchange files")
    p.add_argument("--inputs", nargs="+", help="exchange files")
    p.add_argument("--truth-sidecars", nargs="*", help="entity-id sidecars (evaluation only)")
    p.add_argument("--method", choices=("A", "B"), help="reference method (default B)")
    p.add_argument("--p-flip", type=float, help="dummy flip probability (default 0.1)")
    p.add_argument("--pick-ratio", type=float, help="reference ratio (default 0.1)")
    p.add_argument("--dummy-ratio", type=float, help="dummy ratio (default 0.1)")
    p.add_argument("--k-min", type=int, help="sweep lower bound (default 2)")
    p.add_argument("--k-max", type=int, help="sweep upper bound (default: pool size)")
    p.add_argument("--silhouette", action="store_true", help="also compute the silhouette baseline")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("grid", parents=[common], help="run the full experiment matrix")
    p.add_argument("--bundle-dir", help="datagen output directory")
    p.add_argument("--epsilons", help="comma-separated privacy budgets (default 1,2,3,4,5,10)")
    p.add_argument("--p-flip-start", type=float, help="p_flip grid start (default 0.10)")
    p.add_argument("--p-flip-stop", type=float, help="p_flip grid stop (default 0.30)")
    p.add_argument("--p-flip-step", type=float, help="p_flip grid step (default 0.01)")
    p.add_argument("--methods", help="comma-separated methods (default A,B)")
    p.add_argument("--reps", type=int, help="repetitions per cell (default 1)")
    p.add_argument("--k-min", type=int, help="sweep lower bound (default 2)")
    p.add_argument("--k-max", type=int, help="sweep upper bound (default: pool size)")
    p.add_argument("--pick-ratio", type=float, help="reference ratio (default 0.1)")
    p.add_argument("--dummy-ratio", type=float, help="dummy ratio (default 0.1)")
    p.add_argument("--silhouette", action="store_true", help="also compute the silhouette baseline")
    _add_encoding_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("theory-curves", parents=[common], help="emit same-cluster probability curves")
    p.add_argument("--epsilons", help="comma-separated privacy budgets")
    p.add_argument("--r-start", type=float, help="distance threshold grid start")
    p.add_argument("--r-stop", type=float, help="distance threshold grid stop")
    p.add_argument("--r-step", type=float, help="distance threshold grid step (default 1)")
    p.add_argument("--r-fracs", help="comma-separated thresholds as fractions of ell")
    p.add_argument("--ell", type=int, help="filter length (default 200)")
    p.add_argument("--mc-trials", type=int, help="Monte-Carlo trials per point (default 0 = off)")
    p.add_argument("--out", help="output CSV")
    p.set_defaults(func=cmd_theory_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge(args, _load_config(getattr(args, "config", None)))
        if getattr(args, "out_dir_required", False) and not args.out_dir:
            raise ConfigError("--out-dir is required")
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
