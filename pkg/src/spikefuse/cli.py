"""Command-line entry points: encode, fuse, eval, sweep, report.

Every command is driven by a JSON config file (see README for the schema)
plus optional flag overrides; flags win. Dataset paths are resolved against
the config file's directory, then against ``$SPIKEFUSE_DATA`` if set. Exit
codes: 0 success, 1 no usable evaluation pairs, 2 configuration error,
3 data error. Result files never embed timestamps, so a rerun with the same
config and seed reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .am_network import LifParams
from .cooperate import COOPERATE_OPS, CooperateConfig, write_code_file
from .datasets import load_embeddings, load_eval_pairs, load_norms
from .encoding import EncodingConfig, dump_raster
from .errors import ConfigError, DataFormatError, EvaluationEmptyError, SpikefuseError
from .evaluation import evaluate_method
from .pipeline import (
    DatasetIds,
    FusionConfig,
    compute_codes,
    concatenate_vectors,
    prepare_inputs,
)
from .sweep import (
    DEFAULT_STRIDES,
    best_ratio_analysis,
    best_ratio_tsv,
    read_results,
    run_sweep,
    write_results,
)

DATA_DIR_ENV = "SPIKEFUSE_DATA"

EXIT_OK = 0
EXIT_EVAL_EMPTY = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def _resolve_path(raw: str, config_dir: Path) -> Path:
    p = Path(raw).expanduser()
    if p.is_absolute():
        return p
    local = config_dir / p
    if local.exists():
        return local
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir:
        candidate = Path(data_dir) / p
        if candidate.exists():
            return candidate
    return local


def _load_manifest(path: str) -> tuple[dict, Path]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        manifest = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return manifest, p.parent


def _require(manifest: dict, *keys):
    node = manifest
    trail = []
    for key in keys:
        trail.append(key)
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"config is missing required key {'.'.join(trail)!r}")
        node = node[key]
    return node


def _build_config(manifest: dict, args) -> FusionConfig:
    enc = dict(manifest.get("encoding", {}))
    lif = dict(manifest.get("lif", {}))
    coop = dict(manifest.get("cooperate", {}))
    if getattr(args, "seed", None) is not None:
        enc["seed"] = args.seed
    if getattr(args, "t_steps", None) is not None:
        enc["t_steps"] = args.t_steps
    for key in ("ss", "ts", "op"):
        value = getattr(args, key, None)
        if value is not None:
            coop[key] = value
    datasets = manifest.get("datasets", {})
    eval_ids = tuple(
        str(e.get("path", "")) for e in datasets.get("eval", []) if isinstance(e, dict)
    )
    try:
        return FusionConfig(
            encoding=EncodingConfig(**enc),
            lif=LifParams(**lif),
            cooperate=CooperateConfig(**coop),
            datasets=DatasetIds(
                norms=str(datasets.get("norms", {}).get("path", "")),
                embeddings=str(datasets.get("embeddings", {}).get("path", "")),
                evals=eval_ids,
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _load_datasets(manifest: dict, config_dir: Path):
    norms_spec = _require(manifest, "datasets", "norms")
    emb_spec = _require(manifest, "datasets", "embeddings")
    norms = load_norms(
        _resolve_path(_require(norms_spec, "path"), config_dir),
        format=norms_spec.get("format", "csv"),
    )
    embeddings = load_embeddings(_resolve_path(_require(emb_spec, "path"), config_dir))
    eval_sets = []
    for spec in manifest.get("datasets", {}).get("eval", []):
        eval_sets.append(
            load_eval_pairs(
                _resolve_path(_require(spec, "path"), config_dir),
                format=spec.get("format", "generic_tsv"),
            )
        )
    return norms, embeddings, eval_sets


def _prepare_out_dir(path: str, overwrite: bool, resume: bool = False) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not (overwrite or resume):
        raise ConfigError(
            f"output directory {out} is not empty; pass --overwrite to reuse it"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value: float) -> str:
    return f"{value:.9f}"


def cmd_encode(args) -> int:
    manifest, config_dir = _load_manifest(args.config)
    config = _build_config(manifest, args)
    norms, embeddings, eval_sets = _load_datasets(manifest, config_dir)
    prepared = prepare_inputs(norms, embeddings, eval_sets)
    out = _prepare_out_dir(args.out, args.overwrite)

    from .pipeline import encode_am_raster, encode_text_raster

    text_dir = out / "text"
    am_dir = out / "am"
    text_dir.mkdir(exist_ok=True)
    am_dir.mkdir(exist_ok=True)
    for name in prepared.vocab:
        dump_raster(encode_text_raster(name, prepared, config.encoding), text_dir / f"{name}.raster")
        dump_raster(encode_am_raster(name, prepared, config.lif, config.encoding), am_dir / f"{name}.raster")

    summary = [
        f"concepts {len(prepared.vocab)}",
        f"modalities {prepared.d_ms}",
        f"embedding_dim {prepared.d_text}",
        f"t_steps {config.encoding.t_steps}",
        f"seed {config.encoding.seed}",
        f"fingerprint {config.fingerprint()}",
    ]
    (out / "vocabulary.txt").write_text(
        "\n".join(summary) + "\n\n" + "\n".join(prepared.vocab) + "\n", encoding="utf-8"
    )
    print(f"encoded {len(prepared.vocab)} concepts -> {out}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    manifest, config_dir = _load_manifest(args.config)
    config = _build_config(manifest, args)
    norms, embeddings, eval_sets = _load_datasets(manifest, config_dir)
    prepared = prepare_inputs(norms, embeddings, eval_sets)
    out = _prepare_out_dir(args.out, args.overwrite)

    codes = compute_codes(prepared, config)
    cc = config.cooperate
    path = out / f"codes_ss{cc.ss}_ts{cc.ts}_{cc.op}.txt"
    write_code_file(path, codes, config.fingerprint())
    print(f"fused {len(codes)} concepts -> {path}")
    return EXIT_OK


def _eval_report(prepared, config, metric: str) -> dict:
    combo = f"{Path(config.datasets.embeddings).stem or 'embeddings'}-" \
            f"{Path(config.datasets.norms).stem or 'norms'}"
    text = {n: v.values for n, v in prepared.embeddings.vectors.items()}
    ms = {n: v.values for n, v in prepared.norms.vectors.items()}
    concat = concatenate_vectors(prepared)
    codes = compute_codes(prepared, config)

    methods = [
        ("Text", text, "cosine"),
        ("Multisensory", ms, "cosine"),
        ("Concatenate", concat, "cosine"),
        ("COO", codes, "hamming" if metric is None else metric),
    ]
    rows = []
    for method, reprs, method_metric in methods:
        per_dataset = {}
        for ds in prepared.eval_sets:
            res = evaluate_method(reprs, ds, method_metric, method=method)
            per_dataset[ds.name] = {
                "spearman": res.spearman,
                "n_pairs": res.n_pairs,
                "n_dropped": res.n_dropped,
                "diversity": res.diversity,
                "metric": method_metric,
            }
        rows.append({"method": method, "results": per_dataset})
    return {
        "schema": "spikefuse-eval/1",
        "combo": combo,
        "config": {
            "fingerprint": config.fingerprint(),
            "encoding": vars(config.encoding) | {},
            "lif": vars(config.lif) | {},
            "cooperate": vars(config.cooperate) | {},
        },
        "rows": rows,
    }


def _eval_report_text(report: dict) -> str:
    datasets = sorted(
        {ds for row in report["rows"] for ds in row["results"]}
    )
    width = max(len(m["method"]) for m in report["rows"]) + 2
    header = f"{'Method':<{width}}" + "".join(f"{ds:>16}" for ds in datasets)
    lines = [f"combo: {report['combo']}", header, "-" * len(header)]
    for row in report["rows"]:
        cells = "".join(
            f"{row['results'][ds]['spearman']:>16.9f}" if ds in row["results"] else f"{'-':>16}"
            for ds in datasets
        )
        lines.append(f"{row['method']:<{width}}" + cells)
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    manifest, config_dir = _load_manifest(args.config)
    config = _build_config(manifest, args)
    norms, embeddings, eval_sets = _load_datasets(manifest, config_dir)
    if not eval_sets:
        raise ConfigError("eval command needs at least one datasets.eval entry")
    prepared = prepare_inputs(norms, embeddings, eval_sets)
    out = _prepare_out_dir(args.out, args.overwrite)

    report = _eval_report(prepared, config, args.metric)
    with (out / "report.json").open("w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    (out / "report.txt").write_text(_eval_report_text(report), encoding="utf-8")
    print(_eval_report_text(report), end="")
    return EXIT_OK


def _parse_int_list(raw: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated integer list, got {raw!r}")


def cmd_sweep(args) -> int:
    manifest, config_dir = _load_manifest(args.config)
    config = _build_config(manifest, args)
    norms, embeddings, eval_sets = _load_datasets(manifest, config_dir)
    if not eval_sets:
        raise ConfigError("sweep command needs at least one datasets.eval entry")
    prepared = prepare_inputs(norms, embeddings, eval_sets)

    sweep_spec = manifest.get("sweep", {})
    ss_values = sweep_spec.get("ss", list(DEFAULT_STRIDES))
    ts_values = sweep_spec.get("ts", list(DEFAULT_STRIDES))
    ops = sweep_spec.get("ops", list(COOPERATE_OPS))
    seeds = sweep_spec.get("seeds", [config.encoding.seed])
    if args.ss_list is not None:
        ss_values = _parse_int_list(args.ss_list, "--ss-list")
    if args.ts_list is not None:
        ts_values = _parse_int_list(args.ts_list, "--ts-list")
    if args.ops is not None:
        ops = [op.strip() for op in args.ops.split(",") if op.strip()]
    if args.seeds is not None:
        seeds = _parse_int_list(args.seeds, "--seeds")

    out = _prepare_out_dir(args.out, args.overwrite, resume=args.resume)
    result = run_sweep(
        prepared,
        config,
        ss_values=ss_values,
        ts_values=ts_values,
        ops=ops,
        seeds=seeds,
        out_dir=out,
        resume=args.resume,
        memory_budget_mb=args.memory_budget_mb,
    )

    if args.dump_codes != "none":
        targets = {}
        if args.dump_codes == "best":
            for entry in result.best.values():
                targets[(entry["ss"], entry["ts"], entry["op"])] = entry["fingerprint"]
        else:
            for record in result.records:
                targets[(record.ss, record.ts, record.op)] = record.fingerprint
        codes_dir = out / "codes"
        codes_dir.mkdir(exist_ok=True)
        for (ss, ts, op), fingerprint in sorted(targets.items()):
            point = config.with_cooperate(ss=ss, ts=ts, op=op)
            codes = compute_codes(prepared, point)
            write_code_file(codes_dir / f"codes_ss{ss}_ts{ts}_{op}.txt", codes, fingerprint)

    n_points = len(result.records)
    print(f"sweep complete: {n_points} grid points x {len(result.seeds)} seed(s) -> {out}")
    for ds in sorted(result.best):
        b = result.best[ds]
        print(
            f"  best[{ds}] ss={b['ss']} ts={b['ts']} op={b['op']} "
            f"spearman={_fmt(b['spearman_mean'])} diversity={_fmt(b['diversity_mean'])}"
        )
    return EXIT_OK


def cmd_report(args) -> int:
    result = read_results(args.results)
    out = Path(args.out) if args.out else None
    report = best_ratio_analysis(result)
    text = best_ratio_tsv(report)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_results(result, out)
        (out / "best_ratio.tsv").write_text(text, encoding="utf-8")
        print(f"report written -> {out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikefuse",
        description="Fuse sensory norms with word embeddings into binary concept codes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--config", "-c", required=True, help="JSON config file")
        if with_out:
            p.add_argument("--out", "-o", required=True, help="output directory")
            p.add_argument("--overwrite", action="store_true",
                           help="allow writing into a non-empty directory")
        p.add_argument("--seed", type=int, help="override encoding.seed")
        p.add_argument("--t-steps", dest="t_steps", type=int,
                       help="override encoding.t_steps")
        p.add_argument("--ss", type=int, help="override cooperate.ss")
        p.add_argument("--ts", type=int, help="override cooperate.ts")
        p.add_argument("--op", choices=COOPERATE_OPS, help="override cooperate.op")

    p_encode = sub.add_parser("encode", help="dump per-concept debug rasters")
    add_common(p_encode)
    p_encode.set_defaults(func=cmd_encode)

    p_fuse = sub.add_parser("fuse", help="write fused codes for one configuration")
    add_common(p_fuse)
    p_fuse.set_defaults(func=cmd_fuse)

    p_eval = sub.add_parser("eval", help="closeness report for all methods")
    add_common(p_eval)
    p_eval.add_argument("--metric", choices=("cosine", "hamming"),
                        help="override the metric used for the fused codes")
    p_eval.set_defaults(func=cmd_eval, metric=None)

    p_sweep = sub.add_parser("sweep", help="traverse the stride/operator grid")
    add_common(p_sweep)
    p_sweep.add_argument("--ss-list", help="comma-separated spatial strides")
    p_sweep.add_argument("--ts-list", help="comma-separated temporal strides")
    p_sweep.add_argument("--ops", help="comma-separated operators")
    p_sweep.add_argument("--seeds", help="comma-separated seeds")
    p_sweep.add_argument("--resume", action="store_true",
                         help="continue from the progress journal in --out")
    p_sweep.add_argument("--dump-codes", choices=("none", "best", "all"),
                         default="best", help="which configurations to persist codes for")
    p_sweep.add_argument("--memory-budget-mb", type=int, default=256)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="derived tables from a results.json")
    p_report.add_argument("--results", required=True,
                          help="results.json file or sweep output directory")
    p_report.add_argument("--out", "-o", help="directory for rewritten tables")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvaluationEmptyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL_EMPTY
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SpikefuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
