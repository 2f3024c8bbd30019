"""Grid sweep over the cooperation parameters, with resume support.

For every (spatial stride, temporal stride, operator) grid point the whole
vocabulary is fused into binary codes and scored against each evaluation
dataset; representation diversity is tracked alongside. Completed points are
appended to a progress journal so an interrupted sweep can pick up where it
stopped. Spike rasters are computed once per (concept, seed) and reused
across grid points; codes are accumulated packed, and the temporal-stride
axis is processed in memory-bounded chunks because the smallest strides
produce codes of about a million and a half bits per concept.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .bitvec import BitVector
from .cooperate import COOPERATE_OPS, _combine, _or_reduce_windows, block_stack, expected_output_dims
from .encoding import poisson_encode
from .am_network import run_am
from .evaluation import spearman_from_scores
from .errors import ConfigError, EvaluationEmptyError
from .pipeline import FusionConfig, PreparedInputs

__all__ = [
    "DEFAULT_STRIDES",
    "DIVERSITY_FLOOR",
    "SweepRecord",
    "SweepResult",
    "run_sweep",
    "diversity_surface",
    "best_ratio_analysis",
    "write_results",
    "read_results",
    "baseline_results",
]

# stride values traversed by default, small steps first then coarse decades
DEFAULT_STRIDES = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)

# configurations whose codes collapse to near-identical bit strings carry no
# usable signal; results at or below this diversity are excluded from "best"
DIVERSITY_FLOOR = 0.05

PROGRESS_NAME = "progress.jsonl"
RESULTS_NAME = "results.json"


@dataclass(frozen=True)
class SweepRecord:
    """Aggregated outcome of one (ss, ts, op) grid point over all seeds."""

    ss: int
    ts: int
    op: str
    dims: int
    fingerprint: str
    seeds: tuple[int, ...]
    diversity_per_seed: tuple[float, ...]
    spearman_per_seed: dict[str, tuple[float, ...]]
    n_pairs: dict[str, int]

    @property
    def diversity_mean(self) -> float:
        return float(np.mean(self.diversity_per_seed))

    def spearman_mean(self, dataset: str) -> float:
        return float(np.mean(self.spearman_per_seed[dataset]))

    def spearman_std(self, dataset: str) -> float:
        values = self.spearman_per_seed[dataset]
        return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


@dataclass(frozen=True)
class SweepResult:
    template: dict
    template_fingerprint: str
    ss_values: tuple[int, ...]
    ts_values: tuple[int, ...]
    ops: tuple[str, ...]
    seeds: tuple[int, ...]
    skipped: tuple[tuple[int, int], ...]
    records: tuple[SweepRecord, ...]
    baselines: dict[str, dict[str, dict]]
    best: dict[str, dict] = field(default_factory=dict)

    def record(self, ss: int, ts: int, op: str) -> SweepRecord:
        for r in self.records:
            if (r.ss, r.ts, r.op) == (ss, ts, op):
                return r
        raise KeyError(f"no record for (ss={ss}, ts={ts}, op={op})")

    def eval_names(self) -> tuple[str, ...]:
        if not self.records:
            return ()
        return tuple(self.records[0].n_pairs)


def _caps_exceeded(ts: int, d_ms: int, t_steps: int) -> bool:
    return ts > d_ms * t_steps


class _RasterCache:
    """Per-seed raster provider; packs text rasters to keep the cache small."""

    def __init__(self, prepared: PreparedInputs, config: FusionConfig, enabled: bool):
        self._prepared = prepared
        self._config = config
        self._enabled = enabled
        self._store: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _build(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        prepared, config = self._prepared, self._config
        text = poisson_encode(
            prepared.embeddings_unit.vectors[name],
            config.encoding,
            label=f"text:{name}",
        )
        ms = run_am(
            prepared.norms_unit.vectors[name],
            prepared.correlations,
            config.lif,
            config.encoding,
            name=name,
        )
        return np.packbits(text.bits, axis=1), ms.bits.copy()

    def get(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Returns (text_bits, ms_bits) as bool arrays."""
        if self._enabled and name in self._store:
            packed_text, ms = self._store[name]
        else:
            packed_text, ms = self._build(name)
            if self._enabled:
                self._store[name] = (packed_text, ms)
        t_steps = self._config.encoding.t_steps
        text = np.unpackbits(packed_text, axis=1, count=t_steps).astype(bool)
        return text, ms


def _chunk_ts_values(
    ts_values: Sequence[int],
    blocks: int,
    flat_len: int,
    n_tokens: int,
    n_ops: int,
    budget_bytes: int,
) -> list[list[int]]:
    """Split the ts axis so held packed codes stay under the memory budget."""
    chunks: list[list[int]] = []
    current: list[int] = []
    held = 0
    for ts in ts_values:
        cost = blocks * math.ceil(flat_len / ts) // 8 + 1
        cost *= max(n_tokens, 1) * n_ops
        if current and held + cost > budget_bytes:
            chunks.append(current)
            current, held = [], 0
        current.append(ts)
        held += cost
    if current:
        chunks.append(current)
    return chunks


def _digest(packed: np.ndarray) -> bytes:
    return hashlib.blake2b(packed.tobytes(), digest_size=16).digest()


def baseline_results(prepared: PreparedInputs) -> dict[str, dict[str, dict]]:
    """Cosine closeness of the three non-fused methods per eval dataset.

    Text and Multisensory use the raw loaded vectors; Concatenate glues the
    min-max normalized halves so neither source dominates through scale.
    """
    from .evaluation import evaluate_method
    from .pipeline import concatenate_vectors

    text = {n: v.values for n, v in prepared.embeddings.vectors.items()}
    ms = {n: v.values for n, v in prepared.norms.vectors.items()}
    concat = concatenate_vectors(prepared)

    out: dict[str, dict[str, dict]] = {}
    for ds in prepared.eval_sets:
        per_method = {}
        for method, reprs in (
            ("Text", text),
            ("Multisensory", ms),
            ("Concatenate", concat),
        ):
            res = evaluate_method(reprs, ds, "cosine", method=method)
            per_method[method] = {
                "spearman": res.spearman,
                "n_pairs": res.n_pairs,
                "n_dropped": res.n_dropped,
            }
        out[ds.name] = per_method
    return out


def _select_best(records: Iterable[SweepRecord], eval_names: Sequence[str]) -> dict[str, dict]:
    """Per dataset, the diversity-filtered record with the highest mean rho.

    Ties prefer the cheapest representation: fewest output dimensions, then
    the larger spatial stride, the larger temporal stride, and finally the
    operator name for a stable order.
    """
    best: dict[str, dict] = {}
    for ds in eval_names:
        candidates = [r for r in records if r.diversity_mean > DIVERSITY_FLOOR]
        if not candidates:
            continue
        chosen = min(
            candidates,
            key=lambda r: (-r.spearman_mean(ds), r.dims, -r.ss, -r.ts, r.op),
        )
        best[ds] = {
            "ss": chosen.ss,
            "ts": chosen.ts,
            "op": chosen.op,
            "dims": chosen.dims,
            "fingerprint": chosen.fingerprint,
            "spearman_mean": chosen.spearman_mean(ds),
            "spearman_std": chosen.spearman_std(ds),
            "diversity_mean": chosen.diversity_mean,
        }
    return best


def _load_progress(path: Path, template_fp: str) -> dict[tuple, dict]:
    done: dict[tuple, dict] = {}
    if not path.exists():
        return done
    with path.open(encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            return done
        meta = json.loads(header)
        if meta.get("template_fingerprint") != template_fp:
            raise ConfigError(
                f"{path}: progress journal belongs to a different configuration "
                f"({meta.get('template_fingerprint')} != {template_fp}); "
                "use a fresh output directory or pass overwrite"
            )
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            done[(entry["seed"], entry["ss"], entry["ts"], entry["op"])] = entry
    return done


def run_sweep(
    prepared: PreparedInputs,
    template: FusionConfig,
    ss_values: Sequence[int] = DEFAULT_STRIDES,
    ts_values: Sequence[int] = DEFAULT_STRIDES,
    ops: Sequence[str] = COOPERATE_OPS,
    seeds: Sequence[int] | None = None,
    out_dir: str | Path | None = None,
    resume: bool = False,
    reuse_rasters: bool = True,
    memory_budget_mb: int = 256,
    point_callback: Callable[[dict], None] | None = None,
) -> SweepResult:
    """Traverse the (ss, ts, op) grid and evaluate every configuration.

    ``seeds`` defaults to the template's encoding seed. When ``out_dir`` is
    given, each completed grid point is journaled there immediately and
    ``resume=True`` skips journaled points on a rerun. ``reuse_rasters=False``
    rebuilds every raster on demand instead of caching (slower, same bits).
    ``point_callback`` receives each completed point's journal entry.
    """
    ss_values = tuple(int(s) for s in ss_values)
    ts_values = tuple(int(t) for t in ts_values)
    ops = tuple(ops)
    if not ss_values or not ts_values or not ops:
        raise ConfigError("sweep needs non-empty stride lists and operator list")
    for op in ops:
        if op not in COOPERATE_OPS:
            raise ConfigError(f"unknown cooperate op {op!r}")
    if any(s < 1 for s in ss_values) or any(t < 1 for t in ts_values):
        raise ConfigError("strides must be >= 1")
    if seeds is None:
        seeds = (template.encoding.seed,)
    seeds = tuple(int(s) for s in seeds)

    d_ms = prepared.d_ms
    d_text = prepared.d_text
    t_steps = template.encoding.t_steps
    flat_len = d_ms * t_steps
    for ds in prepared.eval_sets:
        if len(ds) < 3:
            raise EvaluationEmptyError(
                f"{ds.name}: {len(ds)} usable pairs; at least 3 are needed"
            )

    skipped = tuple((ss, ts) for ss in ss_values for ts in ts_values
                    if _caps_exceeded(ts, d_ms, t_steps))
    skip_ts = {ts for ts in ts_values if _caps_exceeded(ts, d_ms, t_steps)}
    for ts in sorted(skip_ts):
        warnings.warn(
            f"temporal stride {ts} exceeds {d_ms * t_steps} cells per block; "
            "those grid points are skipped",
            stacklevel=2,
        )
    live_ts = tuple(t for t in ts_values if t not in skip_ts)

    template_fp = template.fingerprint()
    progress_path = None
    done: dict[tuple, dict] = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        progress_path = out_dir / PROGRESS_NAME
        if resume:
            done = _load_progress(progress_path, template_fp)
        elif progress_path.exists():
            progress_path.unlink()

    progress_fh = None
    if progress_path is not None:
        fresh = not progress_path.exists()
        progress_fh = progress_path.open("a", encoding="utf-8")
        if fresh:
            progress_fh.write(json.dumps(
                {"template_fingerprint": template_fp,
                 "datasets": asdict(template.datasets)},
                sort_keys=True) + "\n")
            progress_fh.flush()

    pair_token_set = {t for ds in prepared.eval_sets for t in ds.tokens()}
    pair_tokens = sorted(pair_token_set)
    budget = memory_budget_mb * 1024 * 1024
    entries: list[dict] = list(done.values())

    try:
        for seed in seeds:
            config = template.with_seed(seed)
            cache = _RasterCache(prepared, config, enabled=reuse_rasters)
            for ss in ss_values:
                pending = [
                    (ts, op)
                    for ts in live_ts
                    for op in ops
                    if (seed, ss, ts, op) not in done
                ]
                if not pending:
                    continue
                blocks = math.ceil((d_text - d_ms) / ss)
                pending_ts = sorted({ts for ts, _ in pending})
                for ts_chunk in _chunk_ts_values(
                    pending_ts, blocks, flat_len, len(pair_tokens), len(ops), budget
                ):
                    keep = {(ts, op) for ts, op in pending if ts in ts_chunk}
                    cells = {key: {"digests": set(), "codes": {}} for key in keep}
                    for name in prepared.vocab:
                        text_bits, ms_bits = cache.get(name)
                        stack = block_stack(text_bits, d_ms, ss)
                        for op in ops:
                            if not any((ts, op) in keep for ts in ts_chunk):
                                continue
                            sc = _combine(stack, ms_bits[None, :, :], op)
                            flat = sc.reshape(sc.shape[0], -1)
                            for ts in ts_chunk:
                                if (ts, op) not in keep:
                                    continue
                                code = np.packbits(
                                    _or_reduce_windows(flat, ts).ravel()
                                )
                                cell = cells[(ts, op)]
                                cell["digests"].add(_digest(code))
                                if name in pair_token_set:
                                    cell["codes"][name] = code
                    for (ts, op) in sorted(keep):
                        cell = cells[(ts, op)]
                        dims = expected_output_dims(d_text, d_ms, t_steps, ss, ts)
                        rho: dict[str, float] = {}
                        n_pairs: dict[str, int] = {}
                        for ds in prepared.eval_sets:
                            model = [
                                BitVector(cell["codes"][p.a], dims).hamming_similarity(
                                    BitVector(cell["codes"][p.b], dims)
                                )
                                for p in ds.pairs
                            ]
                            rho[ds.name] = spearman_from_scores(ds.ratings(), model)
                            n_pairs[ds.name] = len(ds)
                        entry = {
                            "seed": seed,
                            "ss": ss,
                            "ts": ts,
                            "op": op,
                            "dims": dims,
                            "diversity": len(cell["digests"]) / len(prepared.vocab),
                            "spearman": rho,
                            "n_pairs": n_pairs,
                        }
                        entries.append(entry)
                        done[(seed, ss, ts, op)] = entry
                        if progress_fh is not None:
                            progress_fh.write(json.dumps(entry, sort_keys=True) + "\n")
                            progress_fh.flush()
                        if point_callback is not None:
                            point_callback(entry)
    finally:
        if progress_fh is not None:
            progress_fh.close()

    in_grid = {
        (seed, ss, ts, op)
        for seed in seeds for ss in ss_values for ts in live_ts for op in ops
    }
    entries = [e for e in entries
               if (e["seed"], e["ss"], e["ts"], e["op"]) in in_grid]
    records = _assemble_records(entries, template, seeds, d_text, d_ms, t_steps)
    baselines = baseline_results(prepared)
    eval_names = tuple(ds.name for ds in prepared.eval_sets)
    result = SweepResult(
        template=asdict(template),
        template_fingerprint=template_fp,
        ss_values=ss_values,
        ts_values=ts_values,
        ops=ops,
        seeds=seeds,
        skipped=skipped,
        records=records,
        baselines=baselines,
        best=_select_best(records, eval_names),
    )
    if out_dir is not None:
        write_results(result, out_dir)
    return result


def _assemble_records(
    entries: list[dict],
    template: FusionConfig,
    seeds: tuple[int, ...],
    d_text: int,
    d_ms: int,
    t_steps: int,
) -> tuple[SweepRecord, ...]:
    grouped: dict[tuple[int, int, str], dict[int, dict]] = {}
    for e in entries:
        grouped.setdefault((e["ss"], e["ts"], e["op"]), {})[e["seed"]] = e
    records = []
    for (ss, ts, op) in sorted(grouped, key=lambda k: (k[0], k[1], k[2])):
        per_seed = grouped[(ss, ts, op)]
        missing = [s for s in seeds if s not in per_seed]
        if missing:
            raise ConfigError(
                f"grid point (ss={ss}, ts={ts}, op={op}) lacks seeds {missing}; "
                "progress journal is incomplete for this grid"
            )
        ordered = [per_seed[s] for s in seeds]
        datasets = list(ordered[0]["spearman"])
        records.append(
            SweepRecord(
                ss=ss,
                ts=ts,
                op=op,
                dims=expected_output_dims(d_text, d_ms, t_steps, ss, ts),
                fingerprint=template.with_cooperate(ss=ss, ts=ts, op=op).fingerprint(),
                seeds=seeds,
                diversity_per_seed=tuple(e["diversity"] for e in ordered),
                spearman_per_seed={
                    ds: tuple(e["spearman"][ds] for e in ordered) for ds in datasets
                },
                n_pairs=dict(ordered[0]["n_pairs"]),
            )
        )
    return tuple(records)


def diversity_surface(result: SweepResult) -> list[tuple[int, int, str, float]]:
    """(ss, ts, op, mean diversity) rows; the raw material behind the
    stride-versus-diversity picture."""
    return [
        (r.ss, r.ts, r.op, r.diversity_mean)
        for r in sorted(result.records, key=lambda r: (r.op, r.ss, r.ts))
    ]


def diversity_surface_tsv(result: SweepResult) -> str:
    lines = ["ss\tts\top\tdiversity"]
    for ss, ts, op, div in diversity_surface(result):
        lines.append(f"{ss}\t{ts}\t{op}\t{div:.9f}")
    return "\n".join(lines) + "\n"


def best_tsv(result: SweepResult) -> str:
    lines = ["dataset\tss\tts\top\tdims\tspearman_mean\tspearman_std\tdiversity_mean"]
    for ds in sorted(result.best):
        b = result.best[ds]
        lines.append(
            f"{ds}\t{b['ss']}\t{b['ts']}\t{b['op']}\t{b['dims']}\t"
            f"{b['spearman_mean']:.9f}\t{b['spearman_std']:.9f}\t"
            f"{b['diversity_mean']:.9f}"
        )
    return "\n".join(lines) + "\n"


def best_ratio_analysis(
    results: Mapping[str, SweepResult] | SweepResult,
) -> dict:
    """Relate each operator's win rate to the text/multisensory closeness gap.

    Per (combo, dataset), the best ratio of an operator is the fraction of
    (ss, ts) grid points where it attains the highest mean rho (ties go to
    the lexicographically first operator). Per (dataset, op), that ratio
    array across combos is correlated with |rho_text - rho_multisensory|
    from the baselines. With fewer than two combos, or a degenerate array,
    the correlation is reported as None; no direction is asserted.
    """
    if isinstance(results, SweepResult):
        results = {"run": results}
    if not results:
        raise ValueError("best_ratio_analysis needs at least one sweep result")

    combos = sorted(results)
    ops = None
    datasets = None
    for result in results.values():
        ops = result.ops if ops is None else ops
        names = result.eval_names()
        datasets = set(names) if datasets is None else datasets & set(names)
        if tuple(result.ops) != tuple(ops):
            raise ValueError("all sweeps must share the same operator list")
    datasets = sorted(datasets or ())

    ratios: dict[str, dict[str, dict[str, float]]] = {}
    diffs: dict[str, dict[str, float]] = {}
    for combo in combos:
        result = results[combo]
        ratios[combo] = {}
        diffs[combo] = {}
        by_point: dict[tuple[int, int], dict[str, SweepRecord]] = {}
        for r in result.records:
            by_point.setdefault((r.ss, r.ts), {})[r.op] = r
        for ds in datasets:
            wins = {op: 0 for op in ops}
            total = 0
            for point, per_op in by_point.items():
                if len(per_op) != len(ops):
                    continue  # partially skipped point
                total += 1
                scores = {op: per_op[op].spearman_mean(ds) for op in ops}
                top = max(scores.values())
                winner = sorted(op for op in ops if scores[op] == top)[0]
                wins[winner] += 1
            if total == 0:
                raise ValueError(f"{combo}: no complete grid points for {ds}")
            ratios[combo][ds] = {op: wins[op] / total for op in ops}
            base = result.baselines[ds]
            diffs[combo][ds] = abs(
                base["Text"]["spearman"] - base["Multisensory"]["spearman"]
            )

    analysis: dict[str, dict[str, float | None]] = {}
    for ds in datasets:
        analysis[ds] = {}
        for op in ops:
            xs = np.array([ratios[c][ds][op] for c in combos])
            ys = np.array([diffs[c][ds] for c in combos])
            if len(combos) < 2 or xs.std() == 0.0 or ys.std() == 0.0:
                analysis[ds][op] = None
            else:
                xc, yc = xs - xs.mean(), ys - ys.mean()
                analysis[ds][op] = float(
                    (xc * yc).sum() / np.sqrt((xc * xc).sum() * (yc * yc).sum())
                )
    return {"ratios": ratios, "closeness_diff": diffs, "analysis": analysis, "ops": list(ops)}


def best_ratio_tsv(report: dict) -> str:
    ops = report["ops"]
    lines = ["dataset\t" + "\t".join(ops)]
    for ds in sorted(report["analysis"]):
        cells = []
        for op in ops:
            value = report["analysis"][ds][op]
            cells.append("undefined" if value is None else f"{value:.9f}")
        lines.append(ds + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def _result_to_json(result: SweepResult) -> dict:
    return {
        "schema": "spikefuse-sweep/1",
        "template": result.template,
        "template_fingerprint": result.template_fingerprint,
        "grid": {
            "ss": list(result.ss_values),
            "ts": list(result.ts_values),
            "ops": list(result.ops),
            "seeds": list(result.seeds),
            "skipped": [list(p) for p in result.skipped],
        },
        "records": [
            {
                "ss": r.ss,
                "ts": r.ts,
                "op": r.op,
                "dims": r.dims,
                "fingerprint": r.fingerprint,
                "seeds": list(r.seeds),
                "diversity_per_seed": list(r.diversity_per_seed),
                "spearman_per_seed": {k: list(v) for k, v in r.spearman_per_seed.items()},
                "n_pairs": r.n_pairs,
                "diversity_mean": r.diversity_mean,
                "spearman_mean": {k: r.spearman_mean(k) for k in r.spearman_per_seed},
            }
            for r in result.records
        ],
        "baselines": result.baselines,
        "best": result.best,
    }


def write_results(result: SweepResult, out_dir: str | Path) -> Path:
    """Write results.json plus the diversity and best-config TSV views."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESULTS_NAME
    with path.open("w", encoding="utf-8") as fh:
        json.dump(_result_to_json(result), fh, sort_keys=True, indent=1)
        fh.write("\n")
    (out_dir / "diversity.tsv").write_text(diversity_surface_tsv(result), encoding="utf-8")
    (out_dir / "best.tsv").write_text(best_tsv(result), encoding="utf-8")
    return path


def read_results(path: str | Path) -> SweepResult:
    path = Path(path)
    if path.is_dir():
        path = path / RESULTS_NAME
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("schema") != "spikefuse-sweep/1":
        raise ConfigError(f"{path}: not a sweep results file")
    records = tuple(
        SweepRecord(
            ss=r["ss"],
            ts=r["ts"],
            op=r["op"],
            dims=r["dims"],
            fingerprint=r["fingerprint"],
            seeds=tuple(r["seeds"]),
            diversity_per_seed=tuple(r["diversity_per_seed"]),
            spearman_per_seed={k: tuple(v) for k, v in r["spearman_per_seed"].items()},
            n_pairs={k: int(v) for k, v in r["n_pairs"].items()},
        )
        for r in data["records"]
    )
    grid = data["grid"]
    return SweepResult(
        template=data["template"],
        template_fingerprint=data["template_fingerprint"],
        ss_values=tuple(grid["ss"]),
        ts_values=tuple(grid["ts"]),
        ops=tuple(grid["ops"]),
        seeds=tuple(grid["seeds"]),
        skipped=tuple((p[0], p[1]) for p in grid["skipped"]),
        records=records,
        baselines=data["baselines"],
        best=data["best"],
    )
