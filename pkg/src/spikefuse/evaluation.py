"""Similar-concepts evaluation: similarities, rankings, and closeness.

Model representations are scored per human-rated concept pair (cosine for
real vectors, Hamming similarity for binary codes), ranked, and compared to
the human ranking with Spearman's rank correlation. Ties receive average
ranks. Representation diversity (distinct codes / concepts) accompanies
binary methods as a capacity proxy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bitvec import BitVector
from .datasets import ConceptVector, EvalDataset, SimilarityPair
from .errors import EvaluationEmptyError

__all__ = [
    "RankedPairList",
    "ClosenessResult",
    "similarity",
    "average_ranks",
    "ordinal_ranks",
    "spearman",
    "spearman_from_scores",
    "diversity",
    "pair_scores",
    "evaluate_method",
    "baseline_concatenate",
    "case_study_table",
    "CaseStudyTable",
]

METRICS = ("cosine", "hamming")


def similarity(repr_a, repr_b, metric: str) -> float:
    """Similarity between two representations; higher means more similar.

    cosine: dot / (|a| |b|) for real vectors (a zero-norm vector yields 0.0
    with a warning). hamming: 1 - differing_bits / n_bits for binary codes.
    """
    if metric == "hamming":
        if not isinstance(repr_a, BitVector) or not isinstance(repr_b, BitVector):
            raise TypeError("hamming similarity needs BitVector operands")
        return repr_a.hamming_similarity(repr_b)
    if metric != "cosine":
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")

    a = repr_a.values if isinstance(repr_a, ConceptVector) else np.asarray(repr_a, dtype=np.float64)
    b = repr_b.values if isinstance(repr_b, ConceptVector) else np.asarray(repr_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine with a zero-norm vector defined as 0.0", stacklevel=2)
        return 0.0
    return float(a @ b / (na * nb))


def average_ranks(scores, descending: bool = True) -> np.ndarray:
    """1-based ranks with ties averaged; by default the highest score is rank 1."""
    scores = np.asarray(scores, dtype=np.float64)
    keys = -scores if descending else scores
    order = np.argsort(keys, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_keys = keys[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_keys[j + 1] == sorted_keys[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def ordinal_ranks(scores, descending: bool = True) -> np.ndarray:
    """1-based ranks with ties broken by input position (stable), as used in
    human-readable case tables where every row needs a distinct rank."""
    scores = np.asarray(scores, dtype=np.float64)
    keys = -scores if descending else scores
    order = np.argsort(keys, kind="stable")
    ranks = np.empty(scores.size, dtype=np.int64)
    ranks[order] = np.arange(1, scores.size + 1)
    return ranks


@dataclass(frozen=True)
class RankedPairList:
    """Concept pairs with their similarity scores and average-rank positions."""

    pairs: tuple[SimilarityPair, ...]
    scores: np.ndarray
    ranks: np.ndarray = field(init=False)
    method: str = "unnamed"

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.size != len(self.pairs):
            raise ValueError("one score per pair required")
        scores.setflags(write=False)
        ranks = average_ranks(scores)
        ranks.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "ranks", ranks)

    def __len__(self) -> int:
        return len(self.pairs)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("rank variance is zero; correlation undefined")
    return float((xc * yc).sum() / denom)


def spearman(human: RankedPairList, model: RankedPairList) -> float:
    """Spearman's rho between two rankings of the same pair set."""
    if len(human) != len(model) or any(
        h.unordered() != m.unordered() for h, m in zip(human.pairs, model.pairs)
    ):
        raise ValueError("rankings must cover the same pairs in the same order")
    if len(human) < 3:
        raise ValueError(f"need at least 3 pairs, got {len(human)}")
    return _pearson(human.ranks, model.ranks)


def spearman_from_scores(human_scores, model_scores) -> float:
    """Rho straight from two score arrays (ranks computed with tie averaging)."""
    h = np.asarray(human_scores, dtype=np.float64)
    m = np.asarray(model_scores, dtype=np.float64)
    if h.size != m.size:
        raise ValueError("score arrays must have equal length")
    if h.size < 3:
        raise ValueError(f"need at least 3 pairs, got {h.size}")
    return _pearson(average_ranks(h), average_ranks(m))


def diversity(reprs: Sequence[BitVector]) -> float:
    """Distinct codes divided by total codes, in (0, 1]."""
    reprs = list(reprs)
    if not reprs:
        raise ValueError("diversity of an empty collection is undefined")
    lengths = {r.n_bits for r in reprs}
    if len(lengths) > 1:
        raise ValueError(f"codes have mixed lengths {sorted(lengths)}")
    distinct = len({r.packed.tobytes() for r in reprs})
    return distinct / len(reprs)


@dataclass(frozen=True)
class ClosenessResult:
    """Closeness of one method to the human judgments of one dataset."""

    dataset: str
    method: str
    spearman: float
    n_pairs: int
    n_dropped: int = 0
    diversity: float | None = None
    config_fingerprint: str | None = None

    def __post_init__(self):
        if self.n_pairs <= 0:
            raise ValueError("a closeness result needs at least one pair")
        if not np.isfinite(self.spearman):
            raise ValueError("spearman must be finite")


def pair_scores(
    reprs: Mapping[str, object], eval_dataset: EvalDataset, metric: str
) -> np.ndarray:
    """Model similarity per pair; raises KeyError on a missing token."""
    out = np.empty(len(eval_dataset), dtype=np.float64)
    for i, p in enumerate(eval_dataset.pairs):
        out[i] = similarity(reprs[p.a], reprs[p.b], metric)
    return out


def evaluate_method(
    reprs: Mapping[str, object],
    eval_dataset: EvalDataset,
    metric: str,
    method: str = "unnamed",
    config_fingerprint: str | None = None,
) -> ClosenessResult:
    """Score every rateable pair, rank, and correlate with the human ranking.

    Pairs whose tokens lack a representation are dropped (and counted); the
    drop set depends only on the inputs, so re-evaluation is stable. When
    the representations are binary codes, their diversity over the whole
    mapping is attached.
    """
    kept = [p for p in eval_dataset.pairs if p.a in reprs and p.b in reprs]
    n_dropped = len(eval_dataset) - len(kept)
    if len(kept) < 3:
        raise EvaluationEmptyError(
            f"{eval_dataset.name}: only {len(kept)} usable pairs "
            f"({n_dropped} dropped); need at least 3"
        )
    usable = EvalDataset(eval_dataset.name, tuple(kept))
    human = RankedPairList(usable.pairs, usable.ratings(), method="human")
    model = RankedPairList(
        usable.pairs, pair_scores(reprs, usable, metric), method=method
    )
    div = None
    if all(isinstance(v, BitVector) for v in reprs.values()):
        div = diversity(list(reprs.values()))
    return ClosenessResult(
        dataset=eval_dataset.name,
        method=method,
        spearman=spearman(human, model),
        n_pairs=len(kept),
        n_dropped=n_dropped,
        diversity=div,
        config_fingerprint=config_fingerprint,
    )


def baseline_concatenate(text: ConceptVector, ms: ConceptVector) -> ConceptVector:
    """Plain concatenation baseline: the two normalized vectors glued together."""
    if text.name != ms.name:
        raise ValueError(f"cannot concatenate {text.name!r} with {ms.name!r}")
    return ConceptVector(
        text.name, np.concatenate([text.values, ms.values]), "concat"
    )


@dataclass(frozen=True)
class CaseStudyTable:
    """Per-pair human ratings/ranks next to each method's rank."""

    dataset: str
    pairs: tuple[SimilarityPair, ...]
    human_ranks: tuple[int, ...]
    method_ranks: dict[str, tuple[int, ...]]

    def to_tsv(self) -> str:
        headers = ["concept1", "concept2", "rating", "human_rank"] + [
            f"rank_{m}" for m in self.method_ranks
        ]
        lines = ["\t".join(headers)]
        for i, p in enumerate(self.pairs):
            row = [p.a, p.b, f"{p.rating:.9f}", str(self.human_ranks[i])]
            row += [str(ranks[i]) for ranks in self.method_ranks.values()]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def case_study_table(
    eval_subset: EvalDataset, method_scores: Mapping[str, Sequence[float]]
) -> CaseStudyTable:
    """Build the per-pair rank comparison for a hand-picked pair subset.

    ``method_scores`` maps a method name to one similarity score per pair
    (aligned with ``eval_subset.pairs``). Displayed ranks are ordinal with
    ties broken by row order, so each column is a permutation of 1..n as in
    a printed table; closeness statistics elsewhere keep averaged ties.
    """
    n = len(eval_subset)
    if n == 0:
        raise ValueError("case study needs at least one pair")
    human = tuple(int(r) for r in ordinal_ranks(eval_subset.ratings()))
    ranks: dict[str, tuple[int, ...]] = {}
    for name, scores in method_scores.items():
        scores = np.asarray(scores, dtype=np.float64)
        if scores.size != n:
            raise ValueError(f"method {name!r} supplied {scores.size} scores for {n} pairs")
        ranks[name] = tuple(int(r) for r in ordinal_ranks(scores))
    return CaseStudyTable(eval_subset.name, eval_subset.pairs, human, ranks)
