"""Loading and validation of the four external data kinds.

Supported inputs:

* sensory norm tables (CSV/TSV, header row, first column is the concept),
* plain-text word embeddings (``token v1 ... vD`` per line, an optional
  ``N D`` count header is detected and skipped),
* human similarity judgments in the layouts of SimLex-999, MEN, MTurk-771,
  or a generic ``tokenA<TAB>tokenB<TAB>rating`` file,
* the working vocabulary as the intersection of norm and embedding tokens.

Tokens are case-folded and stripped; no stemming is applied. Loading is pure
and idempotent, so the same file always produces an equal dataset.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataFormatError

__all__ = [
    "ConceptVector",
    "NormDataset",
    "EmbeddingDataset",
    "SimilarityPair",
    "EvalDataset",
    "load_norms",
    "load_embeddings",
    "load_eval_pairs",
    "intersect_vocabulary",
]

EVAL_FORMATS = ("simlex", "men", "mturk", "generic_tsv")

# POS suffixes used by the lemma form of the MEN release ("automobile-n").
_MEN_POS_TAGS = ("-n", "-v", "-j", "-a")


def _norm_token(raw: str) -> str:
    return raw.strip().casefold()


def _finite_or_raise(value: float, path, line, what) -> float:
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite {what} {value!r}", path=path, line=line)
    return value


@dataclass(frozen=True)
class ConceptVector:
    """A named dense vector, either a sensory norm row or a text embedding."""

    name: str
    values: np.ndarray
    kind: str  # "multisensory" | "text" | "concat"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"{self.name!r}: values must be a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.name!r}: values must all be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConceptVector):
            return NotImplemented
        return (
            self.name == other.name
            and self.kind == other.kind
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.name, self.kind, self.values.tobytes()))


@dataclass(frozen=True)
class NormDataset:
    """Perceptual-strength ratings: one row per concept, one column per modality."""

    modality_names: tuple[str, ...]
    vectors: Mapping[str, ConceptVector]

    def __post_init__(self):
        for cv in self.vectors.values():
            if len(cv) != len(self.modality_names):
                raise ValueError(
                    f"{cv.name!r} has {len(cv)} values but "
                    f"{len(self.modality_names)} modalities are declared"
                )

    @property
    def dim(self) -> int:
        return len(self.modality_names)

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self, names: Iterable[str] | None = None) -> np.ndarray:
        """Stack rows for ``names`` (default: all concepts in insertion order)."""
        if names is None:
            names = self.vectors.keys()
        return np.stack([self.vectors[n].values for n in names])

    def restrict(self, vocab: Iterable[str]) -> "NormDataset":
        keep = set(vocab)
        return NormDataset(
            self.modality_names,
            {n: v for n, v in self.vectors.items() if n in keep},
        )


@dataclass(frozen=True)
class EmbeddingDataset:
    """Corpus-trained dense word vectors of uniform dimensionality."""

    dim: int
    vectors: Mapping[str, ConceptVector]

    def __post_init__(self):
        for cv in self.vectors.values():
            if len(cv) != self.dim:
                raise ValueError(
                    f"{cv.name!r} has {len(cv)} values, expected dim={self.dim}"
                )

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self, names: Iterable[str] | None = None) -> np.ndarray:
        if names is None:
            names = self.vectors.keys()
        return np.stack([self.vectors[n].values for n in names])

    def restrict(self, vocab: Iterable[str]) -> "EmbeddingDataset":
        keep = set(vocab)
        return EmbeddingDataset(
            self.dim, {n: v for n, v in self.vectors.items() if n in keep}
        )


@dataclass(frozen=True)
class SimilarityPair:
    a: str
    b: str
    rating: float

    def unordered(self) -> tuple[str, str]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)


@dataclass(frozen=True)
class EvalDataset:
    """A list of human-rated concept pairs, unique as unordered pairs."""

    name: str
    pairs: tuple[SimilarityPair, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for p in self.pairs:
            key = p.unordered()
            if key in seen:
                raise ValueError(f"duplicate pair {key} in {self.name!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)

    def tokens(self) -> set[str]:
        return {t for p in self.pairs for t in (p.a, p.b)}

    def ratings(self) -> np.ndarray:
        return np.array([p.rating for p in self.pairs], dtype=np.float64)


def load_norms(path, format: str = "csv") -> NormDataset:
    """Parse a sensory norm table.

    The header row names the modality columns; the first column holds the
    concept token. Malformed rows, non-numeric cells, and duplicate concepts
    are errors (norm tables are small curated files, silently repairing them
    would corrupt downstream column statistics).
    """
    if format not in ("csv", "tsv"):
        raise DataFormatError(f"unknown norms format {format!r}", path=path)
    delimiter = "," if format == "csv" else "\t"
    path = Path(path)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("file is empty, expected a header row", path=path)
        if len(header) < 2:
            raise DataFormatError(
                "header must name at least one modality column", path=path, line=1
            )
        modalities = tuple(h.strip() for h in header[1:])

        vectors: dict[str, ConceptVector] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore blank lines
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} columns, found {len(row)}",
                    path=path,
                    line=lineno,
                )
            name = _norm_token(row[0])
            if not name:
                raise DataFormatError("empty concept token", path=path, line=lineno)
            if name in vectors:
                raise DataFormatError(
                    f"duplicate concept {name!r}", path=path, line=lineno
                )
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise DataFormatError(
                    f"non-numeric cell: {exc}", path=path, line=lineno
                ) from None
            for v in values:
                _finite_or_raise(v, path, lineno, "norm value")
            vectors[name] = ConceptVector(name, np.array(values), "multisensory")

    return NormDataset(modalities, vectors)


def load_embeddings(path) -> EmbeddingDataset:
    """Parse whitespace-separated ``token v1 ... vD`` text embeddings.

    The dimensionality is inferred from the first data line; a leading
    ``N D`` count header (two integer fields) is skipped. Case-folding can
    collide distinct surface forms ("Apple"/"apple"); the first occurrence
    wins and a warning is emitted, mirroring the duplicate-pair policy.
    """
    path = Path(path)
    dim: int | None = None
    vectors: dict[str, ConceptVector] = {}

    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    continue  # "N D" count header
            if len(parts) < 2:
                raise DataFormatError(
                    "expected 'token v1 ... vD'", path=path, line=lineno
                )
            name = _norm_token(parts[0])
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DataFormatError(
                    f"expected {dim} components, found {len(parts) - 1}",
                    path=path,
                    line=lineno,
                )
            try:
                values = np.array([float(p) for p in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise DataFormatError(
                    f"non-numeric component: {exc}", path=path, line=lineno
                ) from None
            if not np.all(np.isfinite(values)):
                raise DataFormatError(
                    "non-finite component", path=path, line=lineno
                )
            if name in vectors:
                warnings.warn(
                    f"{path}: line {lineno}: duplicate token {name!r} after "
                    "case-folding, keeping first occurrence",
                    stacklevel=2,
                )
                continue
            vectors[name] = ConceptVector(name, values, "text")

    if dim is None:
        raise DataFormatError("file contains no embedding rows", path=path)
    return EmbeddingDataset(dim, vectors)


def _parse_rating(cell: str, path, lineno) -> float:
    try:
        rating = float(cell)
    except ValueError:
        raise DataFormatError(
            f"unparseable rating {cell!r}", path=path, line=lineno
        ) from None
    return _finite_or_raise(rating, path, lineno, "rating")


def _strip_men_pos(token: str) -> str:
    return token[:-2] if token.endswith(_MEN_POS_TAGS) else token


def load_eval_pairs(path, format: str) -> EvalDataset:
    """Parse a human similarity-judgment file.

    Column layouts per format tag:

    * ``simlex``      tab-separated with a header line; rating in column 4
      (the SimLex-999 score).
    * ``men``         whitespace-separated ``tokenA tokenB rating``, no
      header; ``-n``/``-v``/``-j``/``-a`` POS suffixes are stripped.
    * ``mturk``       comma-separated ``tokenA,tokenB,rating``, no header.
    * ``generic_tsv`` tab-separated ``tokenA<TAB>tokenB<TAB>rating``.

    Identity pairs (a == a) are allowed; duplicate unordered pairs keep the
    first occurrence with a warning since ranking needs unique pairs.
    """
    if format not in EVAL_FORMATS:
        raise DataFormatError(
            f"unknown eval format {format!r}, expected one of {EVAL_FORMATS}",
            path=path,
        )
    path = Path(path)
    pairs: list[SimilarityPair] = []
    seen: set[tuple[str, str]] = set()

    def add(a: str, b: str, rating: float, lineno: int):
        pair = SimilarityPair(a, b, rating)
        key = pair.unordered()
        if key in seen:
            warnings.warn(
                f"{path}: line {lineno}: duplicate pair {key}, keeping first",
                stacklevel=3,
            )
            return
        seen.add(key)
        pairs.append(pair)

    with path.open(encoding="utf-8") as fh:
        lines = enumerate(fh, start=1)
        if format == "simlex":
            next(lines, None)  # header line
        for lineno, line in lines:
            if not line.strip():
                continue
            if format == "simlex":
                cols = line.rstrip("\n").split("\t")
                if len(cols) < 4:
                    raise DataFormatError(
                        f"expected >= 4 tab-separated columns, found {len(cols)}",
                        path=path,
                        line=lineno,
                    )
                a, b = _norm_token(cols[0]), _norm_token(cols[1])
                rating = _parse_rating(cols[3], path, lineno)
            elif format == "men":
                cols = line.split()
                if len(cols) != 3:
                    raise DataFormatError(
                        f"expected 'tokenA tokenB rating', found {len(cols)} fields",
                        path=path,
                        line=lineno,
                    )
                a = _strip_men_pos(_norm_token(cols[0]))
                b = _strip_men_pos(_norm_token(cols[1]))
                rating = _parse_rating(cols[2], path, lineno)
            elif format == "mturk":
                cols = [c.strip() for c in line.rstrip("\n").split(",")]
                if len(cols) != 3:
                    raise DataFormatError(
                        f"expected 'tokenA,tokenB,rating', found {len(cols)} fields",
                        path=path,
                        line=lineno,
                    )
                a, b = _norm_token(cols[0]), _norm_token(cols[1])
                rating = _parse_rating(cols[2], path, lineno)
            else:  # generic_tsv
                cols = line.rstrip("\n").split("\t")
                if len(cols) != 3:
                    raise DataFormatError(
                        f"expected 'tokenA\\ttokenB\\trating', found {len(cols)} fields",
                        path=path,
                        line=lineno,
                    )
                a, b = _norm_token(cols[0]), _norm_token(cols[1])
                rating = _parse_rating(cols[2], path, lineno)
            if not a or not b:
                raise DataFormatError("empty token", path=path, line=lineno)
            add(a, b, rating, lineno)

    name = {"simlex": "SimLex999", "men": "MEN", "mturk": "MTurk771"}.get(
        format, path.stem
    )
    return EvalDataset(name, tuple(pairs))


def intersect_vocabulary(
    norms: NormDataset,
    embeddings: EmbeddingDataset,
    eval_dataset: EvalDataset,
) -> tuple[set[str], EvalDataset]:
    """Working vocabulary and the evaluation pairs it can support.

    The vocabulary is the set of tokens present in *both* representation
    datasets; a pair is usable only when both members are in the vocabulary.
    """
    vocab = set(norms.vectors) & set(embeddings.vectors)
    if not vocab:
        raise DataFormatError(
            "no concepts shared between the norm and embedding datasets; "
            "check that both files use the same token conventions"
        )
    usable = tuple(
        p for p in eval_dataset.pairs if p.a in vocab and p.b in vocab
    )
    return vocab, EvalDataset(eval_dataset.name, usable)
