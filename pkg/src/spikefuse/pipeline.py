"""End-to-end wiring: datasets -> spike rasters -> fused binary codes.

This module holds the one reproducible unit of configuration
(:class:`FusionConfig`) and the per-concept pipeline steps shared by the
command-line tools, the sweep harness, and the demo scripts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .am_network import LifParams, ModalityCorrelation, compute_modality_correlations, run_am
from .bitvec import BitVector
from .cooperate import CooperateConfig, fuse_bits
from .datasets import (
    EmbeddingDataset,
    EvalDataset,
    NormDataset,
    intersect_vocabulary,
)
from .encoding import EncodingConfig, SpikeRaster, min_max_normalize, poisson_encode
from .errors import EvaluationEmptyError

__all__ = ["DatasetIds", "FusionConfig", "PreparedInputs", "prepare_inputs",
           "encode_text_raster", "encode_am_raster", "human_like_code",
           "concatenate_vectors", "compute_codes"]


@dataclass(frozen=True)
class DatasetIds:
    """Names identifying which data files a run used (for reports only)."""

    norms: str = ""
    embeddings: str = ""
    evals: tuple[str, ...] = ()


@dataclass(frozen=True)
class FusionConfig:
    """Everything that determines a pipeline run, hashable for provenance."""

    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    lif: LifParams = field(default_factory=LifParams)
    cooperate: CooperateConfig = field(default_factory=CooperateConfig)
    datasets: DatasetIds = field(default_factory=DatasetIds)

    def fingerprint(self) -> str:
        """Stable short hash of the canonical serialized configuration."""
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_cooperate(self, **kwargs) -> "FusionConfig":
        return replace(self, cooperate=replace(self.cooperate, **kwargs))

    def with_seed(self, seed: int) -> "FusionConfig":
        return replace(self, encoding=self.encoding.with_seed(seed))


@dataclass(frozen=True)
class PreparedInputs:
    """Loaded, intersected, and normalized inputs ready for encoding.

    ``norms``/``embeddings`` keep the raw values for the standalone cosine
    baselines; ``norms_unit``/``embeddings_unit`` are their per-dimension
    min-max rescalings over the working vocabulary, used for spike encoding
    and for the concatenation baseline.
    """

    vocab: tuple[str, ...]
    norms: NormDataset
    embeddings: EmbeddingDataset
    norms_unit: NormDataset
    embeddings_unit: EmbeddingDataset
    correlations: ModalityCorrelation
    eval_sets: tuple[EvalDataset, ...]

    @property
    def d_ms(self) -> int:
        return self.norms.dim

    @property
    def d_text(self) -> int:
        return self.embeddings.dim


def prepare_inputs(
    norms: NormDataset,
    embeddings: EmbeddingDataset,
    eval_sets: tuple[EvalDataset, ...] | list[EvalDataset],
) -> PreparedInputs:
    """Intersect vocabularies, restrict, normalize, and fit correlations."""
    eval_sets = tuple(eval_sets)
    usable = []
    vocab: set[str] = set()
    for ds in eval_sets:
        vocab_ds, kept = intersect_vocabulary(norms, embeddings, ds)
        vocab = vocab_ds
        if not kept.pairs:
            raise EvaluationEmptyError(
                f"{ds.name}: no pair has both members in the working vocabulary"
            )
        usable.append(kept)
    if not eval_sets:
        vocab = set(norms.vectors) & set(embeddings.vectors)
        if not vocab:
            raise EvaluationEmptyError("norms and embeddings share no concepts")

    ordered = tuple(sorted(vocab))
    norms_r = norms.restrict(ordered)
    emb_r = embeddings.restrict(ordered)
    return PreparedInputs(
        vocab=ordered,
        norms=norms_r,
        embeddings=emb_r,
        norms_unit=min_max_normalize(norms_r),
        embeddings_unit=min_max_normalize(emb_r),
        correlations=compute_modality_correlations(norms_r),
        eval_sets=tuple(usable),
    )


def encode_text_raster(
    name: str, prepared: PreparedInputs, cfg: EncodingConfig
) -> SpikeRaster:
    """Spike raster of a concept's normalized text embedding."""
    return poisson_encode(
        prepared.embeddings_unit.vectors[name], cfg, label=f"text:{name}"
    )


def encode_am_raster(
    name: str, prepared: PreparedInputs, lif: LifParams, cfg: EncodingConfig
) -> SpikeRaster:
    """Spike raster of a concept's multisensory channel after the AM network."""
    return run_am(
        prepared.norms_unit.vectors[name], prepared.correlations, lif, cfg, name=name
    )


def human_like_code(name: str, prepared: PreparedInputs, config: FusionConfig) -> BitVector:
    """The fused binary representation of one concept under ``config``."""
    text = encode_text_raster(name, prepared, config.encoding)
    ms = encode_am_raster(name, prepared, config.lif, config.encoding)
    cc = config.cooperate
    bits = fuse_bits(text.bits, ms.bits, cc.ss, cc.ts, cc.op)
    return BitVector.from_bools(bits)


def concatenate_vectors(prepared: PreparedInputs) -> dict[str, np.ndarray]:
    """Normalized text ++ normalized norms per concept (cosine baseline)."""
    out = {}
    for name in prepared.vocab:
        out[name] = np.concatenate(
            [
                prepared.embeddings_unit.vectors[name].values,
                prepared.norms_unit.vectors[name].values,
            ]
        )
    return out


def compute_codes(
    prepared: PreparedInputs,
    config: FusionConfig,
    names: tuple[str, ...] | list[str] | None = None,
) -> dict[str, BitVector]:
    """Fused codes for ``names`` (default: the whole working vocabulary)."""
    if names is None:
        names = prepared.vocab
    return {name: human_like_code(name, prepared, config) for name in names}
