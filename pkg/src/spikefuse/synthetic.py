"""Seeded synthetic corpora for demos and tests.

Generates a matched trio of datasets: random sensory norms, random text
embeddings that share a latent factor with the norms, and an evaluation set
whose human ratings correlate with (but do not equal) the embedding cosine,
so closeness scores are informative rather than degenerate.
"""

from __future__ import annotations

import numpy as np

from .datasets import (
    ConceptVector,
    EmbeddingDataset,
    EvalDataset,
    NormDataset,
    SimilarityPair,
)

__all__ = ["make_toy_corpus"]

MODALITIES = ("Auditory", "Gustatory", "Haptic", "Olfactory", "Visual")


def make_toy_corpus(
    n_concepts: int = 30,
    d_text: int = 24,
    d_ms: int = 5,
    n_pairs: int = 40,
    seed: int = 0,
    rating_noise: float = 0.2,
) -> tuple[NormDataset, EmbeddingDataset, EvalDataset]:
    if n_concepts < 3:
        raise ValueError("need at least 3 concepts")
    rng = np.random.default_rng(seed)
    names = [f"word{i:03d}" for i in range(n_concepts)]

    latent = rng.normal(size=(n_concepts, min(d_ms, 3)))
    norms = rng.random((n_concepts, d_ms)) * 5.0
    norms[:, : latent.shape[1]] += latent
    norms = np.clip(norms, 0.0, None)

    embeddings = rng.normal(size=(n_concepts, d_text))
    embeddings[:, : latent.shape[1]] += 2.0 * latent

    norm_vectors = {
        name: ConceptVector(name, norms[i], "multisensory")
        for i, name in enumerate(names)
    }
    emb_vectors = {
        name: ConceptVector(name, embeddings[i], "text") for i, name in enumerate(names)
    }

    all_pairs = [(i, j) for i in range(n_concepts) for j in range(i + 1, n_concepts)]
    chosen = rng.choice(len(all_pairs), size=min(n_pairs, len(all_pairs)), replace=False)
    pairs = []
    for idx in sorted(chosen):
        i, j = all_pairs[idx]
        ei, ej = embeddings[i], embeddings[j]
        cos = float(ei @ ej / (np.linalg.norm(ei) * np.linalg.norm(ej)))
        rating = cos + rating_noise * rng.normal()
        pairs.append(SimilarityPair(names[i], names[j], round(rating, 6)))

    return (
        NormDataset(MODALITIES[:d_ms] if d_ms <= 5 else tuple(f"mod{k}" for k in range(d_ms)), norm_vectors),
        EmbeddingDataset(d_text, emb_vectors),
        EvalDataset("toy", tuple(pairs)),
    )
