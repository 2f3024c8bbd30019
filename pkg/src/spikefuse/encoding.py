"""Rate coding of normalized intensities into binary spike rasters.

Each dimension of a concept vector is treated as an information intensity
``r`` in [0, 1] and expanded into a spike train over ``t_steps`` bins of
width ``dt``. Two schemes are available:

* ``"poisson"`` (default): the row's spike count is drawn from the exact
  Poisson law with mean ``r * dt * t_steps`` (clipped at ``t_steps``) and the
  spikes are placed uniformly at random within the window. Row counts then
  carry the Poisson signature (variance close to the mean) at any ``dt``.
* ``"thresholded"``: the classical per-step rule, one uniform draw
  ``x_rand`` per bin and a spike iff ``r * dt > x_rand``. Counts are
  binomial, hence underdispersed by a factor ``1 - r * dt``; prefer this
  scheme only when ``r * dt`` stays small.

Randomness is derived per (seed, stream label, row label), so a concept's
raster never depends on how the vocabulary is iterated or batched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .datasets import ConceptVector, EmbeddingDataset, NormDataset

__all__ = [
    "SpikeRaster",
    "EncodingConfig",
    "min_max_normalize",
    "poisson_encode",
    "spike_count_distribution_check",
    "dump_raster",
    "load_raster",
]

SCHEMES = ("poisson", "thresholded")


@dataclass(frozen=True)
class SpikeRaster:
    """A binary channels x time matrix; cell (i, t) is 1 iff channel i fired at t."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype != np.bool_:
            if not np.isin(bits, (0, 1)).all():
                raise ValueError("raster cells must be 0 or 1")
            bits = bits.astype(bool)
        if bits.ndim != 2 or bits.size == 0:
            raise ValueError("raster must be a non-empty 2-d matrix")
        bits = np.ascontiguousarray(bits)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def t_steps(self) -> int:
        return self.bits.shape[1]

    def spike_counts(self) -> np.ndarray:
        return self.bits.sum(axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeRaster):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )

    def __hash__(self):
        return hash((self.bits.shape, self.bits.tobytes()))


@dataclass(frozen=True)
class EncodingConfig:
    """Spike-train parameters: window length, bin width, seed, and scheme."""

    t_steps: int = 1000
    dt: float = 1.0
    seed: int = 42
    scheme: str = "poisson"

    def __post_init__(self):
        if self.t_steps < 1:
            raise ValueError(f"t_steps must be >= 1, got {self.t_steps}")
        if not 0.0 < self.dt <= 1.0:
            # intensities live in [0, 1]; dt <= 1 keeps r * dt a probability
            raise ValueError(f"dt must be in (0, 1], got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    def with_seed(self, seed: int) -> "EncodingConfig":
        return replace(self, seed=seed)


def _row_generator(seed: int, label: str, row_key: str) -> np.random.Generator:
    """One independent, reproducible stream per (seed, label, row)."""
    digest = hashlib.sha256(f"{label}\x1f{row_key}".encode("utf-8")).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32)
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, words)])
    return np.random.Generator(np.random.PCG64(ss))


def _encode_row(r: float, cfg: EncodingConfig, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(cfg.t_steps, dtype=bool)
    if cfg.scheme == "thresholded":
        if r > 0.0:
            out = r * cfg.dt > rng.random(cfg.t_steps)
        return out
    lam = r * cfg.dt * cfg.t_steps
    if lam <= 0.0:
        return out
    count = min(int(rng.poisson(lam)), cfg.t_steps)
    if count:
        out[rng.permutation(cfg.t_steps)[:count]] = True
    return out


def poisson_encode(
    values,
    cfg: EncodingConfig,
    label: str = "",
    row_labels: Sequence[str] | None = None,
) -> SpikeRaster:
    """Encode a normalized vector into a spike raster, one row per dimension.

    ``label`` namespaces the random stream (use distinct labels for distinct
    rasters of the same concept, e.g. ``"text:food"`` vs ``"ms:food"``).
    ``row_labels`` optionally names rows, so that reordering channels
    together with their labels permutes the raster rows identically;
    unnamed rows fall back to their index.
    """
    if isinstance(values, ConceptVector):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-d vector")
    if np.any(values < 0.0) or np.any(values > 1.0):
        bad = values[(values < 0.0) | (values > 1.0)][0]
        raise ValueError(
            f"intensity {bad} outside [0, 1]; normalize the dataset first"
        )
    if row_labels is not None and len(row_labels) != values.size:
        raise ValueError("row_labels length must match values length")

    rows = np.empty((values.size, cfg.t_steps), dtype=bool)
    for i, r in enumerate(values):
        key = str(row_labels[i]) if row_labels is not None else str(i)
        rows[i] = _encode_row(float(r), cfg, _row_generator(cfg.seed, label, key))
    return SpikeRaster(rows)


def min_max_normalize(dataset):
    """Rescale every dimension to [0, 1] across the whole dataset.

    Per dimension ``d``: ``v' = (v - min_d) / (max_d - min_d)``, computed
    over all concepts, so the relative intensity ordering within a dimension
    is preserved. A constant dimension carries no information and is mapped
    to 0.0 (with a warning) so its channel stays silent.
    """
    import warnings

    if isinstance(dataset, NormDataset):
        labels = dataset.modality_names
    elif isinstance(dataset, EmbeddingDataset):
        labels = None
    else:
        raise TypeError(f"cannot normalize {type(dataset).__name__}")

    names = list(dataset.vectors)
    if not names:
        return dataset
    matrix = dataset.matrix(names)
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    span = hi - lo
    constant = span == 0.0
    if constant.any():
        which = (
            [labels[i] for i in np.flatnonzero(constant)]
            if labels is not None
            else list(np.flatnonzero(constant))
        )
        warnings.warn(
            f"constant dimension(s) {which} normalized to 0.0", stacklevel=2
        )
    span = np.where(constant, 1.0, span)
    scaled = (matrix - lo) / span
    scaled[:, constant] = 0.0

    kind = next(iter(dataset.vectors.values())).kind
    vectors = {
        name: ConceptVector(name, scaled[i], kind) for i, name in enumerate(names)
    }
    if isinstance(dataset, NormDataset):
        return NormDataset(dataset.modality_names, vectors)
    return EmbeddingDataset(dataset.dim, vectors)


def spike_count_distribution_check(
    r: float, cfg: EncodingConfig, trials: int
) -> tuple[float, float, float]:
    """Compare empirical spike counts against Poisson(r * dt * t_steps).

    Runs ``trials`` independent encodings of a single channel with intensity
    ``r`` and returns ``(empirical mean, empirical variance, chi-square
    p-value)`` of the count distribution against the Poisson law. Bins with
    expected frequency below 5 are pooled into their neighbors before the
    chi-square test.
    """
    if trials < 100:
        raise ValueError(f"need >= 100 trials for a meaningful check, got {trials}")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"intensity must be in [0, 1], got {r}")

    counts = np.empty(trials, dtype=np.int64)
    for k in range(trials):
        rng = _row_generator(cfg.seed, f"count-check:{r}:{k}", "0")
        counts[k] = int(_encode_row(r, cfg, rng).sum())

    mean = float(counts.mean())
    variance = float(counts.var(ddof=1))
    lam = r * cfg.dt * cfg.t_steps
    if lam == 0.0:
        return mean, variance, 1.0 if not counts.any() else 0.0

    lo = int(counts.min())
    hi = int(counts.max())
    observed = np.bincount(counts - lo, minlength=hi - lo + 1).astype(float)
    support = np.arange(lo, hi + 1)
    expected = stats.poisson.pmf(support, lam) * trials
    # mass outside the observed support goes to the edge bins
    expected[0] += stats.poisson.cdf(lo - 1, lam) * trials
    expected[-1] += stats.poisson.sf(hi, lam) * trials

    observed, expected = _pool_sparse_bins(observed, expected, min_expected=5.0)
    if observed.size < 2:
        return mean, variance, 1.0
    # renormalize the tiny residual so scipy's sum check passes
    expected *= observed.sum() / expected.sum()
    result = stats.chisquare(observed, expected)
    return mean, variance, float(result.pvalue)


def _pool_sparse_bins(observed, expected, min_expected: float):
    obs_out, exp_out = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0 and exp_out:
        obs_out[-1] += acc_o
        exp_out[-1] += acc_e
    return np.array(obs_out), np.array(exp_out)


def dump_raster(raster: SpikeRaster, path) -> None:
    """Write the debug text format: a "rows t_steps" line, then '0'/'1' rows."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{raster.rows} {raster.t_steps}\n")
        for row in raster.bits:
            fh.write("".join("1" if b else "0" for b in row))
            fh.write("\n")


def load_raster(path) -> SpikeRaster:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'rows t_steps' header")
        rows, t_steps = int(header[0]), int(header[1])
        bits = np.zeros((rows, t_steps), dtype=bool)
        for i in range(rows):
            line = fh.readline().strip()
            if len(line) != t_steps:
                raise ValueError(f"{path}: row {i} has {len(line)} cells, expected {t_steps}")
            bits[i] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) == ord("1")
    return SpikeRaster(bits)
