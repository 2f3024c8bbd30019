"""Associative-merge spiking network over the sensory modalities.

One leaky integrate-and-fire neuron per modality. Neurons are driven by the
Poisson-encoded intensities of their own modality and are mutually connected
(never self-connected) with weights equal to the pairwise correlation of the
modality columns across the vocabulary, so statistically related senses
excite each other and anti-correlated ones inhibit. The network's output is
the binary spike raster of all modality neurons over the recording window.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .datasets import ConceptVector, NormDataset
from .encoding import EncodingConfig, SpikeRaster, poisson_encode

__all__ = [
    "ModalityCorrelation",
    "LifParams",
    "compute_modality_correlations",
    "run_am",
]


@dataclass(frozen=True)
class ModalityCorrelation:
    """Symmetric matrix of pairwise Pearson correlations between modalities."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        n = len(self.labels)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match {n} labels")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if np.any(np.abs(m) > 1.0 + 1e-9):
            raise ValueError("correlation entries must lie in [-1, 1]")
        m = np.clip(m, -1.0, 1.0)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def coupling(self) -> np.ndarray:
        """The synaptic weight matrix: correlations with the diagonal zeroed."""
        w = self.matrix.copy()
        np.fill_diagonal(w, 0.0)
        return w


@dataclass(frozen=True)
class LifParams:
    """Leaky integrate-and-fire constants (potentials are dimensionless).

    ``tau_m`` is measured in time steps. ``input_gain`` scales a neuron's own
    Poisson input spikes, ``synaptic_gain`` the correlation-weighted spikes
    arriving from the other modalities (with one step of delay).
    """

    tau_m: float = 10.0
    v_threshold: float = 1.0
    v_reset: float = 0.0
    v_rest: float = 0.0
    input_gain: float = 1.5
    synaptic_gain: float = 0.5

    def __post_init__(self):
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if not self.v_threshold > self.v_reset:
            raise ValueError("v_threshold must exceed v_reset")
        for field_name in ("v_threshold", "v_reset", "v_rest", "input_gain", "synaptic_gain"):
            if not np.isfinite(getattr(self, field_name)):
                raise ValueError(f"{field_name} must be finite")

    @property
    def v_floor(self) -> float:
        # lower clamp: bounded inhibition, 5 threshold-depths below rest
        return self.v_rest - 5.0 * (self.v_threshold - self.v_rest)


def compute_modality_correlations(norms: NormDataset) -> ModalityCorrelation:
    """Pearson correlation between every pair of modality columns.

    Computed over all concepts in the dataset. A constant column has no
    defined correlation; its entries are set to 0 with a warning so the
    corresponding synapses simply stay silent.
    """
    if len(norms) < 3:
        raise ValueError(
            f"need at least 3 concepts to estimate correlations, got {len(norms)}"
        )
    matrix = norms.matrix()
    std = matrix.std(axis=0)
    constant = std == 0.0
    if constant.any():
        which = [norms.modality_names[i] for i in np.flatnonzero(constant)]
        warnings.warn(
            f"constant modality column(s) {which}: correlation set to 0",
            stacklevel=2,
        )

    n = norms.dim
    corr = np.eye(n)
    centered = matrix - matrix.mean(axis=0)
    denom = np.where(constant, 1.0, std * matrix.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            if constant[i] or constant[j]:
                value = 0.0
            else:
                value = float((centered[:, i] * centered[:, j]).sum() / (denom[i] * denom[j]))
            corr[i, j] = corr[j, i] = np.clip(value, -1.0, 1.0)
    return ModalityCorrelation(tuple(norms.modality_names), corr)


def run_am(
    concept: ConceptVector | np.ndarray,
    corr: ModalityCorrelation,
    lif: LifParams,
    cfg: EncodingConfig,
    name: str | None = None,
) -> SpikeRaster:
    """Simulate the AM network for one concept and record its spike raster.

    Per time step, neuron ``i`` integrates

        drive_i = input_gain * s_i(t) + synaptic_gain * sum_{j != i} w_ij * out_j(t-1)
        V_i    += (-(V_i - v_rest) + drive_i) / tau_m

    and fires (raster cell 1, potential reset) once ``V_i`` reaches the
    threshold. Recurrent spikes act with a one-step delay, and the potential
    is clamped below at ``lif.v_floor``. Input streams are seeded per
    (seed, concept, modality label), so results do not depend on vocabulary
    iteration order.
    """
    if isinstance(concept, ConceptVector):
        if name is None:
            name = concept.name
        values = concept.values
    else:
        values = np.asarray(concept, dtype=np.float64)
    if values.size != corr.dim:
        raise ValueError(
            f"concept has {values.size} modalities but correlations cover {corr.dim}"
        )

    inputs = poisson_encode(
        values, cfg, label=f"ms:{name or ''}", row_labels=corr.labels
    )
    w = corr.coupling()

    n, t_steps = corr.dim, cfg.t_steps
    v = np.full(n, lif.v_rest, dtype=np.float64)
    out = np.zeros((n, t_steps), dtype=bool)
    prev = np.zeros(n, dtype=np.float64)
    in_bits = inputs.bits

    for t in range(t_steps):
        drive = lif.input_gain * in_bits[:, t] + lif.synaptic_gain * (w @ prev)
        v += (-(v - lif.v_rest) + drive) / lif.tau_m
        fired = v >= lif.v_threshold
        out[:, t] = fired
        v = np.where(fired, lif.v_reset, v)
        np.maximum(v, lif.v_floor, out=v)
        prev = fired.astype(np.float64)

    return SpikeRaster(out)
