"""Spatial/temporal cooperation of the text and multisensory rasters.

The text raster is tall (hundreds of embedding dimensions) while the
multisensory raster has one row per modality. A sliding window of spatial
stride ``ss`` cuts the text raster into blocks of the multisensory height;
each block is combined cellwise with the multisensory raster (AND, OR, or
NOR), flattened row-major, OR-reduced over windows of temporal stride
``ts``, and the per-block bit strings are concatenated into one binary code
per concept.

For text height ``D``, multisensory height ``d``, and window length ``T``
the code length is exactly ``ceil((D - d) / ss) * ceil(d * T / ts)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitvec import BitVector
from .encoding import SpikeRaster

__all__ = [
    "CooperateConfig",
    "BinaryRepresentation",
    "COOPERATE_OPS",
    "expected_output_dims",
    "extract_block",
    "spatial_cooperate",
    "temporal_cooperate",
    "fuse",
    "write_code_file",
    "read_code_file",
]

# NOR as defined here is "1 iff the two cells differ" (an exclusive-or table);
# the historical name is kept because configs and reports use it.
COOPERATE_OPS = ("AND", "OR", "NOR")


@dataclass(frozen=True)
class CooperateConfig:
    ss: int = 10
    ts: int = 50
    op: str = "OR"

    def __post_init__(self):
        if self.ss < 1:
            raise ValueError(f"spatial stride must be >= 1, got {self.ss}")
        if self.ts < 1:
            raise ValueError(f"temporal stride must be >= 1, got {self.ts}")
        if self.op not in COOPERATE_OPS:
            raise ValueError(f"op must be one of {COOPERATE_OPS}, got {self.op!r}")


@dataclass(frozen=True)
class BinaryRepresentation:
    """The final binary code for one concept under one configuration."""

    concept: str
    bits: BitVector
    config_fingerprint: str = ""

    def __len__(self) -> int:
        return self.bits.n_bits


def expected_output_dims(d_text: int, d_ms: int, t_steps: int, ss: int, ts: int) -> int:
    """Closed-form length of the fused code: blocks x windows per block."""
    if d_text <= d_ms:
        raise ValueError(
            f"text height ({d_text}) must exceed multisensory height ({d_ms})"
        )
    if ss < 1 or ts < 1:
        raise ValueError("strides must be >= 1")
    n_blocks = math.ceil((d_text - d_ms) / ss)
    n_windows = math.ceil((d_ms * t_steps) / ts)
    return n_blocks * n_windows


def n_blocks(d_text: int, d_ms: int, ss: int) -> int:
    if d_text <= d_ms:
        raise ValueError(
            f"text height ({d_text}) must exceed multisensory height ({d_ms})"
        )
    return math.ceil((d_text - d_ms) / ss)


def extract_block(
    text_raster: SpikeRaster, i: int, ss: int, d_ms: int
) -> SpikeRaster:
    """Block ``i`` of the sliding window: rows [i*ss, i*ss + d_ms).

    Rows past the bottom of the text raster (only possible if ``i`` is forced
    beyond its valid range) are zero-padded so every block keeps the
    multisensory height.
    """
    total = n_blocks(text_raster.rows, d_ms, ss)
    if not 0 <= i < total:
        raise IndexError(f"block index {i} outside [0, {total})")
    start = i * ss
    stop = min(start + d_ms, text_raster.rows)
    window = text_raster.bits[start:stop]
    if window.shape[0] < d_ms:
        pad = np.zeros((d_ms - window.shape[0], text_raster.t_steps), dtype=bool)
        window = np.vstack([window, pad])
    return SpikeRaster(window)


def _combine(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    if op == "AND":
        return a & b
    if op == "OR":
        return a | b
    if op == "NOR":
        return a ^ b
    raise ValueError(f"op must be one of {COOPERATE_OPS}, got {op!r}")


def spatial_cooperate(
    block: SpikeRaster, ms_raster: SpikeRaster, op: str
) -> SpikeRaster:
    """Cellwise binary combination of a same-shape block with the ms raster.

    AND: 1 iff both cells are 1. OR: 0 iff both are 0. NOR: 1 iff the cells
    differ.
    """
    if block.bits.shape != ms_raster.bits.shape:
        raise ValueError(
            f"shape mismatch: block {block.bits.shape} vs "
            f"multisensory {ms_raster.bits.shape}"
        )
    return SpikeRaster(_combine(block.bits, ms_raster.bits, op))


def _or_reduce_windows(flat: np.ndarray, ts: int) -> np.ndarray:
    """OR over consecutive windows of length ts along the last axis.

    The final window may be shorter; zero-padding it is OR-neutral, so the
    reduction is done by padding to a multiple of ts and reshaping.
    """
    length = flat.shape[-1]
    n_win = -(-length // ts)
    pad = n_win * ts - length
    if pad:
        widths = [(0, 0)] * (flat.ndim - 1) + [(0, pad)]
        flat = np.pad(flat, widths, constant_values=False)
    return flat.reshape(*flat.shape[:-1], n_win, ts).any(axis=-1)


def temporal_cooperate(sc: SpikeRaster, ts: int) -> np.ndarray:
    """Reduce a cooperated block to one bit per temporal window.

    The block is flattened row-major (row 1 in full, then row 2, ...) and cut
    into consecutive windows of ``ts`` cells (the last one may be shorter);
    the output bit for a window is 1 iff the window contains any spike.
    Returns a bool vector of length ``ceil(rows * t_steps / ts)``.
    """
    if ts < 1:
        raise ValueError(f"temporal stride must be >= 1, got {ts}")
    return _or_reduce_windows(sc.bits.ravel(), ts)


def fuse(
    text_raster: SpikeRaster,
    ms_raster: SpikeRaster,
    cc: CooperateConfig,
    concept: str = "",
    config_fingerprint: str = "",
) -> BinaryRepresentation:
    """Full cooperation: blocks -> cellwise combine -> windowed OR -> concat.

    Equivalent to concatenating ``temporal_cooperate(spatial_cooperate(
    extract_block(i), ms, op), ts)`` over all block indices, but computed on
    a stacked view of all blocks at once.
    """
    if text_raster.t_steps != ms_raster.t_steps:
        raise ValueError(
            f"rasters disagree on window length: {text_raster.t_steps} vs "
            f"{ms_raster.t_steps}"
        )
    bits = fuse_bits(text_raster.bits, ms_raster.bits, cc.ss, cc.ts, cc.op)
    return BinaryRepresentation(concept, BitVector.from_bools(bits), config_fingerprint)


def write_code_file(path, codes, config_fingerprint: str) -> None:
    """Persist one configuration's codes: ``concept n_bits fingerprint hex``
    per line, concepts in sorted order."""
    from pathlib import Path

    with Path(path).open("w", encoding="utf-8") as fh:
        for name in sorted(codes):
            bv = codes[name]
            fh.write(f"{name} {bv.n_bits} {config_fingerprint} {bv.to_hex()}\n")


def read_code_file(path) -> tuple[dict[str, BitVector], str]:
    """Inverse of :func:`write_code_file`; returns (codes, fingerprint)."""
    from pathlib import Path

    codes: dict[str, BitVector] = {}
    fingerprint = ""
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}: line {lineno}: expected 4 fields")
            name, n_bits, fingerprint, hextext = parts
            codes[name] = BitVector.from_hex(hextext, int(n_bits))
    return codes, fingerprint


def block_stack(text_bits: np.ndarray, d_ms: int, ss: int) -> np.ndarray:
    """All sliding-window blocks as one (n_blocks, d_ms, t_steps) array."""
    d_text = text_bits.shape[0]
    total = n_blocks(d_text, d_ms, ss)
    starts = np.arange(total) * ss
    row_idx = starts[:, None] + np.arange(d_ms)[None, :]
    # the window arithmetic guarantees row_idx < d_text, but stay defensive
    # so a caller-supplied block count cannot read out of bounds
    safe = np.minimum(row_idx, d_text - 1)
    stack = text_bits[safe]
    stack[row_idx >= d_text] = False
    return stack


def fuse_bits(
    text_bits: np.ndarray, ms_bits: np.ndarray, ss: int, ts: int, op: str
) -> np.ndarray:
    """Vectorized core of :func:`fuse`, returning the raw bool code."""
    stack = block_stack(text_bits, ms_bits.shape[0], ss)
    sc = _combine(stack, ms_bits[None, :, :], op)
    flat = sc.reshape(sc.shape[0], -1)
    return _or_reduce_windows(flat, ts).ravel()
