"""Candidate pixel predictors and prediction-error histograms.

Four candidates with a shared causal-scan contract: predictions read only
neighbors inside the block (left, up, up-left, up-right) at their current
sample values.  The encoder modifies pixels in raster order after
predicting them; a decoder visiting pixels in reverse raster order then
sees every causal neighbor exactly as the encoder saw it.

The first row and first column of a block are context for A1..A3: never
embedded, excluded from the histogram.  A0 predicts zero everywhere, so
its "prediction errors" are the raw pixel values and all block pixels
participate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ContextUnavailable


class AlgorithmId(IntEnum):
    A0_ZERO = 0          # no prediction; raw value histogram
    A1_MEAN = 1          # rounded mean of four neighbors
    A2_SECOND_ORDER = 2  # first-order mean plus predicted first-order error
    A3_SIDE_MATCH = 3    # gradient-corrected side match (median rule)


@dataclass(frozen=True)
class BlockView:
    """A q-by-q window into an image, scanned in raster order."""

    row: int
    col: int
    size: int

    def contains(self, r: int, c: int) -> bool:
        return (
            self.row <= r < self.row + self.size
            and self.col <= c < self.col + self.size
        )

    def pixels(self):
        for r in range(self.row, self.row + self.size):
            for c in range(self.col, self.col + self.size):
                yield r, c


@dataclass
class Peh:
    """Histogram over integer bins (pixel values or prediction errors)."""

    counts: dict

    @property
    def support(self):
        if not self.counts:
            return (0, -1)
        keys = [k for k, v in self.counts.items() if v > 0]
        if not keys:
            return (0, -1)
        return (min(keys), max(keys))

    def count(self, binval: int) -> int:
        return self.counts.get(binval, 0)

    def total(self) -> int:
        return sum(self.counts.values())


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def predict(alg: AlgorithmId, block: BlockView, data: np.ndarray, pos,
            e1: dict | None = None) -> int:
    """Predict the pixel at pos from its causal in-block neighbors.

    `data` holds current sample values (possibly mid-embedding).  For A2,
    `e1` maps in-block positions to the first-order errors already
    computed during the scan; missing entries count as zero.
    """
    r, c = pos
    if alg == AlgorithmId.A0_ZERO:
        return 0
    if r == block.row or c == block.col:
        raise ContextUnavailable(f"({r},{c}) is context for {alg.name}")
    left = int(data[r, c - 1])
    up = int(data[r - 1, c])
    upleft = int(data[r - 1, c - 1])
    if alg == AlgorithmId.A1_MEAN:
        last_col = c == block.col + block.size - 1
        upright = up if last_col else int(data[r - 1, c + 1])
        return (left + up + upleft + upright + 2) // 4
    if alg == AlgorithmId.A2_SECOND_ORDER:
        first = (left + up) // 2
        e1 = e1 or {}
        e_left = e1.get((r, c - 1), 0)
        e_up = e1.get((r - 1, c), 0)
        return _clamp(first + (e_left + e_up) // 2, 0, 255)
    # A3: median of (left, up, left + up - upleft)
    grad = left + up - upleft
    return sorted((left, up, grad))[1]


def first_order_error(block: BlockView, data: np.ndarray, pos) -> int:
    """First-order error x - floor((L+U)/2) at a non-context position.

    Defined on current sample values, so the encoder and a reverse-order
    decoder agree on it at every point of their scans.
    """
    r, c = pos
    return int(data[r, c]) - (int(data[r, c - 1]) + int(data[r - 1, c])) // 2


def scan_errors(alg: AlgorithmId, block: BlockView, data: np.ndarray):
    """Yield (pos, error) over the block's embeddable pixels in raster order.

    Errors are computed against the array as currently stored, matching
    the state an encoder sees right before modifying each pixel.
    """
    if alg == AlgorithmId.A0_ZERO:
        for pos in block.pixels():
            yield pos, int(data[pos])
        return
    e1: dict = {}
    for pos in block.pixels():
        r, c = pos
        if r == block.row or c == block.col:
            continue
        err = int(data[pos]) - predict(alg, block, data, pos, e1)
        yield pos, err
        if alg == AlgorithmId.A2_SECOND_ORDER:
            e1[pos] = first_order_error(block, data, pos)


def compute_peh(alg: AlgorithmId, block: BlockView, data: np.ndarray) -> Peh:
    """Histogram of prediction errors (raw values for A0) over the block."""
    counts: dict = {}
    for _, err in scan_errors(alg, block, data):
        counts[err] = counts.get(err, 0) + 1
    return Peh(counts)
