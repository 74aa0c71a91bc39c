"""Histogram-shifting embed/extract over scalar sequences.

One pass uses up to two peak-zero bin pairs (one on each side of the
dominant peak).  Peak-valued elements carry one bit each; elements
strictly between a peak and its zero bin shift one step toward the zero;
occupants of a zero bin stay put and are recorded in a location map so
the decoder can tell them apart from shifted arrivals.  Peak and zero
must be at least two bins apart or extraction would be ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bits import BitVector
from .errors import InconsistentState, NoCapacity, RangeViolation
from .predictors import AlgorithmId, Peh

RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class PeakZeroPair:
    peak: int
    zero: int

    def __post_init__(self):
        if abs(self.peak - self.zero) < 2:
            raise RangeViolation(
                f"|peak-zero| must be >= 2, got ({self.peak}, {self.zero})"
            )

    @property
    def side(self) -> str:
        return RIGHT if self.zero > self.peak else LEFT


@dataclass(frozen=True)
class HSParams:
    right: PeakZeroPair | None = None
    left: PeakZeroPair | None = None

    def __post_init__(self):
        if self.right is not None and self.right.side != RIGHT:
            raise RangeViolation("right pair must have zero > peak")
        if self.left is not None and self.left.side != LEFT:
            raise RangeViolation("left pair must have zero < peak")
        if self.right is not None and self.left is not None:
            if not self.left.peak < self.right.peak:
                raise RangeViolation("left peak must sit below right peak")

    def peaks(self):
        out = []
        if self.right:
            out.append(self.right.peak)
        if self.left:
            out.append(self.left.peak)
        return out


@dataclass
class LocationMaps:
    """Per-pixel bitmaps: boundary pre-adjustments and zero-bin occupants."""

    boundary_map: BitVector
    zero_map: BitVector


def _nearest_zero(counts, start, stop, step):
    """First zero-count bin scanning from start toward stop (inclusive)."""
    b = start
    while (b <= stop) if step > 0 else (b >= stop):
        if counts.get(b, 0) == 0:
            return b
        b += step
    return None


def _least_count(counts, start, stop, step):
    """Least-count bin in the scan range; ties go to the nearest one."""
    best = None
    best_count = None
    b = start
    while (b <= stop) if step > 0 else (b >= stop):
        c = counts.get(b, 0)
        if best_count is None or c < best_count:
            best, best_count = b, c
        b += step
    return best


def _pick_peak(counts, candidates):
    """Highest count, ties by smaller |bin|, then smaller bin."""
    best = None
    key = None
    for b in candidates:
        k = (-counts.get(b, 0), abs(b), b)
        if key is None or k < key:
            best, key = b, k
    return best


def select_pairs(hist: Peh, allowed=(-255, 255)) -> HSParams:
    """Choose up to two peak-zero pairs from a histogram.

    The right pair takes the highest-count bin with an empty bin at least
    two above it; the left pair repeats the search strictly below the
    right peak with an empty bin at least two below.  When a side has no
    empty bin at all, the least-count bin serves as the zero and its
    occupants are later recorded in the zero map.  `allowed` bounds the
    usable bin range (pixel values for A0, prediction errors otherwise).
    """
    lo, hi = allowed
    counts = {b: c for b, c in hist.counts.items() if c > 0}
    if not counts:
        raise NoCapacity("empty histogram")

    def pair_for(side, peak_pool):
        if side == RIGHT:
            zero_of = lambda p: _nearest_zero(counts, p + 2, hi, 1)
            fallback_of = lambda p: _least_count(counts, p + 2, hi, 1)
        else:
            zero_of = lambda p: _nearest_zero(counts, p - 2, lo, -1)
            fallback_of = lambda p: _least_count(counts, p - 2, lo, -1)
        with_empty = [p for p in peak_pool if zero_of(p) is not None]
        if with_empty:
            peak = _pick_peak(counts, with_empty)
            return PeakZeroPair(peak, zero_of(peak))
        with_any = [p for p in peak_pool if fallback_of(p) is not None]
        if not with_any:
            return None
        peak = _pick_peak(counts, with_any)
        return PeakZeroPair(peak, fallback_of(peak))

    pool = [b for b in counts if lo <= b <= hi]
    right = pair_for(RIGHT, pool)
    left_pool = [
        b for b in pool if right is None or b < right.peak
    ]
    left = pair_for(LEFT, left_pool)
    if right is None and left is None:
        raise NoCapacity("no peak-zero pair constructible")
    return HSParams(right=right, left=left)


def hs_embed(values, bits: BitVector, params: HSParams,
             value_range=None):
    """Embed bits by one histogram-shifting pass over `values`.

    Bits are zero-padded to the pass capacity (the number of peak hits);
    callers frame the true message length externally.  Returns the
    modified sequence, the number of bits embedded and the zero-bin
    occupancy map.
    """
    r = params.right
    l = params.left
    zeros = set()
    if r:
        zeros.add(r.zero)
    if l:
        zeros.add(l.zero)
    out = []
    zero_map = BitVector()
    cursor = 0
    n_embedded = 0
    for v in values:
        z = 0
        if v in zeros:
            nv = v
            z = 1
        elif r and r.peak < v < r.zero:
            nv = v + 1
        elif l and l.zero < v < l.peak:
            nv = v - 1
        elif r and v == r.peak:
            bit = bits[cursor] if cursor < len(bits) else 0
            cursor += 1
            n_embedded += 1
            nv = v + bit
        elif l and v == l.peak:
            bit = bits[cursor] if cursor < len(bits) else 0
            cursor += 1
            n_embedded += 1
            nv = v - bit
        else:
            nv = v
        if value_range is not None and not value_range[0] <= nv <= value_range[1]:
            raise RangeViolation(f"shift leaves {value_range}: {v} -> {nv}")
        out.append(nv)
        zero_map.append(z)
    return out, n_embedded, zero_map


def hs_extract(values, params: HSParams, zero_map: BitVector):
    """Exact inverse of hs_embed given the same params and zero map."""
    r = params.right
    l = params.left
    out = []
    bits = BitVector()
    for i, v in enumerate(values):
        marked = i < len(zero_map) and zero_map[i] == 1
        if marked:
            if not ((r and v == r.zero) or (l and v == l.zero)):
                raise InconsistentState(
                    f"zero-map mark at value {v} matching no zero bin"
                )
            out.append(v)
            continue
        if r and v == r.peak:
            bits.append(0)
            out.append(v)
        elif r and v == r.peak + 1:
            bits.append(1)
            out.append(r.peak)
        elif r and r.peak + 1 < v <= r.zero:
            out.append(v - 1)
        elif l and v == l.peak:
            bits.append(0)
            out.append(v)
        elif l and v == l.peak - 1:
            bits.append(1)
            out.append(l.peak)
        elif l and l.zero <= v < l.peak - 1:
            out.append(v + 1)
        else:
            out.append(v)
    return out, bits


def build_boundary_map(pixels, alg: AlgorithmId):
    """Pre-adjust saturated pixels into the reliable range.

    Prediction-error passes move pixels by at most one step, so 0 -> 1
    and 255 -> 254 with a map bit per adjustment.  A0 shifts values only
    strictly between its peak and zero bins, which cannot leave [0, 255],
    so its map is the identity.
    """
    adjusted = []
    bmap = BitVector()
    if alg == AlgorithmId.A0_ZERO:
        for v in pixels:
            adjusted.append(v)
            bmap.append(0)
        return adjusted, bmap
    for v in pixels:
        if v == 0:
            adjusted.append(1)
            bmap.append(1)
        elif v == 255:
            adjusted.append(254)
            bmap.append(1)
        else:
            adjusted.append(v)
            bmap.append(0)
    return adjusted, bmap
