"""Compiled per-pixel passes used by the planner and the pipeline.

These mirror the reference rules in predictors.py and hs.py exactly; the
equivalence is pinned by tests.  Blocks are int32 arrays in block-local
coordinates.  For algorithms 1..3 row 0 and column 0 are context: read,
never written.  Algorithm 0 treats every pixel as embeddable with a zero
prediction, i.e. the pass runs on raw values.

Scan discipline: the embed pass visits pixels in raster order and writes
each pixel after predicting it from current neighbor values; the extract
pass visits in reverse raster order, which presents every causal neighbor
in the same state the encoder saw.
"""

import numpy as np
from numba import njit

CONTEXT_SENTINEL = -(1 << 30)


@njit(cache=True, inline="always")
def _predict(block, e1, alg, r, c, q):
    if alg == 0:
        return 0
    left = block[r, c - 1]
    up = block[r - 1, c]
    if alg == 1:
        upleft = block[r - 1, c - 1]
        upright = up if c == q - 1 else block[r - 1, c + 1]
        return (left + up + upleft + upright + 2) // 4
    if alg == 2:
        pred = (left + up) // 2 + (e1[r, c - 1] + e1[r - 1, c]) // 2
        if pred < 0:
            pred = 0
        elif pred > 255:
            pred = 255
        return pred
    upleft = block[r - 1, c - 1]
    grad = left + up - upleft
    if left > up:
        lo, hi = up, left
    else:
        lo, hi = left, up
    if grad < lo:
        return lo
    if grad > hi:
        return hi
    return grad


@njit(cache=True)
def pe_scan(block, alg):
    """Prediction errors of an unmodified block (planning histogram).

    Context positions carry CONTEXT_SENTINEL.
    """
    q = block.shape[0]
    pe = np.empty((q, q), dtype=np.int32)
    e1 = np.zeros((q, q), dtype=np.int32)
    for r in range(q):
        for c in range(q):
            if alg != 0 and (r == 0 or c == 0):
                pe[r, c] = CONTEXT_SENTINEL
                continue
            pred = _predict(block, e1, alg, r, c, q)
            pe[r, c] = block[r, c] - pred
            if alg == 2:
                e1[r, c] = block[r, c] - (block[r, c - 1] + block[r - 1, c]) // 2
    return pe


@njit(cache=True)
def embed_pass(block, alg, has_r, p_r, z_r, has_l, p_l, z_l, stream):
    """One histogram-shifting pass embedding `stream` (zero-padded).

    Mutates `block` in place.  Returns (capacity, zero_side) where
    capacity counts peak hits and zero_side marks zero-bin hits per pixel
    (0 none, 1 right, 2 left).
    """
    q = block.shape[0]
    zero_side = np.zeros((q, q), dtype=np.int8)
    e1 = np.zeros((q, q), dtype=np.int32)
    nstream = stream.size
    cursor = 0
    capacity = 0
    for r in range(q):
        for c in range(q):
            if alg != 0 and (r == 0 or c == 0):
                continue
            pred = _predict(block, e1, alg, r, c, q)
            e = block[r, c] - pred
            nv = e
            if has_r == 1 and e == z_r:
                zero_side[r, c] = 1
            elif has_l == 1 and e == z_l:
                zero_side[r, c] = 2
            elif has_r == 1 and p_r < e < z_r:
                nv = e + 1
            elif has_l == 1 and z_l < e < p_l:
                nv = e - 1
            elif has_r == 1 and e == p_r:
                bit = stream[cursor] if cursor < nstream else 0
                cursor += 1
                capacity += 1
                nv = e + bit
            elif has_l == 1 and e == p_l:
                bit = stream[cursor] if cursor < nstream else 0
                cursor += 1
                capacity += 1
                nv = e - bit
            block[r, c] = pred + nv
            if alg == 2:
                e1[r, c] = block[r, c] - (block[r, c - 1] + block[r - 1, c]) // 2
    return capacity, zero_side


@njit(cache=True)
def extract_pass(block, alg, has_r, p_r, z_r, has_l, p_l, z_l):
    """Invert embed_pass up to zero-bin disambiguation.

    Mutates `block` toward the pre-embed state, treating every zero-bin
    value as a shifted arrival; callers re-raise marked occupants using
    the recovered zero map.  Returns (bits in embed order, zero_side).
    """
    q = block.shape[0]
    zero_side = np.zeros((q, q), dtype=np.int8)
    e1 = np.zeros((q, q), dtype=np.int32)
    if alg == 2:
        # first-order errors seen by the encoder are recomputable from the
        # marked block: a position's context is final once written
        for r in range(q):
            for c in range(q):
                if r == 0 or c == 0:
                    continue
                e1[r, c] = block[r, c] - (block[r, c - 1] + block[r - 1, c]) // 2
    bits_rev = np.empty(q * q, dtype=np.uint8)
    nbits = 0
    for r in range(q - 1, -1, -1):
        for c in range(q - 1, -1, -1):
            if alg != 0 and (r == 0 or c == 0):
                continue
            pred = _predict(block, e1, alg, r, c, q)
            e = block[r, c] - pred
            orig = e
            if has_r == 1 and e == z_r:
                zero_side[r, c] = 1
                orig = z_r - 1
            elif has_l == 1 and e == z_l:
                zero_side[r, c] = 2
                orig = z_l + 1
            elif has_r == 1 and e == p_r:
                bits_rev[nbits] = 0
                nbits += 1
            elif has_r == 1 and e == p_r + 1:
                bits_rev[nbits] = 1
                nbits += 1
                orig = p_r
            elif has_r == 1 and p_r + 1 < e < z_r:
                orig = e - 1
            elif has_l == 1 and e == p_l:
                bits_rev[nbits] = 0
                nbits += 1
            elif has_l == 1 and e == p_l - 1:
                bits_rev[nbits] = 1
                nbits += 1
                orig = p_l
            elif has_l == 1 and z_l < e < p_l - 1:
                orig = e + 1
            block[r, c] = pred + orig
    return bits_rev[:nbits][::-1].copy(), zero_side
