"""End-to-end reversible embedding: aux-LSB chaining and multi-layer passes.

Per layer, exactly 161 border LSBs are rewritten: a 96-bit parameter
header and a 65-bit rolling record slot.  Every embedded block carries,
inside its own bit stream, the slot content it replaced, so the decoder
can walk the chain backward and put every LSB back:

    block stream = [map_len:16][compressed maps][snapshot:65][first:1]
                   [original header LSBs:96, chain tail only][chunk]

The slot word is a 65-bit record prefixed with the block's position in
the processing permutation (head_pos:8, flag:1, alg:2, pair flags:2,
bins:4x9, chunk_len:16).  The position prefix is what lets the decoder
skip blocks that embed nothing: they are left untouched and never
referenced.  Payload chunks are capped at 2^16-1 bits per block by the
16-bit length field; net capacities above that are simply not used.

Multi-layer embedding rotates the marked image a quarter turn before
each additional layer; extraction undoes the rotations while walking
layer indices back down to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ensemble
from .bits import (
    AuxHeader,
    BitVector,
    HEADER_BITS,
    HEADER_MAGIC,
    HEADER_VERSION,
    RECORD_BITS,
    ac_decompress_array,
    pack_header,
    unpack_header,
)
from .ensemble import (
    ALL_ALGORITHMS,
    DistortionModel,
    make_partition,
    make_permutation,
    plan_block,
)
from .errors import (
    BadMagic,
    BlockRdhError,
    CorruptStream,
    ImageTooSmall,
    PayloadTooLarge,
    ShapeMismatch,
)
from .hs import HSParams, PeakZeroPair
from .image import GrayImage, mse as image_mse, psnr as image_psnr, rotate90, rotate270
from . import _kernels

AUTO = "auto"
AUX_FOOTPRINT = HEADER_BITS + RECORD_BITS  # 161 LSB positions per layer
AUTO_GRID_RANGE = tuple(range(2, 9))
# magic..t_border must land in image row 0 so a decoder can bootstrap
_MIN_WIDTH = 28


@dataclass
class LayerConfig:
    """Knobs for one embedding layer."""

    t_border: int = 1
    m_grid: object = AUTO  # grid side 2..15, or AUTO to sweep 2..8
    perm_seed: int = 0
    payload: BitVector = field(default_factory=BitVector)
    candidates: tuple = ALL_ALGORITHMS


@dataclass
class LayerReport:
    """Accounting for one layer; pure bits exclude all side information."""

    layer_index: int
    m_used: int
    t_border: int
    pure_bits: int
    side_info_bits: int
    mse: float
    psnr_db: float
    alg_histogram: dict
    candidate_evaluations: int = 0

    @property
    def skipped(self) -> int:
        return self.alg_histogram.get("skipped", 0)


# --- aux region layout ---

def resolve_t(h: int, w: int, t_min: int = 1) -> int:
    """Smallest border width >= t_min whose LSBs can hold the aux data."""
    t = max(1, t_min)
    while h - 2 * t >= 2 and w - 2 * t >= 2:
        aux = h * w - (h - 2 * t) * (w - 2 * t)
        if aux >= AUX_FOOTPRINT:
            return t
        t += 1
    raise ImageTooSmall(
        f"{h}x{w} cannot reserve {AUX_FOOTPRINT} auxiliary LSBs"
    )


def aux_positions(h: int, w: int, t: int):
    """Row/col arrays of the first 161 border positions in raster order."""
    rows = []
    cols = []
    for r in range(h):
        if r < t or r >= h - t:
            span = range(w)
        else:
            span = list(range(t)) + list(range(w - t, w))
        for c in span:
            rows.append(r)
            cols.append(c)
            if len(rows) == AUX_FOOTPRINT:
                return np.array(rows), np.array(cols)
    raise ImageTooSmall(f"border of {h}x{w} at t={t} has {len(rows)} pixels")


def _read_lsbs(data, rr, cc):
    return (data[rr, cc] & 1).astype(np.uint8)


def _write_lsbs(data, rr, cc, bits):
    data[rr, cc] = (data[rr, cc] & ~np.int32(1)) | bits.astype(np.int32)


# --- rolling slot word ---

_SLOT_BITS = RECORD_BITS  # 8 pos + 1 flag + 2 alg + 2 pairs + 36 bins + 16 len


def pack_slot_word(head_pos, alg_id, pair_right, pair_left, bins, chunk_len):
    value = head_pos & 0xFF
    value = (value << 1) | 1
    value = (value << 2) | (alg_id & 3)
    value = (value << 1) | (pair_right & 1)
    value = (value << 1) | (pair_left & 1)
    for b in bins:
        value = (value << 9) | (b & 0x1FF)
    value = (value << 16) | (chunk_len & 0xFFFF)
    return np.array(
        [(value >> (_SLOT_BITS - 1 - i)) & 1 for i in range(_SLOT_BITS)],
        dtype=np.uint8,
    )


def unpack_slot_word(bits):
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    chunk_len = value & 0xFFFF
    value >>= 16
    bins = []
    for _ in range(4):
        raw = value & 0x1FF
        bins.append(raw - 512 if raw >= 256 else raw)
        value >>= 9
    bins.reverse()
    pair_left = value & 1
    value >>= 1
    pair_right = value & 1
    value >>= 1
    alg_id = value & 3
    value >>= 2
    flag = value & 1
    head_pos = value >> 1
    return head_pos, flag, alg_id, pair_right, pair_left, tuple(bins), chunk_len


def _params_from_slot(alg_id, pair_right, pair_left, bins):
    try:
        right = PeakZeroPair(bins[0], bins[1]) if pair_right else None
        left = PeakZeroPair(bins[2], bins[3]) if pair_left else None
        if right is not None and right.side != "right":
            raise CorruptStream("right pair has zero below peak")
        if left is not None and left.side != "left":
            raise CorruptStream("left pair has zero above peak")
        return HSParams(right=right, left=left)
    except BlockRdhError as exc:
        raise CorruptStream(f"invalid bin pairs in record: {exc}") from exc


# --- layer planning with the chain ---

@dataclass
class _LayerOutcome:
    t: int
    m: int
    seed: int
    layer_index: int
    partition: object
    perm: list
    plans: list
    consumed: int
    final_word: np.ndarray
    header_bits: np.ndarray
    evaluations: int
    block_distortion: float
    aux_sq_err: int

    @property
    def capacity_sum(self):
        return sum(p.capacity for p in self.plans if p.embedded_flag)

    def mse(self, h, w):
        return (self.block_distortion + self.aux_sq_err) / (h * w)


def _plan_layer_chain(data, h, w, t, m, seed, layer_index, payload,
                      candidates, model):
    """Plan one layer with aux chaining; None if no block can anchor it."""
    partition = make_partition(h, w, t, m)
    perm = make_permutation(seed, partition.n_blocks)
    rr, cc = aux_positions(h, w, t)
    hdr_rr, hdr_cc = rr[:HEADER_BITS], cc[:HEADER_BITS]
    slot_rr, slot_cc = rr[HEADER_BITS:], cc[HEADER_BITS:]
    s0_hdr = _read_lsbs(data, hdr_rr, hdr_cc)
    s0_rec = _read_lsbs(data, slot_rr, slot_cc)

    evals0 = ensemble.eval_count()
    pending_word = s0_rec
    first_pending = True
    consumed = 0
    plans = []
    final_word = None
    for k, pos in enumerate(perm, start=1):
        block = partition.blocks[pos - 1]
        remaining = payload[consumed:]
        force = first_pending and remaining.size == 0
        parts = [pending_word, np.array([1 if first_pending else 0], np.uint8)]
        if first_pending:
            parts.append(s0_hdr)
        extra = np.concatenate(parts)
        plan = plan_block(
            block,
            data,
            remaining.size,
            model,
            block_index=pos - 1,
            candidates=candidates,
            extra_bits=extra,
            payload=remaining,
            force_embed=force,
        )
        if plan.embedded_flag:
            alg_id, pr, pl, bins = plan.record_fields()
            word = pack_slot_word(k, alg_id, pr, pl, bins, plan.chunk_bits.size)
            pending_word = word
            final_word = word
            first_pending = False
            consumed += plan.chunk_bits.size
        plans.append(plan)

    if final_word is None:
        return None

    header_bits = pack_header(
        AuxHeader(layer_index=layer_index, t_border=t, m_grid=m, perm_seed=seed)
    ).to_array()
    block_distortion = sum(p.distortion for p in plans if p.embedded_flag)
    aux_sq = int(np.sum(s0_hdr != header_bits)) + int(np.sum(s0_rec != final_word))
    return _LayerOutcome(
        t=t,
        m=m,
        seed=seed,
        layer_index=layer_index,
        partition=partition,
        perm=perm,
        plans=plans,
        consumed=consumed,
        final_word=final_word,
        header_bits=header_bits,
        evaluations=ensemble.eval_count() - evals0,
        block_distortion=block_distortion,
        aux_sq_err=aux_sq,
    )


def _commit_layer(data, h, w, outcome: _LayerOutcome):
    for plan in outcome.plans:
        if not plan.embedded_flag:
            continue
        b = outcome.partition.blocks[plan.block_index]
        data[b.row : b.row + b.size, b.col : b.col + b.size] = plan.final_block
    rr, cc = aux_positions(h, w, outcome.t)
    _write_lsbs(data, rr[:HEADER_BITS], cc[:HEADER_BITS], outcome.header_bits)
    _write_lsbs(data, rr[HEADER_BITS:], cc[HEADER_BITS:], outcome.final_word)


def _layer_report(outcome: _LayerOutcome, cover: GrayImage,
                  marked: GrayImage) -> LayerReport:
    hist = {alg.name: 0 for alg in ALL_ALGORITHMS}
    skipped = 0
    for p in outcome.plans:
        if p.embedded_flag:
            hist[p.alg.name] += 1
        else:
            skipped += 1
    hist["skipped"] = skipped
    pure = outcome.consumed
    side = outcome.capacity_sum - pure + AUX_FOOTPRINT
    return LayerReport(
        layer_index=outcome.layer_index,
        m_used=outcome.m,
        t_border=outcome.t,
        pure_bits=pure,
        side_info_bits=side,
        mse=image_mse(cover, marked),
        psnr_db=image_psnr(cover, marked),
        alg_histogram=hist,
        candidate_evaluations=outcome.evaluations,
    )


def _best_layer_outcome(data, h, w, t, m_setting, seed, layer_index, payload,
                        candidates, model):
    """Plan at a fixed m, or sweep the AUTO range for max pure bits."""
    if m_setting == AUTO:
        grid_sides = AUTO_GRID_RANGE
    else:
        grid_sides = (int(m_setting),)
    best = None
    best_key = None
    errors = []
    for m in grid_sides:
        try:
            outcome = _plan_layer_chain(
                data, h, w, t, m, seed, layer_index, payload, candidates, model
            )
        except ImageTooSmall as exc:
            errors.append(exc)
            continue
        if outcome is None:
            continue
        key = (-outcome.consumed, outcome.mse(h, w), m)
        if best_key is None or key < best_key:
            best, best_key = outcome, key
    if best is None:
        if len(errors) == len(grid_sides):
            raise ImageTooSmall(str(errors[0]))
        if payload.size:
            raise PayloadTooLarge("no block can carry the auxiliary chain")
        raise ImageTooSmall("no block can anchor the auxiliary chain")
    return best


def _require_8bit(img: GrayImage):
    if img.bit_depth != 8:
        raise ShapeMismatch("embedding pipeline operates on 8-bit images")


def _embed_layer_partial(img: GrayImage, cfg: LayerConfig, payload: np.ndarray,
                         layer_index: int, model=None):
    """Embed as much payload prefix as fits; returns consumed count."""
    _require_8bit(img)
    h, w = img.height, img.width
    if w < _MIN_WIDTH:
        raise ImageTooSmall(
            f"width {w} cannot hold the bootstrap header prefix"
        )
    t = resolve_t(h, w, cfg.t_border)
    model = model or DistortionModel()
    outcome = _best_layer_outcome(
        img.data, h, w, t, cfg.m_grid, cfg.perm_seed, layer_index, payload,
        cfg.candidates, model,
    )
    data = img.mutable_copy()
    _commit_layer(data, h, w, outcome)
    marked = img.replace_data(data)
    report = _layer_report(outcome, img, marked)
    return marked, outcome.consumed, report


def embed_layer(img: GrayImage, cfg: LayerConfig):
    """Embed cfg.payload into one layer; the whole payload must fit."""
    payload = cfg.payload.to_array()
    marked, consumed, report = _embed_layer_partial(img, cfg, payload, 1)
    if consumed < payload.size:
        raise PayloadTooLarge(
            f"layer capacity {consumed} bits < payload {payload.size} bits"
        )
    return marked, report


def embed_message(img: GrayImage, payload: BitVector, cfg: LayerConfig,
                  max_layers: int = 1):
    """Multi-layer embedding with a quarter turn between layers."""
    if max_layers < 1:
        raise PayloadTooLarge("max_layers must be at least 1")
    bits = payload.to_array() if isinstance(payload, BitVector) else np.asarray(
        payload, dtype=np.uint8
    )
    current = img
    reports = []
    consumed_total = 0
    for layer in range(1, max_layers + 1):
        if layer > 1:
            current = rotate90(current)
        current, consumed, report = _embed_layer_partial(
            current, cfg, bits[consumed_total:], layer
        )
        consumed_total += consumed
        reports.append(report)
        if consumed_total >= bits.size:
            break
    if consumed_total < bits.size:
        raise PayloadTooLarge(
            f"{bits.size - consumed_total} payload bits left after "
            f"{max_layers} layers"
        )
    return current, reports


def embed_fill(img: GrayImage, cfg: LayerConfig, layers: int,
               payload_seed: int = 1):
    """Fill `layers` layers with as many seeded pseudo-random bits as fit.

    Returns (marked, reports, payload_bits) where payload_bits is exactly
    what was embedded.
    """
    current = img
    reports = []
    embedded = []
    for layer in range(1, layers + 1):
        if layer > 1:
            current = rotate90(current)
        bound = current.height * current.width
        bits = ensemble.random_bits(payload_seed + layer, bound)
        current, consumed, report = _embed_layer_partial(
            current, cfg, bits, layer
        )
        embedded.append(bits[:consumed])
        reports.append(report)
    return current, reports, np.concatenate(embedded) if embedded else np.empty(0, np.uint8)


# --- extraction ---

def _extract_block(data, block, alg_id, params, chunk_len, q):
    """Run the reverse pass and parse the in-band stream for one block."""
    arr = np.ascontiguousarray(
        data[block.row : block.row + block.size,
             block.col : block.col + block.size],
        dtype=np.int32,
    )
    r, l = params.right, params.left
    bits, zero_side = _kernels.extract_pass(
        arr,
        int(alg_id),
        1 if r else 0,
        r.peak if r else 0,
        r.zero if r else 0,
        1 if l else 0,
        l.peak if l else 0,
        l.zero if l else 0,
    )
    capacity = bits.size
    if capacity < 16:
        raise CorruptStream("extracted block stream shorter than its framing")
    map_len = 0
    for i in range(16):
        map_len = (map_len << 1) | int(bits[i])
    off = 16 + map_len
    if off > capacity:
        raise CorruptStream("compressed maps exceed the extracted stream")
    maps = ac_decompress_array(bits[16:off])
    if maps.size != 2 * q * q:
        raise CorruptStream(
            f"maps decompressed to {maps.size} bits, expected {2 * q * q}"
        )
    if off + RECORD_BITS + 1 > capacity:
        raise CorruptStream("stream too short for snapshot")
    snapshot = bits[off : off + RECORD_BITS]
    off += RECORD_BITS
    is_first = int(bits[off])
    off += 1
    hdr_bits = None
    if is_first:
        if off + HEADER_BITS > capacity:
            raise CorruptStream("stream too short for header snapshot")
        hdr_bits = bits[off : off + HEADER_BITS]
        off += HEADER_BITS
    if off + chunk_len > capacity:
        raise CorruptStream("stream too short for its chunk")
    chunk = bits[off : off + chunk_len]
    off += chunk_len
    if np.any(bits[off:]):
        raise CorruptStream("nonzero padding after chunk")

    boundary = maps[: q * q]
    zmap = maps[q * q :]
    flat = arr.reshape(-1)
    zs = zero_side.reshape(-1)
    marked_idx = np.nonzero(zmap)[0]
    if marked_idx.size:
        sides = zs[marked_idx]
        if np.any(sides == 0):
            raise CorruptStream("zero-map mark on a non-zero-bin value")
        flat[marked_idx] += np.where(sides == 1, 1, -1).astype(np.int32)
    bnd_idx = np.nonzero(boundary)[0]
    if bnd_idx.size:
        vals = flat[bnd_idx]
        if np.any((vals != 1) & (vals != 254)):
            raise CorruptStream("boundary-map mark on a non-boundary value")
        flat[bnd_idx] = np.where(vals == 1, 0, 255)
    return arr, capacity, snapshot, is_first, hdr_bits, chunk


def _extract_layer_core(img: GrayImage):
    _require_8bit(img)
    h, w = img.height, img.width
    if w < _MIN_WIDTH:
        raise BadMagic(f"width {w} below the {_MIN_WIDTH}-pixel minimum")
    # The header stores the border width t, but its own position depends
    # on t.  Its first 28 bits (magic, version, layer, t) sit in row 0,
    # which belongs to the border for every t, so they bootstrap the read.
    probe = 0
    for c in range(_MIN_WIDTH):
        probe = (probe << 1) | (int(img.data[0, c]) & 1)
    t = probe & 0xFF
    magic = probe >> 20
    version = (probe >> 16) & 0xF
    if magic != HEADER_MAGIC:
        raise BadMagic(f"header magic {magic:#04x}")
    if version != HEADER_VERSION:
        raise CorruptStream(f"unsupported version {version}")
    if t < 1 or h - 2 * t < 2 or w - 2 * t < 2:
        raise CorruptStream(f"invalid border width {t}")
    rr, cc = aux_positions(h, w, t)
    hdr = unpack_header(
        BitVector.from_array(_read_lsbs(img.data, rr[:HEADER_BITS], cc[:HEADER_BITS]))
    )
    if (hdr.magic, hdr.version, hdr.t_border) != (HEADER_MAGIC, HEADER_VERSION, t):
        raise CorruptStream("header fields inconsistent with row-0 prefix")
    m = hdr.m_grid
    try:
        partition = make_partition(h, w, t, m)
    except ImageTooSmall as exc:
        raise CorruptStream(f"header names an impossible grid: {exc}") from exc
    perm = make_permutation(hdr.perm_seed, partition.n_blocks)
    q = partition.q
    n = partition.n_blocks

    data = img.mutable_copy()
    slot_rr, slot_cc = rr[HEADER_BITS:], cc[HEADER_BITS:]
    word_bits = _read_lsbs(data, slot_rr, slot_cc)
    head_pos, flag, alg_id, pr, pl, bins, chunk_len = unpack_slot_word(word_bits)
    if flag != 1 or not 1 <= head_pos <= n:
        raise CorruptStream("record slot does not hold a valid chain head")

    chunks = []
    hist = {alg.name: 0 for alg in ALL_ALGORITHMS}
    embedded_count = 0
    capacity_sum = 0
    prev_k = n + 1
    last_snapshot = None
    while True:
        if not 1 <= head_pos < prev_k:
            raise CorruptStream("chain positions must strictly decrease")
        params = _params_from_slot(alg_id, pr, pl, bins)
        block = partition.blocks[perm[head_pos - 1] - 1]
        restored, capacity, snapshot, is_first, hdr_bits, chunk = _extract_block(
            data, block, alg_id, params, chunk_len, q
        )
        data[block.row : block.row + block.size,
             block.col : block.col + block.size] = restored
        chunks.insert(0, chunk)
        hist[ensemble.ALL_ALGORITHMS[alg_id].name] += 1
        embedded_count += 1
        capacity_sum += capacity
        last_snapshot = snapshot
        if is_first:
            _write_lsbs(data, rr[:HEADER_BITS], cc[:HEADER_BITS], hdr_bits)
            break
        prev_k = head_pos
        head_pos, flag, alg_id, pr, pl, bins, chunk_len = unpack_slot_word(snapshot)
        if flag != 1:
            raise CorruptStream("chained snapshot is not an embedded record")
    _write_lsbs(data, slot_rr, slot_cc, last_snapshot)

    hist["skipped"] = n - embedded_count
    payload = (
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.uint8)
    )
    cover = img.replace_data(data)
    pure = int(payload.size)
    report = LayerReport(
        layer_index=hdr.layer_index,
        m_used=m,
        t_border=t,
        pure_bits=pure,
        side_info_bits=capacity_sum - pure + AUX_FOOTPRINT,
        mse=image_mse(img, cover),
        psnr_db=image_psnr(img, cover),
        alg_histogram=hist,
    )
    return cover, payload, report


def extract_layer(marked: GrayImage):
    """Invert one embed_layer: (cover, payload, report)."""
    cover, payload, report = _extract_layer_core(marked)
    return cover, BitVector.from_array(payload), report


def extract_message(marked: GrayImage):
    """Invert embed_message: recover the original image and full payload."""
    original, chunks, _ = _extract_all(marked)
    return original, chunks


def _extract_all(marked: GrayImage):
    img = marked
    parts = []
    reports = []
    expected = None
    while True:
        cover, payload, report = _extract_layer_core(img)
        if expected is not None and report.layer_index != expected:
            raise CorruptStream(
                f"layer index {report.layer_index}, expected {expected}"
            )
        parts.insert(0, payload)
        reports.insert(0, report)
        if report.layer_index == 1:
            bits = np.concatenate(parts) if parts else np.empty(0, np.uint8)
            return cover, BitVector.from_array(bits), reports
        expected = report.layer_index - 1
        img = rotate270(cover)
