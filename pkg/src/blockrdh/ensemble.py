"""Block partitioning, keyed processing order and per-block selection.

Each block is planned independently: all four candidate embedders are
simulated with the exact bits they would carry and the one with the
lowest added squared error (among those that can carry the requested
chunk) wins.  Blocks are pixel-disjoint, so the greedy per-block argmin
minimizes the layer total under any additive distortion model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .bits import BitVector, ac_compress_array
from .errors import ImageTooSmall, NoCapacity
from .hs import HSParams, LocationMaps, select_pairs
from .image import GrayImage
from .predictors import AlgorithmId, BlockView, Peh

ALL_ALGORITHMS = (
    AlgorithmId.A0_ZERO,
    AlgorithmId.A1_MEAN,
    AlgorithmId.A2_SECOND_ORDER,
    AlgorithmId.A3_SIDE_MATCH,
)

# chunk lengths are stored in 16 bits inside the rolling aux slot word
MAX_CHUNK_BITS = (1 << 16) - 1
_SIM_BUDGET = 28

# module-wide candidate evaluation counter; one tick per (block, algorithm,
# parameter-set) triple actually simulated
_eval_count = 0


def reset_eval_count():
    global _eval_count
    _eval_count = 0


def eval_count() -> int:
    return _eval_count


@dataclass(frozen=True)
class Partition:
    """Border region plus an m-by-m grid of q-by-q embeddable blocks."""

    height: int
    width: int
    t_border: int
    m_grid: int
    q: int
    blocks: tuple

    @property
    def n_blocks(self) -> int:
        return self.m_grid * self.m_grid

    def interior_bounds(self):
        t = self.t_border
        return t, self.height - t, t, self.width - t

    def is_aux(self, r: int, c: int) -> bool:
        r0, r1, c0, c1 = self.interior_bounds()
        return not (r0 <= r < r1 and c0 <= c < c1)

    def aux_size(self) -> int:
        t = self.t_border
        return self.height * self.width - (self.height - 2 * t) * (self.width - 2 * t)

    def leftover(self):
        """Interior pixels not covered by any block (untouched)."""
        r0, r1, c0, c1 = self.interior_bounds()
        covered = np.zeros((self.height, self.width), dtype=bool)
        for b in self.blocks:
            covered[b.row : b.row + b.size, b.col : b.col + b.size] = True
        out = set()
        for r in range(r0, r1):
            for c in range(c0, c1):
                if not covered[r, c]:
                    out.add((r, c))
        return out


def make_partition(h: int, w: int, t: int, m: int) -> Partition:
    """Split the interior into an m-by-m grid of square blocks.

    q = min(floor((h-2t)/m), floor((w-2t)/m)); interior pixels beyond the
    grid are left untouched.
    """
    if m < 2:
        raise ImageTooSmall(f"grid side {m} < 2")
    if t < 1:
        raise ImageTooSmall(f"border {t} < 1")
    ih, iw = h - 2 * t, w - 2 * t
    if ih < m or iw < m:
        raise ImageTooSmall(f"interior {ih}x{iw} cannot host an {m}x{m} grid")
    q = min(ih // m, iw // m)
    blocks = tuple(
        BlockView(t + br * q, t + bc * q, q)
        for br in range(m)
        for bc in range(m)
    )
    return Partition(h, w, t, m, q, blocks)


def _xorshift64star(seed: int):
    """Deterministic 64-bit generator; zero seeds map to state 1."""
    state = seed & ((1 << 64) - 1)
    if state == 0:
        state = 1
    mask = (1 << 64) - 1
    while True:
        state ^= state >> 12
        state = (state ^ (state << 25)) & mask
        state ^= state >> 27
        yield (state * 0x2545F4914F6CDD1D) & mask


def make_permutation(seed: int, n: int):
    """Keyed Fisher-Yates permutation of 1..n."""
    if n < 1:
        raise ValueError("n must be positive")
    gen = _xorshift64star(seed)
    perm = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = next(gen) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def random_bits(seed: int, n: int) -> np.ndarray:
    """Reproducible pseudo-random payload bits (one xorshift word per 64)."""
    gen = _xorshift64star(seed)
    out = np.empty(n, dtype=np.uint8)
    i = 0
    while i < n:
        word = next(gen)
        take = min(64, n - i)
        for k in range(take):
            out[i + k] = (word >> (63 - k)) & 1
        i += take
    return out


@dataclass
class DistortionModel:
    """Additive per-pixel cost of changing a cover value; default squared error."""

    cost_fn: object = None

    def cost(self, original: int, new: int) -> float:
        if self.cost_fn is None:
            d = original - new
            return float(d * d)
        return float(self.cost_fn(original, new))

    def block_cost(self, original: np.ndarray, new: np.ndarray) -> float:
        if self.cost_fn is None:
            d = original.astype(np.int64) - new.astype(np.int64)
            return float(np.sum(d * d))
        total = 0.0
        for o, n in zip(original.ravel().tolist(), new.ravel().tolist()):
            total += self.cost_fn(o, n)
        return total


@dataclass
class BlockPlan:
    """Outcome of planning one block."""

    block_index: int
    embedded_flag: bool = False
    alg: AlgorithmId = AlgorithmId.A0_ZERO
    params: HSParams | None = None
    distortion: float = 0.0
    net_capacity: int = 0
    capacity: int = 0
    chunk_bits: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.uint8), repr=False
    )
    boundary_bits: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.uint8), repr=False
    )
    zero_bits: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.uint8), repr=False
    )
    final_block: np.ndarray | None = field(default=None, repr=False)
    stream_len: int = 0

    @property
    def chunk(self) -> BitVector:
        return BitVector.from_array(self.chunk_bits)

    @property
    def maps(self) -> LocationMaps:
        return LocationMaps(
            boundary_map=BitVector.from_array(self.boundary_bits),
            zero_map=BitVector.from_array(self.zero_bits),
        )

    def record_fields(self):
        """(alg_id, pair_right, pair_left, bins) for the aux record."""
        if not self.embedded_flag:
            return 0, 0, 0, (0, 0, 0, 0)
        r = self.params.right
        l = self.params.left
        bins = (
            r.peak if r else 0,
            r.zero if r else 0,
            l.peak if l else 0,
            l.zero if l else 0,
        )
        return int(self.alg), 1 if r else 0, 1 if l else 0, bins


def _boundary_adjust(block: np.ndarray, alg: AlgorithmId):
    if alg == AlgorithmId.A0_ZERO:
        return block.copy(), np.zeros(block.size, dtype=np.uint8)
    low = block == 0
    high = block == 255
    adjusted = block.copy()
    adjusted[low] = 1
    adjusted[high] = 254
    return adjusted, (low | high).ravel().astype(np.uint8)


def _histogram(pe: np.ndarray) -> Peh:
    vals = pe[pe != _kernels.CONTEXT_SENTINEL]
    if vals.size == 0:
        return Peh({})
    bins, counts = np.unique(vals, return_counts=True)
    return Peh({int(b): int(c) for b, c in zip(bins, counts)})


def _params_as_ints(params: HSParams):
    r, l = params.right, params.left
    return (
        1 if r else 0,
        r.peak if r else 0,
        r.zero if r else 0,
        1 if l else 0,
        l.peak if l else 0,
        l.zero if l else 0,
    )


_LEN_FIELD_BITS = 16


def _frame_stream(comp: np.ndarray, extra_bits: np.ndarray,
                  chunk: np.ndarray) -> np.ndarray:
    n = comp.size
    len_field = np.array(
        [(n >> (_LEN_FIELD_BITS - 1 - i)) & 1 for i in range(_LEN_FIELD_BITS)],
        dtype=np.uint8,
    )
    return np.concatenate([len_field, comp, extra_bits, chunk])


@dataclass
class _Candidate:
    alg: AlgorithmId
    params: HSParams
    chunk_len: int
    net_capacity: int
    capacity: int
    distortion: float
    final_block: np.ndarray
    boundary_bits: np.ndarray
    zero_bits: np.ndarray
    stream_len: int


def _simulate_candidate(cover: np.ndarray, alg: AlgorithmId, requested: int,
                        extra_bits: np.ndarray, payload: np.ndarray,
                        model: DistortionModel):
    """Plan one (block, algorithm) pair to a self-consistent embedding.

    The bits carried by a pass influence later predictions, hence the
    pass's own capacity and zero-bin hits, so the exact chunk length and
    zero map are found by iterating the simulation to a fixed point.
    """
    global _eval_count
    _eval_count += 1

    adjusted, boundary_bits = _boundary_adjust(cover, alg)
    pe = _kernels.pe_scan(adjusted, int(alg))
    hist = _histogram(pe)
    allowed = (0, 255) if alg == AlgorithmId.A0_ZERO else (-255, 255)
    try:
        params = select_pairs(hist, allowed)
    except NoCapacity:
        return None
    has_r, p_r, z_r, has_l, p_l, z_l = _params_as_ints(params)

    cap_ref = hist.count(p_r) if has_r else 0
    if has_l:
        cap_ref += hist.count(p_l)
    zmap = np.zeros(cover.size, dtype=np.uint8)
    comp = ac_compress_array(np.concatenate([boundary_bits, zmap]))
    best = None
    target = min(requested, MAX_CHUNK_BITS)
    seen = set()
    hopeless = 0
    for _ in range(_SIM_BUDGET):
        framing = _LEN_FIELD_BITS + comp.size + extra_bits.size
        c_len = min(target, max(0, cap_ref - framing))
        # the zero map rides inside the stream it describes, so the
        # simulation is iterated to a fixed point; on a cycle (the map
        # keeps perturbing the pass that produces it) the chunk target is
        # nudged down to land in a fresh trajectory
        state = (c_len, zmap.tobytes())
        if state in seen:
            if target == 0:
                break
            target = max(0, c_len - 1)
            seen.clear()
            continue
        seen.add(state)
        stream = _frame_stream(comp, extra_bits, payload[:c_len])
        sim = adjusted.copy()
        capacity, zero_side = _kernels.embed_pass(
            sim, int(alg), has_r, p_r, z_r, has_l, p_l, z_l, stream
        )
        zhits = (zero_side.ravel() != 0).astype(np.uint8)
        cap_ref = capacity
        fits = stream.size <= capacity
        zok = np.array_equal(zhits, zmap)
        if fits and zok:
            net = capacity - framing
            cand = _Candidate(
                alg=alg,
                params=params,
                chunk_len=c_len,
                net_capacity=net,
                capacity=capacity,
                distortion=model.block_cost(cover, sim),
                final_block=sim,
                boundary_bits=boundary_bits,
                zero_bits=zmap.copy(),
                stream_len=stream.size,
            )
            if best is None or cand.chunk_len > best.chunk_len:
                best = cand
            if c_len >= min(target, max(0, net)):
                break
        else:
            if not fits and c_len == 0:
                # even the bare framing exceeds the pass capacity; a new
                # zero map will not close a gap this large
                hopeless += 1
                if hopeless >= 3:
                    break
            if not zok:
                zmap = zhits
                comp = ac_compress_array(np.concatenate([boundary_bits, zmap]))
    return best


def plan_block(block: BlockView, data: np.ndarray, requested_bits: int,
               model: DistortionModel | None = None, *,
               block_index: int = 0,
               candidates=ALL_ALGORITHMS,
               extra_bits: np.ndarray | None = None,
               payload: np.ndarray | None = None,
               force_embed: bool = False) -> BlockPlan:
    """Choose the distortion-minimizing embedder for one block.

    Among candidates able to carry the full request, the lowest added
    distortion wins; otherwise the highest net capacity, ties by lower
    distortion, then lower algorithm id.  A block with no positive net
    capacity stays untouched unless force_embed accepts net zero (used
    to anchor the side-information chain).
    """
    model = model or DistortionModel()
    if isinstance(data, GrayImage):
        data = data.data
    extra = extra_bits if extra_bits is not None else np.empty(0, dtype=np.uint8)
    pay = payload if payload is not None else np.empty(0, dtype=np.uint8)
    requested = min(requested_bits, pay.size)

    plan = BlockPlan(block_index=block_index)
    if requested == 0 and not force_embed:
        return plan

    cover = np.ascontiguousarray(
        data[block.row : block.row + block.size,
             block.col : block.col + block.size],
        dtype=np.int32,
    )
    sims = []
    for alg in candidates:
        cand = _simulate_candidate(cover, alg, requested, extra, pay, model)
        if cand is not None:
            sims.append(cand)

    min_net = 0 if force_embed else 1
    feasible = [c for c in sims if c.net_capacity >= min_net]
    if not feasible:
        return plan

    full = [c for c in feasible if c.chunk_len >= requested]
    if full:
        chosen = min(full, key=lambda c: (c.distortion, int(c.alg)))
    else:
        chosen = min(
            feasible,
            key=lambda c: (-c.net_capacity, c.distortion, int(c.alg)),
        )

    plan.embedded_flag = True
    plan.alg = chosen.alg
    plan.params = chosen.params
    plan.distortion = chosen.distortion
    plan.net_capacity = chosen.net_capacity
    plan.capacity = chosen.capacity
    plan.chunk_bits = pay[: chosen.chunk_len].copy()
    plan.boundary_bits = chosen.boundary_bits
    plan.zero_bits = chosen.zero_bits
    plan.final_block = chosen.final_block
    plan.stream_len = chosen.stream_len
    return plan


def plan_layer(data: np.ndarray, partition: Partition, perm,
               payload: np.ndarray, model: DistortionModel | None = None,
               candidates=ALL_ALGORITHMS):
    """Plan every block in permutation order, front-loading the payload.

    This is the bare optimizer surface (no side-information chaining):
    each block is offered the entire remaining payload.  Returns the
    plans in processing order plus the number of payload bits consumed.
    """
    model = model or DistortionModel()
    if isinstance(data, GrayImage):
        data = data.data
    if isinstance(payload, BitVector):
        payload = payload.to_array()
    payload = np.asarray(payload, dtype=np.uint8)
    consumed = 0
    plans = []
    for pos in perm:
        block = partition.blocks[pos - 1]
        remaining = payload[consumed:]
        plan = plan_block(
            block,
            data,
            remaining.size,
            model,
            block_index=pos - 1,
            candidates=candidates,
            payload=remaining,
        )
        if plan.embedded_flag:
            consumed += plan.chunk_bits.size
        plans.append(plan)
    return plans, consumed
