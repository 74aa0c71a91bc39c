"""Rate-distortion sweeps and algorithm-distribution maps.

A sweep embeds a seeded pseudo-random payload layer by layer, once with
the full candidate set and once per forced single algorithm, recording
cumulative pure rate against PSNR measured on the original cover.  Rows
are plain CSV so plotting stays external.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pipeline
from .ensemble import ALL_ALGORITHMS, random_bits
from .errors import CorruptStream, ImageTooSmall, PayloadTooLarge
from .image import GrayImage, psnr as image_psnr, rotate90, rotate270
from .pipeline import LayerConfig, extract_message
from .predictors import AlgorithmId

MODE_ENSEMBLE = "ensemble"
FORCED_MODES = {
    "a0": (AlgorithmId.A0_ZERO,),
    "a1": (AlgorithmId.A1_MEAN,),
    "a2": (AlgorithmId.A2_SECOND_ORDER,),
    "a3": (AlgorithmId.A3_SIDE_MATCH,),
}
ALL_MODES = (MODE_ENSEMBLE, "a0", "a1", "a2", "a3")


@dataclass
class SweepRow:
    image_name: str
    layer: int
    m_used: int
    cumulative_rate_bpp: float
    psnr_db: float
    alg_counts: tuple  # per AlgorithmId
    skipped: int
    mode: str


def _candidates_for(mode: str):
    if mode == MODE_ENSEMBLE:
        return ALL_ALGORITHMS
    return FORCED_MODES[mode]


def run_sweep(cover: GrayImage, layers: int, modes, seed: int,
              image_name: str = "cover", verify: bool = False):
    """Embed maximal payloads for each mode; one row per completed layer."""
    if layers < 1:
        raise ValueError("layers must be at least 1")
    rows = []
    pixels = cover.height * cover.width
    for mode_idx, mode in enumerate(m for m in ALL_MODES if m in set(modes)):
        cfg = LayerConfig(perm_seed=seed, candidates=_candidates_for(mode))
        current = cover
        cumulative = 0
        embedded_parts = []
        for layer in range(1, layers + 1):
            if layer > 1:
                current = rotate90(current)
            bits = random_bits(
                seed + 0x9E3779B9 * layer + 1000003 * mode_idx,
                current.height * current.width,
            )
            try:
                current, consumed, report = pipeline._embed_layer_partial(
                    current, cfg, bits, layer
                )
            except (ImageTooSmall, PayloadTooLarge):
                break
            embedded_parts.append(bits[:consumed])
            cumulative += report.pure_bits
            aligned = current
            for _ in range(layer - 1):
                aligned = rotate270(aligned)
            counts = tuple(
                report.alg_histogram[alg.name] for alg in ALL_ALGORITHMS
            )
            rows.append(
                SweepRow(
                    image_name=image_name,
                    layer=layer,
                    m_used=report.m_used,
                    cumulative_rate_bpp=cumulative / pixels,
                    psnr_db=image_psnr(cover, aligned),
                    alg_counts=counts,
                    skipped=report.skipped,
                    mode=mode,
                )
            )
            if verify:
                got_cover, got_payload = extract_message(current)
                want = (
                    np.concatenate(embedded_parts)
                    if embedded_parts
                    else np.empty(0, np.uint8)
                )
                if got_cover != cover or not np.array_equal(
                    got_payload.to_array(), want
                ):
                    raise CorruptStream(
                        f"self-verification failed: {image_name}/{mode}/{layer}"
                    )
    rows.sort(key=lambda r: (r.image_name, r.mode, r.layer))
    return rows


SWEEP_CSV_HEADER = (
    "image_name,layer,m_used,cumulative_rate_bpp,psnr_db,"
    "alg0,alg1,alg2,alg3,skipped,mode"
)


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def sweep_rows_to_csv(rows) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.image_name},{r.layer},{r.m_used},"
            f"{r.cumulative_rate_bpp:.6f},{format_psnr(r.psnr_db)},"
            f"{r.alg_counts[0]},{r.alg_counts[1]},{r.alg_counts[2]},"
            f"{r.alg_counts[3]},{r.skipped},{r.mode}"
        )
    return "\n".join(lines) + "\n"


# --- algorithm distribution maps ---

_MAP_GRAY = (0, 64, 128, 192, 255)  # skipped, A0, A1, A2, A3


def render_alg_map(plans, partition):
    """m-by-m selection grid: 0 skipped, 1..4 for algorithms 0..3.

    Returns (text, GrayImage) where the image scales codes to gray
    levels 0/64/128/192/255.
    """
    m = partition.m_grid
    grid = np.zeros((m, m), dtype=np.int32)
    for plan in plans:
        code = 1 + int(plan.alg) if plan.embedded_flag else 0
        grid[plan.block_index // m, plan.block_index % m] = code
    text = "\n".join("".join(str(v) for v in row) for row in grid) + "\n"
    shaded = np.array([_MAP_GRAY[v] for v in grid.ravel()], dtype=np.int32)
    return text, GrayImage(m, m, 8, shaded.reshape(m, m))


def plan_map_for_layer(cover: GrayImage, layer: int, seed: int = 0,
                       m_grid=pipeline.AUTO, t_border: int = 1,
                       candidates=ALL_ALGORITHMS):
    """Plan (without committing) the given layer of a fill embedding."""
    cfg = LayerConfig(
        t_border=t_border, m_grid=m_grid, perm_seed=seed, candidates=candidates
    )
    current = cover
    for lyr in range(1, layer):
        bits = random_bits(seed + lyr, current.height * current.width)
        current, _, _ = pipeline._embed_layer_partial(current, cfg, bits, lyr)
        current = pipeline.rotate90(current)
    h, w = current.height, current.width
    t = pipeline.resolve_t(h, w, t_border)
    bits = random_bits(seed + layer, h * w)
    outcome = pipeline._best_layer_outcome(
        current.data, h, w, t, m_grid, seed, layer, bits, candidates, None
    )
    return outcome.plans, outcome.partition
