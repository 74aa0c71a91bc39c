"""Block-wise reversible data hiding with per-block embedder selection."""

from .bits import (
    AuxHeader,
    BitVector,
    BlockRecord,
    ac_compress,
    ac_decompress,
    pack_header,
    pack_record,
    unpack_header,
    unpack_record,
)
from .ensemble import (
    BlockPlan,
    DistortionModel,
    Partition,
    make_partition,
    make_permutation,
    plan_block,
    plan_layer,
)
from .hs import (
    HSParams,
    LocationMaps,
    PeakZeroPair,
    build_boundary_map,
    hs_embed,
    hs_extract,
    select_pairs,
)
from .image import GrayImage, load_pgm, psnr, rotate90, rotate270, store_pgm
from .pipeline import (
    AUTO,
    LayerConfig,
    LayerReport,
    embed_layer,
    embed_message,
    extract_layer,
    extract_message,
)
from .predictors import AlgorithmId, BlockView, Peh, compute_peh, predict
from . import errors

__all__ = [
    "AUTO",
    "AlgorithmId",
    "AuxHeader",
    "BitVector",
    "BlockPlan",
    "BlockRecord",
    "BlockView",
    "DistortionModel",
    "GrayImage",
    "HSParams",
    "LayerConfig",
    "LayerReport",
    "LocationMaps",
    "Partition",
    "Peh",
    "PeakZeroPair",
    "ac_compress",
    "ac_decompress",
    "build_boundary_map",
    "compute_peh",
    "embed_layer",
    "embed_message",
    "errors",
    "extract_layer",
    "extract_message",
    "hs_embed",
    "hs_extract",
    "load_pgm",
    "make_partition",
    "make_permutation",
    "pack_header",
    "pack_record",
    "plan_block",
    "plan_layer",
    "predict",
    "psnr",
    "rotate90",
    "rotate270",
    "select_pairs",
    "store_pgm",
    "unpack_header",
    "unpack_record",
]
