"""Command-line front end: embed, extract, sweep and algmap."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    ALL_MODES,
    format_psnr,
    plan_map_for_layer,
    render_alg_map,
    run_sweep,
    sweep_rows_to_csv,
)
from .bits import BitVector
from .errors import BlockRdhError
from .image import load_pgm, store_pgm
from .pipeline import AUTO, LayerConfig, embed_message, extract_message

REPORT_CSV_HEADER = (
    "layer_index,m_used,t_border,pure_bits,side_info_bits,mse,psnr_db,"
    "alg0,alg1,alg2,alg3,skipped"
)


def _parse_seed(text: str) -> int:
    return int(text, 0)


def _parse_m(text: str):
    if text.lower() == AUTO:
        return AUTO
    value = int(text)
    if not 2 <= value <= 8:
        raise argparse.ArgumentTypeError("m must be auto or in 2..8")
    return value


def _report_csv(reports) -> str:
    from .ensemble import ALL_ALGORITHMS

    lines = [REPORT_CSV_HEADER]
    for r in reports:
        counts = ",".join(
            str(r.alg_histogram[alg.name]) for alg in ALL_ALGORITHMS
        )
        lines.append(
            f"{r.layer_index},{r.m_used},{r.t_border},{r.pure_bits},"
            f"{r.side_info_bits},{r.mse:.6f},{format_psnr(r.psnr_db)},"
            f"{counts},{r.skipped}"
        )
    return "\n".join(lines) + "\n"


def _cmd_embed(args) -> int:
    cover = load_pgm(args.cover)
    payload = BitVector.from_bytes(Path(args.payload).read_bytes())
    cfg = LayerConfig(t_border=args.t, m_grid=args.m, perm_seed=args.seed)
    marked, reports = embed_message(cover, payload, cfg, max_layers=args.layers)
    store_pgm(marked, args.out)
    if args.report:
        Path(args.report).write_text(_report_csv(reports))
    total = sum(r.pure_bits for r in reports)
    print(f"embedded {total} bits over {len(reports)} layer(s) -> {args.out}")
    return 0


def _cmd_extract(args) -> int:
    marked = load_pgm(args.marked)
    cover, payload = extract_message(marked)
    store_pgm(cover, args.out_cover)
    Path(args.out_payload).write_bytes(payload.to_bytes())
    print(
        f"recovered {len(payload)} payload bits -> {args.out_payload}; "
        f"cover -> {args.out_cover}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cover = load_pgm(args.cover)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    unknown = set(modes) - set(ALL_MODES)
    if unknown:
        raise BlockRdhError(f"unknown modes: {sorted(unknown)}")
    rows = run_sweep(
        cover,
        args.layers,
        modes,
        args.seed,
        image_name=Path(args.cover).stem,
        verify=args.verify,
    )
    Path(args.csv).write_text(sweep_rows_to_csv(rows))
    print(f"wrote {len(rows)} rows -> {args.csv}")
    return 0


def _cmd_algmap(args) -> int:
    cover = load_pgm(args.cover)
    plans, partition = plan_map_for_layer(
        cover, args.layer, seed=args.seed, m_grid=args.m, t_border=args.t
    )
    text, img = render_alg_map(plans, partition)
    out = Path(args.out)
    pgm_path = out if out.suffix == ".pgm" else out.with_suffix(".pgm")
    txt_path = out if out.suffix == ".txt" else out.with_suffix(".txt")
    store_pgm(img, pgm_path)
    txt_path.write_text(text)
    print(text, end="")
    print(f"wrote {pgm_path} and {txt_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockrdh",
        description="Reversible data hiding with per-block embedder selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a payload file into a PGM cover")
    p.add_argument("--cover", required=True)
    p.add_argument("--payload", required=True)
    p.add_argument("--seed", type=_parse_seed, required=True)
    p.add_argument("--m", type=_parse_m, default=AUTO)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("extract", help="recover the cover and payload")
    p.add_argument("--marked", required=True)
    p.add_argument("--out-cover", required=True)
    p.add_argument("--out-payload", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("sweep", help="rate-distortion sweep to CSV")
    p.add_argument("--cover", required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--modes", default=",".join(ALL_MODES))
    p.add_argument("--seed", type=_parse_seed, required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("algmap", help="render the per-block selection grid")
    p.add_argument("--cover", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_parse_seed, default=0)
    p.add_argument("--m", type=_parse_m, default=AUTO)
    p.add_argument("--t", type=int, default=1)
    p.set_defaults(func=_cmd_algmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlockRdhError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
