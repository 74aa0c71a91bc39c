#!/usr/bin/env python3
"""Generate synthetic 8-bit PGM covers for experiments.

Six 512x512 covers spanning smooth to busy content, plus optional small
covers for quick runs.  Usage:

    python scripts/make_covers.py out_dir [--small]
"""

import argparse
from pathlib import Path

import numpy as np

from blockrdh.image import GrayImage, store_pgm


def cover_512(kind, seed):
    rng = np.random.default_rng(seed)
    h = w = 512
    yy, xx = np.mgrid[0:h, 0:w]
    if kind == "smooth":
        base = 100 + 80 * np.sin(xx / 131.0) + 50 * np.cos(yy / 97.0)
        noise = rng.normal(0, 0.8, (h, w))
    elif kind == "texture":
        base = 128 + 60 * np.sin(xx / 23.0) * np.cos(yy / 31.0) + 0.1 * xx
        noise = rng.normal(0, 1.5, (h, w))
    elif kind == "detail":
        base = 90 + 40 * np.sin(xx * yy / 30000.0) + 50 * np.sin((xx + yy) / 53.0)
        noise = rng.normal(0, 2.5, (h, w))
    elif kind == "bright":
        base = 200 + 54 * np.sin(xx / 77.0) + 0.05 * yy
        noise = rng.normal(0, 1.0, (h, w))
    elif kind == "dark":
        base = 40 + 39 * np.cos(yy / 61.0) - 0.04 * xx
        noise = rng.normal(0, 1.0, (h, w))
    else:
        base = 128 + 0.2 * xx - 0.15 * yy
        noise = rng.normal(0, 3.0, (h, w))
    data = np.clip(base + noise, 0, 255).astype(np.int32)
    return GrayImage(w, h, 8, data)


def small_cover(seed):
    rng = np.random.default_rng(seed)
    h = int(rng.integers(64, 160))
    w = int(rng.integers(64, 160))
    base = np.add.outer(np.linspace(30, 220, h), np.linspace(0, 30, w))
    data = np.clip(base + rng.normal(0, 1.0, (h, w)), 0, 255).astype(np.int32)
    return GrayImage(w, h, 8, data)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--small", action="store_true",
                    help="also write four small quick-run covers")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = ["smooth", "texture", "detail", "bright", "dark", "plain"]
    for i, kind in enumerate(kinds):
        path = out / f"{kind}512.pgm"
        store_pgm(cover_512(kind, 1000 + i), path)
        print("wrote", path)
    if args.small:
        for i in range(4):
            path = out / f"small{i}.pgm"
            store_pgm(small_cover(2000 + i), path)
            print("wrote", path)


if __name__ == "__main__":
    main()
