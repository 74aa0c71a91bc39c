"""Grayscale image container, PGM I/O, distortion metrics and rotations.

Images are immutable values: every operation returns a new GrayImage.
Only PGM (P2 ASCII / P5 binary) is supported; samples are stored row-major
and written big-endian two-byte when the maxval exceeds 255.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IoFailure,
    MalformedHeader,
    SampleOutOfRange,
    ShapeMismatch,
    TruncatedData,
)


@dataclass(frozen=True)
class GrayImage:
    """A d-bit grayscale raster with row-major integer samples."""

    width: int
    height: int
    bit_depth: int
    data: np.ndarray = field(repr=False)  # shape (height, width), int32

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ShapeMismatch(f"bad dimensions {self.height}x{self.width}")
        if self.bit_depth not in (8, 16):
            raise SampleOutOfRange(f"unsupported bit depth {self.bit_depth}")
        arr = np.asarray(self.data, dtype=np.int32)
        if arr.shape != (self.height, self.width):
            raise ShapeMismatch(
                f"data shape {arr.shape} != ({self.height}, {self.width})"
            )
        hi = (1 << self.bit_depth) - 1
        if arr.size and (arr.min() < 0 or arr.max() > hi):
            raise SampleOutOfRange(f"sample outside [0, {hi}]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_samples(cls, width, height, bit_depth, samples) -> "GrayImage":
        arr = np.asarray(list(samples), dtype=np.int32)
        if arr.size != width * height:
            raise ShapeMismatch(f"{arr.size} samples for {height}x{width}")
        return cls(width, height, bit_depth, arr.reshape(height, width))

    @property
    def samples(self) -> list[int]:
        """Row-major sample list."""
        return self.data.ravel().tolist()

    def mutable_copy(self) -> np.ndarray:
        return np.array(self.data, dtype=np.int32)

    def replace_data(self, data: np.ndarray) -> "GrayImage":
        return GrayImage(self.width, self.height, self.bit_depth, data)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.bit_depth == other.bit_depth
            and np.array_equal(self.data, other.data)
        )


def _tokenize_pgm(raw: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments.

    Returns (tokens, offset) where offset points just past the single
    whitespace byte that terminates the last header token.
    """
    tokens = []
    i = 0
    n = len(raw)
    while len(tokens) < 4:
        while i < n and raw[i : i + 1].isspace():
            i += 1
        if i < n and raw[i] == ord("#"):
            while i < n and raw[i] not in (10, 13):
                i += 1
            continue
        start = i
        while i < n and not raw[i : i + 1].isspace():
            i += 1
        if start == i:
            raise MalformedHeader("unexpected end of header")
        tokens.append(raw[start:i])
        if len(tokens) < 4:
            continue
        # exactly one whitespace byte separates maxval from sample data
        if i < n:
            i += 1
    return tokens, i


def load_pgm(path) -> GrayImage:
    """Read a binary (P5) or ASCII (P2) PGM file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    if len(raw) < 2:
        raise MalformedHeader("file too short")
    magic = raw[:2]
    if magic not in (b"P5", b"P2"):
        raise MalformedHeader(f"bad magic {magic!r}")

    tokens, offset = _tokenize_pgm(raw)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedHeader("non-numeric header field") from exc
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {height}x{width}")
    if not (0 < maxval <= 65535):
        raise MalformedHeader(f"bad maxval {maxval}")

    count = width * height
    if magic == b"P5":
        body = raw[offset:]
        if maxval <= 255:
            if len(body) < count:
                raise TruncatedData(f"need {count} samples, have {len(body)}")
            arr = np.frombuffer(body[:count], dtype=np.uint8).astype(np.int32)
        else:
            if len(body) < 2 * count:
                raise TruncatedData(f"need {2 * count} bytes, have {len(body)}")
            arr = (
                np.frombuffer(body[: 2 * count], dtype=">u2").astype(np.int32)
            )
    else:
        fields = raw[offset:].split()
        if len(fields) < count:
            raise TruncatedData(f"need {count} samples, have {len(fields)}")
        try:
            arr = np.array([int(f) for f in fields[:count]], dtype=np.int32)
        except ValueError as exc:
            raise MalformedHeader("non-numeric sample") from exc

    if arr.size and arr.max() > maxval:
        raise SampleOutOfRange(f"sample {int(arr.max())} > maxval {maxval}")
    depth = 8 if maxval <= 255 else 16
    return GrayImage(width, height, depth, arr.reshape(height, width))


def store_pgm(img: GrayImage, path) -> None:
    """Write a binary (P5) PGM; round-trips bit-exactly through load_pgm."""
    maxval = (1 << img.bit_depth) - 1
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if img.bit_depth <= 8:
        body = img.data.astype(np.uint8).tobytes()
    else:
        body = img.data.astype(">u2").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(body)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def mse(a: GrayImage, b: GrayImage) -> float:
    if (a.width, a.height, a.bit_depth) != (b.width, b.height, b.bit_depth):
        raise ShapeMismatch("images differ in shape or depth")
    diff = a.data.astype(np.int64) - b.data.astype(np.int64)
    return float(np.sum(diff * diff)) / (a.width * a.height)


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are equal."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    peak = (1 << a.bit_depth) - 1
    return 10.0 * math.log10(peak * peak / err)


def rotate90(img: GrayImage) -> GrayImage:
    """Clockwise quarter turn: out[i][j] = in[h-1-j][i]."""
    rotated = np.ascontiguousarray(np.rot90(img.data, k=-1))
    return GrayImage(img.height, img.width, img.bit_depth, rotated)


def rotate270(img: GrayImage) -> GrayImage:
    """Inverse of rotate90."""
    rotated = np.ascontiguousarray(np.rot90(img.data, k=1))
    return GrayImage(img.height, img.width, img.bit_depth, rotated)
