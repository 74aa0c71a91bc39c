"""Bit vectors, fixed-layout auxiliary records and the arithmetic coder.

All layouts are MSB-first and bit-exact; they end up inside image LSBs,
never in standalone files.  The binary arithmetic coder uses a single
adaptive context (counts start at 1/1, halved when their sum reaches 2^16)
with 32-bit interval registers and standard E1/E2/E3 renormalization, so
two independent implementations produce identical streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BadLength, CorruptStream, FieldOutOfRange, InputTooLong


class BitVector:
    """Ordered sequence of bits with O(1) random access."""

    __slots__ = ("_bits",)

    def __init__(self, bits=()):
        self._bits = [1 if b else 0 for b in bits]

    @classmethod
    def from_array(cls, arr) -> "BitVector":
        bv = cls.__new__(cls)
        bv._bits = [int(b) & 1 for b in np.asarray(arr, dtype=np.uint8)]
        return bv

    @classmethod
    def from_uint(cls, value: int, width: int) -> "BitVector":
        if value < 0 or value >> width:
            raise FieldOutOfRange(f"{value} does not fit in {width} bits")
        return cls((value >> (width - 1 - i)) & 1 for i in range(width))

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitVector":
        bv = cls.__new__(cls)
        bv._bits = [
            (byte >> (7 - i)) & 1 for byte in data for i in range(8)
        ]
        return bv

    def to_array(self) -> np.ndarray:
        return np.array(self._bits, dtype=np.uint8)

    def to_uint(self) -> int:
        value = 0
        for b in self._bits:
            value = (value << 1) | b
        return value

    def to_bytes(self) -> bytes:
        """Pack MSB-first, zero-padding the final byte."""
        out = bytearray((len(self._bits) + 7) // 8)
        for i, b in enumerate(self._bits):
            if b:
                out[i >> 3] |= 0x80 >> (i & 7)
        return bytes(out)

    def append(self, bit: int) -> None:
        self._bits.append(1 if bit else 0)

    def extend(self, other) -> None:
        if isinstance(other, BitVector):
            self._bits.extend(other._bits)
        else:
            self._bits.extend(1 if b else 0 for b in other)

    def __len__(self):
        return len(self._bits)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            bv = BitVector.__new__(BitVector)
            bv._bits = self._bits[idx]
            return bv
        return self._bits[idx]

    def __iter__(self):
        return iter(self._bits)

    def __eq__(self, other):
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._bits == other._bits

    def __repr__(self):
        body = "".join(map(str, self._bits[:64]))
        tail = "..." if len(self._bits) > 64 else ""
        return f"BitVector({len(self._bits)}: {body}{tail})"


class BitReader:
    """Sequential MSB-first reader over a BitVector."""

    def __init__(self, bits: BitVector):
        self._bits = bits
        self.pos = 0

    def take_uint(self, width: int) -> int:
        if self.pos + width > len(self._bits):
            raise BadLength("read past end of bit vector")
        value = 0
        for _ in range(width):
            value = (value << 1) | self._bits[self.pos]
            self.pos += 1
        return value

    def take_vector(self, width: int) -> BitVector:
        if self.pos + width > len(self._bits):
            raise BadLength("read past end of bit vector")
        out = self._bits[self.pos : self.pos + width]
        self.pos += width
        return out

    def remaining(self) -> int:
        return len(self._bits) - self.pos


# --- fixed-layout records ---

HEADER_MAGIC = 0xA5
HEADER_VERSION = 1
HEADER_BITS = 96
RECORD_BITS = 65


@dataclass(frozen=True)
class AuxHeader:
    """Per-layer parameters self-embedded in the auxiliary region LSBs."""

    layer_index: int
    t_border: int
    m_grid: int
    perm_seed: int
    magic: int = HEADER_MAGIC
    version: int = HEADER_VERSION


def pack_header(hdr: AuxHeader) -> BitVector:
    if hdr.magic != HEADER_MAGIC:
        raise FieldOutOfRange(f"magic {hdr.magic:#x}")
    if not 0 <= hdr.version < 16:
        raise FieldOutOfRange(f"version {hdr.version}")
    if not 1 <= hdr.layer_index <= 255:
        raise FieldOutOfRange(f"layer_index {hdr.layer_index}")
    if not 1 <= hdr.t_border <= 255:
        raise FieldOutOfRange(f"t_border {hdr.t_border}")
    if not 2 <= hdr.m_grid <= 15:
        raise FieldOutOfRange(f"m_grid {hdr.m_grid}")
    if not 0 <= hdr.perm_seed < (1 << 64):
        raise FieldOutOfRange("perm_seed out of 64-bit range")
    out = BitVector.from_uint(hdr.magic, 8)
    out.extend(BitVector.from_uint(hdr.version, 4))
    out.extend(BitVector.from_uint(hdr.layer_index, 8))
    out.extend(BitVector.from_uint(hdr.t_border, 8))
    out.extend(BitVector.from_uint(hdr.m_grid, 4))
    out.extend(BitVector.from_uint(hdr.perm_seed, 64))
    return out


def unpack_header(bits: BitVector) -> AuxHeader:
    if len(bits) != HEADER_BITS:
        raise BadLength(f"header must be {HEADER_BITS} bits, got {len(bits)}")
    rd = BitReader(bits)
    magic = rd.take_uint(8)
    version = rd.take_uint(4)
    layer_index = rd.take_uint(8)
    t_border = rd.take_uint(8)
    m_grid = rd.take_uint(4)
    perm_seed = rd.take_uint(64)
    return AuxHeader(layer_index, t_border, m_grid, perm_seed, magic, version)


@dataclass(frozen=True)
class BlockRecord:
    """Per-block side information: selection, bin pairs and chunk length."""

    embedded_flag: int = 0
    alg_id: int = 0
    pair_right: int = 0
    pair_left: int = 0
    bins: tuple = (0, 0, 0, 0)  # p_r, z_r, p_l, z_l; unused slots zero
    chunk_len: int = 0


def _check_record(r: BlockRecord) -> None:
    if r.embedded_flag not in (0, 1):
        raise FieldOutOfRange(f"embedded_flag {r.embedded_flag}")
    if not 0 <= r.alg_id <= 3:
        raise FieldOutOfRange(f"alg_id {r.alg_id}")
    if r.pair_right not in (0, 1) or r.pair_left not in (0, 1):
        raise FieldOutOfRange("pair flags must be 0/1")
    if len(r.bins) != 4:
        raise FieldOutOfRange("bins must have four entries")
    for b in r.bins:
        if not -256 <= b <= 255:
            raise FieldOutOfRange(f"bin {b} outside 9-bit range")
    if not 0 <= r.chunk_len < (1 << 24):
        raise FieldOutOfRange(f"chunk_len {r.chunk_len}")
    if r.embedded_flag == 0:
        if (
            r.alg_id
            or r.pair_right
            or r.pair_left
            or any(r.bins)
            or r.chunk_len
        ):
            raise FieldOutOfRange("non-embedded record must be all zero")


def pack_record(r: BlockRecord) -> BitVector:
    """Serialize to the fixed 65-bit layout, fields MSB-first."""
    _check_record(r)
    out = BitVector([r.embedded_flag])
    out.extend(BitVector.from_uint(r.alg_id, 2))
    out.append(r.pair_right)
    out.append(r.pair_left)
    for b in r.bins:
        out.extend(BitVector.from_uint(b & 0x1FF, 9))
    out.extend(BitVector.from_uint(r.chunk_len, 24))
    return out


def unpack_record(bits: BitVector) -> BlockRecord:
    if len(bits) != RECORD_BITS:
        raise BadLength(f"record must be {RECORD_BITS} bits, got {len(bits)}")
    rd = BitReader(bits)
    flag = rd.take_uint(1)
    alg = rd.take_uint(2)
    pr = rd.take_uint(1)
    pl = rd.take_uint(1)
    bins = []
    for _ in range(4):
        raw = rd.take_uint(9)
        bins.append(raw - 512 if raw >= 256 else raw)
    chunk = rd.take_uint(24)
    rec = BlockRecord(flag, alg, pr, pl, tuple(bins), chunk)
    _check_record(rec)
    return rec


# --- adaptive binary arithmetic coder ---

_MASK = 0xFFFFFFFF
_HALF = 0x80000000
_QUARTER = 0x40000000
_THREEQ = 0xC0000000
AC_LEN_BITS = 24


@njit(cache=True)
def _ac_encode_kernel(bits):
    low = 0
    high = _MASK
    c0 = 1
    c1 = 1
    pending = 0
    out = np.empty(bits.size * 17 + 64, dtype=np.uint8)
    n = 0
    for i in range(bits.size):
        b = bits[i]
        split = low + ((high - low) * c0) // (c0 + c1)
        if b == 0:
            high = split
            c0 += 1
        else:
            low = split + 1
            c1 += 1
        if c0 + c1 == 65536:
            c0 = max(1, c0 >> 1)
            c1 = max(1, c1 >> 1)
        while True:
            if high < _HALF:
                out[n] = 0
                n += 1
                for _ in range(pending):
                    out[n] = 1
                    n += 1
                pending = 0
            elif low >= _HALF:
                out[n] = 1
                n += 1
                for _ in range(pending):
                    out[n] = 0
                    n += 1
                pending = 0
                low -= _HALF
                high -= _HALF
            elif low >= _QUARTER and high < _THREEQ:
                pending += 1
                low -= _QUARTER
                high -= _QUARTER
            else:
                break
            low = low << 1
            high = (high << 1) | 1
    pending += 1
    if low < _QUARTER:
        out[n] = 0
        n += 1
        for _ in range(pending):
            out[n] = 1
            n += 1
    else:
        out[n] = 1
        n += 1
        for _ in range(pending):
            out[n] = 0
            n += 1
    return out[:n]


@njit(cache=True)
def _ac_decode_kernel(stream, n_symbols):
    out = np.empty(n_symbols, dtype=np.uint8)
    if n_symbols == 0:
        return out, True
    low = 0
    high = _MASK
    value = 0
    pos = 0
    for _ in range(32):
        bit = stream[pos] if pos < stream.size else 0
        value = (value << 1) | bit
        pos += 1
    limit = stream.size + 40
    c0 = 1
    c1 = 1
    for i in range(n_symbols):
        split = low + ((high - low) * c0) // (c0 + c1)
        if value <= split:
            out[i] = 0
            high = split
            c0 += 1
        else:
            out[i] = 1
            low = split + 1
            c1 += 1
        if c0 + c1 == 65536:
            c0 = max(1, c0 >> 1)
            c1 = max(1, c1 >> 1)
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                value -= _HALF
            elif low >= _QUARTER and high < _THREEQ:
                low -= _QUARTER
                high -= _QUARTER
                value -= _QUARTER
            else:
                break
            bit = stream[pos] if pos < stream.size else 0
            low = low << 1
            high = (high << 1) | 1
            value = (value << 1) | bit
            pos += 1
            if pos > limit:
                return out, False
    return out, True


def ac_compress_array(bits: np.ndarray) -> np.ndarray:
    """Compress a uint8 0/1 array into a self-delimiting bit array."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    n = bits.size
    if n >= (1 << AC_LEN_BITS):
        raise InputTooLong(f"{n} bits exceeds 24-bit length header")
    header = np.array(
        [(n >> (AC_LEN_BITS - 1 - i)) & 1 for i in range(AC_LEN_BITS)],
        dtype=np.uint8,
    )
    if n == 0:
        return header
    body = _ac_encode_kernel(bits)
    return np.concatenate([header, body])


def ac_decompress_array(stream: np.ndarray) -> np.ndarray:
    """Invert ac_compress_array exactly."""
    stream = np.ascontiguousarray(stream, dtype=np.uint8)
    if stream.size < AC_LEN_BITS:
        raise CorruptStream("stream shorter than length header")
    n = 0
    for i in range(AC_LEN_BITS):
        n = (n << 1) | int(stream[i])
    if n == 0:
        return np.empty(0, dtype=np.uint8)
    body = stream[AC_LEN_BITS:]
    if body.size == 0:
        raise CorruptStream("missing coder body")
    out, ok = _ac_decode_kernel(body, n)
    if not ok:
        raise CorruptStream("coder ran past end of stream")
    return out


def ac_compress(bitmap: BitVector) -> BitVector:
    """Adaptive arithmetic coding with a 24-bit original-length header."""
    return BitVector.from_array(ac_compress_array(bitmap.to_array()))


def ac_decompress(stream: BitVector) -> BitVector:
    return BitVector.from_array(ac_decompress_array(stream.to_array()))
