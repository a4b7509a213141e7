"""Bit-level writer/reader with order-0 Exp-Golomb codes.

Signed values use the zigzag order 0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ...
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


class DecodeError(ValueError):
    """Malformed bitstream. ``byte_offset`` locates the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte {byte_offset})")
        self.byte_offset = byte_offset


def zigzag(k: int) -> int:
    return 2 * k if k > 0 else -2 * k - 1 if k < 0 else 0


def unzigzag(c: int) -> int:
    return c // 2 if c % 2 == 0 else -(c + 1) // 2


@lru_cache(maxsize=4096)
def exp_golomb_encode(value: int) -> str:
    """Order-0 Exp-Golomb codeword of a non-negative integer, as a bit string."""
    if value < 0:
        raise ValueError(f"unsigned Exp-Golomb needs value >= 0, got {value}")
    body = bin(value + 1)[2:]
    return "0" * (len(body) - 1) + body


def exp_golomb_encode_signed(value: int) -> str:
    return exp_golomb_encode(zigzag(value))


def exp_golomb_decode(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one codeword from ``bits`` at ``pos``; returns ``(value, next_pos)``."""
    one = bits.find("1", pos)
    if one < 0:
        raise DecodeError("Exp-Golomb prefix has no terminating 1", pos // 8)
    n = one - pos
    end = one + 1 + n
    if end > len(bits):
        raise DecodeError("Exp-Golomb codeword runs past end of data", pos // 8)
    return int(bits[one:end], 2) - 1, end


def exp_golomb_decode_signed(bits: str, pos: int = 0) -> tuple[int, int]:
    code, pos = exp_golomb_decode(bits, pos)
    return unzigzag(code), pos


def ue_bits(value) -> np.ndarray | int:
    """Codeword length of unsigned Exp-Golomb; works elementwise on arrays."""
    if np.isscalar(value):
        return 2 * (int(value) + 1).bit_length() - 1
    v = np.asarray(value, dtype=np.int64) + 1
    return 2 * (np.floor(np.log2(v)).astype(np.int64) + 1) - 1


def se_bits(value) -> np.ndarray | int:
    if np.isscalar(value):
        return ue_bits(zigzag(int(value)))
    v = np.asarray(value, dtype=np.int64)
    return ue_bits(np.where(v > 0, 2 * v, -2 * v))  # -2v - 1 + 1 == -2v for v <= 0


class BitWriter:
    def __init__(self):
        self._chunks: list[str] = []
        self.nbits = 0

    def write_bits(self, value: int, n: int) -> None:
        if n:
            self._chunks.append(format(value, f"0{n}b"))
            self.nbits += n

    def write_bit(self, bit) -> None:
        self._chunks.append("1" if bit else "0")
        self.nbits += 1

    def write_code(self, code: str) -> None:
        self._chunks.append(code)
        self.nbits += len(code)

    def write_ue(self, value: int) -> None:
        self.write_code(exp_golomb_encode(value))

    def write_se(self, value: int) -> None:
        self.write_code(exp_golomb_encode_signed(value))

    def write_bytes(self, data: bytes) -> None:
        for b in data:
            self.write_bits(b, 8)

    def byte_align(self) -> None:
        pad = -self.nbits % 8
        self.write_bits(0, pad)

    def getvalue(self) -> bytes:
        if self.nbits % 8:
            raise ValueError("writer is not byte aligned")
        bits = "".join(self._chunks)
        self._chunks = [bits]
        if not bits:
            return b""
        return int(bits, 2).to_bytes(len(bits) // 8, "big")


class BitReader:
    def __init__(self, data: bytes):
        self.data = bytes(data)
        self._bits = "".join(format(b, "08b") for b in self.data)
        self.pos = 0
        self._array = None

    @property
    def bit_array(self) -> np.ndarray:
        """The stream as a uint8 array of 0/1, one entry per bit."""
        if self._array is None:
            self._array = np.unpackbits(np.frombuffer(self.data, dtype=np.uint8))
        return self._array

    @property
    def byte_offset(self) -> int:
        return self.pos // 8

    @property
    def remaining(self) -> int:
        return len(self._bits) - self.pos

    def error(self, message: str) -> DecodeError:
        return DecodeError(message, self.byte_offset)

    def read_bits(self, n: int) -> int:
        if n == 0:
            return 0
        end = self.pos + n
        if end > len(self._bits):
            raise self.error("unexpected end of stream")
        value = int(self._bits[self.pos : end], 2)
        self.pos = end
        return value

    def read_bit(self) -> int:
        if self.pos >= len(self._bits):
            raise self.error("unexpected end of stream")
        bit = self._bits[self.pos] == "1"
        self.pos += 1
        return int(bit)

    def read_ue(self, limit: int = 32) -> int:
        one = self._bits.find("1", self.pos, self.pos + limit + 1)
        if one < 0:
            if len(self._bits) - self.pos <= limit:
                raise self.error("unexpected end of stream")
            raise self.error(f"Exp-Golomb prefix longer than {limit} bits")
        value, pos = exp_golomb_decode(self._bits, self.pos)
        self.pos = pos
        return value

    def read_se(self) -> int:
        return unzigzag(self.read_ue())

    def byte_align(self) -> None:
        self.pos += -self.pos % 8
        if self.pos > len(self._bits):
            raise self.error("unexpected end of stream")
