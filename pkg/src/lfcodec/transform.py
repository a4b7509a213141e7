"""Fixed-point 8x8 DCT-II and uniform scalar quantisation.

The DCT matrix is the orthonormal basis scaled by ``2**14`` and rounded to
integers (entries fit in 16 bits). Coefficients are carried with 3
fractional bits between the transform and the quantiser. The quantiser step is ``2 ** ((qp - 4) / 6)``
on orthonormal coefficients, realised with per-``qp % 6`` integer scales and
a ``qp // 6`` shift; quantisation rounds to nearest (offset one half step).
All arithmetic is integer, so the encoder and decoder reconstruct identically.
"""

from __future__ import annotations

import numpy as np

N = 8
_MATRIX_BITS = 14
_COEF_FRAC_BITS = 3
_FWD_SHIFT = 2 * _MATRIX_BITS - _COEF_FRAC_BITS
_INV_SHIFT = 2 * _MATRIX_BITS + _COEF_FRAC_BITS
_QSHIFT = 16
_DQ_BITS = 12


def _dct_basis() -> np.ndarray:
    k = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    c = np.sqrt(2.0 / N) * np.cos(np.pi * (2 * n + 1) * k / (2 * N))
    c[0] /= np.sqrt(2.0)
    return c


DCT_MATRIX = np.round(_dct_basis() * 2**_MATRIX_BITS).astype(np.int64)

QUANT_SCALE = np.array([round(2**_QSHIFT / 2 ** ((k - 4) / 6)) for k in range(6)], dtype=np.int64)
DEQUANT_SCALE = np.array([round(2**_DQ_BITS * 2 ** ((k - 4) / 6)) for k in range(6)], dtype=np.int64)


def _zigzag_order(n: int = N) -> np.ndarray:
    cells = sorted(
        ((i, j) for i in range(n) for j in range(n)),
        key=lambda p: (p[0] + p[1], p[1] if (p[0] + p[1]) % 2 == 0 else p[0]),
    )
    return np.array([i * n + j for i, j in cells])


ZIGZAG = _zigzag_order()


def step_size(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6)


def _check_qp(qp: int) -> None:
    if not 0 <= qp <= 51:
        raise ValueError(f"qp must be in [0, 51], got {qp}")


def _rshift_round(x: np.ndarray, shift: int) -> np.ndarray:
    return (x + (1 << (shift - 1))) >> shift


def forward_dct(residual: np.ndarray) -> np.ndarray:
    """Integer DCT; output carries ``_COEF_FRAC_BITS`` fractional bits."""
    r = np.asarray(residual, dtype=np.int64)
    return _rshift_round(DCT_MATRIX @ r @ DCT_MATRIX.T, _FWD_SHIFT)


def inverse_dct(coef: np.ndarray) -> np.ndarray:
    c = np.asarray(coef, dtype=np.int64)
    return _rshift_round(DCT_MATRIX.T @ c @ DCT_MATRIX, _INV_SHIFT)


def quantize(coef: np.ndarray, qp: int) -> np.ndarray:
    _check_qp(qp)
    shift = _QSHIFT + _COEF_FRAC_BITS + qp // 6
    mag = (np.abs(coef) * QUANT_SCALE[qp % 6] + (1 << (shift - 1))) >> shift
    return np.sign(coef) * mag


def dequantize(levels: np.ndarray, qp: int) -> np.ndarray:
    _check_qp(qp)
    scaled = (np.asarray(levels, dtype=np.int64) * DEQUANT_SCALE[qp % 6]) << (qp // 6)
    return _rshift_round(scaled, _DQ_BITS - _COEF_FRAC_BITS)


def transform_quant(residual: np.ndarray, qp: int) -> np.ndarray:
    """8x8 residual (values in [-255, 255]) to quantised levels.

    A stack of shape ``(..., 8, 8)`` is transformed block by block.
    """
    residual = np.asarray(residual)
    if residual.shape[-2:] != (N, N):
        raise ValueError(f"expected {N}x{N} blocks, got {residual.shape}")
    return quantize(forward_dct(residual), qp)


def dequant_itransform(levels: np.ndarray, qp: int) -> np.ndarray:
    return inverse_dct(dequantize(levels, qp))
