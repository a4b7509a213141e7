"""Motion-compensated prediction kernels for lenslet frames.

Three predictors share one integer interpolation pipeline:

* ray-space integer MC: copy from ``x + (dk_s*P_x, dk_t*P_y)``;
* ray-space fractional MC: 8-tap interpolation whose input samples are
  spaced one micro-image pitch apart, so it interpolates between microlens
  positions rather than between neighbouring pixels;
* conventional MC: the same taps applied to immediately adjacent pixels at a
  quarter-pel displacement.

The ray predictor with ``P_x = P_y = 1`` is the conventional predictor.

Every kernel reads the reference with edge clamping. Interpolation runs a
horizontal pass, rounds with ``(acc + 32) >> 6``, then a vertical pass on the
intermediate values with the same rounding and a final clip to ``[0, 255]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from lfcodec._kernels import lattice_block
from lfcodec.core import LensletFrame

TAP_OFFSETS = np.arange(-4, 5)

# Rows exactly as tabulated for alpha = 0, 1/4, 2/4, 3/4 (the 2/4 row has 8 entries).
TABLE_ROWS = (
    (0, 0, 0, 0, 64, 0, 0, 0, 0),
    (0, -1, 4, -10, 58, 17, -5, 1, 0),
    (-1, 4, -11, 40, 40, -11, 4, -1),
    (0, 1, -5, 17, 58, -10, 4, -1, 0),
)

# Taps on the m = -4..+4 frame. Every filter occupies m = -3..+4 (tap(-4) = 0),
# which puts the interpolated position at +alpha between m = 0 and m = 1.
TAPS = np.array(
    [
        (0, 0, 0, 0, 64, 0, 0, 0, 0),
        (0, -1, 4, -10, 58, 17, -5, 1, 0),
        (0, -1, 4, -11, 40, 40, -11, 4, -1),
        (0, 0, 1, -5, 17, 58, -10, 4, -1),
    ],
    dtype=np.int64,
)

QUARTERS = (0, 1, 2, 3)


def to_quarter(frac) -> int:
    """Map a fraction in {0, 1/4, 2/4, 3/4} to its quarter index."""
    if isinstance(frac, (int, float)) and frac * 4 in QUARTERS:
        return int(frac * 4)
    q = Fraction(frac).limit_denominator(64) * 4
    if q.denominator != 1 or not 0 <= q < 4:
        raise ValueError(f"fraction must be one of 0, 1/4, 2/4, 3/4; got {frac!r}")
    return int(q)


@dataclass(frozen=True)
class InterpFilter1D:
    alpha: Fraction
    taps: tuple[int, ...]
    denominator: int = 64

    def __post_init__(self):
        if len(self.taps) != 9:
            raise ValueError("filter must have 9 taps (m = -4..+4)")

    def tap(self, m: int) -> int:
        return self.taps[m + 4]

    def as_array(self) -> np.ndarray:
        return np.array(self.taps, dtype=np.int64)


def filter_coeffs(alpha) -> InterpFilter1D:
    q = to_quarter(alpha)
    return InterpFilter1D(Fraction(q, 4), tuple(int(t) for t in TAPS[q]))


def separable_coeffs(alpha, beta) -> np.ndarray:
    """9x9 integer taps ``w[n + 4, m + 4] = w_alpha(m) * w_beta(n)``; total gain 4096.

    Rows run along the vertical offset ``n`` (beta), columns along ``m`` (alpha).
    """
    return np.outer(filter_coeffs(beta).as_array(), filter_coeffs(alpha).as_array())


@dataclass(frozen=True)
class RayMotionVector:
    """Ray displacement ``(dk_s + alpha, dk_t + beta)`` in microlens units."""

    dk_s: int
    dk_t: int
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dk_s", int(self.dk_s))
        object.__setattr__(self, "dk_t", int(self.dk_t))
        object.__setattr__(self, "alpha", to_quarter(self.alpha) / 4)
        object.__setattr__(self, "beta", to_quarter(self.beta) / 4)

    @property
    def q_alpha(self) -> int:
        return int(self.alpha * 4)

    @property
    def q_beta(self) -> int:
        return int(self.beta * 4)

    @property
    def is_integer(self) -> bool:
        return self.alpha == 0 and self.beta == 0

    def displacement(self, p_s: float, p_t: float) -> tuple[float, float]:
        return ((self.dk_s + self.alpha) * p_s, (self.dk_t + self.beta) * p_t)

    @classmethod
    def from_quarters(cls, dk_s: int, dk_t: int, qa: int, qb: int) -> "RayMotionVector":
        return cls(dk_s, dk_t, qa / 4, qb / 4)


ZERO_RMV = RayMotionVector(0, 0)


class Block(NamedTuple):
    x: int
    y: int
    w: int
    h: int


def _as_pixels(ref) -> np.ndarray:
    return ref.pixels if isinstance(ref, LensletFrame) else np.asarray(ref)


def _check_block(pixels: np.ndarray, block: Block) -> Block:
    block = Block(*block)
    H, W = pixels.shape
    if block.w < 1 or block.h < 1 or block.x < 0 or block.y < 0 or block.x + block.w > W or block.y + block.h > H:
        raise ValueError(f"block {tuple(block)} outside frame {W}x{H}")
    return block


def round_shift6(acc: np.ndarray) -> np.ndarray:
    return (acc + 32) >> 6


def lattice_interpolate(
    pixels: np.ndarray,
    block: Block,
    dx: int,
    dy: int,
    qx: int,
    qy: int,
    step_x: int,
    step_y: int,
) -> np.ndarray:
    """Separable interpolation at ``x + dx + (qx/4)*step_x`` (and likewise in y).

    ``dx``/``dy`` are integer pixel offsets; taps read samples ``step`` pixels apart.
    """
    x, y, w, h = block
    if not qx and not qy:
        H, W = pixels.shape
        rows = np.clip(y + dy + np.arange(h), 0, H - 1)
        cols = np.clip(x + dx + np.arange(w), 0, W - 1)
        return pixels[np.ix_(rows, cols)].astype(np.uint8)
    out = lattice_block(pixels, x, y, w, h, dx, dy, TAPS[qx], TAPS[qy], step_x, step_y)
    return np.clip(out, 0, 255).astype(np.uint8)


def predict_integer(ref, block, dk) -> np.ndarray:
    """Copy the block displaced by ``dk`` whole micro-images."""
    pixels = _as_pixels(ref)
    block = _check_block(pixels, block)
    grid = ref.grid
    H, W = pixels.shape
    dk_s, dk_t = dk
    ys = np.clip(block.y + dk_t * grid.P_y + np.arange(block.h), 0, H - 1)
    xs = np.clip(block.x + dk_s * grid.P_x + np.arange(block.w), 0, W - 1)
    return pixels[np.ix_(ys, xs)].copy()


def predict_fractional(ref: LensletFrame, block, rmv: RayMotionVector) -> np.ndarray:
    """Ray-space fractional prediction on the micro-image lattice."""
    pixels = _as_pixels(ref)
    block = _check_block(pixels, block)
    P_x, P_y = ref.grid.P_x, ref.grid.P_y
    return lattice_interpolate(
        pixels, block, rmv.dk_s * P_x, rmv.dk_t * P_y, rmv.q_alpha, rmv.q_beta, P_x, P_y
    )


def predict_conventional(ref, block, mv) -> np.ndarray:
    """Translational prediction; ``mv`` is a quarter-pel pixel displacement ``(mvx, mvy)``."""
    pixels = _as_pixels(ref)
    block = _check_block(pixels, block)
    mvx, mvy = (int(v) for v in mv)
    return lattice_interpolate(pixels, block, mvx >> 2, mvy >> 2, mvx & 3, mvy & 3, 1, 1)


def _filter_axis(src: np.ndarray, q: int, step: int, out_len: int, axis: int) -> np.ndarray:
    """One separable pass along ``axis``; ``src`` carries a ``4 * step`` margin on that axis."""
    def window(off):
        return src[off : off + out_len] if axis == 0 else src[:, off : off + out_len]

    if q == 0:
        return window(4 * step)
    acc = None
    for k, m in enumerate(TAP_OFFSETS):
        c = int(TAPS[q, k])
        if c:
            term = c * window(4 * step + m * step)
            acc = term if acc is None else acc + term
    return round_shift6(acc)


def interpolated_planes(pixels: np.ndarray, pad: int, fracs, step_x: int, step_y: int) -> dict:
    """Whole-frame interpolation on an edge-extended canvas, for each ``(qx, qy)`` in ``fracs``.

    Each returned int16 plane satisfies
    ``plane[pad + y + dy, pad + x + dx] ==
    lattice_interpolate(pixels, (x, y, 1, 1), dx, dy, qx, qy, step_x, step_y)``
    for any ``|dx|, |dy| <= pad``. Horizontal passes are shared between
    planes with the same ``qx``.
    """
    H, W = pixels.shape
    mx, my = pad + 4 * step_x, pad + 4 * step_y
    src = np.pad(pixels.astype(np.int32), ((my, my), (mx, mx)), mode="edge")
    out_h, out_w = H + 2 * pad, W + 2 * pad
    horiz = {}
    planes = {}
    for qx, qy in fracs:
        if qx not in horiz:
            horiz[qx] = _filter_axis(src, qx, step_x, out_w, axis=1)
        vert = _filter_axis(horiz[qx], qy, step_y, out_h, axis=0)
        planes[qx, qy] = np.clip(vert, 0, 255).astype(np.int16)
    return planes


def interpolated_plane(pixels: np.ndarray, pad: int, qx: int, qy: int, step_x: int, step_y: int) -> np.ndarray:
    """Single-phase form of :func:`interpolated_planes`."""
    return interpolated_planes(pixels, pad, [(qx, qy)], step_x, step_y)[qx, qy]


def sad(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())
