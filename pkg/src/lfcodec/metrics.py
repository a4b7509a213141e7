"""Luma PSNR and Bjontegaard delta rate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from lfcodec.core import LensletFrame, lenslet_to_multiview

LOSSLESS = math.inf


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def mse_to_psnr(mse: float) -> float:
    return LOSSLESS if mse == 0 else 10.0 * math.log10(255.0**2 / mse)


def psnr(a, b) -> float:
    """PSNR in dB for 8-bit images; ``math.inf`` when identical."""
    return mse_to_psnr(_mse(a, b))


def format_psnr(value: float) -> str:
    return "lossless" if value == LOSSLESS else f"{value:.4f}"


def sequence_psnr(decoded: list[LensletFrame], original: list[LensletFrame]) -> float:
    """Average over every (view, frame) pair of the multiview MSE, converted to dB once."""
    if len(decoded) != len(original):
        raise ValueError(f"{len(decoded)} decoded frames vs {len(original)} originals")
    if not decoded:
        raise ValueError("no frames to compare")
    total = 0.0
    count = 0
    for dec, orig in zip(decoded, original):
        dv = lenslet_to_multiview(dec).views
        ov = lenslet_to_multiview(orig).views
        if dv.shape != ov.shape:
            raise ValueError(f"dimension mismatch: {dv.shape} vs {ov.shape}")
        d = dv.astype(np.float64) - ov.astype(np.float64)
        per_view = np.mean(d * d, axis=(2, 3))
        total += float(per_view.sum())
        count += per_view.size
    return mse_to_psnr(total / count)


@dataclass(frozen=True)
class RDPoint:
    bitrate: float
    psnr: float


class RDCurve:
    """Rate-distortion points sorted by rate; at least four, rates strictly increasing."""

    def __init__(self, points):
        pts = sorted((RDPoint(float(p[0]), float(p[1])) if not isinstance(p, RDPoint) else p for p in points),
                     key=lambda p: p.bitrate)
        if len(pts) < 4:
            raise ValueError(f"an RD curve needs at least 4 points, got {len(pts)}")
        rates = [p.bitrate for p in pts]
        if any(r <= 0 or not math.isfinite(r) for r in rates):
            raise ValueError("rates must be positive and finite")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("rates must be distinct")
        if any(not math.isfinite(p.psnr) for p in pts):
            raise ValueError("PSNR values must be finite")
        if any(b.psnr < a.psnr for a, b in zip(pts, pts[1:])):
            warnings.warn("PSNR decreases with rate along this curve", stacklevel=2)
        self.points = tuple(pts)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.bitrate for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def __len__(self):
        return len(self.points)


def bd_rate(anchor: RDCurve, test: RDCurve) -> float:
    """Bjontegaard delta rate of ``test`` against ``anchor`` in percent (negative saves rate).

    Each curve is fitted with a cubic ``log10(rate) = p(PSNR)``; the fits are
    integrated in closed form over the shared PSNR interval.
    """
    lo = max(anchor.psnrs.min(), test.psnrs.min())
    hi = min(anchor.psnrs.max(), test.psnrs.max())
    if not hi > lo:
        raise ValueError(
            f"PSNR ranges do not overlap: anchor [{anchor.psnrs.min():.3f}, {anchor.psnrs.max():.3f}], "
            f"test [{test.psnrs.min():.3f}, {test.psnrs.max():.3f}]"
        )

    def integral(curve: RDCurve) -> float:
        poly = np.polynomial.Polynomial.fit(curve.psnrs, np.log10(curve.rates), 3).convert()
        prim = poly.integ()
        return prim(hi) - prim(lo)

    mean_diff = (integral(test) - integral(anchor)) / (hi - lo)
    return 100.0 * (10.0**mean_diff - 1.0)
