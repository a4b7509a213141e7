"""Motion estimation on the micro-image lattice (ray-space) and on the pixel grid (conventional).

Ray search first minimises the lattice cost over integer micro-image
displacements, then refines the fractional part around that fixed integer
part. Costs are ``SAD + lam * bits`` where ``bits`` is the signed Exp-Golomb
length of the transmitted vector minus its predictor. Ray vectors are
transmitted as ``4 * (dk + frac)``; conventional vectors in quarter pixels.

Tie-breaks (all deterministic):

* integer stage: lowest cost, then lowest SAD, then smallest ``|dx| + |dy|``,
  then raster order (vertical component first, both ascending);
* fractional stage: lowest cost, then smallest ``qa + qb``, then smallest ``qb``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lfcodec._kernels import block_sad_at, block_sad_table
from lfcodec.bitstream import se_bits
from lfcodec.mc import (
    ZERO_RMV,
    Block,
    RayMotionVector,
    _as_pixels,
    _check_block,
    interpolated_planes,
    predict_conventional,
    predict_fractional,
)

PRECISIONS = {"integer": (0,), "half": (0, 2), "quarter": (0, 1, 2, 3)}


@dataclass(frozen=True)
class SearchConfig:
    window: int = 8
    precision: str = "quarter"
    lam: float = 0.0

    def __post_init__(self):
        if self.window < 0:
            raise ValueError("search window must be non-negative")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}, got {self.precision!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def fractions(self) -> tuple[int, ...]:
        """Allowed fractional parts, in quarters."""
        return PRECISIONS[self.precision]


@dataclass(frozen=True)
class SearchResult:
    """``mv`` is a :class:`RayMotionVector` for ray search and a quarter-pel
    ``(mvx, mvy)`` tuple for conventional search."""

    mv: object
    sad: int
    rd_cost: float

    @property
    def rmv(self) -> RayMotionVector:
        return self.mv


def scaled(rmv: RayMotionVector) -> tuple[int, int]:
    return (4 * rmv.dk_s + rmv.q_alpha, 4 * rmv.dk_t + rmv.q_beta)


def ray_rate(rmv: RayMotionVector, pred: RayMotionVector = ZERO_RMV) -> int:
    ds, dt = scaled(rmv)
    ps, pt = scaled(pred)
    return se_bits(ds - ps) + se_bits(dt - pt)


def conv_rate(mv, pred=(0, 0)) -> int:
    return se_bits(mv[0] - pred[0]) + se_bits(mv[1] - pred[1])


def _pick(cost: np.ndarray, sad: np.ndarray, rank: np.ndarray) -> int:
    """Index minimising (cost, sad, rank)."""
    idx = np.flatnonzero(cost == cost.min())
    if idx.size > 1:
        idx = idx[sad[idx] == sad[idx].min()]
        if idx.size > 1:
            idx = idx[np.argmin(rank[idx]) : np.argmin(rank[idx]) + 1]
    return int(idx[0])


def _lattice(window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate offsets in raster order (dy outer) and their tie-break rank."""
    r = np.arange(-window, window + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    dy, dx = dy.ravel(), dx.ravel()
    # raster order is already (dy, dx) ascending; stable sort on L1 keeps it within ties
    order = np.argsort(np.abs(dx) + np.abs(dy), kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return dy, dx, rank


def _gather_sads(cur_blk: np.ndarray, ref: np.ndarray, block: Block, dys: np.ndarray, dxs: np.ndarray) -> np.ndarray:
    H, W = ref.shape
    rows = np.clip(block.y + dys[:, None] + np.arange(block.h)[None, :], 0, H - 1)
    cols = np.clip(block.x + dxs[:, None] + np.arange(block.w)[None, :], 0, W - 1)
    cand = ref[rows[:, :, None], cols[:, None, :]].astype(np.int32)
    return np.abs(cand - cur_blk.astype(np.int32)[None]).sum(axis=(1, 2))


def _frac_pick(costs: dict) -> tuple[int, int]:
    return min(costs, key=lambda q: (costs[q], q[0] + q[1], q[1]))


def search_integer(cur, ref, block, cfg: SearchConfig, pred_rmv: RayMotionVector = ZERO_RMV) -> SearchResult:
    """Exhaustive search over whole micro-image displacements within ``cfg.window``."""
    cur_px = _as_pixels(cur)
    ref_px = _as_pixels(ref)
    block = _check_block(cur_px, block)
    P_x, P_y = ref.grid.P_x, ref.grid.P_y
    dk_t, dk_s, rank = _lattice(cfg.window)
    cur_blk = cur_px[block.y : block.y + block.h, block.x : block.x + block.w]
    sads = _gather_sads(cur_blk, ref_px, block, dk_t * P_y, dk_s * P_x)
    ps, pt = scaled(pred_rmv)
    bits = se_bits(4 * dk_s - ps) + se_bits(4 * dk_t - pt)
    cost = sads + cfg.lam * bits
    k = _pick(cost, sads, rank)
    return SearchResult(RayMotionVector(dk_s[k], dk_t[k]), int(sads[k]), float(cost[k]))


def refine_fractional(
    cur, ref, block, base: SearchResult, cfg: SearchConfig, pred_rmv: RayMotionVector = ZERO_RMV
) -> SearchResult:
    """Choose the fractional part around the integer part of ``base``."""
    cur_px = _as_pixels(cur)
    block = _check_block(cur_px, block)
    cur_blk = cur_px[block.y : block.y + block.h, block.x : block.x + block.w]
    fr = cfg.fractions
    sads, costs = {}, {}
    for qb in fr:
        for qa in fr:
            rmv = RayMotionVector.from_quarters(base.rmv.dk_s, base.rmv.dk_t, qa, qb)
            pred = predict_fractional(ref, block, rmv)
            sads[qa, qb] = int(np.abs(pred.astype(np.int32) - cur_blk).sum())
            costs[qa, qb] = sads[qa, qb] + cfg.lam * ray_rate(rmv, pred_rmv)
    qa, qb = _frac_pick(costs)
    rmv = RayMotionVector.from_quarters(base.rmv.dk_s, base.rmv.dk_t, qa, qb)
    return SearchResult(rmv, sads[qa, qb], float(costs[qa, qb]))


def search_ray(cur, ref, block, cfg: SearchConfig, pred_rmv: RayMotionVector = ZERO_RMV) -> SearchResult:
    base = search_integer(cur, ref, block, cfg, pred_rmv)
    if cfg.precision == "integer":
        return base
    return refine_fractional(cur, ref, block, base, cfg, pred_rmv)


def full_search_conventional(
    cur, ref, block, window_px: int, pred_mv=(0, 0), lam: float = 0.0, quarter: bool = True
) -> SearchResult:
    """Exhaustive integer-pel search over ``+-window_px`` then quarter-pel refinement."""
    cur_px = _as_pixels(cur)
    ref_px = _as_pixels(ref)
    block = _check_block(cur_px, block)
    dy, dx, rank = _lattice(window_px)
    cur_blk = cur_px[block.y : block.y + block.h, block.x : block.x + block.w]
    sads = _gather_sads(cur_blk, ref_px, block, dy, dx)
    bits = se_bits(4 * dx - pred_mv[0]) + se_bits(4 * dy - pred_mv[1])
    cost = sads + lam * bits
    k = _pick(cost, sads, rank)
    ix, iy = int(dx[k]), int(dy[k])
    if not quarter:
        return SearchResult((4 * ix, 4 * iy), int(sads[k]), float(cost[k]))
    sad_q, cost_q = {}, {}
    for fy in range(4):
        for fx in range(4):
            mv = (4 * ix + fx, 4 * iy + fy)
            pred = predict_conventional(ref_px, block, mv)
            sad_q[fx, fy] = int(np.abs(pred.astype(np.int32) - cur_blk).sum())
            cost_q[fx, fy] = sad_q[fx, fy] + lam * conv_rate(mv, pred_mv)
    fx, fy = _frac_pick(cost_q)
    return SearchResult((4 * ix + fx, 4 * iy + fy), sad_q[fx, fy], float(cost_q[fx, fy]))


class _FrameSearchBase:
    def __init__(self, cur: np.ndarray, ref: np.ndarray, block_size: int):
        self.cur = np.ascontiguousarray(cur, dtype=np.int16)
        self.ref = np.asarray(ref)
        self.bs = block_size
        H, W = self.cur.shape
        if H % block_size or W % block_size:
            raise ValueError("frame must be a whole number of blocks")

    def _bits_lookup(self, span: int) -> np.ndarray:
        # se_bits(v) for v in [-span, span], indexed by v + span
        return se_bits(np.arange(-span, span + 1))

    def block_sad(self, plane: np.ndarray, by: int, bx: int, dy: int, dx: int) -> int:
        return int(block_sad_at(self.cur, plane, self.pad, by * self.bs, bx * self.bs, self.bs, dy, dx))

    def block_pred(self, plane: np.ndarray, by: int, bx: int, dy: int, dx: int) -> np.ndarray:
        y = self.pad + by * self.bs + dy
        x = self.pad + bx * self.bs + dx
        return plane[y : y + self.bs, x : x + self.bs].astype(np.uint8)


class RayFrameSearch(_FrameSearchBase):
    """Whole-frame ray-space search; equivalent to :func:`search_ray` per block.

    SADs for every (fraction, integer displacement) pair are tabulated up
    front, so per-block decisions reduce to table lookups.
    """

    def __init__(self, cur, ref, P_x: int, P_y: int, block_size: int, cfg: SearchConfig):
        super().__init__(cur, ref, block_size)
        self.P_x, self.P_y, self.cfg = P_x, P_y, cfg
        self.pad = cfg.window * max(P_x, P_y)
        self.dk_t, self.dk_s, self.rank = _lattice(cfg.window)
        self.fracs = [(qa, qb) for qb in cfg.fractions for qa in cfg.fractions]
        self.qa = np.array([q[0] for q in self.fracs])
        self.qb = np.array([q[1] for q in self.fracs])
        self.frac_rank = np.argsort(np.argsort(self.qa + self.qb + 0.1 * self.qb, kind="stable"))
        self.planes = interpolated_planes(self.ref, self.pad, self.fracs, P_x, P_y)
        dys, dxs = self.dk_t * P_y, self.dk_s * P_x
        # table[by, bx, f, k]: fraction f at integer candidate k
        self.table = np.stack(
            [block_sad_table(self.cur, self.planes[q], self.pad, block_size, dys, dxs) for q in self.fracs],
            axis=2,
        )
        self._span = 8 * cfg.window + 8
        self._bits = self._bits_lookup(self._span)

    def search(self, by: int, bx: int, pred: RayMotionVector = ZERO_RMV, lam: float | None = None) -> SearchResult:
        lam = self.cfg.lam if lam is None else lam
        ps, pt = scaled(pred)
        sads = self.table[by, bx, 0]
        bits = self._bits[4 * self.dk_s - ps + self._span] + self._bits[4 * self.dk_t - pt + self._span]
        cost = sads + lam * bits
        k = _pick(cost, sads, self.rank)
        dk_s, dk_t = int(self.dk_s[k]), int(self.dk_t[k])
        if len(self.fracs) == 1:
            return SearchResult(RayMotionVector(dk_s, dk_t), int(sads[k]), float(cost[k]))
        fsad = self.table[by, bx, :, k]
        fbits = self._bits[4 * dk_s + self.qa - ps + self._span] + self._bits[4 * dk_t + self.qb - pt + self._span]
        fcost = fsad + lam * fbits
        idx = np.flatnonzero(fcost == fcost.min())
        f = int(idx[np.argmin(self.frac_rank[idx])])
        rmv = RayMotionVector.from_quarters(dk_s, dk_t, int(self.qa[f]), int(self.qb[f]))
        return SearchResult(rmv, int(fsad[f]), float(fcost[f]))

    def prediction(self, by: int, bx: int, rmv: RayMotionVector) -> np.ndarray:
        plane = self.planes[rmv.q_alpha, rmv.q_beta]
        return self.block_pred(plane, by, bx, rmv.dk_t * self.P_y, rmv.dk_s * self.P_x)


class ConventionalFrameSearch(_FrameSearchBase):
    """Whole-frame conventional search; equivalent to :func:`full_search_conventional` per block."""

    def __init__(self, cur, ref, block_size: int, window_px: int, lam: float = 0.0, quarter: bool = True):
        super().__init__(cur, ref, block_size)
        self.window_px, self.lam, self.quarter = window_px, lam, quarter
        self.pad = window_px + 1
        self.dy, self.dx, self.rank = _lattice(window_px)
        self.fracs = [(fx, fy) for fy in range(4) for fx in range(4)] if quarter else [(0, 0)]
        self.fx = np.array([q[0] for q in self.fracs])
        self.fy = np.array([q[1] for q in self.fracs])
        self.frac_rank = np.argsort(np.argsort(self.fx + self.fy + 0.1 * self.fy, kind="stable"))
        self.planes = interpolated_planes(self.ref, self.pad, self.fracs, 1, 1)
        self._plane_list = [self.planes[q] for q in self.fracs]
        self.table = block_sad_table(self.cur, self.planes[0, 0], self.pad, block_size, self.dy, self.dx)
        self._span = 8 * window_px + 8
        self._bits = self._bits_lookup(self._span)

    def search(self, by: int, bx: int, pred=(0, 0), lam: float | None = None) -> SearchResult:
        lam = self.lam if lam is None else lam
        sads = self.table[by, bx]
        bits = self._bits[4 * self.dx - pred[0] + self._span] + self._bits[4 * self.dy - pred[1] + self._span]
        cost = sads + lam * bits
        k = _pick(cost, sads, self.rank)
        ix, iy = int(self.dx[k]), int(self.dy[k])
        if not self.quarter:
            return SearchResult((4 * ix, 4 * iy), int(sads[k]), float(cost[k]))
        fsad = np.array([self.block_sad(plane, by, bx, iy, ix) for plane in self._plane_list])
        fbits = self._bits[4 * ix + self.fx - pred[0] + self._span] + self._bits[4 * iy + self.fy - pred[1] + self._span]
        fcost = fsad + lam * fbits
        idx = np.flatnonzero(fcost == fcost.min())
        f = int(idx[np.argmin(self.frac_rank[idx])])
        mv = (4 * ix + int(self.fx[f]), 4 * iy + int(self.fy[f]))
        return SearchResult(mv, int(fsad[f]), float(fcost[f]))

    def prediction(self, by: int, bx: int, mv) -> np.ndarray:
        mvx, mvy = mv
        return self.block_pred(self.planes[mvx & 3, mvy & 3], by, bx, mvy >> 2, mvx >> 2)
