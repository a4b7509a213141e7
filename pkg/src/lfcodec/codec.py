"""Block-based low-delay-P lenslet video codec with ray-space or conventional inter prediction.

Bitstream layout (all multi-bit fields are order-0 Exp-Golomb unless noted)::

    "RLC1"                         4 raw bytes
    version width height P_x P_y qp block_size mc_mode frame_count
    <byte align>
    per frame, per block in raster order:
        mode        '0' intra DC | '10' ray inter | '11' conventional inter
        mv diff     se(dx) se(dy)  (inter only; vector minus left-neighbour predictor)
        cbf         1 bit
        per 8x8 sub-block (cbf only):
            sub cbf 1 bit; if set: ue(count - 1), then per nonzero level in
            zigzag order: ue(run of zeros) ue(|level| - 1) sign bit
    <byte align after each frame>

Ray vectors travel as ``d = 4 * (dk + frac)`` and are split back with floor
division, so the fractional part always lands in ``[0, 1)``. Conventional
vectors are quarter-pel pixel displacements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lfcodec._kernels import read_level_scan, write_level_scans
from lfcodec.bitstream import BitReader, BitWriter, DecodeError
from lfcodec.core import LensletFrame, LensletGrid, StructuralError
from lfcodec.mc import Block, RayMotionVector, ZERO_RMV, lattice_interpolate
from lfcodec.search import ConventionalFrameSearch, RayFrameSearch, SearchConfig
from lfcodec.transform import ZIGZAG, dequant_itransform, transform_quant

MAGIC = b"RLC1"
VERSION = 1

INTRA_DC, INTER_RAY, INTER_CONV = "INTRA_DC", "INTER_RAY", "INTER_CONV"
MODE_CODES = {INTRA_DC: "0", INTER_RAY: "10", INTER_CONV: "11"}

MC_MODES = ("ray", "conventional", "ray+intra")
MC_ALIASES = {"conv": "conventional", "ray+intra_fallback": "ray+intra"}

TB = 8  # transform size
MAX_DIM = 1 << 14
MAX_FRAMES = 1 << 20


def scale_rmv(rmv: RayMotionVector) -> tuple[int, int]:
    return (4 * rmv.dk_s + rmv.q_alpha, 4 * rmv.dk_t + rmv.q_beta)


def unscale_rmv(d_s: int, d_t: int) -> RayMotionVector:
    dk_s, dk_t = d_s // 4, d_t // 4  # floor toward -inf
    return RayMotionVector.from_quarters(dk_s, dk_t, d_s - 4 * dk_s, d_t - 4 * dk_t)


def default_lambda(qp: int) -> float:
    """Lagrangian weight for SAD-domain costs: square root of the usual SSE lambda."""
    return math.sqrt(0.85 * 2 ** ((qp - 12) / 3))


@dataclass(frozen=True)
class CodecConfig:
    qp: int = 30
    block_size: int = 16
    mc_mode: str = "ray"
    search: SearchConfig = field(default_factory=SearchConfig)
    lam: float | None = None
    conv_window: int | None = None  # pixels; defaults to search.window * P_x

    def __post_init__(self):
        object.__setattr__(self, "mc_mode", MC_ALIASES.get(self.mc_mode, self.mc_mode))
        if not 0 <= self.qp <= 51:
            raise ValueError(f"qp must be in [0, 51], got {self.qp}")
        bs = self.block_size
        if bs < TB or bs & (bs - 1) or bs > 128:
            raise ValueError(f"block_size must be a power of two in [8, 128], got {bs}")
        if self.mc_mode not in MC_MODES:
            raise ValueError(f"mc_mode must be one of {MC_MODES}, got {self.mc_mode!r}")

    @property
    def gop(self) -> str:
        return "low-delay-P"

    @property
    def lagrangian(self) -> float:
        return default_lambda(self.qp) if self.lam is None else self.lam


@dataclass(frozen=True)
class CodedBlock:
    mode: str
    mv: tuple[int, int] | None
    levels: tuple[np.ndarray, ...] | None


@dataclass(frozen=True)
class Bitstream:
    width: int
    height: int
    P_x: int
    P_y: int
    qp: int
    block_size: int
    mc_mode: str
    frame_count: int
    data: bytes = field(repr=False)
    version: int = VERSION

    def to_bytes(self) -> bytes:
        return self.data

    @property
    def nbits(self) -> int:
        return 8 * len(self.data)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        reader = BitReader(data)
        hdr = _read_header(reader)
        return cls(data=bytes(data), **hdr)


def _write_header(w: BitWriter, width, height, P_x, P_y, qp, block_size, mc_mode, frame_count) -> None:
    w.write_bytes(MAGIC)
    for value in (VERSION, width, height, P_x, P_y, qp, block_size, MC_MODES.index(mc_mode), frame_count):
        w.write_ue(value)
    w.byte_align()


def _read_header(r: BitReader) -> dict:
    if len(r.data) < 4 or r.data[:4] != MAGIC:
        raise DecodeError(f"bad magic {r.data[:4]!r}, expected {MAGIC!r}", 0)
    r.pos = 32
    fields = {}
    for name in ("version", "width", "height", "P_x", "P_y", "qp", "block_size", "mc_mode", "frame_count"):
        at = r.byte_offset
        value = r.read_ue()
        fields[name] = value
        bad = None
        if name == "version" and value != VERSION:
            bad = f"unsupported version {value}"
        elif name in ("width", "height") and not 1 <= value <= MAX_DIM:
            bad = f"{name} {value} out of range"
        elif name in ("P_x", "P_y") and not 1 <= value <= MAX_DIM:
            bad = f"micro-image pitch {name}={value} out of range"
        elif name == "qp" and value > 51:
            bad = f"qp {value} out of range"
        elif name == "block_size" and (value < TB or value > 128 or value & (value - 1)):
            bad = f"invalid block size {value}"
        elif name == "mc_mode" and value >= len(MC_MODES):
            bad = f"invalid mc_mode {value}"
        elif name == "frame_count" and value > MAX_FRAMES:
            bad = f"frame count {value} out of range"
        if bad:
            raise DecodeError(bad, at)
    r.byte_align()
    fields["mc_mode"] = MC_MODES[fields["mc_mode"]]
    return fields


def _coded_size(n: int, bs: int) -> int:
    return -(-n // bs) * bs


def _pad_frame(pixels: np.ndarray, H: int, W: int) -> np.ndarray:
    h, w = pixels.shape
    return np.pad(pixels, ((0, H - h), (0, W - w)), mode="edge")


def intra_dc(recon: np.ndarray, x0: int, y0: int, bs: int) -> int:
    """Mean of the reconstructed left column and top row that exist, else 128."""
    parts = []
    if x0 > 0:
        parts.append(recon[y0 : y0 + bs, x0 - 1])
    if y0 > 0:
        parts.append(recon[y0 - 1, x0 : x0 + bs])
    if not parts:
        return 128
    ref = np.concatenate(parts).astype(np.int64)
    return int((ref.sum() + ref.size // 2) // ref.size)


def _bit_string(bits: np.ndarray) -> str:
    return (bits + 48).tobytes().decode("ascii")


def _write_levels(w: BitWriter, levels: np.ndarray) -> None:
    """Zigzag scan as ue(count - 1), then per nonzero: ue(run), ue(|level| - 1), sign bit."""
    bits = write_level_scans(levels.reshape(1, -1)[:, ZIGZAG])
    w.write_code(_bit_string(bits[1:]))


_LEVEL_ERRORS = {
    1: "unexpected end of stream",
    2: "Exp-Golomb prefix longer than 32 bits",
    3: f"more than {TB * TB} coefficients in an {TB}x{TB} block",
    4: "coefficient run past end of block",
}


def _read_levels(r: BitReader) -> np.ndarray:
    scan, pos, err = read_level_scan(r.bit_array, r.pos, TB * TB)
    if err:
        r.pos = pos
        raise r.error(_LEVEL_ERRORS[err])
    r.pos = pos
    out = np.zeros(TB * TB, dtype=np.int64)
    out[ZIGZAG] = scan
    return out.reshape(TB, TB)


def _split(block: np.ndarray) -> np.ndarray:
    n = block.shape[0] // TB
    return block.reshape(n, TB, n, TB).transpose(0, 2, 1, 3)


def _merge(tiles: np.ndarray) -> np.ndarray:
    n = tiles.shape[0]
    return tiles.transpose(0, 2, 1, 3).reshape(n * TB, n * TB)


def _write_residual_levels(w: BitWriter, levels: np.ndarray) -> None:
    """Coded-block flag, then per 8x8 tile a flag and its levels; ``levels`` is (n, n, 8, 8)."""
    any_nz = bool(levels.any())
    w.write_bit(any_nz)
    if any_nz:
        w.write_code(_bit_string(write_level_scans(levels.reshape(-1, TB * TB)[:, ZIGZAG])))


def _code_residual(w: BitWriter, residual: np.ndarray, qp: int) -> np.ndarray:
    """Transform, quantise and write one block's residual; returns the decoded residual."""
    levels = transform_quant(_split(residual), qp)
    _write_residual_levels(w, levels)
    if not levels.any():
        return np.zeros(residual.shape, dtype=np.int64)
    return _merge(dequant_itransform(levels, qp))


def _read_residual(r: BitReader, bs: int, qp: int) -> np.ndarray:
    if not r.read_bit():
        return np.zeros((bs, bs), dtype=np.int64)
    n = bs // TB
    levels = np.zeros((n, n, TB, TB), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if r.read_bit():
                levels[i, j] = _read_levels(r)
    return _merge(dequant_itransform(levels, qp))


@dataclass
class FrameStats:
    bits: int = 0
    mode_bits: int = 0
    mv_bits: int = 0
    residual_bits: int = 0
    pred_sad: int = 0
    modes: dict = field(default_factory=dict)
    block_sads: list = field(default_factory=list)
    block_mv_bits: list = field(default_factory=list)
    mvs: list = field(default_factory=list)


class Encoder:
    """Encodes a lenslet sequence; keeps the in-loop reconstructions for inspection."""

    def __init__(self, cfg: CodecConfig):
        self.cfg = cfg
        self.reconstructions: list[LensletFrame] = []
        self.stats: list[FrameStats] = []

    def encode(self, frames: list[LensletFrame]) -> Bitstream:
        cfg = self.cfg
        if not frames:
            raise StructuralError("nothing to encode")
        grid = frames[0].grid
        for f in frames:
            if f.grid != grid:
                raise StructuralError(f"frame grid {f.grid} differs from sequence grid {grid}")
        if grid.origin_x or grid.origin_y:
            raise StructuralError("encoder expects micro-images starting at pixel (0, 0)")
        bs = cfg.block_size
        H, W = _coded_size(grid.height, bs), _coded_size(grid.width, bs)
        w = BitWriter()
        _write_header(w, grid.width, grid.height, grid.P_x, grid.P_y, cfg.qp, bs, cfg.mc_mode, len(frames))
        self.reconstructions, self.stats = [], []
        ref = None
        for frame in frames:
            cur = _pad_frame(frame.pixels, H, W)
            start = w.nbits
            stats = FrameStats()
            if ref is None:
                recon = self._encode_intra(w, cur, stats)
            else:
                recon = self._encode_inter(w, cur, ref, grid, stats)
            w.byte_align()
            stats.bits = w.nbits - start
            self.stats.append(stats)
            ref = recon
            self.reconstructions.append(LensletFrame(recon[: grid.height, : grid.width], grid))
        return Bitstream(
            grid.width, grid.height, grid.P_x, grid.P_y, cfg.qp, bs, cfg.mc_mode, len(frames), w.getvalue()
        )

    def _write_block_header(self, w, stats, mode, mv_diff=None):
        n0 = w.nbits
        w.write_code(MODE_CODES[mode])
        stats.mode_bits += w.nbits - n0
        n1 = w.nbits
        if mv_diff is not None:
            w.write_se(mv_diff[0])
            w.write_se(mv_diff[1])
        stats.mv_bits += w.nbits - n1
        stats.block_mv_bits.append(w.nbits - n1)
        stats.modes[mode] = stats.modes.get(mode, 0) + 1

    def _code_block(self, w, stats, cur, recon, x0, y0, mode, pred, mv_diff=None):
        bs = self.cfg.block_size
        self._write_block_header(w, stats, mode, mv_diff)
        n2 = w.nbits
        residual = cur[y0 : y0 + bs, x0 : x0 + bs].astype(np.int64) - pred
        decoded = _code_residual(w, residual, self.cfg.qp)
        stats.residual_bits += w.nbits - n2
        recon[y0 : y0 + bs, x0 : x0 + bs] = np.clip(pred + decoded, 0, 255)

    def _encode_intra(self, w, cur, stats) -> np.ndarray:
        bs = self.cfg.block_size
        H, W = cur.shape
        recon = np.zeros((H, W), dtype=np.uint8)
        for y0 in range(0, H, bs):
            for x0 in range(0, W, bs):
                pred = np.full((bs, bs), intra_dc(recon, x0, y0, bs), dtype=np.int64)
                sad = int(np.abs(cur[y0 : y0 + bs, x0 : x0 + bs].astype(np.int64) - pred).sum())
                stats.pred_sad += sad
                stats.block_sads.append(sad)
                stats.mvs.append(None)
                self._code_block(w, stats, cur, recon, x0, y0, INTRA_DC, pred)
        return recon

    def _encode_inter(self, w, cur, ref, grid: LensletGrid, stats) -> np.ndarray:
        cfg = self.cfg
        bs = cfg.block_size
        H, W = cur.shape
        lam = cfg.lagrangian
        if cfg.mc_mode == "conventional":
            window = cfg.search.window * grid.P_x if cfg.conv_window is None else cfg.conv_window
            searcher = ConventionalFrameSearch(cur, ref, bs, window, lam)
            inter_mode, zero = INTER_CONV, (0, 0)
        else:
            searcher = RayFrameSearch(cur, ref, grid.P_x, grid.P_y, bs, cfg.search)
            inter_mode, zero = INTER_RAY, ZERO_RMV
        allow_intra = cfg.mc_mode == "ray+intra"
        if not allow_intra:
            return self._encode_inter_batched(w, cur, searcher, inter_mode, zero, stats)
        mode_bits = len(MODE_CODES[inter_mode])
        recon = np.zeros((H, W), dtype=np.uint8)
        for by in range(H // bs):
            pred_mv = zero
            for bx in range(W // bs):
                x0, y0 = bx * bs, by * bs
                res = searcher.search(by, bx, pred_mv, lam)
                use_intra = False
                if allow_intra:
                    dc = intra_dc(recon, x0, y0, bs)
                    intra_sad = int(np.abs(cur[y0 : y0 + bs, x0 : x0 + bs].astype(np.int64) - dc).sum())
                    intra_cost = intra_sad + lam * len(MODE_CODES[INTRA_DC])
                    use_intra = intra_cost < res.rd_cost + lam * mode_bits
                if use_intra:
                    pred = np.full((bs, bs), dc, dtype=np.int64)
                    stats.pred_sad += intra_sad
                    stats.block_sads.append(intra_sad)
                    stats.mvs.append(None)
                    self._code_block(w, stats, cur, recon, x0, y0, INTRA_DC, pred)
                    pred_mv = zero
                    continue
                if inter_mode == INTER_RAY:
                    d, p = scale_rmv(res.mv), scale_rmv(pred_mv)
                else:
                    d, p = res.mv, pred_mv
                pred = searcher.prediction(by, bx, res.mv).astype(np.int64)
                stats.pred_sad += res.sad
                stats.block_sads.append(res.sad)
                stats.mvs.append(res.mv)
                self._code_block(w, stats, cur, recon, x0, y0, inter_mode, pred, (d[0] - p[0], d[1] - p[1]))
                pred_mv = res.mv
        return recon


    def _encode_inter_batched(self, w, cur, searcher, inter_mode, zero, stats) -> np.ndarray:
        # Without intra fallback no prediction depends on the current frame's
        # reconstruction, so the residual of the whole frame is transformed at once.
        bs = self.cfg.block_size
        qp = self.cfg.qp
        lam = self.cfg.lagrangian
        H, W = cur.shape
        nby, nbx = H // bs, W // bs
        pred = np.empty((H, W), dtype=np.int64)
        diffs = []
        for by in range(nby):
            pred_mv = zero
            for bx in range(nbx):
                res = searcher.search(by, bx, pred_mv, lam)
                if inter_mode == INTER_RAY:
                    d, p = scale_rmv(res.mv), scale_rmv(pred_mv)
                else:
                    d, p = res.mv, pred_mv
                pred[by * bs : (by + 1) * bs, bx * bs : (bx + 1) * bs] = searcher.prediction(by, bx, res.mv)
                stats.pred_sad += res.sad
                stats.block_sads.append(res.sad)
                stats.mvs.append(res.mv)
                diffs.append((d[0] - p[0], d[1] - p[1]))
                pred_mv = res.mv
        n = bs // TB
        # levels[by, bx, i, j] is tile (i, j) of block (by, bx)
        tiles = (cur.astype(np.int64) - pred).reshape(nby, n, TB, nbx, n, TB).transpose(0, 3, 1, 4, 2, 5)
        levels = transform_quant(tiles, qp)
        decoded = dequant_itransform(levels, qp).transpose(0, 2, 4, 1, 3, 5).reshape(H, W)
        k = 0
        for by in range(nby):
            for bx in range(nbx):
                self._write_block_header(w, stats, inter_mode, diffs[k])
                n2 = w.nbits
                _write_residual_levels(w, levels[by, bx])
                stats.residual_bits += w.nbits - n2
                k += 1
        return np.clip(pred + decoded, 0, 255).astype(np.uint8)


def encode_sequence(frames: list[LensletFrame], cfg: CodecConfig) -> Bitstream:
    return Encoder(cfg).encode(frames)


def _read_mode(r: BitReader, mc_mode: str) -> str:
    at = r.byte_offset
    if r.read_bit() == 0:
        return INTRA_DC
    mode = INTER_CONV if r.read_bit() else INTER_RAY
    allowed = INTER_CONV if mc_mode == "conventional" else INTER_RAY
    if mode != allowed:
        raise DecodeError(f"mode {mode} not valid in a {mc_mode} stream", at)
    return mode


def decode_sequence(bs_in: Bitstream | bytes) -> list[LensletFrame]:
    """Decode a stream; raises :class:`DecodeError` on malformed input."""
    data = bs_in.to_bytes() if isinstance(bs_in, Bitstream) else bytes(bs_in)
    r = BitReader(data)
    hdr = _read_header(r)
    bs = hdr["block_size"]
    P_x, P_y, qp = hdr["P_x"], hdr["P_y"], hdr["qp"]
    width, height = hdr["width"], hdr["height"]
    if width % P_x or height % P_y:
        raise DecodeError(f"frame {width}x{height} is not a whole number of {P_x}x{P_y} micro-images", 4)
    H, W = _coded_size(height, bs), _coded_size(width, bs)
    n_blocks = (H // bs) * (W // bs)
    # every block costs at least two bits (mode + cbf)
    if 2 * n_blocks * hdr["frame_count"] > r.remaining:
        raise DecodeError(
            f"stream of {len(data)} bytes is too short for {hdr['frame_count']} frames of {width}x{height}",
            r.byte_offset,
        )
    grid = LensletGrid.for_frame(width, height, P_x, P_y)
    out = []
    ref = None
    for t in range(hdr["frame_count"]):
        recon = np.zeros((H, W), dtype=np.uint8)
        for by in range(H // bs):
            pred_d = (0, 0)
            for bx in range(W // bs):
                x0, y0 = bx * bs, by * bs
                mode = _read_mode(r, hdr["mc_mode"])
                if mode != INTRA_DC and ref is None:
                    raise r.error("inter block in the first frame")
                if mode == INTRA_DC:
                    pred = np.full((bs, bs), intra_dc(recon, x0, y0, bs), dtype=np.int64)
                    pred_d = (0, 0)
                else:
                    d = (pred_d[0] + r.read_se(), pred_d[1] + r.read_se())
                    block = Block(x0, y0, bs, bs)
                    if mode == INTER_RAY:
                        rmv = unscale_rmv(*d)
                        pred = lattice_interpolate(
                            ref, block, rmv.dk_s * P_x, rmv.dk_t * P_y, rmv.q_alpha, rmv.q_beta, P_x, P_y
                        )
                    else:
                        pred = lattice_interpolate(ref, block, d[0] >> 2, d[1] >> 2, d[0] & 3, d[1] & 3, 1, 1)
                    pred = pred.astype(np.int64)
                    pred_d = d
                residual = _read_residual(r, bs, qp)
                recon[y0 : y0 + bs, x0 : x0 + bs] = np.clip(pred + residual, 0, 255)
        r.byte_align()
        ref = recon
        out.append(LensletFrame(recon[:height, :width], grid))
    if r.remaining:
        raise r.error(f"{r.remaining // 8} trailing bytes after last frame")
    return out
