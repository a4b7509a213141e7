"""Synthetic sequence generation, ingestion and QP-sweep RD experiments."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lfcodec.codec import CodecConfig, Encoder, decode_sequence
from lfcodec.core import LensletFrame, LensletGrid, OpticsConfig
from lfcodec.io import FormatError, multiview_dir_to_lenslet, read_kv, read_raw_sequence
from lfcodec.metrics import RDCurve, bd_rate, format_psnr, sequence_psnr
from lfcodec.search import SearchConfig
from lfcodec.synth import (
    GroundTruth,
    MotionPath,
    PlanarScene,
    image_window,
    render_lenslet_sequence,
    scene_translation,
)

QPS = (24, 30, 36, 42)
ANCHOR = "conventional"
# variant name -> (mc_mode, ray precision)
VARIANTS = {
    "ray/quarter": ("ray", "quarter"),
    "ray/half": ("ray", "half"),
    "ray/integer": ("ray", "integer"),
    "conventional": ("conventional", "quarter"),
}
CSV_COLUMNS = ("variant", "qp", "bits", "psnr", "encode_seconds")
BD_COLUMNS = ("variant", "anchor", "bd_rate_percent")


@dataclass(frozen=True)
class SynthConfig:
    """A textured plane translating in front of a synthetic plenoptic camera.

    Motion is either ``ray_motion`` (per-frame ray displacement in microlens
    pitches, constant) or ``steps`` (per-frame scene translation, one entry
    per frame after the first). ``steps`` wins when both are given.
    """

    frames: int = 30
    n_s: int = 64
    n_t: int = 64
    px: int = 8
    py: int = 8
    f_lens: float = 1000.0
    f_mu: float = 25.0
    f_main: float = 900.0
    depth: float = 19020.0
    seed: int = 0
    max_freq: float = 0.25
    components: int = 8
    contrast: float = 110.0
    ray_motion: tuple[float, float] = (0.25, 0.375)
    steps: tuple[tuple[float, float], ...] | None = None
    # textured patch (x0, x1, y0, y1) as fractions of frame 0; None textures everything
    patch: tuple[float, float, float, float] | None = None

    @property
    def optics(self) -> OpticsConfig:
        return OpticsConfig.synthetic(self.px, self.py, self.f_lens, self.f_mu, self.f_main)

    @property
    def grid(self) -> LensletGrid:
        return LensletGrid(self.px, self.py, self.n_s, self.n_t)

    def motion_path(self) -> MotionPath:
        if self.steps is not None:
            if len(self.steps) != self.frames - 1:
                raise ValueError(f"steps lists {len(self.steps)} moves for {self.frames} frames")
            return MotionPath(((0.0, 0.0),) + tuple(self.steps))
        dX, dY = scene_translation(self.optics, self.depth, *self.ray_motion)
        return MotionPath.constant(self.frames, dX, dY)

    @classmethod
    def from_kv(cls, items: dict[str, str]) -> "SynthConfig":
        kwargs = {}
        ints = {"frames", "n_s", "n_t", "px", "py", "seed", "components"}
        floats = {"f_lens", "f_mu", "f_main", "depth", "max_freq", "contrast"}
        for key, value in items.items():
            try:
                if key in ints:
                    kwargs[key] = int(value)
                elif key in floats:
                    kwargs[key] = float(value)
                elif key == "ray_motion":
                    ds, dt = (float(x) for x in value.split(","))
                    kwargs[key] = (ds, dt)
                elif key == "patch":
                    x0, x1, y0, y1 = (float(x) for x in value.split(","))
                    kwargs[key] = (x0, x1, y0, y1)
                elif key == "steps":
                    # "dX dY; dX dY; ..."
                    kwargs[key] = tuple(
                        tuple(float(x) for x in step.split()) for step in value.split(";") if step.strip()
                    )
                    if any(len(s) != 2 for s in kwargs[key]):
                        raise ValueError("each step needs two numbers")
                else:
                    raise FormatError(f"unknown synth key {key!r}")
            except ValueError as exc:
                raise FormatError(f"bad value for {key!r}: {value!r} ({exc})") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        return cls.from_kv(read_kv(path))


def synthesize(cfg: SynthConfig) -> tuple[list[LensletFrame], list[GroundTruth]]:
    window = None if cfg.patch is None else image_window(cfg.optics, cfg.grid, cfg.depth, cfg.patch)
    scene = PlanarScene.textured(
        cfg.optics,
        cfg.depth,
        seed=cfg.seed,
        max_freq=cfg.max_freq,
        n_components=cfg.components,
        contrast=cfg.contrast,
        window=window,
    )
    return render_lenslet_sequence(scene, cfg.motion_path(), cfg.optics, cfg.grid)


def write_truth_csv(path, truth: list[GroundTruth], optics: OpticsConfig) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("frame", "ds", "dt"))
        for t, gt in enumerate(truth):
            ds, dt = gt.in_pitches(optics)
            w.writerow((t, repr(ds), repr(dt)))


def ingest(path, format: str = "raw", header=None) -> list[LensletFrame]:
    """Load a lenslet sequence from ``raw`` (+ ``.hdr`` sidecar) or a ``pgm-multiview`` directory."""
    path = Path(path)
    if format in ("raw", "raw+hdr"):
        header = Path(header) if header is not None else path.with_suffix(".hdr")
        if not path.is_file():
            raise FileNotFoundError(f"raw sequence not found: {path}")
        if not header.is_file():
            raise FileNotFoundError(f"header not found: {header}")
        return read_raw_sequence(path, header)
    if format == "pgm-multiview":
        if not path.is_dir():
            raise FileNotFoundError(f"view directory not found: {path}")
        return multiview_dir_to_lenslet(path)
    raise ValueError(f"unknown input format {format!r}; use raw or pgm-multiview")


class RDExperimentError(RuntimeError):
    def __init__(self, variant: str, qp: int, cause: Exception):
        super().__init__(f"{variant} at qp {qp}: {type(cause).__name__}: {cause}")
        self.variant, self.qp = variant, qp


@dataclass(frozen=True)
class ExperimentConfig:
    frames: list[LensletFrame] = field(repr=False)
    qps: tuple[int, ...] = QPS
    variants: tuple[str, ...] = tuple(VARIANTS)
    window: int = 2  # ray search range in micro-images
    conv_window: int | None = None  # conventional search range in pixels; default window * P
    block_size: int = 16
    max_frames: int | None = None
    decode: bool = True

    def __post_init__(self):
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; choose from {sorted(VARIANTS)}")
        if not self.frames:
            raise ValueError("no input frames")

    def codec_config(self, variant: str, qp: int) -> CodecConfig:
        mode, precision = VARIANTS[variant]
        return CodecConfig(
            qp=qp,
            block_size=self.block_size,
            mc_mode=mode,
            search=SearchConfig(window=self.window, precision=precision),
            conv_window=self.conv_window,
        )


@dataclass
class RDCell:
    variant: str
    qp: int
    bits: float  # per frame
    psnr: float
    encode_seconds: float
    mv_bits: int
    residual_bits: int
    block_sads: list[int] = field(repr=False)


@dataclass
class RDReport:
    cells: list[RDCell]
    bd_rates: dict[str, float]

    def curve(self, variant: str) -> RDCurve:
        return RDCurve([(c.bits, c.psnr) for c in self.cells if c.variant == variant])

    def cell(self, variant: str, qp: int) -> RDCell:
        return next(c for c in self.cells if c.variant == variant and c.qp == qp)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow((c.variant, c.qp, f"{c.bits:.3f}", format_psnr(c.psnr), f"{c.encode_seconds:.3f}" if timing else ""))
        if self.bd_rates:
            w.writerow(())
            w.writerow(BD_COLUMNS)
            for variant, value in self.bd_rates.items():
                w.writerow((variant, ANCHOR, "nan" if value is None else f"{value:.4f}"))
        return buf.getvalue()


def run_cell(cfg: ExperimentConfig, frames: list[LensletFrame], variant: str, qp: int) -> RDCell:
    try:
        enc = Encoder(cfg.codec_config(variant, qp))
        t0 = time.perf_counter()
        stream = enc.encode(frames)
        seconds = time.perf_counter() - t0
        recon = enc.reconstructions
        if cfg.decode:
            decoded = decode_sequence(stream.to_bytes())
            if any(not np.array_equal(a.pixels, b.pixels) for a, b in zip(decoded, recon)):
                raise RuntimeError("decoder output differs from encoder reconstruction")
            recon = decoded
        quality = sequence_psnr(recon, frames)
    except Exception as exc:
        raise RDExperimentError(variant, qp, exc) from exc
    return RDCell(
        variant,
        qp,
        stream.nbits / len(frames),
        quality,
        seconds,
        sum(s.mv_bits for s in enc.stats),
        sum(s.residual_bits for s in enc.stats),
        [sad for s in enc.stats[1:] for sad in s.block_sads],
    )


def run_rd_experiment(cfg: ExperimentConfig, progress=None) -> RDReport:
    """Encode, decode and measure every (variant, QP) cell, then BD-rate each variant against the anchor."""
    frames = cfg.frames[: cfg.max_frames] if cfg.max_frames else cfg.frames
    cells = []
    for variant in cfg.variants:
        for qp in cfg.qps:
            cells.append(run_cell(cfg, frames, variant, qp))
            if progress:
                progress(cells[-1])
    report = RDReport(cells, {})
    if ANCHOR in cfg.variants and len(cfg.qps) >= 4:
        anchor = report.curve(ANCHOR)
        for variant in cfg.variants:
            if variant != ANCHOR:
                try:
                    report.bd_rates[variant] = bd_rate(anchor, report.curve(variant))
                except ValueError:
                    report.bd_rates[variant] = None
    return report


def plot_rd(report: RDReport, path) -> None:
    """RD curves (PSNR against bits per frame) for every variant, written as an image."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for variant in dict.fromkeys(c.variant for c in report.cells):
        pts = sorted((c.bits, c.psnr) for c in report.cells if c.variant == variant)
        ax.plot([p[0] / 1000 for p in pts], [p[1] for p in pts], marker="o", label=variant)
    ax.set_xlabel("kbits per frame")
    ax.set_ylabel("Y-PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
