"""Command-line entry point: ``lfcodec synth|encode|decode|psnr|bdrate|sweep``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from lfcodec.bitstream import DecodeError
from lfcodec.codec import CodecConfig, Encoder, decode_sequence
from lfcodec.core import StructuralError
from lfcodec.experiment import (
    QPS,
    VARIANTS,
    ExperimentConfig,
    RDExperimentError,
    SynthConfig,
    ingest,
    plot_rd,
    run_rd_experiment,
    synthesize,
    write_truth_csv,
)
from lfcodec.io import FormatError, read_kv, write_raw_sequence
from lfcodec.metrics import RDCurve, bd_rate, format_psnr, sequence_psnr
from lfcodec.search import PRECISIONS, SearchConfig


def _header_for(raw: Path) -> Path:
    return raw.with_suffix(".hdr")


def _load(args) -> list:
    return ingest(args.input, args.format, getattr(args, "header", None))


def cmd_synth(args) -> int:
    items = read_kv(args.config) if args.config else {}
    for kv in args.set or []:
        key, _, value = kv.partition("=")
        items[key.strip()] = value.strip()
    cfg = SynthConfig.from_kv(items)
    frames, truth = synthesize(cfg)
    out = Path(args.out)
    write_raw_sequence(out, _header_for(out), frames)
    write_truth_csv(args.truth or out.with_name("truth.csv"), truth, cfg.optics)
    print(f"wrote {len(frames)} frames of {frames[0].width}x{frames[0].height} to {out}")
    return 0


def cmd_encode(args) -> int:
    frames = _load(args)
    cfg = CodecConfig(
        qp=args.qp,
        block_size=args.block_size,
        mc_mode=args.mode,
        search=SearchConfig(window=args.window, precision=args.precision),
        conv_window=args.conv_window,
    )
    stream = Encoder(cfg).encode(frames)
    data = stream.to_bytes()
    Path(args.out).write_bytes(data)
    print(f"{len(frames)} frames, {8 * len(data)} bits ({8 * len(data) / len(frames):.1f} bits/frame)")
    return 0


def cmd_decode(args) -> int:
    frames = decode_sequence(Path(args.inp).read_bytes())
    out = Path(args.out)
    write_raw_sequence(out, _header_for(out), frames)
    print(f"decoded {len(frames)} frames to {out}")
    return 0


def cmd_psnr(args) -> int:
    a = ingest(args.a, "raw", args.a_header)
    b = ingest(args.b, "raw", args.b_header)
    print(format_psnr(sequence_psnr(a, b)))
    return 0


def _read_curve(path) -> dict[str, list]:
    curves: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "variant":
                if row and row[:2] == ["variant", "anchor"]:
                    break
                continue
            curves.setdefault(row[0], []).append((float(row[2]), float(row[3])))
    return curves


def cmd_bdrate(args) -> int:
    if args.test:
        anchor = RDCurve(_read_pairs(args.anchor))
        test = RDCurve(_read_pairs(args.test))
        print(f"{bd_rate(anchor, test):.4f}")
        return 0
    curves = _read_curve(args.anchor)
    if args.anchor_variant not in curves:
        raise FormatError(f"{args.anchor}: no rows for anchor variant {args.anchor_variant!r}")
    anchor = RDCurve(curves[args.anchor_variant])
    for variant, pts in curves.items():
        if variant != args.anchor_variant:
            print(f"{variant},{args.anchor_variant},{bd_rate(anchor, RDCurve(pts)):.4f}")
    return 0


def _read_pairs(path) -> list[tuple[float, float]]:
    """``rate,psnr`` lines; a non-numeric first line is taken as a header."""
    pairs = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                pairs.append((float(row[0]), float(row[1])))
            except ValueError:
                if i:
                    raise FormatError(f"{path}:{i + 1}: expected rate,psnr") from None
    return pairs


def cmd_sweep(args) -> int:
    frames = _load(args)
    cfg = ExperimentConfig(
        frames=frames,
        qps=tuple(args.qps),
        variants=tuple(args.variants),
        window=args.window,
        conv_window=args.conv_window,
        block_size=args.block_size,
        max_frames=args.frames,
        decode=not args.no_decode,
    )

    def progress(cell):
        print(f"{cell.variant} qp={cell.qp}: {cell.bits:.0f} bits/frame, {format_psnr(cell.psnr)} dB", file=sys.stderr)

    report = run_rd_experiment(cfg, progress=None if args.quiet else progress)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.plot:
        plot_rd(report, args.plot)
    return 0


def _add_input(p, header=True):
    p.add_argument("--input", required=True, help="raw sequence file or PGM view directory")
    p.add_argument("--format", default="raw", choices=("raw", "pgm-multiview"))
    if header:
        p.add_argument("--header", help="sidecar header (default: input with .hdr suffix)")


def _add_codec(p):
    p.add_argument("--window", type=int, default=2, help="ray search range in micro-images")
    p.add_argument("--conv-window", type=int, default=None, help="conventional search range in pixels")
    p.add_argument("--block-size", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfcodec", description="Ray-space motion compensated lenslet video codec")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic lenslet sequence")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--out", required=True, help="output raw file; header is written alongside")
    p.add_argument("--truth", help="ground-truth CSV path (default: truth.csv next to --out)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="encode a lenslet sequence")
    _add_input(p)
    p.add_argument("--qp", type=int, default=30)
    p.add_argument("--mode", default="ray", choices=("ray", "conv", "conventional", "ray+intra"))
    p.add_argument("--precision", default="quarter", choices=tuple(PRECISIONS))
    _add_codec(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bitstream to raw frames")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("psnr", help="average luma PSNR over all views of all frames")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--a-header")
    p.add_argument("--b-header")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("bdrate", help="BD-rate from a sweep CSV, or between two rate,psnr files")
    p.add_argument("anchor", help="sweep CSV, or anchor rate,psnr file when TEST is given")
    p.add_argument("test", nargs="?")
    p.add_argument("--anchor-variant", default="conventional")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("sweep", help="QP sweep over codec variants with BD-rates")
    _add_input(p)
    _add_codec(p)
    p.add_argument("--qps", type=int, nargs="+", default=list(QPS))
    p.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=tuple(VARIANTS))
    p.add_argument("--frames", type=int, help="use only the first N frames")
    p.add_argument("--no-decode", action="store_true", help="measure encoder reconstructions instead of decoding")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--plot", help="also write an RD plot image to this path")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, DecodeError, StructuralError, RDExperimentError, FileNotFoundError, ValueError) as exc:
        print(f"lfcodec {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
