"""File formats: planar 8-bit raw sequences with a key=value header, PGM view directories."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from lfcodec.core import LensletFrame, LensletGrid, LightField4D, StructuralError, multiview_to_lenslet

HEADER_KEYS = ("width", "height", "px", "py", "frames")


class FormatError(ValueError):
    """A file exists but its contents cannot be parsed."""


class SizeMismatchError(FormatError):
    def __init__(self, path, expected: int, actual: int):
        super().__init__(f"{path}: expected {expected} bytes, found {actual}")
        self.expected = expected
        self.actual = actual


class MissingViewError(FormatError):
    pass


def read_kv(path) -> dict[str, str]:
    """Parse ``key=value`` lines. Blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_kv(path, items: dict) -> None:
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in items.items()), encoding="ascii")


def read_header(path) -> dict[str, int]:
    raw = read_kv(path)
    missing = [k for k in HEADER_KEYS if k not in raw]
    if missing:
        raise FormatError(f"{path}: header missing keys {missing}")
    try:
        hdr = {k: int(raw[k]) for k in HEADER_KEYS}
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer header value ({exc})") from None
    if min(hdr.values()) < 1:
        raise FormatError(f"{path}: header values must be positive, got {hdr}")
    return hdr


def write_header(path, width: int, height: int, px: int, py: int, frames: int) -> None:
    write_kv(path, dict(width=width, height=height, px=px, py=py, frames=frames))


def read_raw_sequence(raw_path, header_path) -> list[LensletFrame]:
    hdr = read_header(header_path)
    try:
        grid = LensletGrid.for_frame(hdr["width"], hdr["height"], hdr["px"], hdr["py"])
    except StructuralError as exc:
        raise FormatError(f"{header_path}: {exc}") from None
    frame_bytes = hdr["width"] * hdr["height"]
    data = Path(raw_path).read_bytes()
    expected = frame_bytes * hdr["frames"]
    if len(data) != expected:
        raise SizeMismatchError(raw_path, expected, len(data))
    arr = np.frombuffer(data, dtype=np.uint8).reshape(hdr["frames"], hdr["height"], hdr["width"])
    return [LensletFrame(a, grid) for a in arr]


def write_raw_sequence(raw_path, header_path, frames: list[LensletFrame]) -> None:
    if not frames:
        raise StructuralError("cannot write an empty sequence")
    grid = frames[0].grid
    if any(f.grid != grid for f in frames):
        raise StructuralError("all frames of a sequence must share one grid")
    with open(raw_path, "wb") as fh:
        for f in frames:
            fh.write(f.pixels.tobytes())
    write_header(header_path, grid.width, grid.height, grid.P_x, grid.P_y, len(frames))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    # header: magic, width, height, maxval, separated by whitespace (comments allowed)
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary PGM (P5) is supported, got {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise FormatError(f"{path}: 16-bit PGM not supported")
    pos += 1  # single whitespace after maxval
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise SizeMismatchError(path, width * height, len(body))
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes())


_VIEW_NAME = re.compile(r"view_(\d+)_(\d+)_frame_(\d+)\.pgm$")


def read_multiview_dir(directory) -> list[LightField4D]:
    """Read ``view_{u}_{v}_frame_{t}.pgm`` files into one light field per frame."""
    directory = Path(directory)
    found: dict[int, dict[tuple[int, int], Path]] = {}
    for p in sorted(directory.iterdir()):
        m = _VIEW_NAME.match(p.name)
        if m:
            u, v, t = (int(g) for g in m.groups())
            found.setdefault(t, {})[(u, v)] = p
    if not found:
        raise MissingViewError(f"{directory}: no view_*_*_frame_*.pgm files")
    n_frames = max(found) + 1
    missing_frames = [t for t in range(n_frames) if t not in found]
    if missing_frames:
        raise MissingViewError(f"{directory}: no views at all for frames {missing_frames}")
    keys = set(found[0])
    A_u = 1 + max(u for u, _ in keys)
    A_v = 1 + max(v for _, v in keys)
    expected = {(u, v) for u in range(A_u) for v in range(A_v)}
    out = []
    for t in range(n_frames):
        missing = sorted(expected - set(found[t]))
        if missing:
            names = [f"view_{u}_{v}_frame_{t}.pgm" for u, v in missing[:3]]
            raise MissingViewError(f"{directory}: missing {len(missing)} view file(s), e.g. {names}")
        out.append(LightField4D.from_views({k: read_pgm(p) for k, p in found[t].items()}))
    return out


def write_multiview_dir(directory, fields: list[LightField4D]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, lf in enumerate(fields):
        for v in range(lf.A_v):
            for u in range(lf.A_u):
                write_pgm(directory / f"view_{u}_{v}_frame_{t}.pgm", lf.view(u, v))


def multiview_dir_to_lenslet(directory) -> list[LensletFrame]:
    return [multiview_to_lenslet(lf) for lf in read_multiview_dir(directory)]
