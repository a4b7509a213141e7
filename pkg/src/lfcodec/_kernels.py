"""Compiled block-SAD loops used by the frame-level searches."""

import numba
import numpy as np


@numba.njit(cache=True)
def block_sad_table(cur, plane, pad, bs, dys, dxs):
    """SAD of every ``bs x bs`` block of ``cur`` against ``plane`` at each offset.

    ``plane`` is ``cur``-sized reference content padded by ``pad`` on each side;
    block ``(by, bx)`` at offset ``k`` reads ``plane[pad + y + dys[k], pad + x + dxs[k]]``.
    """
    nby = cur.shape[0] // bs
    nbx = cur.shape[1] // bs
    nc = dys.shape[0]
    c = cur.astype(np.int32)
    p = plane.astype(np.int32)
    out = np.empty((nby, nbx, nc), dtype=np.int32)
    for by in range(nby):
        for bx in range(nbx):
            y0 = by * bs
            x0 = bx * bs
            for k in range(nc):
                oy = pad + y0 + dys[k]
                ox = pad + x0 + dxs[k]
                acc = np.int32(0)
                for i in range(bs):
                    cr = c[y0 + i, x0 : x0 + bs]
                    pr = p[oy + i, ox : ox + bs]
                    for j in range(bs):
                        acc += abs(cr[j] - pr[j])
                out[by, bx, k] = acc
    return out


@numba.njit(cache=True)
def block_sad_at(cur, plane, pad, y0, x0, bs, dy, dx):
    acc = 0
    oy = pad + y0 + dy
    ox = pad + x0 + dx
    for i in range(bs):
        for j in range(bs):
            acc += abs(np.int32(cur[y0 + i, x0 + j]) - np.int32(plane[oy + i, ox + j]))
    return acc


@numba.njit(cache=True)
def _put_ue(out, pos, v):
    v += 1
    n = 0
    t = v
    while t > 1:
        t >>= 1
        n += 1
    for _ in range(n):
        out[pos] = 0
        pos += 1
    for b in range(n, -1, -1):
        out[pos] = (v >> b) & 1
        pos += 1
    return pos


@numba.njit(cache=True)
def write_level_scans(scans):
    """Bits for a run of coefficient blocks, each given in scan order.

    Per block: a nonzero flag, then for a nonzero block ue(count - 1) and per
    nonzero coefficient ue(run), ue(|level| - 1) and a sign bit (1 = negative).
    """
    nblk, size = scans.shape
    out = np.empty(nblk * (1 + size * 140), dtype=np.uint8)
    pos = 0
    for b in range(nblk):
        count = 0
        for i in range(size):
            if scans[b, i] != 0:
                count += 1
        out[pos] = 1 if count else 0
        pos += 1
        if count == 0:
            continue
        pos = _put_ue(out, pos, count - 1)
        last = -1
        for i in range(size):
            v = scans[b, i]
            if v != 0:
                pos = _put_ue(out, pos, i - last - 1)
                pos = _put_ue(out, pos, abs(v) - 1)
                out[pos] = 1 if v < 0 else 0
                pos += 1
                last = i
    return out[:pos]


@numba.njit(cache=True)
def _ue(bits, pos, limit):
    n = len(bits)
    zeros = 0
    while pos < n and bits[pos] == 0:
        zeros += 1
        pos += 1
        if zeros > limit:
            return -1, pos, 2
    if pos >= n or pos + 1 + zeros > n:
        return -1, pos, 1
    v = 1
    pos += 1
    for _ in range(zeros):
        v = (v << 1) | bits[pos]
        pos += 1
    return v - 1, pos, 0


@numba.njit(cache=True)
def read_level_scan(bits, pos, size):
    """Parse one coefficient block: ue(count-1), then (ue run, ue |l|-1, sign)*.

    Returns ``(scan, pos, err)``; ``err`` is 0 on success, 1 end of data,
    2 overlong prefix, 3 too many coefficients, 4 run past end of block.
    """
    scan = np.zeros(size, dtype=np.int64)
    c, pos, err = _ue(bits, pos, 32)
    if err:
        return scan, pos, err
    count = c + 1
    if count > size:
        return scan, pos, 3
    idx = -1
    for _ in range(count):
        run, pos, err = _ue(bits, pos, 32)
        if err:
            return scan, pos, err
        idx += run + 1
        if idx >= size:
            return scan, pos, 4
        mag, pos, err = _ue(bits, pos, 32)
        if err:
            return scan, pos, err
        if pos >= len(bits):
            return scan, pos, 1
        sign = bits[pos]
        pos += 1
        scan[idx] = -(mag + 1) if sign else mag + 1
    return scan, pos, 0


@numba.njit(cache=True)
def lattice_block(pixels, x, y, w, h, dx, dy, tx, ty, step_x, step_y):
    """Separable 9-tap interpolation of one block with edge clamping.

    ``tx``/``ty`` are the 9 taps for offsets -4..4; each pass rounds with
    ``(acc + 32) >> 6``. Returns int64 values before the final clip.
    """
    H, W = pixels.shape
    horiz = np.empty((9, h, w), dtype=np.int64)
    for n in range(9):
        if ty[n] == 0:
            continue
        for i in range(h):
            r = min(max(y + dy + i + (n - 4) * step_y, 0), H - 1)
            for j in range(w):
                acc = 0
                for m in range(9):
                    if tx[m] != 0:
                        c = min(max(x + dx + j + (m - 4) * step_x, 0), W - 1)
                        acc += tx[m] * np.int64(pixels[r, c])
                horiz[n, i, j] = (acc + 32) >> 6
    out = np.empty((h, w), dtype=np.int64)
    for i in range(h):
        for j in range(w):
            acc = 0
            for n in range(9):
                if ty[n] != 0:
                    acc += ty[n] * horiz[n, i, j]
            out[i, j] = (acc + 32) >> 6
    return out
