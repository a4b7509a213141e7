import itertools

import numpy as np
import pytest

from lfcodec.core import LensletGrid, OpticsConfig
from lfcodec.mc import RayMotionVector, predict_fractional
from lfcodec.synth import MotionPath, PlanarScene, render_lenslet_sequence, scene_translation

DEPTH = 19020.0


def textured_sequence(n_frames, ray_motion, n=16, P=8, seed=1, depth=DEPTH):
    """Lenslet frames of a textured plane whose rays move by ``ray_motion`` pitches per frame."""
    optics = OpticsConfig.synthetic(P, P, f_main=900.0)
    grid = LensletGrid(P, P, n, n)
    scene = PlanarScene.textured(optics, depth, seed=seed)
    path = MotionPath.constant(n_frames, *scene_translation(optics, depth, *ray_motion))
    frames, truth = render_lenslet_sequence(scene, path, optics, grid)
    return frames, truth, optics


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _eg_len(v):
    # signed order-0 Exp-Golomb length: map to 2|v| or 2|v|-1, then 2*floor(log2(c+1))+1
    c = 2 * v if v > 0 else -2 * v
    return 2 * int(np.floor(np.log2(c + 1))) + 1


def brute_ray(cur, ref, blk, cfg, pred):
    """Two-stage minimiser by plain enumeration, with the documented tie-breaks."""
    c = cur.pixels[blk.y : blk.y + blk.h, blk.x : blk.x + blk.w].astype(int)
    ps, pt = 4 * pred.dk_s + pred.q_alpha, 4 * pred.dk_t + pred.q_beta

    def score(rmv):
        p = predict_fractional(ref, blk, rmv).astype(int)
        sad = int(np.abs(p - c).sum())
        bits = _eg_len(4 * rmv.dk_s + rmv.q_alpha - ps) + _eg_len(4 * rmv.dk_t + rmv.q_beta - pt)
        return sad + cfg.lam * bits, sad

    W = cfg.window
    ints = []
    for dt, ds in itertools.product(range(-W, W + 1), repeat=2):
        cost, sad = score(RayMotionVector(ds, dt))
        ints.append(((cost, sad, abs(ds) + abs(dt), dt, ds), (ds, dt)))
    ds, dt = min(ints)[1]
    fr = cfg.fractions
    cands = []
    for qa, qb in itertools.product(fr, fr):
        cost, sad = score(RayMotionVector.from_quarters(ds, dt, qa, qb))
        cands.append(((cost, qa + qb, qb), (qa, qb, sad, cost)))
    qa, qb, sad, cost = min(cands)[1]
    return RayMotionVector.from_quarters(ds, dt, qa, qb), sad, cost
