"""Ray-traced synthetic lenslet video of a translating Lambertian plane.

Camera model: thin main lens on the uv-plane (z = 0), a pinhole MLA on the
st-plane at z = ``f_lens`` and the sensor ``f_mu`` behind it. One sensor pixel
is one length unit. Microlens ``k`` sits at ``s = (k - (n_s - 1)/2) * p_s``;
pixel ``u_idx`` under it sees the main-lens point
``u = ((P_x - 1)/2 - u_idx) / F``, i.e. the pixel-centre ray through the pinhole.

The scene is a fronto-parallel plane at distance ``depth_z`` in front of the
lens, textured with a mixture of cosines (band-limited and defined everywhere,
so a translated plane never runs out of texture).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lfcodec.core import LensletGrid, LightField4D, OpticsConfig, multiview_to_lenslet

BACKGROUND = 0


def image_distance(optics: OpticsConfig, depth: float) -> float:
    """Thin-lens image distance of a point ``depth`` in front of the main lens."""
    f = optics.focal_length
    if depth <= f:
        raise ValueError(f"scene depth {depth} must exceed the main-lens focal length {f}")
    return 1.0 / (1.0 / f - 1.0 / depth)


def conjugate_depth(optics: OpticsConfig) -> float:
    """Scene depth imaged exactly onto the MLA plane (inf when f_main == f_lens)."""
    inv = 1.0 / optics.focal_length - 1.0 / optics.f_lens
    return math.inf if inv <= 0 else 1.0 / inv


def view_disparity(optics: OpticsConfig, depth: float) -> float:
    """Shift in st samples between horizontally adjacent views.

    ``view(u_idx + 1)[k] == view(u_idx)[k + d]`` for a plane at ``depth``.
    """
    d_i = image_distance(optics, depth)
    return -(optics.f_lens / d_i - 1.0) / (optics.F * optics.p_s)


def scene_translation(optics: OpticsConfig, depth: float, ds: float, dt: float) -> tuple[float, float]:
    """In-plane scene translation producing a ray displacement of ``(ds, dt)`` microlens pitches."""
    scale = depth / optics.f_lens
    return (ds * optics.p_s * scale, dt * optics.p_t * scale)


@dataclass(frozen=True)
class PlanarScene:
    """Fronto-parallel Lambertian plane; texture ``mean + sum a_k cos(2 pi f_k . X + phi_k)``."""

    depth_z: float
    freqs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)), repr=False)
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    amps: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    mean: float = 128.0
    # (X_lo, X_hi, Y_lo, Y_hi): texture only inside, flat ``mean`` elsewhere
    window: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if not (math.isfinite(self.depth_z) and self.depth_z > 0):
            raise ValueError(f"depth_z must be positive, got {self.depth_z}")
        n = len(self.phases)
        if np.shape(self.freqs) != (n, 2) or len(self.amps) != n:
            raise ValueError("freqs, phases and amps must describe the same number of components")
        if self.window is not None:
            x0, x1, y0, y1 = self.window
            if not (x0 < x1 and y0 < y1):
                raise ValueError(f"empty texture window {self.window}")

    @classmethod
    def constant(cls, depth_z: float, value: float) -> "PlanarScene":
        return cls(depth_z, mean=float(value))

    @classmethod
    def textured(
        cls,
        optics: OpticsConfig,
        depth_z: float,
        seed: int = 0,
        max_freq: float = 0.25,
        n_components: int = 8,
        contrast: float = 110.0,
        window: tuple[float, float, float, float] | None = None,
    ) -> "PlanarScene":
        """Random cosine mixture whose frequencies stay below ``max_freq`` cycles per view sample.

        One view sample spans ``p * depth_z / f_lens`` on the plane, so
        ``max_freq < 0.5`` keeps every view alias-free.
        """
        if not 0 < max_freq < 0.5:
            raise ValueError("max_freq must lie in (0, 0.5) cycles per sample")
        rng = np.random.default_rng(seed)
        sample = np.array([optics.p_s, optics.p_t]) * depth_z / optics.f_lens
        radius = max_freq * np.sqrt(rng.uniform(0.05, 1.0, n_components))
        angle = rng.uniform(0, np.pi, n_components)
        freqs = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1) / sample
        phases = rng.uniform(0, 2 * np.pi, n_components)
        amps = np.full(n_components, contrast / n_components)
        return cls(depth_z, freqs, phases, amps, window=window)

    def radiance(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        out = np.full(np.broadcast(X, Y).shape, self.mean, dtype=np.float64)
        for (fx, fy), phi, a in zip(self.freqs, self.phases, self.amps):
            out += a * np.cos(2 * np.pi * (fx * X + fy * Y) + phi)
        if self.window is not None:
            x0, x1, y0, y1 = self.window
            out = np.where((X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1), out, self.mean)
        return out


@dataclass(frozen=True)
class MotionPath:
    """Per-frame in-plane translation of the scene plane.

    ``steps[t]`` moves the plane between frame ``t - 1`` and frame ``t``
    (``steps[0]`` is applied to frame 0 itself). ``dz`` exists only so that
    callers can express, and have rejected, axial motion.
    """

    steps: tuple[tuple[float, float], ...]
    dz: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((float(a), float(b)) for a, b in self.steps))
        object.__setattr__(self, "dz", tuple(float(z) for z in self.dz))
        if self.dz and len(self.dz) != len(self.steps):
            raise ValueError("dz must have one entry per step")

    @classmethod
    def constant(cls, n_frames: int, dX: float, dY: float) -> "MotionPath":
        return cls(((0.0, 0.0),) + ((dX, dY),) * (n_frames - 1))

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class GroundTruth:
    """Ray displacement (reference minus current st coordinate) in length units."""

    ds: float
    dt: float

    def in_pitches(self, optics: OpticsConfig) -> tuple[float, float]:
        return (self.ds / optics.p_s, self.dt / optics.p_t)


def image_window(optics: OpticsConfig, grid: LensletGrid, depth: float, patch) -> tuple[float, float, float, float]:
    """Scene rectangle seen by the central view over ``patch = (x0, x1, y0, y1)``,
    given as fractions of the lenslet frame (0 = left/top edge, 1 = right/bottom)."""
    x0, x1, y0, y1 = patch
    if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
        raise ValueError(f"patch fractions must satisfy 0 <= lo < hi <= 1, got {patch}")
    s = (np.array([x0, x1]) - 0.5) * grid.n_s * optics.p_s
    t = (np.array([y0, y1]) - 0.5) * grid.n_t * optics.p_t
    X, _ = trace_to_scene(optics, depth, 0.0, 0.0, s, 0.0)
    _, Y = trace_to_scene(optics, depth, 0.0, 0.0, 0.0, t)
    return (float(X.min()), float(X.max()), float(Y.min()), float(Y.max()))


def sample_rays(optics: OpticsConfig, grid: LensletGrid) -> tuple[np.ndarray, ...]:
    """(u, v, s, t) for every discrete ray, each shaped ``(A_v, A_u, n_t, n_s)``."""
    F = optics.F
    u = ((grid.P_x - 1) / 2 - np.arange(grid.P_x)) / F
    v = ((grid.P_y - 1) / 2 - np.arange(grid.P_y)) / F
    s = (np.arange(grid.n_s) - (grid.n_s - 1) / 2) * optics.p_s
    t = (np.arange(grid.n_t) - (grid.n_t - 1) / 2) * optics.p_t
    return (
        u[None, :, None, None],
        v[:, None, None, None],
        s[None, None, None, :],
        t[None, None, :, None],
    )


def trace_to_scene(optics: OpticsConfig, depth: float, u, v, s, t):
    """Scene-plane intersection of the ray leaving lens point (u, v) towards MLA point (s, t)."""
    d_i = image_distance(optics, depth)
    k = d_i / optics.f_lens
    # every ray converging on an image point came from one scene point
    img_x = u + (s - u) * k
    img_y = v + (t - v) * k
    m = depth / d_i
    return -img_x * m, -img_y * m


def render_radiance(
    scene: PlanarScene, optics: OpticsConfig, grid: LensletGrid, offset=(0.0, 0.0)
) -> np.ndarray:
    """Unquantised radiance, shaped ``(A_v, A_u, n_t, n_s)``."""
    u, v, s, t = sample_rays(optics, grid)
    X, Y = trace_to_scene(optics, scene.depth_z, u, v, s, t)
    X = np.broadcast_to(X, (grid.P_y, grid.P_x, grid.n_t, grid.n_s))
    Y = np.broadcast_to(Y, X.shape)
    return scene.radiance(X - offset[0], Y - offset[1])


def quantize(radiance: np.ndarray) -> np.ndarray:
    """Round half up to 8 bits."""
    return np.clip(np.floor(radiance + 0.5), 0, 255).astype(np.uint8)


def render_lf_frame(
    scene: PlanarScene, optics: OpticsConfig, grid: LensletGrid, offset=(0.0, 0.0)
) -> LightField4D:
    """Render one light field with the scene plane translated in-plane by ``offset``."""
    rad = render_radiance(scene, optics, grid, offset)
    rad = np.where(np.isfinite(rad), rad, BACKGROUND)
    return LightField4D(quantize(rad))


def render_sequence(
    scene: PlanarScene,
    path: MotionPath,
    optics: OpticsConfig,
    grid: LensletGrid,
    n_frames: int | None = None,
) -> tuple[list[LightField4D], list[GroundTruth]]:
    n_frames = len(path) if n_frames is None else n_frames
    if len(path) != n_frames:
        raise ValueError(f"path has {len(path)} steps for {n_frames} frames")
    if any(z != 0 for z in path.dz):
        raise ValueError("axial (Z) scene motion is outside the ray-space motion model")
    scale = optics.f_lens / scene.depth_z
    frames, truth = [], []
    ox = oy = 0.0
    for dX, dY in path.steps:
        ox += dX
        oy += dY
        frames.append(render_lf_frame(scene, optics, grid, (ox, oy)))
        truth.append(GroundTruth(dX * scale, dY * scale))
    return frames, truth


def render_lenslet_sequence(scene, path, optics, grid):
    frames, truth = render_sequence(scene, path, optics, grid)
    return [multiview_to_lenslet(f) for f in frames], truth


def _image_point(optics: OpticsConfig, point) -> np.ndarray:
    X, Y, Z = point
    d_i = image_distance(optics, Z)
    if d_i > optics.f_lens:
        raise ValueError(f"image point at {d_i:g} lies behind the MLA plane ({optics.f_lens:g})")
    m = d_i / Z
    return np.array([-X * m, -Y * m, d_i])


def st_intersection(optics: OpticsConfig, uv: np.ndarray, image_point: np.ndarray) -> np.ndarray:
    """Where the ray from lens point (u, v) through ``image_point`` crosses the MLA plane."""
    uv = np.asarray(uv, dtype=np.float64)
    k = optics.f_lens / image_point[2]
    return uv + (image_point[None, :2] - uv) * k


def verify_constant_displacement(
    optics: OpticsConfig,
    before,
    after,
    uv_samples,
    allow_z_motion: bool = False,
) -> dict:
    """Check that every lens point sees the same st displacement of a moving scene point.

    ``before``/``after`` are scene points ``(X, Y, Z)`` with ``Z`` the distance in
    front of the lens. Returns the per-sample displacements and the largest
    deviation from the displacement seen through the lens centre.
    ``allow_z_motion`` permits ``Z`` to change, for sensitivity studies.
    """
    if before[2] != after[2] and not allow_z_motion:
        raise ValueError("scene point moves along Z; pass allow_z_motion=True for diagnostics")
    uv = np.atleast_2d(np.asarray(uv_samples, dtype=np.float64))
    p1 = _image_point(optics, before)
    p2 = _image_point(optics, after)
    disp = st_intersection(optics, uv, p1) - st_intersection(optics, uv, p2)
    ref = (st_intersection(optics, np.zeros((1, 2)), p1) - st_intersection(optics, np.zeros((1, 2)), p2))[0]
    dev = np.abs(disp - ref[None, :])
    max_abs = float(dev.max(initial=0.0))
    scale = float(np.abs(ref).max())
    return {
        "displacements": disp,
        "reference": ref,
        "max_abs_deviation": max_abs,
        "max_rel_deviation": max_abs / scale if scale > 0 else max_abs,
    }
