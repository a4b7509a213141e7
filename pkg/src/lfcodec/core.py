"""Discrete 4D light field model, lenslet/multiview conversion and sensor projection.

Array conventions: a lenslet frame is a ``(height, width)`` uint8 array indexed
``[y, x]``. A multiview light field is stored as a ``(A_v, A_u, n_t, n_s)``
array so that ``views[v_idx, u_idx]`` is one view image with rows ``k_t`` and
columns ``k_s``. Micro-image pixel offset ``(u_idx, v_idx)`` counts from the
top-left corner of the micro-image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class StructuralError(ValueError):
    """Input arrays or metadata do not describe a consistent light field."""


@dataclass(frozen=True)
class RayCoord:
    """Two-plane ray coordinate: (u, v) on the main-lens plane, (s, t) on the MLA plane."""

    u: float
    v: float
    s: float
    t: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.u, self.v, self.s, self.t)):
            raise ValueError(f"ray coordinates must be finite: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.s, self.t], dtype=np.float64)


@dataclass(frozen=True)
class OpticsConfig:
    """Plenoptic camera geometry.

    ``f_lens`` is the main-lens to MLA distance and ``f_mu`` the MLA to sensor
    distance; ``p_s``/``p_t`` is the microlens pitch on the MLA plane. All lengths
    share one unit; for synthetic data that unit is one sensor pixel.

    ``f_main`` is the focal length of the thin main lens. It only matters for
    ray tracing a scene (the projection onto the sensor does not use it) and
    defaults to ``f_lens``, i.e. the MLA sits in the focal plane.
    """

    f_lens: float
    f_mu: float
    p_s: float
    p_t: float
    f_main: float | None = None

    def __post_init__(self):
        for name in ("f_lens", "f_mu", "p_s", "p_t"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if self.f_main is not None and not (math.isfinite(self.f_main) and self.f_main > 0):
            raise ValueError(f"f_main must be finite and > 0, got {self.f_main}")

    @property
    def F(self) -> float:
        return self.f_mu / self.f_lens

    @property
    def focal_length(self) -> float:
        return self.f_lens if self.f_main is None else self.f_main

    @property
    def projection_matrix(self) -> np.ndarray:
        F = self.F
        return np.array([[-F, 0.0, 1.0 + F, 0.0], [0.0, -F, 0.0, 1.0 + F]])

    @classmethod
    def synthetic(
        cls,
        P_x: int,
        P_y: int,
        f_lens: float = 1000.0,
        f_mu: float = 25.0,
        f_main: float | None = None,
    ) -> "OpticsConfig":
        """Optics whose micro-image pitch is exactly ``(P_x, P_y)`` sensor pixels."""
        F = f_mu / f_lens
        return cls(f_lens, f_mu, P_x / (1.0 + F), P_y / (1.0 + F), f_main)


def micro_image_pitch(optics: OpticsConfig) -> tuple[float, float]:
    """Sensor distance between neighbouring micro-image centres."""
    F = optics.F
    return ((1.0 + F) * optics.p_s, (1.0 + F) * optics.p_t)


def project_ray(r: RayCoord, optics: OpticsConfig) -> tuple[float, float]:
    """Map a ray through the MLA plane onto the sensor plane."""
    F = optics.F
    return (-F * r.u + (1.0 + F) * r.s, -F * r.v + (1.0 + F) * r.t)


def project_rays(rays: np.ndarray, optics: OpticsConfig) -> np.ndarray:
    """Vectorised :func:`project_ray` for an ``(N, 4)`` array of ``[u, v, s, t]`` rows."""
    rays = np.asarray(rays, dtype=np.float64)
    return rays @ optics.projection_matrix.T


@dataclass(frozen=True)
class LensletGrid:
    """Rectangular micro-image lattice on the sensor, in pixels."""

    P_x: int
    P_y: int
    n_s: int
    n_t: int
    origin_x: int = 0
    origin_y: int = 0

    def __post_init__(self):
        if self.P_x < 1 or self.P_y < 1:
            raise StructuralError(f"micro-image pitch must be >= 1, got {self.P_x}x{self.P_y}")
        if self.n_s < 1 or self.n_t < 1:
            raise StructuralError(f"need at least one micro-image, got {self.n_s}x{self.n_t}")
        if self.origin_x < 0 or self.origin_y < 0:
            raise StructuralError("grid origin must be non-negative")

    @property
    def width(self) -> int:
        return self.n_s * self.P_x + self.origin_x

    @property
    def height(self) -> int:
        return self.n_t * self.P_y + self.origin_y

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def for_frame(cls, width: int, height: int, P_x: int, P_y: int) -> "LensletGrid":
        if width % P_x or height % P_y:
            raise StructuralError(
                f"frame {width}x{height} is not a whole number of {P_x}x{P_y} micro-images"
            )
        return cls(P_x, P_y, width // P_x, height // P_y)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LensletFrame:
    pixels: np.ndarray
    grid: LensletGrid

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise StructuralError(f"lenslet frame must be 2D, got shape {pixels.shape}")
        if pixels.shape != self.grid.shape:
            raise StructuralError(
                f"frame shape {pixels.shape} does not match grid shape {self.grid.shape}"
            )
        if pixels.dtype != np.uint8 and (pixels.min(initial=0) < 0 or pixels.max(initial=0) > 255):
            raise StructuralError("lenslet samples must fit in 8 bits")
        object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LensletFrame):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class LightField4D:
    views: np.ndarray = field(repr=False)

    def __post_init__(self):
        views = np.asarray(self.views)
        if views.ndim != 4:
            raise StructuralError(
                f"views must be a (A_v, A_u, n_t, n_s) array, got shape {views.shape}"
            )
        if min(views.shape) < 1:
            raise StructuralError(f"empty light field: {views.shape}")
        object.__setattr__(self, "views", _frozen(views))

    @classmethod
    def from_views(cls, views: dict[tuple[int, int], np.ndarray]) -> "LightField4D":
        """Assemble from a ``{(u_idx, v_idx): image}`` mapping."""
        if not views:
            raise StructuralError("no views given")
        A_u = 1 + max(u for u, _ in views)
        A_v = 1 + max(v for _, v in views)
        missing = [(u, v) for v in range(A_v) for u in range(A_u) if (u, v) not in views]
        if missing:
            raise StructuralError(f"missing views {missing[:4]}{'...' if len(missing) > 4 else ''}")
        shapes = {np.shape(img) for img in views.values()}
        if len(shapes) != 1:
            raise StructuralError(f"views have non-uniform shapes {sorted(shapes)}")
        stacked = np.stack([np.stack([views[(u, v)] for u in range(A_u)]) for v in range(A_v)])
        return cls(stacked)

    @property
    def A_u(self) -> int:
        return self.views.shape[1]

    @property
    def A_v(self) -> int:
        return self.views.shape[0]

    @property
    def n_s(self) -> int:
        return self.views.shape[3]

    @property
    def n_t(self) -> int:
        return self.views.shape[2]

    def view(self, u_idx: int, v_idx: int) -> np.ndarray:
        return self.views[v_idx, u_idx]

    def __eq__(self, other):
        if not isinstance(other, LightField4D):
            return NotImplemented
        return np.array_equal(self.views, other.views)

    __hash__ = None


def lenslet_to_multiview(frame: LensletFrame) -> LightField4D:
    """Slice a lenslet frame into its ``P_x * P_y`` views."""
    g = frame.grid
    if frame.pixels.shape != g.shape:
        raise StructuralError(f"frame shape {frame.pixels.shape} != grid shape {g.shape}")
    body = frame.pixels[g.origin_y :, g.origin_x :]
    # (k_t, v, k_s, u) -> (v, u, k_t, k_s)
    tiles = body.reshape(g.n_t, g.P_y, g.n_s, g.P_x)
    return LightField4D(tiles.transpose(1, 3, 0, 2))


def multiview_to_lenslet(lf: LightField4D) -> LensletFrame:
    """Tile views back into micro-images; exact inverse of :func:`lenslet_to_multiview`."""
    if lf.A_u != lf.A_v:
        raise StructuralError(f"angular resolution must be square, got {lf.A_u}x{lf.A_v}")
    grid = LensletGrid(lf.A_u, lf.A_v, lf.n_s, lf.n_t)
    pixels = lf.views.transpose(2, 0, 3, 1).reshape(grid.shape)
    return LensletFrame(pixels, grid)
