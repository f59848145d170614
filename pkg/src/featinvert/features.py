"""Feature extraction: HOG cells, the glyph renderer and the plugin interface.

The HOG variant is the 31-dimensional cell descriptor used by part-based
detectors: 18 contrast-sensitive orientation channels, 9 contrast-insensitive
channels and 4 block-normalization sums. The exact pipeline, which the naive
reference in the test suite mirrors step by step, is:

1. Centered differences per channel with replicated borders; at each pixel
   the channel with the largest gradient magnitude wins.
2. The gradient angle in [0, 2pi) is floor-binned into 18 signed orientations.
3. Magnitudes are voted bilinearly into the cell grid (votes falling outside
   the grid are dropped).
4. Per-cell energy is the sum of squared contrast-insensitive bins; each cell
   is normalized by the four 2x2 neighborhood energies (missing neighbors
   count as zero), truncated, and the four normalizations averaged.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from numba import njit

from .errors import FormatError, ShapeError
from .imaging import ImagePatch

HOG_DIMS = 31
_DESCRIPTOR_MAGIC = b"FDSC"


@dataclass(eq=False)
class FeatureDescriptor:
    """Flat feature vector plus its (cells_y, cells_x, dims_per_cell) grid."""

    values: np.ndarray
    grid: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        cy, cx, d = self.grid
        if values.size != cy * cx * d:
            raise ShapeError(
                f"descriptor length {values.size} does not match grid {self.grid}"
            )
        if not np.all(np.isfinite(values)):
            raise ShapeError("descriptor contains non-finite values")
        self.values = values
        self.grid = (int(cy), int(cx), int(d))

    def as_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid)

    def serialize(self) -> bytes:
        """16-byte header (magic, cells_y, cells_x, dims) + float32 LE values."""
        cy, cx, d = self.grid
        header = _DESCRIPTOR_MAGIC + struct.pack("<III", cy, cx, d)
        return header + self.values.astype("<f4").tobytes()

    @classmethod
    def deserialize(cls, blob: bytes) -> "FeatureDescriptor":
        if len(blob) < 16 or blob[:4] != _DESCRIPTOR_MAGIC:
            raise FormatError("not a serialized feature descriptor")
        cy, cx, d = struct.unpack("<III", blob[4:16])
        values = np.frombuffer(blob[16:], dtype="<f4").astype(np.float64)
        return cls(values=values, grid=(cy, cx, d))


@runtime_checkable
class FeatureExtractor(Protocol):
    """Deterministic mapping from image patches to feature descriptors."""

    def __call__(self, patch: ImagePatch) -> FeatureDescriptor: ...

    def descriptor_grid(self, patch_shape) -> tuple:
        """Grid shape (cells_y, cells_x, dims) produced for a patch shape."""
        ...


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    orientations: int = 9  # contrast-insensitive bins; signed layout uses 2x
    truncation: float = 0.2
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.cell_size < 2:
            raise ShapeError("cell_size must be >= 2")


@njit(cache=True)
def _hog_kernel(image, cell, trunc, eps):
    h, w, nchan = image.shape
    cy = h // cell
    cx = w // cell
    nb = 18  # signed orientation bins
    hist = np.zeros((cy, cx, nb))
    two_pi = 2.0 * np.pi
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            best_mag2 = -1.0
            gx = 0.0
            gy = 0.0
            for c in range(nchan):
                dx = image[y, xp, c] - image[y, xm, c]
                dy = image[yp, x, c] - image[ym, x, c]
                mag2 = dx * dx + dy * dy
                if mag2 > best_mag2:
                    best_mag2 = mag2
                    gx = dx
                    gy = dy
            mag = np.sqrt(best_mag2)
            if mag <= 0.0:
                continue
            theta = np.arctan2(gy, gx)
            if theta < 0.0:
                theta += two_pi
            b = int(theta / (two_pi / nb))
            if b >= nb:
                b = nb - 1
            # bilinear spatial vote into the cell grid
            fy = (y + 0.5) / cell - 0.5
            fx = (x + 0.5) / cell - 0.5
            iy0 = int(np.floor(fy))
            ix0 = int(np.floor(fx))
            wy1 = fy - iy0
            wx1 = fx - ix0
            for dyi in range(2):
                iy = iy0 + dyi
                if iy < 0 or iy >= cy:
                    continue
                wy = wy1 if dyi == 1 else 1.0 - wy1
                for dxi in range(2):
                    ix = ix0 + dxi
                    if ix < 0 or ix >= cx:
                        continue
                    wx = wx1 if dxi == 1 else 1.0 - wx1
                    hist[iy, ix, b] += mag * wy * wx

    energy = np.zeros((cy, cx))
    for iy in range(cy):
        for ix in range(cx):
            e = 0.0
            for o in range(9):
                v = hist[iy, ix, o] + hist[iy, ix, o + 9]
                e += v * v
            energy[iy, ix] = e

    out = np.zeros((cy, cx, 31))
    for iy in range(cy):
        for ix in range(cx):
            for sy in range(2):
                ny = iy - 1 + 2 * sy  # neighbor row: iy-1 or iy+1
                for sx in range(2):
                    nx = ix - 1 + 2 * sx
                    block = energy[iy, ix]
                    if 0 <= ny < cy:
                        block += energy[ny, ix]
                    if 0 <= nx < cx:
                        block += energy[iy, nx]
                    if 0 <= ny < cy and 0 <= nx < cx:
                        block += energy[ny, nx]
                    norm = 1.0 / np.sqrt(block + eps)
                    tsum = 0.0
                    for o in range(nb):
                        v = hist[iy, ix, o] * norm
                        if v > trunc:
                            v = trunc
                        out[iy, ix, o] += 0.5 * v
                        tsum += v
                    for o in range(9):
                        v = (hist[iy, ix, o] + hist[iy, ix, o + 9]) * norm
                        if v > trunc:
                            v = trunc
                        out[iy, ix, 18 + o] += 0.5 * v
                    out[iy, ix, 27 + 2 * sy + sx] = 0.2357 * tsum
    return out


def hog_extract(img: ImagePatch, params: HogParams = HogParams()) -> FeatureDescriptor:
    """Compute the 31-dim-per-cell HOG descriptor of a patch.

    The patch height and width must be divisible by the cell size.
    """
    cell = params.cell_size
    if img.height % cell != 0 or img.width % cell != 0:
        raise ShapeError(
            f"patch {img.height}x{img.width} not divisible by cell size {cell}"
        )
    grid = _hog_kernel(
        np.ascontiguousarray(img.data), cell, params.truncation, params.epsilon
    )
    cy, cx, d = grid.shape
    return FeatureDescriptor(values=grid.reshape(-1), grid=(cy, cx, d))


@dataclass(frozen=True)
class HogExtractor:
    """FeatureExtractor adapter around hog_extract."""

    params: HogParams = HogParams()

    def __call__(self, patch: ImagePatch) -> FeatureDescriptor:
        return hog_extract(patch, self.params)

    def descriptor_grid(self, patch_shape) -> tuple:
        h, w = patch_shape[0], patch_shape[1]
        cell = self.params.cell_size
        if h % cell != 0 or w % cell != 0:
            raise ShapeError(f"patch shape {patch_shape} not divisible by {cell}")
        return (h // cell, w // cell, HOG_DIMS)


def hog_glyph(desc: FeatureDescriptor, scale: int = 16) -> ImagePatch:
    """Render the black-and-white HOG diagram for a descriptor.

    Each cell shows one oriented stroke per contrast-insensitive bin, drawn
    perpendicular to the gradient direction with brightness proportional to
    the bin weight; the image is max-normalized.
    """
    cy, cx, d = desc.grid
    if d != HOG_DIMS:
        raise ShapeError(f"expected a {HOG_DIMS}-dim HOG grid, got dims={d}")
    grid = desc.as_grid()
    weights = grid[:, :, 18:27]  # contrast-insensitive channels
    canvas = np.zeros((cy * scale, cx * scale))
    half = (scale - 1) / 2.0
    ts = np.linspace(-half, half, 2 * scale)
    for iy in range(cy):
        for ix in range(cx):
            for o in range(9):
                wgt = weights[iy, ix, o]
                if wgt <= 0.0:
                    continue
                theta = o * np.pi / 9.0  # gradient direction
                # stroke along the edge, i.e. perpendicular to the gradient
                ex = -np.sin(theta)
                ey = np.cos(theta)
                ys = np.clip(
                    np.round(iy * scale + half + ts * ey).astype(int),
                    iy * scale,
                    (iy + 1) * scale - 1,
                )
                xs = np.clip(
                    np.round(ix * scale + half + ts * ex).astype(int),
                    ix * scale,
                    (ix + 1) * scale - 1,
                )
                np.maximum.at(canvas, (ys, xs), wgt)
    peak = canvas.max()
    if peak > 0:
        canvas /= peak
    return ImagePatch(canvas[:, :, None])


def descriptor_distance(a: FeatureDescriptor, b: FeatureDescriptor) -> float:
    """Euclidean distance between two descriptors of identical shape."""
    if a.grid != b.grid:
        raise ShapeError(f"grid mismatch: {a.grid} vs {b.grid}")
    return float(np.linalg.norm(a.values - b.values))
