"""Image patches, color conversion, raster I/O and corpus sampling.

Pixels are stored as float64 in [0, 1]. A patch is a (height, width,
channels) array with channels 1 (gray) or 3 (RGB); the flat row-major
view of that array is the vector all linear-algebra code operates on.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorpusError, FormatError, ShapeError

SUPPORTED_EXTENSIONS = (".png", ".pgm", ".ppm", ".pnm")

# sRGB <-> XYZ (D65, 2 degree observer), IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


@dataclass(eq=False)
class ImagePatch:
    """A fixed-size raster with float pixels in [0, 1].

    Attributes
    ----------
    data : np.ndarray
        (height, width, channels) float64 array, values in [0, 1].
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ShapeError(f"expected (h, w, 1|3) array, got {data.shape}")
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def pixels(self) -> np.ndarray:
        """Row-major flat view of length height * width * channels."""
        return self.data.reshape(-1)

    @classmethod
    def from_vector(cls, vec, shape) -> "ImagePatch":
        vec = np.asarray(vec, dtype=np.float64)
        h, w, c = shape
        if vec.size != h * w * c:
            raise ShapeError(f"vector of size {vec.size} does not fill {shape}")
        return cls(vec.reshape(h, w, c).copy())

    def clipped(self) -> "ImagePatch":
        return ImagePatch(np.clip(self.data, 0.0, 1.0))


@dataclass(eq=False)
class LabPatch:
    """Per-pixel CIE L*a*b* values; L in [0, 100], a/b roughly [-128, 127]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != 3:
            raise ShapeError(f"expected (h, w, 3) Lab array, got {values.shape}")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class PatchCorpus:
    """Uniform-shape patch collection with a crop provenance manifest."""

    patches: list = field(default_factory=list)
    manifest: list = field(default_factory=list)

    def __post_init__(self):
        shapes = {p.shape for p in self.patches}
        if len(shapes) > 1:
            raise CorpusError(f"patches have mixed shapes: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, i) -> ImagePatch:
        return self.patches[i]

    @property
    def patch_shape(self) -> tuple:
        if not self.patches:
            raise CorpusError("corpus is empty")
        return self.patches[0].shape

    def as_matrix(self) -> np.ndarray:
        """Stack all patches as rows of an (n, P) matrix."""
        return np.stack([p.pixels for p in self.patches])

    def save(self, directory):
        """Persist as manifest.json plus a uint8 patches.npy stack."""
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(self.manifest, fh, indent=1, sort_keys=True)
        stack = np.stack([p.data for p in self.patches]) if self.patches else np.zeros((0, 0, 0, 0))
        np.save(os.path.join(directory, "patches.npy"), np.round(stack * 255.0).astype(np.uint8))

    @classmethod
    def load(cls, directory) -> "PatchCorpus":
        manifest_path = os.path.join(directory, "manifest.json")
        stack_path = os.path.join(directory, "patches.npy")
        if not os.path.exists(manifest_path) or not os.path.exists(stack_path):
            raise CorpusError(f"{directory} is not a corpus directory")
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        stack = np.load(stack_path)
        patches = [ImagePatch(stack[i] / 255.0) for i in range(stack.shape[0])]
        return cls(patches=patches, manifest=manifest)


def load_image(path) -> ImagePatch:
    """Load a PNG or binary PGM/PPM as an ImagePatch with pixels in [0, 1].

    Grayscale files stay single-channel; palette and RGBA inputs are
    converted to RGB.
    """
    if not os.path.exists(path):
        raise IOError(f"no such file: {path}")
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise FormatError(f"unsupported raster format: {ext!r}")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise FormatError(f"cannot decode {path}: {exc}") from exc
    if img.mode in ("L", "I;16", "I"):
        arr = np.asarray(img, dtype=np.float64)
        maxval = 65535.0 if img.mode != "L" and arr.max() > 255 else 255.0
        return ImagePatch(arr[:, :, None] / maxval)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return ImagePatch(np.asarray(img, dtype=np.float64) / 255.0)


def save_image(patch: ImagePatch, path):
    """Write a patch as an 8-bit PNG/PGM/PPM; inverse of load_image for 8-bit data."""
    arr = np.round(np.clip(patch.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if patch.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(arr, mode="RGB").save(path)


def to_grayscale(img: ImagePatch) -> ImagePatch:
    """Collapse RGB to single-channel luminance (BT.601 weights)."""
    if img.channels == 1:
        return ImagePatch(img.data.copy())
    gray = img.data @ np.array([0.299, 0.587, 0.114])
    return ImagePatch(np.clip(gray, 0.0, 1.0)[:, :, None])


def _srgb_decode(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)


def _srgb_encode(linear):
    linear = np.maximum(linear, 0.0)
    return np.where(
        linear > 0.0031308, 1.055 * linear ** (1.0 / 2.4) - 0.055, 12.92 * linear
    )


def _lab_f(t):
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def _lab_f_inv(u):
    delta = 6.0 / 29.0
    return np.where(u > delta, u**3, 3 * delta**2 * (u - 4.0 / 29.0))


def rgb_to_lab(img: ImagePatch) -> LabPatch:
    """sRGB (D65) to CIE L*a*b*; input must be 3-channel."""
    if img.channels != 3:
        raise ShapeError("rgb_to_lab requires a 3-channel patch")
    linear = _srgb_decode(img.data)
    xyz = linear @ _RGB_TO_XYZ.T
    fxyz = _lab_f(xyz / _D65_WHITE)
    L = 116.0 * fxyz[..., 1] - 16.0
    a = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    b = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return LabPatch(np.stack([L, a, b], axis=-1))


def lab_to_rgb(lab: LabPatch) -> ImagePatch:
    """Inverse of rgb_to_lab; out-of-gamut values are clipped to [0, 1]."""
    L = lab.values[..., 0]
    a = lab.values[..., 1]
    b = lab.values[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _D65_WHITE
    rgb = _srgb_encode(xyz @ _XYZ_TO_RGB.T)
    return ImagePatch(np.clip(rgb, 0.0, 1.0))


def lab_distance(x: ImagePatch, y: ImagePatch) -> float:
    """Euclidean distance in Lab space; gray inputs are replicated to RGB."""
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")

    def _as_rgb(p):
        if p.channels == 3:
            return p
        return ImagePatch(np.repeat(p.data, 3, axis=2))

    dx = rgb_to_lab(_as_rgb(x)).values - rgb_to_lab(_as_rgb(y)).values
    return float(np.linalg.norm(dx))


def _list_images(image_dir):
    try:
        names = sorted(os.listdir(image_dir))
    except OSError as exc:
        raise CorpusError(f"cannot read directory {image_dir}: {exc}") from exc
    paths = [
        os.path.join(image_dir, n)
        for n in names
        if os.path.splitext(n)[1].lower() in SUPPORTED_EXTENSIONS
    ]
    if not paths:
        raise CorpusError(f"no readable images in {image_dir}")
    return paths


def sample_patches(image_dir, patch_shape, count: int, seed: int) -> PatchCorpus:
    """Draw `count` crops uniformly over all valid positions across files.

    Sampling is a pure function of (directory contents, patch_shape, count,
    seed); the returned manifest records every crop as
    {path, x, y, w, h}.

    Parameters
    ----------
    patch_shape : (height, width) or (height, width, channels)
        Channels, when given, forces grayscale (1) or RGB (3) patches.
    """
    if len(patch_shape) == 2:
        ph, pw = patch_shape
        channels = None
    else:
        ph, pw, channels = patch_shape
    paths = _list_images(image_dir)
    images, weights = [], []
    for path in paths:
        img = load_image(path)
        if channels == 1 and img.channels == 3:
            img = to_grayscale(img)
        elif channels == 3 and img.channels == 1:
            img = ImagePatch(np.repeat(img.data, 3, axis=2))
        ny = img.height - ph + 1
        nx = img.width - pw + 1
        if ny < 1 or nx < 1:
            continue
        images.append((path, img))
        weights.append(ny * nx)
    if not images:
        raise CorpusError(
            f"all images in {image_dir} are smaller than the {ph}x{pw} patch"
        )
    rng = np.random.default_rng(seed)
    weights = np.asarray(weights, dtype=np.float64)
    probs = weights / weights.sum()
    patches, manifest = [], []
    for _ in range(count):
        idx = int(rng.choice(len(images), p=probs))
        path, img = images[idx]
        y = int(rng.integers(0, img.height - ph + 1))
        x = int(rng.integers(0, img.width - pw + 1))
        patches.append(ImagePatch(img.data[y : y + ph, x : x + pw].copy()))
        manifest.append({"path": path, "x": x, "y": y, "w": pw, "h": ph})
    return PatchCorpus(patches=patches, manifest=manifest)
