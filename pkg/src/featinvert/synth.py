"""Procedural natural-image stand-ins for desk-scale experiments.

Dead-leaves style composites (overlapping disks, rectangles and triangles
with power-law sizes on a smooth gradient background, finished with mild
texture and blur) have edge and scale statistics close enough to photographs
to exercise HOG inversion without shipping a dataset.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.ndimage import gaussian_filter

from .imaging import ImagePatch, save_image


def _background(rng, h, w):
    ys, xs = np.mgrid[0:h, 0:w]
    base = rng.uniform(0.2, 0.8, 3)
    tilt = rng.uniform(-0.3, 0.3, (2, 3))
    img = (
        base[None, None, :]
        + (ys[:, :, None] / h) * tilt[0][None, None, :]
        + (xs[:, :, None] / w) * tilt[1][None, None, :]
    )
    return img


def _paint_disk(img, rng, ys, xs):
    h, w, _ = img.shape
    cy, cx = rng.uniform(0, h), rng.uniform(0, w)
    r = (rng.pareto(1.5) + 1.0) * rng.uniform(2.0, 6.0)
    r = min(r, max(h, w) / 2.0)
    color = rng.uniform(0, 1, 3)
    mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
    img[mask] = color


def _paint_rect(img, rng, ys, xs):
    h, w, _ = img.shape
    cy, cx = rng.uniform(0, h), rng.uniform(0, w)
    ry = (rng.pareto(1.5) + 1.0) * rng.uniform(2.0, 5.0)
    rx = (rng.pareto(1.5) + 1.0) * rng.uniform(2.0, 5.0)
    theta = rng.uniform(0, np.pi)
    color = rng.uniform(0, 1, 3)
    ct, st = np.cos(theta), np.sin(theta)
    u = (xs - cx) * ct + (ys - cy) * st
    v = -(xs - cx) * st + (ys - cy) * ct
    mask = (np.abs(u) <= rx) & (np.abs(v) <= ry)
    img[mask] = color


def _paint_triangle(img, rng, ys, xs):
    h, w, _ = img.shape
    cy, cx = rng.uniform(0, h), rng.uniform(0, w)
    r = (rng.pareto(1.5) + 1.0) * rng.uniform(3.0, 7.0)
    theta = rng.uniform(0, 2 * np.pi)
    color = rng.uniform(0, 1, 3)
    angs = theta + np.array([0.0, 2.0, 4.0]) * np.pi / 3.0
    vy = cy + r * np.sin(angs)
    vx = cx + r * np.cos(angs)
    mask = np.ones(img.shape[:2], dtype=bool)
    for i in range(3):
        j = (i + 1) % 3
        side = (vx[j] - vx[i]) * (ys - vy[i]) - (vy[j] - vy[i]) * (xs - vx[i])
        ref = (vx[j] - vx[i]) * (vy[(i + 2) % 3] - vy[i]) - (vy[j] - vy[i]) * (
            vx[(i + 2) % 3] - vx[i]
        )
        mask &= side * ref >= 0
    img[mask] = color


def synth_image(seed: int, size: int = 128, objects: int = 40,
                grayscale: bool = False) -> ImagePatch:
    """Render one deterministic dead-leaves composite."""
    rng = np.random.default_rng(seed)
    h = w = size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    img = _background(rng, h, w)
    painters = [_paint_disk, _paint_rect, _paint_triangle]
    for _ in range(objects):
        painters[int(rng.integers(len(painters)))](img, rng, ys, xs)
    img = gaussian_filter(img, sigma=(0.6, 0.6, 0.0))
    img += rng.normal(0.0, 0.01, img.shape)
    img = np.clip(img, 0.0, 1.0)
    patch = ImagePatch(img)
    if grayscale:
        lum = img @ np.array([0.299, 0.587, 0.114])
        patch = ImagePatch(np.clip(lum, 0.0, 1.0)[:, :, None])
    return patch


def synth_image_dir(directory, count: int, seed: int = 0, size: int = 128,
                    grayscale: bool = False):
    """Write `count` composites as PNGs; returns the directory path."""
    os.makedirs(directory, exist_ok=True)
    for i in range(count):
        path = os.path.join(directory, f"synth_{i:04d}.png")
        if not os.path.exists(path):
            save_image(synth_image(seed * 1_000_003 + i, size=size,
                                   grayscale=grayscale), path)
    return directory
