"""Single and multiple diverse feature inversion with paired dictionaries.

A single inversion sparse-codes the descriptor against the feature basis V
and transfers the coefficients to the image basis U. Additional inversions
re-solve with a quadratic penalty that discourages similarity (under a
chosen affinity) to every inversion found so far; the penalty for each
previous inversion x_j is the rank-one form (U' A x_j)(U' A x_j)'.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .features import FeatureDescriptor
from .imaging import ImagePatch, load_image, save_image
from .sparse import PairedDictionary, QuadraticPenalty, solve_elastic, solve_lasso

AFFINITY_KINDS = ("identity", "edge", "color", "spatial")


@dataclass(eq=False)
class AffinityOperator:
    """Structured PSD operator A = C'C defining the similarity cost family.

    apply(x) computes A @ x for row-major patch vectors without ever
    materializing the dense P x P matrix. An optional binary spatial mask
    composes with any kind by zeroing masked-out pixels on both sides.
    """

    kind: str
    patch_shape: tuple
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in AFFINITY_KINDS:
            raise ContractError(f"unknown affinity kind {self.kind!r}")
        h, w, c = self.patch_shape
        if self.kind == "color" and c != 3:
            raise ShapeError("color affinity requires RGB patches")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=np.float64)
            if mask.shape != (h, w):
                raise ShapeError(
                    f"mask shape {mask.shape} does not match patch {h}x{w}"
                )
            self.mask = (mask != 0).astype(np.float64)

    @property
    def size(self) -> int:
        h, w, c = self.patch_shape
        return h * w * c

    def _masked(self, img):
        if self.mask is None:
            return img
        return img * self.mask[:, :, None]

    def apply(self, x) -> np.ndarray:
        """Return A @ x for a flat row-major patch vector."""
        h, w, c = self.patch_shape
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.size:
            raise ShapeError(f"vector of size {x.size}, expected {self.size}")
        img = self._masked(x.reshape(h, w, c))
        if self.kind in ("identity", "spatial"):
            out = img
        elif self.kind == "color":
            # C averages each channel; C'C spreads the mean back uniformly
            means = img.mean(axis=(0, 1))
            out = np.broadcast_to(means / (h * w), (h, w, c)).copy()
        else:  # edge
            # forward pass: [-1 0 1] where the full stencil fits, so a
            # constant image maps to exactly zero
            dx = img[:, 2:] - img[:, :-2]
            dy = img[2:] - img[:-2]
            # adjoint pass
            out = np.zeros_like(img)
            out[:, 2:] += dx
            out[:, :-2] -= dx
            out[2:] += dy
            out[:-2] -= dy
        return self._masked(out).reshape(-1)

    def dense(self) -> np.ndarray:
        """Materialize A; intended for small patches and diagnostics."""
        n = self.size
        A = np.empty((n, n))
        e = np.zeros(n)
        for i in range(n):
            e[i] = 1.0
            A[:, i] = self.apply(e)
            e[i] = 0.0
        return A


def build_affinity(kind: str, patch_shape, mask=None) -> AffinityOperator:
    """Construct an affinity operator for a patch shape.

    `mask`, when given, is an (h, w) binary array selecting the spatial
    region allowed to differ; it composes with any kind.
    """
    if len(patch_shape) == 2:
        patch_shape = (patch_shape[0], patch_shape[1], 1)
    if kind == "spatial" and mask is None:
        raise ContractError("spatial affinity requires a mask")
    return AffinityOperator(kind=kind, patch_shape=tuple(patch_shape), mask=mask)


def similarity_cost(xi: ImagePatch, xj: ImagePatch, A: AffinityOperator) -> float:
    """The squared-bilinear similarity (x_i' A x_j)^2; symmetric and >= 0."""
    if xi.shape != xj.shape:
        raise ShapeError(f"shape mismatch: {xi.shape} vs {xj.shape}")
    if xi.shape != A.patch_shape:
        raise ShapeError(
            f"patch shape {xi.shape} does not match operator {A.patch_shape}"
        )
    return float(xi.pixels @ A.apply(xj.pixels)) ** 2


@dataclass(eq=False)
class InversionSet:
    """An ordered set of inversions of one descriptor plus diagnostics."""

    patches: list
    residuals: list
    gamma: float
    affinity_kind: str | None
    pre_clip_ranges: list = field(default_factory=list)
    codes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.patches)

    def __getitem__(self, i) -> ImagePatch:
        return self.patches[i]

    def save(self, directory):
        """Write numbered PNGs plus a JSON sidecar with the diagnostics."""
        os.makedirs(directory, exist_ok=True)
        for i, patch in enumerate(self.patches):
            save_image(patch, os.path.join(directory, f"inversion_{i:03d}.png"))
        sidecar = {
            "gamma": self.gamma,
            "affinity": self.affinity_kind,
            "residuals": [float(r) for r in self.residuals],
            "pre_clip_ranges": [[float(a), float(b)] for a, b in self.pre_clip_ranges],
        }
        with open(os.path.join(directory, "inversions.json"), "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, directory) -> "InversionSet":
        with open(os.path.join(directory, "inversions.json")) as fh:
            sidecar = json.load(fh)
        patches = []
        i = 0
        while os.path.exists(os.path.join(directory, f"inversion_{i:03d}.png")):
            patches.append(load_image(os.path.join(directory, f"inversion_{i:03d}.png")))
            i += 1
        return cls(
            patches=patches,
            residuals=sidecar["residuals"],
            gamma=sidecar["gamma"],
            affinity_kind=sidecar["affinity"],
            pre_clip_ranges=[tuple(r) for r in sidecar["pre_clip_ranges"]],
        )


def _check_descriptor(phi: FeatureDescriptor, dictionary: PairedDictionary):
    if phi.grid != tuple(dictionary.feature_grid):
        raise ShapeError(
            f"descriptor grid {phi.grid} does not match dictionary "
            f"{tuple(dictionary.feature_grid)}"
        )


def _code_to_patch(dictionary: PairedDictionary, alpha):
    raw = dictionary.destandardize_image(dictionary.U @ alpha)
    pre_clip = (float(raw.min()), float(raw.max()))
    patch = ImagePatch.from_vector(np.clip(raw, 0.0, 1.0), dictionary.patch_shape)
    return patch, raw, pre_clip


def invert_single(phi: FeatureDescriptor, dictionary: PairedDictionary) -> ImagePatch:
    """Invert one descriptor to one image through the paired dictionary."""
    _check_descriptor(phi, dictionary)
    code = solve_lasso(dictionary.V, dictionary.standardize_feature(phi.values),
                       dictionary.lam)
    patch, _, _ = _code_to_patch(dictionary, code.alpha)
    return patch


def invert_multiple(
    phi: FeatureDescriptor,
    dictionary: PairedDictionary,
    N: int,
    gamma: float = 1.0,
    affinity: AffinityOperator | None = None,
    extractor=None,
) -> InversionSet:
    """Greedily invert one descriptor to N diverse images.

    The first inversion is the plain single inversion; each later solve
    adds one rank-one penalty per previous inversion, built from the
    affinity operator applied to that inversion's unclipped image. Penalty
    factors are normalized to unit length so gamma has a comparable scale
    across affinities and patch sizes.

    With gamma = 0 all N entries are bit-identical to invert_single.
    If `extractor` is given, residuals are ||f(x_i) - phi||_2 on the stored
    patches; otherwise they are the dictionary-domain residuals
    ||V a_i - phi|| in original feature units.
    """
    if N < 1:
        raise ContractError("N must be >= 1")
    if gamma < 0:
        raise ContractError("gamma must be >= 0")
    _check_descriptor(phi, dictionary)
    if gamma > 0 and affinity is None:
        affinity = build_affinity("identity", dictionary.patch_shape)
    if affinity is not None and tuple(affinity.patch_shape) != tuple(dictionary.patch_shape):
        raise ShapeError("affinity operator does not match the dictionary patch shape")

    phi_std = dictionary.standardize_feature(phi.values)
    patches, residuals, ranges, codes = [], [], [], []
    factor_rows = []
    for _ in range(N):
        if gamma == 0.0 or not factor_rows:
            code = solve_lasso(dictionary.V, phi_std, dictionary.lam)
        else:
            penalty = QuadraticPenalty.from_vectors(gamma, np.array(factor_rows))
            code = solve_elastic(dictionary.V, phi_std, dictionary.lam, penalty)
        patch, raw, pre_clip = _code_to_patch(dictionary, code.alpha)
        patches.append(patch)
        ranges.append(pre_clip)
        codes.append(code.alpha)
        if extractor is not None:
            resid = float(np.linalg.norm(extractor(patch).values - phi.values))
        else:
            resid = float(
                np.linalg.norm(dictionary.V @ code.alpha - phi_std)
                * dictionary.feature_scale
            )
        residuals.append(resid)
        if gamma > 0.0:
            g = dictionary.U.T @ affinity.apply(raw)
            norm = np.linalg.norm(g)
            if norm > 0:
                factor_rows.append(g / norm)
    return InversionSet(
        patches=patches,
        residuals=residuals,
        gamma=gamma,
        affinity_kind=affinity.kind if affinity is not None else None,
        pre_clip_ranges=ranges,
        codes=codes,
    )


def invert_weight_template(w: FeatureDescriptor, dictionary: PairedDictionary) -> ImagePatch:
    """Invert the positive part of a detector weight template."""
    positive = FeatureDescriptor(values=np.maximum(w.values, 0.0), grid=w.grid)
    return invert_single(positive, dictionary)
