"""Quantitative evaluation: NCC reconstruction benchmark, diversity-vs-
fidelity curves, ratio-of-distance densities and the recursion experiment."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateInputError, ShapeError
from .features import FeatureDescriptor, descriptor_distance
from .imaging import ImagePatch, PatchCorpus, lab_distance
from .inversion import InversionSet, invert_single
from .sparse import PairedDictionary


def ncc(x: ImagePatch, y: ImagePatch) -> float:
    """Normalized cross correlation: mean-centered, norm-divided.

    Invariant to positive affine intensity changes in either argument;
    raises DegenerateInputError for constant inputs.
    """
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    a = x.pixels - x.pixels.mean()
    b = y.pixels - y.pixels.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("NCC is undefined for a constant image")
    return float(a @ b / (na * nb))


@dataclass(eq=False)
class NccReport:
    """Per-patch NCC scores per method; None marks a failed inversion."""

    scores: dict  # method -> list of float | None
    failures: dict = field(default_factory=dict)  # method -> list of (index, message)

    def mean(self, method: str) -> float:
        vals = [s for s in self.scores[method] if s is not None]
        if not vals:
            return float("nan")
        return float(np.mean(vals))

    @property
    def means(self) -> dict:
        return {m: self.mean(m) for m in self.scores}

    def to_csv(self, path):
        methods = sorted(self.scores)
        n = max(len(v) for v in self.scores.values())
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patch"] + methods)
            for i in range(n):
                row = [i]
                for m in methods:
                    s = self.scores[m][i]
                    row.append("" if s is None else f"{s:.6f}")
                writer.writerow(row)

    def to_json(self, path):
        payload = {
            "means": {m: self.mean(m) for m in sorted(self.scores)},
            "failures": {m: len(v) for m, v in self.failures.items()},
            "count": max(len(v) for v in self.scores.values()),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)


def run_ncc_benchmark(corpus: PatchCorpus, methods: dict, extractor) -> NccReport:
    """Score every inverter against the source patches of a corpus.

    `methods` maps method names to callables descriptor -> ImagePatch.
    Descriptors are computed once and shared; per-patch failures are
    recorded, not fatal.
    """
    if len(corpus) == 0:
        raise ContractError("benchmark corpus is empty")
    descriptors = [extractor(p) for p in corpus.patches]
    scores = {m: [] for m in methods}
    failures = {m: [] for m in methods}
    for i, (patch, desc) in enumerate(zip(corpus.patches, descriptors)):
        for name, invert in methods.items():
            try:
                recon = invert(desc)
                scores[name].append(ncc(patch, recon))
            except Exception as exc:  # recorded, never fatal
                scores[name].append(None)
                failures[name].append((i, str(exc)))
    return NccReport(scores=scores, failures={m: v for m, v in failures.items() if v})


@dataclass(frozen=True)
class DiversityRecord:
    """Distances between the first two inversions of one descriptor."""

    feature_distance: float  # ||phi(x1) - phi(x2)||
    image_distance: float  # ||L(x1) - L(x2)|| in Lab space
    ratio: float  # ||phi(x2) - f|| / ||phi(x1) - f||
    method: str


def diversity_record(
    inversions: InversionSet, phi: FeatureDescriptor, extractor, method: str
) -> DiversityRecord:
    """Measure one inversion set against its source descriptor."""
    if len(inversions) < 2:
        raise ContractError("need at least two inversions for a diversity record")
    x1, x2 = inversions[0], inversions[1]
    phi1, phi2 = extractor(x1), extractor(x2)
    r1 = descriptor_distance(phi1, phi)
    r2 = descriptor_distance(phi2, phi)
    return DiversityRecord(
        feature_distance=descriptor_distance(phi1, phi2),
        image_distance=lab_distance(x1, x2),
        ratio=r2 / r1 if r1 > 0 else float("inf"),
        method=method,
    )


def feature_distance_bins(records, bins: int):
    """Shared bin edges spanning the 1st-99th percentile of feature distance."""
    dists = np.array([r.feature_distance for r in records])
    lo, hi = np.percentile(dists, [1, 99])
    if hi <= lo:
        hi = lo + 1e-9
    return np.linspace(lo, hi, bins + 1)


def diversity_curve(records, bins: int = 20, edges=None):
    """Median image distance per feature-distance bin; empty bins omitted.

    Returns a list of (bin_lo, bin_hi, median_image_distance) tuples.
    """
    records = list(records)
    if not records:
        return []
    if edges is None:
        edges = feature_distance_bins(records, bins)
    dists = np.array([r.feature_distance for r in records])
    imgd = np.array([r.image_distance for r in records])
    which = np.clip(np.searchsorted(edges, dists, side="right") - 1, 0, len(edges) - 2)
    out = []
    for b in range(len(edges) - 1):
        sel = which == b
        if not np.any(sel):
            continue
        out.append((float(edges[b]), float(edges[b + 1]), float(np.median(imgd[sel]))))
    return out


def ratio_density(records, ratio_bins: int = 20, image_bins: int = 20):
    """2-D histogram over (ratio, image distance), normalized to sum to 1.

    Returns (density, ratio_edges, image_edges).
    """
    if ratio_bins < 1 or image_bins < 1:
        raise ContractError("bin counts must be >= 1")
    records = list(records)
    ratios = np.array([r.ratio for r in records])
    imgd = np.array([r.image_distance for r in records])
    hist, redges, iedges = np.histogram2d(ratios, imgd, bins=(ratio_bins, image_bins))
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return hist, redges, iedges


def recursion_test(
    x: ImagePatch,
    dictionary: PairedDictionary,
    extractor,
    depth: int = 3,
):
    """Repeatedly extract and invert; report NCC between successive iterates.

    Returns [(1, ncc(x, x')), (2, ncc(x', x'')), ...] of length `depth`.
    """
    if depth < 1:
        raise ContractError("depth must be >= 1")
    out = []
    prev = x
    for i in range(1, depth + 1):
        cur = invert_single(extractor(prev), dictionary)
        out.append((i, ncc(prev, cur)))
        prev = cur
    return out
