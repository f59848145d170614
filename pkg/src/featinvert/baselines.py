"""Comparison inversion algorithms: ELDA, ridge, direct optimization,
nudged and subset dictionaries, and the greedy triangle refiner.

The ridge and ELDA baselines share a stationary Gaussian model of the joint
(image, feature) distribution: statistics are pooled over all spatial cell
offsets, so a covariance for any template size can be assembled by tiling
the per-offset blocks.
"""

from __future__ import annotations

import json
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .errors import ContractError, CorpusError, NumericError, ShapeError
from .features import FeatureDescriptor, HogExtractor, _hog_kernel
from .imaging import ImagePatch, PatchCorpus
from .inversion import InversionSet
from .sparse import PairedDictionary, solve_lasso

_GAUSS_MAGIC = b"SGAU"
_GAUSS_VERSION = 1


def _extractor_cell(extractor, cell_size):
    if cell_size is not None:
        return int(cell_size)
    params = getattr(extractor, "params", None)
    if params is not None and hasattr(params, "cell_size"):
        return int(params.cell_size)
    raise ContractError("cell_size is required for non-HOG extractors")


def _pixel_cells(data, cell):
    """(h, w, c) image -> (gy, gx, cell*cell*c) per-cell pixel vectors."""
    h, w, c = data.shape
    gy, gx = h // cell, w // cell
    blocks = data.reshape(gy, cell, gx, cell, c).transpose(0, 2, 1, 3, 4)
    return blocks.reshape(gy, gx, cell * cell * c)


@dataclass(eq=False)
class StationaryGaussianModel:
    """Joint (image, feature) Gaussian with cell-offset-stationary covariance.

    `gammas[T+dy, T+dx]` is the m x m covariance between the joint cell
    vector at a cell and the one offset by (dy, dx); m = cell*cell*channels
    pixel dims followed by feat_dim feature dims. Offsets beyond T are
    treated as uncorrelated.
    """

    cell: int
    channels: int
    feat_dim: int
    max_offset: int
    mean_cell: np.ndarray  # (m,) pooled mean of the joint cell vector
    gammas: np.ndarray  # (2T+1, 2T+1, m, m)
    lambda_reg: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def pixel_dims(self) -> int:
        return self.cell * self.cell * self.channels

    def _gamma(self, dy, dx):
        T = self.max_offset
        if abs(dy) > T or abs(dx) > T:
            return None
        return self.gammas[T + dy, T + dx]

    def _pixel_permutation(self, grid):
        """Map cell-major pixel indices to row-major patch indices."""
        gy, gx = grid
        cell, c = self.cell, self.channels
        w = gx * cell
        perm = np.empty(gy * gx * cell * cell * c, dtype=np.int64)
        pos = 0
        for cy in range(gy):
            for cx in range(gx):
                for oy in range(cell):
                    for ox in range(cell):
                        for ch in range(c):
                            perm[pos] = ((cy * cell + oy) * w + cx * cell + ox) * c + ch
                            pos += 1
        return perm

    def assemble(self, grid):
        """Dense mu_x, mu_phi, Sigma_XPhi, Sigma_PhiPhi for a template grid.

        Image dimensions are in row-major patch order; features in
        row-major cell order.
        """
        gy, gx = grid
        px, d = self.pixel_dims, self.feat_dim
        ncells = gy * gx
        P, Q = ncells * px, ncells * d
        sigma_xphi = np.zeros((P, Q))
        sigma_phiphi = np.zeros((Q, Q))
        for c1y in range(gy):
            for c1x in range(gx):
                i = c1y * gx + c1x
                for c2y in range(gy):
                    for c2x in range(gx):
                        j = c2y * gx + c2x
                        gamma = self._gamma(c2y - c1y, c2x - c1x)
                        if gamma is None:
                            continue
                        sigma_xphi[i * px : (i + 1) * px, j * d : (j + 1) * d] = gamma[:px, px:]
                        sigma_phiphi[i * d : (i + 1) * d, j * d : (j + 1) * d] = gamma[px:, px:]
        perm = self._pixel_permutation(grid)
        sigma_xphi_rm = np.empty_like(sigma_xphi)
        sigma_xphi_rm[perm] = sigma_xphi
        mu_x = np.empty(P)
        mu_x[perm] = np.tile(self.mean_cell[:px], ncells)
        mu_phi = np.tile(self.mean_cell[px:], ncells)
        return mu_x, mu_phi, sigma_xphi_rm, sigma_phiphi

    def prepare(self, grid):
        """Factor the regularized feature covariance and the ridge operator."""
        grid = tuple(int(g) for g in grid)
        if grid in self._cache:
            return self._cache[grid]
        mu_x, mu_phi, sigma_xphi, sigma_phiphi = self.assemble(grid)
        sigma_hat = sigma_phiphi + self.lambda_reg * np.eye(sigma_phiphi.shape[0])
        try:
            factor = cho_factor(sigma_hat)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                f"feature covariance not positive definite (lambda_reg="
                f"{self.lambda_reg}): {exc}"
            ) from exc
        ridge_op = cho_solve(factor, sigma_xphi.T).T  # Sigma_XPhi @ Sigma_hat^-1
        entry = {
            "mu_x": mu_x,
            "mu_phi": mu_phi,
            "factor": factor,
            "ridge_op": ridge_op,
        }
        self._cache[grid] = entry
        return entry

    def whiten(self, phi_values, grid) -> np.ndarray:
        """The ELDA template w = Sigma_hat^-1 (y - mu)."""
        entry = self.prepare(grid)
        return cho_solve(entry["factor"], np.asarray(phi_values) - entry["mu_phi"])

    def sigma_xx_block(self, block_cells):
        """Dense pixel covariance of a square block of `block_cells` cells."""
        px = self.pixel_dims
        s = block_cells
        n = s * s * px
        sigma = np.zeros((n, n))
        for c1y in range(s):
            for c1x in range(s):
                i = c1y * s + c1x
                for c2y in range(s):
                    for c2x in range(s):
                        j = c2y * s + c2x
                        gamma = self._gamma(c2y - c1y, c2x - c1x)
                        if gamma is None:
                            continue
                        sigma[i * px : (i + 1) * px, j * px : (j + 1) * px] = gamma[:px, :px]
        perm = self._pixel_permutation((s, s))
        out = np.empty_like(sigma)
        out[perm[:, None], perm[None, :]] = sigma
        return out

    def mean_block(self, block_cells):
        px = self.pixel_dims
        perm = self._pixel_permutation((block_cells, block_cells))
        mu = np.empty(block_cells * block_cells * px)
        mu[perm] = np.tile(self.mean_cell[:px], block_cells * block_cells)
        return mu

    def save(self, path):
        T = self.max_offset
        m = self.mean_cell.size
        header = _GAUSS_MAGIC + struct.pack(
            "<IIIIIId", _GAUSS_VERSION, self.cell, self.channels,
            self.feat_dim, T, m, self.lambda_reg,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.mean_cell.astype("<f8").tobytes())
            fh.write(self.gammas.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "StationaryGaussianModel":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != _GAUSS_MAGIC:
            raise NumericError(f"{path} is not a stationary Gaussian model file")
        fmt = "<IIIIIId"
        version, cell, channels, feat_dim, T, m, lambda_reg = struct.unpack(
            fmt, blob[4 : 4 + struct.calcsize(fmt)]
        )
        off = 4 + struct.calcsize(fmt)
        mean_cell = np.frombuffer(blob[off : off + 8 * m], dtype="<f8").copy()
        off += 8 * m
        side = 2 * T + 1
        gammas = np.frombuffer(blob[off:], dtype="<f4").astype(np.float64)
        gammas = gammas.reshape(side, side, m, m)
        return cls(
            cell=cell, channels=channels, feat_dim=feat_dim, max_offset=T,
            mean_cell=mean_cell, gammas=gammas, lambda_reg=lambda_reg,
        )


def fit_stationary_gaussian(
    corpus: PatchCorpus,
    extractor,
    lambda_reg: float = 1.0,
    max_offset: int = 9,
    cell_size: int | None = None,
) -> StationaryGaussianModel:
    """Estimate the stationary joint Gaussian from a corpus.

    Statistics are pooled over every cell-offset pair within every patch,
    so larger training patches contribute more pairs. Raises NumericError
    lazily (at prepare time) if lambda_reg cannot make the assembled
    feature covariance positive definite.
    """
    if len(corpus) < 2:
        raise CorpusError("need at least 2 patches to fit a Gaussian model")
    cell = _extractor_cell(extractor, cell_size)
    h, w, c = corpus.patch_shape
    if h % cell or w % cell:
        raise ShapeError(f"patch shape {corpus.patch_shape} not divisible by {cell}")
    X = corpus.as_matrix()
    if float(np.ptp(X)) == 0.0 or np.allclose(X, X[0]):
        warnings.warn("corpus patches are (nearly) identical; covariance is degenerate")

    joints = []
    for patch in corpus.patches:
        cells = _pixel_cells(patch.data, cell)
        desc = extractor(patch)
        joints.append(np.concatenate([cells, desc.as_grid()], axis=2))
    J = np.stack(joints)  # (n, gy, gx, m)
    n, gy, gx, m = J.shape
    d = m - cell * cell * c
    T = max_offset

    mean_cell = J.reshape(-1, m).mean(axis=0)
    # per-position means: the covariance is taken across the corpus at each
    # position pair, then pooled over all pairs with the same offset, so a
    # corpus of identical patches yields zero covariance everywhere
    M = J.mean(axis=0)

    side = 2 * T + 1
    gammas = np.zeros((side, side, m, m))
    for dy in range(-T, T + 1):
        for dx in range(-T, T + 1):
            y0, y1 = max(0, -dy), min(gy, gy - dy)
            x0, x1 = max(0, -dx), min(gx, gx - dx)
            if y0 >= y1 or x0 >= x1:
                continue
            A = J[:, y0:y1, x0:x1].reshape(-1, m)
            B = J[:, y0 + dy : y1 + dy, x0 + dx : x1 + dx].reshape(-1, m)
            MA = M[y0:y1, x0:x1].reshape(-1, m)
            MB = M[y0 + dy : y1 + dy, x0 + dx : x1 + dx].reshape(-1, m)
            npos = MA.shape[0]
            gammas[T + dy, T + dx] = (A.T @ B) / (n * npos) - (MA.T @ MB) / npos
    return StationaryGaussianModel(
        cell=cell, channels=c, feat_dim=d, max_offset=T,
        mean_cell=mean_cell, gammas=gammas, lambda_reg=lambda_reg,
    )


def ridge_invert(phi: FeatureDescriptor, model: StationaryGaussianModel) -> ImagePatch:
    """Closed-form conditional-mean inversion; a matrix-vector product after
    the per-template operator has been assembled (cached on the model)."""
    gy, gx, d = phi.grid
    if d != model.feat_dim:
        raise ShapeError(f"descriptor dims {d} != model feature dims {model.feat_dim}")
    entry = model.prepare((gy, gx))
    x = entry["ridge_op"] @ (phi.values - entry["mu_phi"]) + entry["mu_x"]
    shape = (gy * model.cell, gx * model.cell, model.channels)
    return ImagePatch.from_vector(np.clip(x, 0.0, 1.0), shape)


@dataclass(eq=False)
class EldaDatabase:
    """Sliding-window retrieval index backing the exemplar-LDA baseline."""

    descriptors: np.ndarray  # (n, Q) float32
    crops: np.ndarray  # (n, h, w, c) float32
    grid: tuple
    model: StationaryGaussianModel
    manifest: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.descriptors.shape[0]

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump({"grid": list(self.grid), "windows": self.manifest},
                      fh, indent=1, sort_keys=True)
        np.savez_compressed(
            os.path.join(directory, "windows.npz"),
            descriptors=self.descriptors,
            crops=self.crops,
        )
        self.model.save(os.path.join(directory, "model.sgau"))

    @classmethod
    def load(cls, directory) -> "EldaDatabase":
        with open(os.path.join(directory, "manifest.json")) as fh:
            meta = json.load(fh)
        blobs = np.load(os.path.join(directory, "windows.npz"))
        model = StationaryGaussianModel.load(os.path.join(directory, "model.sgau"))
        return cls(
            descriptors=blobs["descriptors"],
            crops=blobs["crops"],
            grid=tuple(meta["grid"]),
            model=model,
            manifest=meta["windows"],
        )


def build_elda_database(
    corpus: PatchCorpus, extractor, model: StationaryGaussianModel
) -> EldaDatabase:
    """Index a corpus of windows: per-window descriptors plus source crops."""
    if len(corpus) == 0:
        raise CorpusError("cannot build an ELDA database from an empty corpus")
    descs = [extractor(p) for p in corpus.patches]
    grid = descs[0].grid
    descriptors = np.stack([d.values for d in descs]).astype(np.float32)
    crops = np.stack([p.data for p in corpus.patches]).astype(np.float32)
    return EldaDatabase(
        descriptors=descriptors, crops=crops, grid=grid, model=model,
        manifest=list(corpus.manifest),
    )


def elda_invert(phi: FeatureDescriptor, db: EldaDatabase, topk: int = 20) -> ImagePatch:
    """Score the whitened template against every window; average the top hits."""
    if topk < 1:
        raise ContractError("topk must be >= 1")
    if phi.grid != tuple(db.grid):
        raise ShapeError(f"descriptor grid {phi.grid} != database grid {db.grid}")
    if topk > len(db):
        warnings.warn(f"topk={topk} exceeds the {len(db)} indexed windows; clamping")
        topk = len(db)
    w = db.model.whiten(phi.values, (phi.grid[0], phi.grid[1]))
    scores = db.descriptors @ w.astype(np.float32)
    top = np.argpartition(-scores, topk - 1)[:topk]
    mean_crop = db.crops[top].mean(axis=0).astype(np.float64)
    return ImagePatch(np.clip(mean_crop, 0.0, 1.0))


@dataclass(eq=False)
class EigenBasis:
    """Multi-scale eigenvector image basis with unit-norm columns."""

    basis: np.ndarray  # (P, K)
    mean_image: np.ndarray  # (P,)
    patch_shape: tuple

    @property
    def K(self) -> int:
        return self.basis.shape[1]


def build_eigen_basis(
    model: StationaryGaussianModel,
    grid,
    scales=(1, 2, 4),
    vectors_per_scale=(2, 4, 8),
) -> EigenBasis:
    """Leading eigenvectors of the stationary pixel covariance at several
    cell-block scales, translated to every valid offset of the template."""
    gy, gx = grid
    cell, c = model.cell, model.channels
    h, w = gy * cell, gx * cell
    P = h * w * c
    entry_mu = model.prepare((gy, gx))["mu_x"]
    columns = []
    for s, nv in zip(scales, vectors_per_scale):
        if s > gy or s > gx:
            continue
        sigma = model.sigma_xx_block(s)
        evals, evecs = np.linalg.eigh(sigma)
        lead = evecs[:, ::-1][:, :nv]  # descending eigenvalue order
        bh = bw = s * cell
        for k in range(lead.shape[1]):
            block = lead[:, k].reshape(bh, bw, c)
            for ty in range(gy - s + 1):
                for tx in range(gx - s + 1):
                    col = np.zeros((h, w, c))
                    col[ty * cell : ty * cell + bh, tx * cell : tx * cell + bw] = block
                    columns.append(col.reshape(-1))
    basis = np.stack(columns, axis=1)
    norms = np.linalg.norm(basis, axis=0)
    basis /= norms
    return EigenBasis(basis=basis, mean_image=entry_mu, patch_shape=(h, w, c))


def _golden_section(fun, lo, hi, iters):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fun(x2)
    return (x1, f1) if f1 < f2 else (x2, f2)


def direct_invert(
    phi: FeatureDescriptor,
    basis: EigenBasis,
    extractor,
    restarts: int = 2,
    seed: int = 0,
    sweeps: int = 2,
    coord_range: float = 3.0,
    line_iters: int = 8,
) -> ImagePatch:
    """Minimize the feature mismatch over the eigen basis coefficients by
    cyclic coordinate descent with golden-section line searches and random
    restarts; returns the best restart."""
    if restarts < 1:
        raise ContractError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    target = phi.values
    shape = basis.patch_shape
    B = basis.basis

    def objective_from(cur_vec):
        patch = ImagePatch.from_vector(np.clip(cur_vec, 0.0, 1.0), shape)
        d = extractor(patch).values - target
        return float(d @ d)

    best_obj = np.inf
    best_vec = np.zeros(B.shape[0])
    for r in range(restarts):
        if r == 0:
            rho = np.zeros(basis.K)
        else:
            rho = rng.normal(0.0, 0.5, basis.K)
        cur = B @ rho
        cur_obj = objective_from(cur)
        for _ in range(sweeps):
            for k in range(basis.K):
                col = B[:, k]
                base = cur - rho[k] * col

                def fun(t):
                    return objective_from(base + t * col)

                t, f = _golden_section(fun, -coord_range, coord_range, line_iters)
                if f < cur_obj:
                    rho[k] = t
                    cur = base + t * col
                    cur_obj = f
        if cur_obj < best_obj:
            best_obj = cur_obj
            best_vec = cur
    return ImagePatch.from_vector(np.clip(best_vec, 0.0, 1.0), shape)


def nudged_invert(
    phi: FeatureDescriptor,
    dictionary: PairedDictionary,
    N: int,
    gamma: float,
    seed: int = 0,
    extractor=None,
) -> InversionSet:
    """Multiple inversions by perturbing the descriptor with Gaussian noise.

    The first inversion is unperturbed so gamma = 0 reduces to N copies of
    the single inversion.
    """
    if N < 1:
        raise ContractError("N must be >= 1")
    if gamma < 0:
        raise ContractError("gamma must be >= 0")
    if phi.grid != tuple(dictionary.feature_grid):
        raise ShapeError("descriptor does not match dictionary feature grid")
    rng = np.random.default_rng(seed)
    phi_std = dictionary.standardize_feature(phi.values)
    patches, residuals, ranges, codes = [], [], [], []
    for i in range(N):
        eps = np.zeros(phi_std.size) if i == 0 else rng.standard_normal(phi_std.size)
        code = solve_lasso(dictionary.V, phi_std - gamma * eps, dictionary.lam)
        raw = dictionary.destandardize_image(dictionary.U @ code.alpha)
        ranges.append((float(raw.min()), float(raw.max())))
        patch = ImagePatch.from_vector(np.clip(raw, 0.0, 1.0), dictionary.patch_shape)
        patches.append(patch)
        codes.append(code.alpha)
        if extractor is not None:
            residuals.append(float(np.linalg.norm(extractor(patch).values - phi.values)))
        else:
            residuals.append(float(
                np.linalg.norm(dictionary.V @ code.alpha - phi_std)
                * dictionary.feature_scale
            ))
    return InversionSet(
        patches=patches, residuals=residuals, gamma=gamma,
        affinity_kind=None, pre_clip_ranges=ranges, codes=codes,
    )


def subset_invert(
    phi: FeatureDescriptor,
    dictionary: PairedDictionary,
    N: int,
    extractor=None,
) -> InversionSet:
    """Multiple inversions over pairwise-disjoint basis subsets.

    Each inversion may only use atoms untouched by all previous supports;
    stops early with a warning if the basis runs out.
    """
    if N < 1:
        raise ContractError("N must be >= 1")
    if phi.grid != tuple(dictionary.feature_grid):
        raise ShapeError("descriptor does not match dictionary feature grid")
    phi_std = dictionary.standardize_feature(phi.values)
    allowed = np.ones(dictionary.K, dtype=bool)
    patches, residuals, ranges, codes = [], [], [], []
    for i in range(N):
        idx = np.flatnonzero(allowed)
        if idx.size == 0:
            warnings.warn(f"basis exhausted after {i} inversions (requested {N})")
            break
        code = solve_lasso(dictionary.V[:, idx], phi_std, dictionary.lam)
        alpha = np.zeros(dictionary.K)
        alpha[idx] = code.alpha
        allowed[idx[code.support]] = False
        raw = dictionary.destandardize_image(dictionary.U @ alpha)
        ranges.append((float(raw.min()), float(raw.max())))
        patch = ImagePatch.from_vector(np.clip(raw, 0.0, 1.0), dictionary.patch_shape)
        patches.append(patch)
        codes.append(alpha)
        if extractor is not None:
            residuals.append(float(np.linalg.norm(extractor(patch).values - phi.values)))
        else:
            residuals.append(float(
                np.linalg.norm(dictionary.V @ alpha - phi_std)
                * dictionary.feature_scale
            ))
    return InversionSet(
        patches=patches, residuals=residuals, gamma=0.0,
        affinity_kind=None, pre_clip_ranges=ranges, codes=codes,
    )


@njit(cache=True)
def _paint_triangle(img, cy, cx, radius, theta, intensity):
    h, w = img.shape[0], img.shape[1]
    vx = np.empty(3)
    vy = np.empty(3)
    for i in range(3):
        ang = theta + 2.0 * np.pi * i / 3.0
        vy[i] = cy + radius * np.sin(ang)
        vx[i] = cx + radius * np.cos(ang)
    y0 = max(0, int(np.floor(vy.min())))
    y1 = min(h - 1, int(np.ceil(vy.max())))
    x0 = max(0, int(np.floor(vx.min())))
    x1 = min(w - 1, int(np.ceil(vx.max())))
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            s0 = (vx[1] - vx[0]) * (y - vy[0]) - (vy[1] - vy[0]) * (x - vx[0])
            s1 = (vx[2] - vx[1]) * (y - vy[1]) - (vy[2] - vy[1]) * (x - vx[1])
            s2 = (vx[0] - vx[2]) * (y - vy[2]) - (vy[0] - vy[2]) * (x - vx[2])
            if (s0 >= 0 and s1 >= 0 and s2 >= 0) or (s0 <= 0 and s1 <= 0 and s2 <= 0):
                img[y, x, 0] = intensity


@njit(cache=True)
def _triangle_search(canvas, target, proposals, cell, trunc, eps):
    n = proposals.shape[0]
    trace = np.empty(n)
    feat = _hog_kernel(canvas, cell, trunc, eps)
    diff = feat.reshape(-1) - target
    best = (diff * diff).sum()
    for it in range(n):
        cand = canvas.copy()
        _paint_triangle(
            cand,
            proposals[it, 0], proposals[it, 1], proposals[it, 2],
            proposals[it, 3], proposals[it, 4],
        )
        feat = _hog_kernel(cand, cell, trunc, eps)
        diff = feat.reshape(-1) - target
        obj = (diff * diff).sum()
        if obj < best:
            best = obj
            canvas[:] = cand
        trace[it] = best
    return trace


def greedy_triangle_invert(
    phi: FeatureDescriptor,
    extractor,
    budget: int,
    seed: int = 0,
    return_trace: bool = False,
):
    """Hill-climb from mid-gray, accepting random triangles that reduce the
    feature mismatch. The accepted-objective trace is non-increasing."""
    if budget < 0:
        raise ContractError("budget must be >= 0")
    cell = _extractor_cell(extractor, None)
    gy, gx, d = phi.grid
    h, w = gy * cell, gx * cell
    canvas = np.full((h, w, 1), 0.5)
    rng = np.random.default_rng(seed)
    proposals = np.column_stack([
        rng.uniform(0, h, budget),             # center y
        rng.uniform(0, w, budget),             # center x
        np.exp(rng.uniform(np.log(2.0), np.log(max(h, w) / 2.0), budget)),
        rng.uniform(0, 2 * np.pi, budget),     # rotation
        rng.uniform(0, 1, budget),             # intensity
    ]) if budget else np.zeros((0, 5))

    if isinstance(extractor, HogExtractor):
        p = extractor.params
        trace = _triangle_search(
            canvas, phi.values, proposals, cell, p.truncation, p.epsilon
        )
    else:
        def obj_of(img):
            dv = extractor(ImagePatch(img)).values - phi.values
            return float(dv @ dv)

        best = obj_of(canvas)
        trace = np.empty(budget)
        for it in range(budget):
            cand = canvas.copy()
            _paint_triangle(cand, *proposals[it])
            obj = obj_of(cand)
            if obj < best:
                best = obj
                canvas = cand
            trace[it] = best
    patch = ImagePatch(canvas)
    if return_trace:
        return patch, trace
    return patch
