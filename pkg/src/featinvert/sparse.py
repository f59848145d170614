"""Sparse coding (lasso / elastic net) and paired dictionary learning.

The solver is cyclic coordinate descent on the Gram system with
soft-thresholding; the structured quadratic penalties used by the
multiple-inversion path enter only through the Gram matrix, so lasso and
elastic-net solves share one kernel. Dictionary learning alternates exact
batch sparse coding with block-coordinate atom updates projected onto the
per-part column-norm constraints.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import ContractError, CorpusError, NumericError, ShapeError
from .features import FeatureExtractor
from .imaging import PatchCorpus

_DICT_MAGIC = b"PDCT"
_DICT_VERSION = 1


@dataclass(eq=False)
class SparseCode:
    """Solution of a sparse coding problem."""

    alpha: np.ndarray
    support: np.ndarray
    objective: float


@dataclass(eq=False)
class QuadraticPenalty:
    """Weighted sum of PSD quadratic terms gamma * sum_j alpha' B_j alpha.

    Terms are kept in factored form: each row f of `factors` contributes
    B_j = f f'. Dense symmetric PSD matrices can be attached through
    from_matrices, which factors them by eigendecomposition.
    """

    gamma: float = 0.0
    factors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.factors = np.atleast_2d(np.asarray(self.factors, dtype=np.float64))
        if self.gamma < 0:
            raise ContractError("penalty weight must be >= 0")

    @classmethod
    def from_vectors(cls, gamma, vectors) -> "QuadraticPenalty":
        return cls(gamma=gamma, factors=np.atleast_2d(np.asarray(vectors, dtype=float)))

    @classmethod
    def from_matrices(cls, gamma, matrices) -> "QuadraticPenalty":
        rows = []
        for B in matrices:
            B = np.asarray(B, dtype=np.float64)
            if not np.allclose(B, B.T, atol=1e-10):
                raise ContractError("penalty matrix must be symmetric")
            evals, evecs = np.linalg.eigh(B)
            if evals.min() < -1e-8 * max(1.0, evals.max()):
                raise ContractError("penalty matrix must be positive semidefinite")
            keep = evals > 0
            rows.append((evecs[:, keep] * np.sqrt(evals[keep])).T)
        factors = np.vstack(rows) if rows else np.zeros((0, 0))
        return cls(gamma=gamma, factors=factors)

    @property
    def empty(self) -> bool:
        return self.gamma == 0.0 or self.factors.size == 0

    def gram(self, k: int) -> np.ndarray:
        """The K x K matrix gamma * sum_j B_j."""
        if self.empty:
            return np.zeros((k, k))
        if self.factors.shape[1] != k:
            raise ShapeError(
                f"penalty factors have {self.factors.shape[1]} columns, expected {k}"
            )
        return self.gamma * (self.factors.T @ self.factors)

    def evaluate(self, alpha) -> float:
        if self.empty:
            return 0.0
        return float(self.gamma * np.sum((self.factors @ alpha) ** 2))


@njit(cache=True)
def _cd_kernel(G, c, lam, tol, max_passes):
    """Cyclic coordinate descent for min a'Ga - 2c'a + lam*|a|_1 (+ const)."""
    k = G.shape[0]
    alpha = np.zeros(k)
    q = np.zeros(k)  # q = G @ alpha, maintained incrementally
    thr = 0.5 * lam
    for _ in range(max_passes):
        max_step = 0.0
        max_val = 0.0
        for i in range(k):
            gii = G[i, i]
            if gii <= 0.0:
                continue
            old = alpha[i]
            rho = c[i] - (q[i] - gii * old)
            if rho > thr:
                new = (rho - thr) / gii
            elif rho < -thr:
                new = (rho + thr) / gii
            else:
                new = 0.0
            if new != old:
                d = new - old
                for j in range(k):
                    q[j] += d * G[j, i]
                alpha[i] = new
            step = abs(new - old)
            if step > max_step:
                max_step = step
            a = abs(new)
            if a > max_val:
                max_val = a
        if max_step <= tol * max(max_val, 1e-12):
            break
    return alpha


@njit(cache=True, parallel=True)
def _cd_batch_kernel(G, C, lam, tol, max_passes):
    n, k = C.shape
    out = np.zeros((n, k))
    for s in prange(n):
        out[s] = _cd_kernel(G, C[s], lam, tol, max_passes)
    return out


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values in solver input")


def _make_code(V, phi, lam, alpha, penalty=None):
    resid = V @ alpha - phi
    objective = float(resid @ resid + lam * np.abs(alpha).sum())
    if penalty is not None:
        objective += penalty.evaluate(alpha)
    support = np.flatnonzero(alpha)
    return SparseCode(alpha=alpha, support=support, objective=objective)


def solve_lasso(V, phi, lam, tol=1e-7, max_passes=10000) -> SparseCode:
    """Minimize ||V a - phi||^2 + lam * ||a||_1 by coordinate descent."""
    V = np.asarray(V, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if lam < 0:
        raise ContractError("lambda must be >= 0")
    if V.shape[0] != phi.size:
        raise ShapeError(f"V has {V.shape[0]} rows but phi has {phi.size} entries")
    _check_finite(V, phi)
    G = V.T @ V
    c = V.T @ phi
    alpha = _cd_kernel(G, c, lam, tol, max_passes)
    return _make_code(V, phi, lam, alpha)


def solve_elastic(V, phi, lam, penalty: QuadraticPenalty | None, tol=1e-7,
                  max_passes=10000) -> SparseCode:
    """Minimize ||V a - phi||^2 + lam*||a||_1 + gamma * sum_j a'B_j a.

    With an empty penalty this runs the identical code path as solve_lasso
    and returns a bit-identical solution.
    """
    if penalty is None or penalty.empty:
        return solve_lasso(V, phi, lam, tol=tol, max_passes=max_passes)
    V = np.asarray(V, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    if lam < 0:
        raise ContractError("lambda must be >= 0")
    _check_finite(V, phi, penalty.factors)
    G = V.T @ V + penalty.gram(V.shape[1])
    c = V.T @ phi
    alpha = _cd_kernel(G, c, lam, tol, max_passes)
    return _make_code(V, phi, lam, alpha, penalty=penalty)


@dataclass(eq=False)
class PairedDictionary:
    """Coupled image/feature bases with shared sparse coefficients.

    U maps codes to standardized image vectors, V to scaled feature vectors.
    Standardization: images are centered by mean_image and divided by the
    scalar image_scale; features are divided by feature_scale (not centered,
    so a zero descriptor stays zero).
    """

    U: np.ndarray
    V: np.ndarray
    lam: float
    psi1: float
    psi2: float
    patch_shape: tuple
    feature_grid: tuple
    mean_image: np.ndarray
    image_scale: float
    feature_scale: float
    objectives: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.U.shape[1]

    @property
    def P(self) -> int:
        return self.U.shape[0]

    @property
    def Q(self) -> int:
        return self.V.shape[0]

    def standardize_image(self, x):
        return (np.asarray(x, dtype=float).reshape(-1) - self.mean_image) / self.image_scale

    def destandardize_image(self, xs):
        return np.asarray(xs, dtype=float).reshape(-1) * self.image_scale + self.mean_image

    def standardize_feature(self, phi):
        return np.asarray(phi, dtype=float).reshape(-1) / self.feature_scale

    def save(self, path):
        ph, pw, pc = self.patch_shape
        gy, gx, gd = self.feature_grid
        header = _DICT_MAGIC + struct.pack(
            "<IIIIdddIIIIII",
            _DICT_VERSION,
            self.P,
            self.Q,
            self.K,
            self.lam,
            self.psi1,
            self.psi2,
            ph, pw, pc, gy, gx, gd,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(struct.pack("<dd", self.image_scale, self.feature_scale))
            fh.write(self.mean_image.astype("<f4").tobytes())
            fh.write(np.asfortranarray(self.U.astype("<f4")).tobytes(order="F"))
            fh.write(np.asfortranarray(self.V.astype("<f4")).tobytes(order="F"))

    @classmethod
    def load(cls, path) -> "PairedDictionary":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != _DICT_MAGIC:
            raise NumericError(f"{path} is not a paired dictionary file")
        fields = struct.unpack("<IIIIdddIIIIII", blob[4:4 + struct.calcsize("<IIIIdddIIIIII")])
        version, P, Q, K, lam, psi1, psi2, ph, pw, pc, gy, gx, gd = fields
        off = 4 + struct.calcsize("<IIIIdddIIIIII")
        image_scale, feature_scale = struct.unpack("<dd", blob[off : off + 16])
        off += 16
        mean_image = np.frombuffer(blob[off : off + 4 * P], dtype="<f4").astype(float)
        off += 4 * P
        U = np.frombuffer(blob[off : off + 4 * P * K], dtype="<f4").astype(float)
        U = U.reshape((P, K), order="F")
        off += 4 * P * K
        V = np.frombuffer(blob[off : off + 4 * Q * K], dtype="<f4").astype(float)
        V = V.reshape((Q, K), order="F")
        return cls(
            U=U, V=V, lam=lam, psi1=psi1, psi2=psi2,
            patch_shape=(ph, pw, pc), feature_grid=(gy, gx, gd),
            mean_image=mean_image, image_scale=image_scale,
            feature_scale=feature_scale,
        )


def _project_columns(D, p, psi1, psi2):
    """Clip each column so ||u||^2 <= psi1 (top p rows) and ||v||^2 <= psi2."""
    for part, bound in (((slice(0, p)), psi1), ((slice(p, None)), psi2)):
        block = D[part]
        norms = np.sqrt((block**2).sum(axis=0))
        limit = np.sqrt(bound)
        over = norms > limit
        if np.any(over):
            block[:, over] *= limit / norms[over]


def learn_paired_dictionary(
    corpus: PatchCorpus,
    extractor: FeatureExtractor,
    K: int,
    lam: float = 0.1,
    psi1: float = 1.0,
    psi2: float = 1.0,
    epochs: int = 10,
    seed: int = 0,
    standardize: bool = True,
    tol: float = 1e-6,
) -> PairedDictionary:
    """Learn coupled bases by alternating sparse coding and atom updates.

    Each epoch codes the full stacked corpus [image; feature] against the
    stacked dictionary [U; V], then performs one pass of block-coordinate
    atom updates with projection onto the column-norm constraints. The
    training objective is recorded per epoch and is non-increasing.
    """
    if len(corpus) == 0:
        raise CorpusError("cannot learn a dictionary from an empty corpus")
    if K < 1:
        raise ContractError("K must be >= 1")
    if K > len(corpus):
        warnings.warn(
            f"K={K} exceeds the corpus size {len(corpus)}; atoms may be redundant"
        )
    X = corpus.as_matrix()
    Phi = np.stack([extractor(p).values for p in corpus.patches])
    grid = extractor.descriptor_grid(corpus.patch_shape)
    n, p = X.shape
    q = Phi.shape[1]

    if standardize:
        mean_image = X.mean(axis=0)
        image_scale = float(np.sqrt(((X - mean_image) ** 2).mean())) or 1.0
        feature_scale = float(np.sqrt((Phi**2).mean())) or 1.0
    else:
        mean_image = np.zeros(p)
        image_scale = 1.0
        feature_scale = 1.0
    Z = np.hstack([(X - mean_image) / image_scale, Phi / feature_scale])

    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=K, replace=K > n)
    D = Z[picks].T + 0.01 * rng.standard_normal((p + q, K))
    _project_columns(D, p, psi1, psi2)

    objectives = []
    codes = np.zeros((n, K))
    for _ in range(epochs):
        G = D.T @ D
        C = Z @ D
        codes = _cd_batch_kernel(G, C, lam, 1e-7, 2000)
        AtA = codes.T @ codes
        ZtA = Z.T @ codes
        for k in range(K):
            akk = AtA[k, k]
            if akk <= 1e-12:
                continue
            D[:, k] += (ZtA[:, k] - D @ AtA[:, k]) / akk
            _project_columns(D[:, k : k + 1], p, psi1, psi2)
        resid = Z - codes @ D.T
        obj = float((resid**2).sum() + lam * np.abs(codes).sum())
        objectives.append(obj)

    return PairedDictionary(
        U=D[:p].copy(),
        V=D[p:].copy(),
        lam=lam,
        psi1=psi1,
        psi2=psi2,
        patch_shape=corpus.patch_shape,
        feature_grid=grid,
        mean_image=mean_image,
        image_scale=image_scale,
        feature_scale=feature_scale,
        objectives=objectives,
    )
