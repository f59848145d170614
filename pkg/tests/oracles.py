"""Independent reference implementations used as test oracles.

Everything here is written from the definitions, separately from the
package code paths it checks: a loop-based HOG, an exhaustive sign-support
solver for the sparse coding objective, scalar colorimetry, and dense
affinity matrices.
"""

import itertools
import math

import numpy as np


def naive_hog(image, cell=8, trunc=0.2, eps=1e-4):
    """Loop-based HOG reference: 18 signed + 9 unsigned + 4 texture dims.

    Follows the documented pipeline literally: replicated-border centered
    differences, max-magnitude channel, floor binning of the angle into 18
    signed orientations, bilinear cell voting, and four 2x2 neighborhood
    energy normalizations with zero energy outside the grid.
    """
    image = np.atleast_3d(np.asarray(image, dtype=float))
    h, w, nchan = image.shape
    cy, cx = h // cell, w // cell
    hist = np.zeros((cy, cx, 18))
    for y in range(h):
        for x in range(w):
            cands = []
            for c in range(nchan):
                dx = image[y, min(x + 1, w - 1), c] - image[y, max(x - 1, 0), c]
                dy = image[min(y + 1, h - 1), x, c] - image[max(y - 1, 0), x, c]
                cands.append((dx * dx + dy * dy, dx, dy))
            mag2, dx, dy = max(cands, key=lambda t: t[0])
            if mag2 <= 0:
                continue
            theta = math.atan2(dy, dx) % (2 * math.pi)
            b = min(int(theta / (2 * math.pi / 18)), 17)
            fy = (y + 0.5) / cell - 0.5
            fx = (x + 0.5) / cell - 0.5
            iy0, ix0 = math.floor(fy), math.floor(fx)
            for iy, wy in ((iy0, 1 - (fy - iy0)), (iy0 + 1, fy - iy0)):
                for ix, wx in ((ix0, 1 - (fx - ix0)), (ix0 + 1, fx - ix0)):
                    if 0 <= iy < cy and 0 <= ix < cx:
                        hist[iy, ix, b] += math.sqrt(mag2) * wy * wx

    unsigned = hist[:, :, :9] + hist[:, :, 9:]
    energy = (unsigned**2).sum(axis=2)

    def cell_energy(iy, ix):
        if 0 <= iy < cy and 0 <= ix < cx:
            return energy[iy, ix]
        return 0.0

    out = np.zeros((cy, cx, 31))
    for iy in range(cy):
        for ix in range(cx):
            for ni, (sy, sx) in enumerate([(-1, -1), (-1, 1), (1, -1), (1, 1)]):
                block = (
                    cell_energy(iy, ix)
                    + cell_energy(iy + sy, ix)
                    + cell_energy(iy, ix + sx)
                    + cell_energy(iy + sy, ix + sx)
                )
                norm = 1.0 / math.sqrt(block + eps)
                signed = np.minimum(hist[iy, ix] * norm, trunc)
                out[iy, ix, :18] += 0.5 * signed
                out[iy, ix, 18:27] += 0.5 * np.minimum(unsigned[iy, ix] * norm, trunc)
                out[iy, ix, 27 + ni] = 0.2357 * signed.sum()
    return out


def exhaustive_sparse_solve(V, phi, lam, B=None):
    """Global minimum of ||Va - phi||^2 + lam|a|_1 + a'Ba by support search.

    Enumerates every support set; for each, solves the stationarity system
    for every sign pattern and keeps KKT-consistent candidates. Intended
    for K <= 12.
    """
    V = np.asarray(V, dtype=float)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    K = V.shape[1]
    G = V.T @ V
    if B is not None:
        G = G + np.asarray(B, dtype=float)
    c = V.T @ phi
    const = float(phi @ phi)

    def objective(alpha):
        return float(alpha @ G @ alpha - 2 * c @ alpha + lam * np.abs(alpha).sum() + const)

    best_alpha = np.zeros(K)
    best_obj = objective(best_alpha)
    for size in range(1, K + 1):
        for support in itertools.combinations(range(K), size):
            S = np.array(support)
            Gss = G[np.ix_(S, S)]
            # singular supports cannot host an isolated stationary point;
            # near-singular ones produce numerically meaningless candidates
            if np.linalg.cond(Gss) > 1e10:
                continue
            M = np.linalg.inv(Gss)
            base = M @ c[S]
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=size)))
            cands = base[None, :] - 0.5 * lam * (signs @ M.T)
            ok = np.all(cands * signs > 0, axis=1)
            for row in cands[ok]:
                alpha = np.zeros(K)
                alpha[S] = row
                obj = objective(alpha)
                if obj < best_obj:
                    best_obj = obj
                    best_alpha = alpha
    return best_alpha, best_obj


def srgb_to_lab_scalar(r, g, b):
    """Scalar sRGB (D65) -> L*a*b*, written from the standard definitions."""

    def decode(u):
        return ((u + 0.055) / 1.055) ** 2.4 if u > 0.04045 else u / 12.92

    rl, gl, bl = decode(r), decode(g), decode(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    xn, yn, zn = 0.95047, 1.0, 1.08883

    def f(t):
        return t ** (1 / 3) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(x / xn), f(y / yn), f(z / zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def dense_edge_affinity(h, w, channels=1):
    """Dense A = C'C for the [-1 0 1] edge filters, full-stencil rows only
    (so constant images are annihilated)."""
    P = h * w * channels

    def idx(y, x, ch):
        return (y * w + x) * channels + ch

    rows = []
    for ch in range(channels):
        for y in range(h):
            for x in range(1, w - 1):
                row = np.zeros(P)
                row[idx(y, x + 1, ch)] = 1.0
                row[idx(y, x - 1, ch)] = -1.0
                rows.append(row)
        for y in range(1, h - 1):
            for x in range(w):
                row = np.zeros(P)
                row[idx(y + 1, x, ch)] = 1.0
                row[idx(y - 1, x, ch)] = -1.0
                rows.append(row)
    C = np.stack(rows)
    return C.T @ C


def dense_color_affinity(h, w):
    """Dense A = C'C where C averages each of the three channels."""
    P = h * w * 3
    C = np.zeros((3, P))
    for ch in range(3):
        for y in range(h):
            for x in range(w):
                C[ch, (y * w + x) * 3 + ch] = 1.0 / (h * w)
    return C.T @ C
