import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import featinvert as fi
from featinvert.errors import ContractError, CorpusError, NumericError, ShapeError

from oracles import exhaustive_sparse_solve


def random_instance(rng, Q=6, K=4):
    V = rng.normal(size=(Q, K))
    phi = rng.normal(size=Q)
    return V, phi


class TestSolveLasso:
    def test_unregularized_square_system(self, rng):
        V = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        phi = rng.normal(size=5)
        code = fi.solve_lasso(V, phi, 0.0)
        assert np.allclose(code.alpha, np.linalg.solve(V, phi), atol=1e-6)

    def test_zero_target(self, rng):
        V = rng.normal(size=(6, 4))
        code = fi.solve_lasso(V, np.zeros(6), 0.5)
        assert np.all(code.alpha == 0.0)
        assert code.objective == 0.0

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(20):
            V, phi = random_instance(rng, Q=5, K=3)
            lam = float(rng.uniform(0.01, 1.0))
            code = fi.solve_lasso(V, phi, lam)
            _, obj = exhaustive_sparse_solve(V, phi, lam)
            assert code.objective == pytest.approx(obj, rel=1e-8, abs=1e-10)

    def test_support_matches_nonzeros(self, rng):
        V, phi = random_instance(rng)
        code = fi.solve_lasso(V, phi, 0.3)
        assert np.array_equal(code.support, np.flatnonzero(code.alpha))

    def test_objective_field_consistent(self, rng):
        V, phi = random_instance(rng)
        code = fi.solve_lasso(V, phi, 0.2)
        direct = float(np.sum((V @ code.alpha - phi) ** 2)
                       + 0.2 * np.abs(code.alpha).sum())
        assert code.objective == pytest.approx(direct, rel=1e-9)

    def test_kkt_conditions(self, rng):
        # subgradient optimality: |grad| <= lam/2 on zeros, tight on support
        for _ in range(10):
            V, phi = random_instance(rng, Q=8, K=6)
            lam = 0.4
            code = fi.solve_lasso(V, phi, lam)
            grad = V.T @ (V @ code.alpha - phi)
            on = code.alpha != 0
            assert np.all(np.abs(grad[~on]) <= lam / 2 + 1e-6)
            assert np.allclose(grad[on], -np.sign(code.alpha[on]) * lam / 2,
                               atol=1e-6)

    def test_negative_lambda(self, rng):
        V, phi = random_instance(rng)
        with pytest.raises(ContractError):
            fi.solve_lasso(V, phi, -0.1)

    def test_non_finite_input(self, rng):
        V, phi = random_instance(rng)
        phi[0] = np.nan
        with pytest.raises(NumericError):
            fi.solve_lasso(V, phi, 0.1)

    def test_dim_mismatch(self, rng):
        V, phi = random_instance(rng)
        with pytest.raises(ShapeError):
            fi.solve_lasso(V, phi[:-1], 0.1)

    def test_scaling_equivariance(self, rng):
        # (cV, c*phi) with lam scaled by c^2 scales the objective by c^2
        V, phi = random_instance(rng)
        c = 3.0
        base = fi.solve_lasso(V, phi, 0.2)
        scaled = fi.solve_lasso(c * V, c * phi, 0.2 * c * c)
        assert scaled.objective == pytest.approx(c * c * base.objective, rel=1e-6)
        assert np.array_equal(scaled.support, base.support)


class TestSolveElastic:
    def test_empty_penalty_bit_identical(self, rng):
        V, phi = random_instance(rng)
        a = fi.solve_lasso(V, phi, 0.3)
        b = fi.solve_elastic(V, phi, 0.3, fi.QuadraticPenalty())
        c = fi.solve_elastic(V, phi, 0.3, None)
        assert np.array_equal(a.alpha, b.alpha)
        assert np.array_equal(a.alpha, c.alpha)
        assert a.objective == b.objective == c.objective

    def test_huge_gamma_kills_alpha(self, rng):
        V, phi = random_instance(rng, Q=6, K=4)
        phi /= np.linalg.norm(phi)
        V /= np.linalg.norm(V, axis=0)
        penalty = fi.QuadraticPenalty.from_matrices(1e6, [np.eye(4)])
        code = fi.solve_elastic(V, phi, 0.1, penalty)
        assert np.linalg.norm(code.alpha) < 1e-3

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(15):
            V, phi = random_instance(rng, Q=5, K=4)
            lam = float(rng.uniform(0.05, 0.8))
            g = rng.normal(size=(2, 4))
            penalty = fi.QuadraticPenalty.from_vectors(0.7, g)
            code = fi.solve_elastic(V, phi, lam, penalty)
            _, obj = exhaustive_sparse_solve(V, phi, lam, B=0.7 * g.T @ g)
            assert code.objective == pytest.approx(obj, rel=1e-8, abs=1e-10)

    def test_asymmetric_matrix_rejected(self):
        B = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ContractError):
            fi.QuadraticPenalty.from_matrices(1.0, [B])

    def test_indefinite_matrix_rejected(self):
        B = np.diag([1.0, -1.0])
        with pytest.raises(ContractError):
            fi.QuadraticPenalty.from_matrices(1.0, [B])

    def test_from_matrices_factorization(self, rng):
        M = rng.normal(size=(4, 4))
        B = M.T @ M
        penalty = fi.QuadraticPenalty.from_matrices(2.0, [B])
        assert np.allclose(penalty.gram(4), 2.0 * B, atol=1e-10)
        a = rng.normal(size=4)
        assert penalty.evaluate(a) == pytest.approx(2.0 * a @ B @ a)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ContractError):
            fi.QuadraticPenalty(gamma=-1.0)


class TestDictionaryLearning:
    def test_memorization(self, rng, extractor):
        arr = fi.synth_image(3, size=32, grayscale=True)
        corpus = fi.PatchCorpus(patches=[arr])
        d = fi.learn_paired_dictionary(corpus, extractor, K=1, lam=1e-4,
                                       epochs=12, seed=0)
        rec = fi.invert_single(extractor(arr), d)
        assert fi.ncc(arr, rec) > 0.99

    def test_column_norm_projection(self, tiny_dict):
        assert np.all(np.sum(tiny_dict.U**2, axis=0) <= tiny_dict.psi1 + 1e-6)
        assert np.all(np.sum(tiny_dict.V**2, axis=0) <= tiny_dict.psi2 + 1e-6)

    def test_objective_monotone_fresh(self, small_gray_corpus, extractor):
        d = fi.learn_paired_dictionary(small_gray_corpus, extractor, K=16,
                                       lam=0.1, epochs=8, seed=1)
        objs = np.array(d.objectives)
        assert np.all(np.diff(objs) <= 1e-6 * np.abs(objs[:-1]))

    def test_determinism(self, small_gray_corpus, extractor):
        a = fi.learn_paired_dictionary(small_gray_corpus, extractor, K=8,
                                       lam=0.1, epochs=3, seed=7)
        b = fi.learn_paired_dictionary(small_gray_corpus, extractor, K=8,
                                       lam=0.1, epochs=3, seed=7)
        assert np.array_equal(a.U, b.U)
        assert np.array_equal(a.V, b.V)

    def test_k_exceeds_corpus_warns(self, extractor):
        patches = [fi.synth_image(s, size=16, grayscale=True) for s in range(3)]
        corpus = fi.PatchCorpus(patches=patches)
        with pytest.warns(UserWarning):
            fi.learn_paired_dictionary(corpus, extractor, K=8, lam=0.1,
                                       epochs=2, seed=0)

    def test_empty_corpus(self, extractor):
        with pytest.raises(CorpusError):
            fi.learn_paired_dictionary(fi.PatchCorpus(), extractor, K=4)

    def test_planted_dictionary_recovery(self):
        best, objectives = planted_recovery()
        assert np.sum(best > 0.9) >= 8
        assert np.all(np.diff(objectives) <= 1e-6 * np.abs(objectives[:-1]))


def planted_recovery():
    """Learn from 2-sparse combinations of 10 planted atoms; return the best
    cosine match per planted atom and the per-epoch objectives.

    An over-complete K avoids the stuck-atom local minima of
    exactly-determined learning.
    """
    rng = np.random.default_rng(0)
    planted = rng.normal(size=(40, 10))
    planted /= np.linalg.norm(planted, axis=0)

    n = 500
    signals = np.zeros((n, 40))
    for i in range(n):
        idx = rng.choice(10, 2, replace=False)
        coef = rng.normal(size=2)
        signals[i] = planted[:, idx] @ coef
    # pack signals as 'patches': first 20 dims image, last 20 feature.
    # ImagePatch requires [0,1]; rescale into range.
    lo, hi = signals.min(), signals.max()
    scaled = (signals - lo) / (hi - lo)
    patches = [fi.ImagePatch(scaled[i].reshape(5, 8, 1)) for i in range(n)]

    class SplitExtractor:
        def __call__(self, patch):
            return fi.FeatureDescriptor(values=patch.pixels[20:],
                                        grid=(1, 1, 20))

        def descriptor_grid(self, patch_shape):
            return (1, 1, 20)

    corpus = fi.PatchCorpus(patches=patches)
    d = fi.learn_paired_dictionary(corpus, SplitExtractor(), K=15,
                                   lam=0.15, epochs=30, seed=0)
    # the image half of each stacked atom is, up to scale, a planted
    # atom direction (the zero-mean coefficients make the corpus mean
    # approximately constant, which standardization removes)
    learned = d.U / np.maximum(np.linalg.norm(d.U, axis=0), 1e-12)
    cos = np.abs(planted.T @ learned)  # (10, K)
    return cos.max(axis=1), np.asarray(d.objectives)


class TestDictionaryIO:
    def test_save_load_round_trip(self, tmp_path, tiny_dict):
        path = str(tmp_path / "d.pdct")
        tiny_dict.save(path)
        back = fi.PairedDictionary.load(path)
        assert np.allclose(back.U, tiny_dict.U, atol=1e-6)
        assert np.allclose(back.V, tiny_dict.V, atol=1e-6)
        assert back.lam == tiny_dict.lam
        assert tuple(back.patch_shape) == tuple(tiny_dict.patch_shape)
        assert tuple(back.feature_grid) == tuple(tiny_dict.feature_grid)
        assert back.image_scale == pytest.approx(tiny_dict.image_scale)

    def test_magic_check(self, tmp_path):
        path = str(tmp_path / "junk.pdct")
        with open(path, "wb") as fh:
            fh.write(b"JUNKJUNKJUNK")
        with pytest.raises(fi.FeatInvertError):
            fi.PairedDictionary.load(path)


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 2.0))
def test_lasso_oracle_property(seed, lam):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 7))
    V = rng.normal(size=(int(rng.integers(2, 9)), K))
    phi = rng.normal(size=V.shape[0])
    code = fi.solve_lasso(V, phi, lam)
    _, obj = exhaustive_sparse_solve(V, phi, lam)
    assert code.objective <= obj * (1 + 1e-8) + 1e-10
