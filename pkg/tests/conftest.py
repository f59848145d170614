"""Shared fixtures. Heavy artifacts (dictionaries, Gaussian models, window
databases) are built once per machine into a disk cache so repeated test
runs stay fast; everything in the cache is a pure function of the seeds
baked in here.
"""

import os

import numpy as np
import pytest

import featinvert as fi

CACHE = os.environ.get(
    "FEATINVERT_TEST_CACHE",
    os.path.join(os.path.dirname(__file__), os.pardir, ".cache", "testdata"),
)
CACHE = os.path.abspath(CACHE)


def cache_path(name):
    os.makedirs(CACHE, exist_ok=True)
    return os.path.join(CACHE, name)


@pytest.fixture(scope="session")
def extractor():
    return fi.HogExtractor()


@pytest.fixture(scope="session")
def train_images():
    """Directory of synthetic RGB training images."""
    return fi.synth_image_dir(cache_path("train_imgs"), 120, seed=11)


@pytest.fixture(scope="session")
def test_images():
    """Held-out synthetic images, disjoint seed stream from train_images."""
    return fi.synth_image_dir(cache_path("test_imgs"), 40, seed=77)


@pytest.fixture(scope="session")
def small_gray_corpus(train_images):
    return fi.sample_patches(train_images, (32, 32, 1), 60, seed=3)


@pytest.fixture(scope="session")
def small_rgb_corpus(train_images):
    return fi.sample_patches(train_images, (16, 16, 3), 80, seed=4)


@pytest.fixture(scope="session")
def tiny_dict(small_gray_corpus, extractor):
    """A quick 32x32 gray dictionary for contract-level tests."""
    path = cache_path("tiny_gray32_k64.pdct")
    if not os.path.exists(path):
        d = fi.learn_paired_dictionary(
            small_gray_corpus, extractor, K=64, lam=0.1, epochs=6, seed=0
        )
        d.save(path)
    return fi.PairedDictionary.load(path)


@pytest.fixture(scope="session")
def tiny_rgb_dict(small_rgb_corpus, extractor):
    path = cache_path("tiny_rgb16_k64.pdct")
    if not os.path.exists(path):
        d = fi.learn_paired_dictionary(
            small_rgb_corpus, extractor, K=64, lam=0.1, epochs=6, seed=0
        )
        d.save(path)
    return fi.PairedDictionary.load(path)


@pytest.fixture(scope="session")
def gauss_model(train_images, extractor):
    path = cache_path("gauss_t9.sgau")
    if not os.path.exists(path):
        corpus = fi.sample_patches(train_images, (96, 96, 1), 120, seed=21)
        model = fi.fit_stationary_gaussian(corpus, extractor, lambda_reg=0.01,
                                           max_offset=9)
        model.save(path)
    return fi.StationaryGaussianModel.load(path)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


# ----------------------------------------------------------------------
# Desk-scale artifacts for the acceptance suite. Slow to build the first
# time (the RGB dictionary dominates), then served from the cache.

@pytest.fixture(scope="session")
def accept_gray_dict(train_images, extractor):
    """64x64 grayscale dictionary for the benchmark-scale tests."""
    path = cache_path("accept_gray64_k256.pdct")
    if not os.path.exists(path):
        corpus = fi.sample_patches(train_images, (64, 64, 1), 5000, seed=31)
        d = fi.learn_paired_dictionary(corpus, extractor, K=256, lam=12.0,
                                       epochs=6, seed=0)
        d.save(path)
    return fi.PairedDictionary.load(path)


@pytest.fixture(scope="session")
def accept_elda_db(train_images, extractor, gauss_model):
    path = cache_path("accept_elda64_big")
    if not os.path.exists(path):
        wins = fi.sample_patches(train_images, (64, 64, 1), 8000, seed=41)
        db = fi.build_elda_database(wins, extractor, gauss_model)
        db.save(path)
    return fi.EldaDatabase.load(path)


@pytest.fixture(scope="session")
def accept_held64(test_images):
    """Held-out 64x64 grayscale patches, disjoint from all training data."""
    return fi.sample_patches(test_images, (64, 64, 1), 200, seed=55)


@pytest.fixture(scope="session")
def accept_rgb_dict(train_images, extractor):
    """16x16 RGB dictionary, K=512, 50k training patches."""
    path = cache_path("accept_rgb16_k512.pdct")
    if not os.path.exists(path):
        corpus = fi.sample_patches(train_images, (16, 16, 3), 50000, seed=33)
        d = fi.learn_paired_dictionary(corpus, extractor, K=512, lam=2.0,
                                       epochs=3, seed=0)
        d.save(path)
    return fi.PairedDictionary.load(path)


@pytest.fixture(scope="session")
def accept_held_rgb(test_images):
    return fi.sample_patches(test_images, (16, 16, 3), 100, seed=66)
