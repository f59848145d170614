"""
Comparing the four single-inversion baselines
=============================================

Runs the paired dictionary against exemplar-LDA retrieval, ridge
regression under a stationary Gaussian prior, and direct optimization
over an eigen-image basis, scoring each with normalized cross
correlation on a handful of held-out patches.

    python3 demos/baseline_shootout.py

Expect a couple of minutes on a laptop; the Gaussian fit and the
dictionary are the slow parts and are computed once.
"""

import os

import numpy as np

import featinvert as fi

out_dir = os.path.join(os.path.dirname(__file__), "_out", "shootout")
os.makedirs(out_dir, exist_ok=True)

train_dir = fi.synth_image_dir(os.path.join(out_dir, "train"), 60, seed=11)
test_dir = fi.synth_image_dir(os.path.join(out_dir, "test"), 10, seed=77)
extractor = fi.HogExtractor()

corpus = fi.sample_patches(train_dir, (64, 64, 1), 800, seed=31)
dictionary = fi.learn_paired_dictionary(
    corpus, extractor, K=128, lam=12.0, epochs=4, seed=0
)

# The Gaussian model backs both the ridge inverter and ELDA's whitening.
gauss_corpus = fi.sample_patches(train_dir, (96, 96, 1), 80, seed=21)
gauss = fi.fit_stationary_gaussian(gauss_corpus, extractor,
                                   lambda_reg=0.01, max_offset=9)
windows = fi.sample_patches(train_dir, (64, 64, 1), 800, seed=41)
elda_db = fi.build_elda_database(windows, extractor, gauss)

held = fi.sample_patches(test_dir, (64, 64, 1), 10, seed=55)
grid = extractor(held[0]).grid
basis = fi.build_eigen_basis(gauss, (grid[0], grid[1]))

methods = {
    "pairdict": lambda p: fi.invert_single(p, dictionary),
    "ridge": lambda p: fi.ridge_invert(p, gauss),
    "elda": lambda p: fi.elda_invert(p, elda_db, topk=20),
    "direct": lambda p: fi.direct_invert(p, basis, extractor,
                                         restarts=2, seed=0),
}
report = fi.run_ncc_benchmark(held, methods, extractor)
for name in methods:
    print(f"{name}: mean NCC {report.mean(name):.3f}")
report.to_csv(os.path.join(out_dir, "ncc.csv"))
print(f"per-patch scores in {out_dir}/ncc.csv")
