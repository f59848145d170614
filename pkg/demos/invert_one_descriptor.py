"""
Invert a HOG descriptor back to an image
========================================

A quick tour of the core pipeline: build a small synthetic image set,
sample grayscale patches, learn a paired dictionary, then invert the
descriptor of a held-out image and save the result next to a HOG glyph.

Run from the repo root:

    python3 demos/invert_one_descriptor.py
"""

import os

import numpy as np

import featinvert as fi

out_dir = os.path.join(os.path.dirname(__file__), "_out", "invert_one")
os.makedirs(out_dir, exist_ok=True)

# ---------------------------------------------------------------------
# Training data. The synth module draws seeded dead-leaves style images,
# so the whole demo is deterministic and needs no downloads.
img_dir = fi.synth_image_dir(os.path.join(out_dir, "imgs"), 40, seed=11)
corpus = fi.sample_patches(img_dir, (32, 32, 1), 400, seed=3)
print(f"sampled {len(corpus)} patches of shape {corpus[0].data.shape}")

# ---------------------------------------------------------------------
# Learn the paired dictionary: one basis over pixels, one over HOG
# features, tied through shared sparse codes.
extractor = fi.HogExtractor()
dictionary = fi.learn_paired_dictionary(
    corpus, extractor, K=96, lam=0.5, epochs=6, seed=0
)
print(f"training objective per epoch: "
      + ", ".join(f"{o:.3f}" for o in dictionary.objectives))

# ---------------------------------------------------------------------
# Invert a held-out image. Only its descriptor is given to the solver.
target = fi.synth_image(900, size=32, grayscale=True)
phi = extractor(target)
recon = fi.invert_single(phi, dictionary)
print(f"NCC(target, reconstruction) = {fi.ncc(target, recon):.3f}")

fi.save_image(target, os.path.join(out_dir, "target.png"))
fi.save_image(recon, os.path.join(out_dir, "reconstruction.png"))

# The familiar black-and-white HOG diagram, for comparison with what the
# inversion recovers.
fi.save_image(fi.hog_glyph(phi, scale=16), os.path.join(out_dir, "glyph.png"))
print(f"wrote target.png, reconstruction.png, glyph.png to {out_dir}")
