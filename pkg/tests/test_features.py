import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import featinvert as fi
from featinvert.errors import FormatError, ShapeError

from oracles import naive_hog


class TestHogExtract:
    def test_constant_patch_near_zero(self):
        img = fi.ImagePatch(np.full((16, 16, 1), 0.37))
        desc = fi.hog_extract(img)
        assert np.max(np.abs(desc.values)) < 1e-6

    def test_grid_shape(self, rng):
        img = fi.ImagePatch(rng.uniform(0, 1, (24, 40, 1)))
        desc = fi.hog_extract(img)
        assert desc.grid == (3, 5, 31)
        assert desc.values.size == 3 * 5 * 31

    def test_non_divisible_dims(self, rng):
        with pytest.raises(ShapeError):
            fi.hog_extract(fi.ImagePatch(rng.uniform(0, 1, (17, 16, 1))))

    def test_matches_naive_oracle_gray(self, rng):
        for _ in range(10):
            arr = rng.uniform(0, 1, (32, 32, 1))
            fast = fi.hog_extract(fi.ImagePatch(arr)).as_grid()
            slow = naive_hog(arr)
            assert np.max(np.abs(fast - slow)) < 1e-6

    def test_matches_naive_oracle_rgb(self, rng):
        for _ in range(5):
            arr = rng.uniform(0, 1, (16, 24, 3))
            fast = fi.hog_extract(fi.ImagePatch(arr)).as_grid()
            slow = naive_hog(arr)
            assert np.max(np.abs(fast - slow)) < 1e-6

    def test_illumination_invariance(self, rng):
        # a*x + b with clipping avoided; invariance up to epsilon effects
        arr = rng.uniform(0.3, 0.7, (32, 32, 1))
        base = fi.hog_extract(fi.ImagePatch(arr)).values
        for a, b in [(0.5, 0.25), (1.5, -0.1), (0.25, 0.2), (1.2, 0.05)]:
            scaled = np.clip(a * arr + b, 0.0, 1.0)
            assert np.min(a * arr + b) >= 0 and np.max(a * arr + b) <= 1
            other = fi.hog_extract(fi.ImagePatch(scaled)).values
            rel = np.linalg.norm(other - base) / np.linalg.norm(base)
            assert rel < 1e-3

    def test_vertical_step_edge_orientation(self):
        # A vertical step edge has a horizontal gradient: orientation bins
        # around theta = 0 or pi should dominate the insensitive channels.
        arr = np.zeros((16, 16, 1))
        arr[:, 8:] = 1.0
        desc = fi.hog_extract(fi.ImagePatch(arr)).as_grid()
        ref = naive_hog(arr)
        assert np.max(np.abs(desc - ref)) < 1e-6
        unsigned = desc[:, :, 18:27].sum(axis=(0, 1))
        assert np.argmax(unsigned) == 0

    def test_determinism(self, rng):
        arr = rng.uniform(0, 1, (16, 16, 1))
        a = fi.hog_extract(fi.ImagePatch(arr)).values
        b = fi.hog_extract(fi.ImagePatch(arr.copy())).values
        assert np.array_equal(a, b)

    def test_extractor_grid_consistency(self, extractor, rng):
        arr = rng.uniform(0, 1, (24, 16, 1))
        desc = extractor(fi.ImagePatch(arr))
        assert desc.grid == extractor.descriptor_grid((24, 16, 1))

    def test_cell_size_contract(self):
        with pytest.raises(ShapeError):
            fi.HogParams(cell_size=1)


class TestGlyph:
    def test_all_zero_descriptor(self):
        desc = fi.FeatureDescriptor(values=np.zeros(2 * 2 * 31), grid=(2, 2, 31))
        glyph = fi.hog_glyph(desc)
        assert np.all(glyph.data == 0.0)

    def test_single_vertical_bin(self):
        # Active gradient bin theta=0 (horizontal gradient) draws a vertical
        # stroke: one bright column, dark rows elsewhere.
        vals = np.zeros((1, 1, 31))
        vals[0, 0, 18] = 1.0
        glyph = fi.hog_glyph(fi.FeatureDescriptor(values=vals.ravel(), grid=(1, 1, 31)),
                             scale=16)
        col_mass = glyph.data[:, :, 0].sum(axis=0)
        assert glyph.data.max() == 1.0
        bright_cols = np.flatnonzero(col_mass > 0)
        assert bright_cols.size <= 2
        assert np.all(np.abs(bright_cols - 7.5) < 2)

    def test_step_edge_glyph_alignment(self):
        arr = np.zeros((16, 16, 1))
        arr[:, 8:] = 1.0  # vertical edge: expect vertical strokes
        desc = fi.hog_extract(fi.ImagePatch(arr))
        glyph = fi.hog_glyph(desc, scale=16).data[:, :, 0]
        col_var = glyph.sum(axis=0).var()
        row_var = glyph.sum(axis=1).var()
        assert col_var > row_var  # brightness concentrated in columns

    def test_non_hog_grid_rejected(self):
        with pytest.raises(ShapeError):
            fi.hog_glyph(fi.FeatureDescriptor(values=np.zeros(8), grid=(2, 2, 2)))

    def test_determinism(self, rng):
        vals = rng.uniform(0, 1, 4 * 31)
        desc = fi.FeatureDescriptor(values=vals, grid=(2, 2, 31))
        assert np.array_equal(fi.hog_glyph(desc).data, fi.hog_glyph(desc).data)


class TestDescriptorDistance:
    def test_identical(self, rng):
        v = rng.uniform(0, 1, 31)
        a = fi.FeatureDescriptor(values=v, grid=(1, 1, 31))
        assert fi.descriptor_distance(a, a) == 0.0

    def test_pythagorean(self):
        v = np.zeros(31)
        v[0], v[1] = 3.0, 4.0
        a = fi.FeatureDescriptor(values=v, grid=(1, 1, 31))
        b = fi.FeatureDescriptor(values=np.zeros(31), grid=(1, 1, 31))
        assert fi.descriptor_distance(a, b) == pytest.approx(5.0)

    def test_random_against_summation(self, rng):
        x = rng.normal(size=62)
        y = rng.normal(size=62)
        a = fi.FeatureDescriptor(values=x, grid=(2, 1, 31))
        b = fi.FeatureDescriptor(values=y, grid=(2, 1, 31))
        ref = sum((xi - yi) ** 2 for xi, yi in zip(x, y)) ** 0.5
        assert fi.descriptor_distance(a, b) == pytest.approx(ref, rel=1e-9)

    def test_shape_mismatch(self):
        a = fi.FeatureDescriptor(values=np.zeros(31), grid=(1, 1, 31))
        b = fi.FeatureDescriptor(values=np.zeros(62), grid=(2, 1, 31))
        with pytest.raises(ShapeError):
            fi.descriptor_distance(a, b)


class TestDescriptorSerialization:
    def test_round_trip(self, rng):
        vals = rng.uniform(-1, 1, 2 * 3 * 31).astype(np.float32).astype(float)
        desc = fi.FeatureDescriptor(values=vals, grid=(2, 3, 31))
        back = fi.FeatureDescriptor.deserialize(desc.serialize())
        assert back.grid == desc.grid
        assert np.array_equal(back.values, desc.values)

    def test_header_layout(self):
        desc = fi.FeatureDescriptor(values=np.zeros(31), grid=(1, 1, 31))
        blob = desc.serialize()
        assert blob[:4] == b"FDSC"
        assert len(blob) == 16 + 31 * 4

    def test_garbage_rejected(self):
        with pytest.raises(FormatError):
            fi.FeatureDescriptor.deserialize(b"nope" * 10)

    def test_non_finite_rejected(self):
        with pytest.raises(ShapeError):
            fi.FeatureDescriptor(values=np.array([np.nan] * 31), grid=(1, 1, 31))

    def test_length_grid_mismatch(self):
        with pytest.raises(ShapeError):
            fi.FeatureDescriptor(values=np.zeros(30), grid=(1, 1, 31))


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 2**32 - 1), st.sampled_from([8, 16, 24]))
def test_hog_property_matches_oracle(seed, size):
    rng = np.random.default_rng(seed)
    arr = rng.uniform(0, 1, (size, size, 1))
    fast = fi.hog_extract(fi.ImagePatch(arr)).as_grid()
    assert np.max(np.abs(fast - naive_hog(arr))) < 1e-6
