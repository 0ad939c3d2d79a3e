import colorsys

import numpy as np
import pytest

from xverify import (
    InvalidParameterError,
    colormap_diverging,
    gaussian_blur,
    normalize_signed,
    read_png,
    to_grayscale,
    write_png,
)
from xverify.imaging import (
    decode_png,
    gaussian_kernel_1d,
    hls_to_rgb,
    rgb_to_hls,
    rgb_to_hsv,
)


def u8(arr):
    return np.asarray(arr, dtype=np.uint8)


class TestGrayscale:
    def test_black_is_zero(self):
        img = np.zeros((112, 112, 3), dtype=np.uint8)
        assert np.all(to_grayscale(img) == 0.0)

    def test_white_is_255(self):
        img = np.full((112, 112, 3), 255, dtype=np.uint8)
        np.testing.assert_allclose(to_grayscale(img), 255.0, atol=1e-9)

    def test_weighted_sum_of_channels(self):
        # oracle: direct evaluation of 0.299 R + 0.587 G + 0.114 B
        img = np.zeros((112, 112, 3), dtype=np.uint8)
        img[...] = (200, 100, 50)
        expected = 0.299 * 200 + 0.587 * 100 + 0.114 * 50
        assert expected == pytest.approx(124.2)
        np.testing.assert_allclose(to_grayscale(img), expected, atol=0.01)

    def test_rejects_wrong_shape(self):
        with pytest.raises(InvalidParameterError):
            to_grayscale(np.zeros((64, 64, 3), dtype=np.uint8))
        with pytest.raises(InvalidParameterError):
            to_grayscale(np.zeros((112, 112), dtype=np.uint8))
        with pytest.raises(InvalidParameterError):
            to_grayscale(np.zeros((112, 112, 3), dtype=np.float64))


class TestGaussianBlur:
    def test_constant_map_preserved(self):
        m = np.full((112, 112), 3.25)
        np.testing.assert_allclose(gaussian_blur(m, 5, 5.0), m, atol=1e-12)

    def test_impulse_mass_conserved(self):
        m = np.zeros((112, 112))
        m[56, 56] = 1.0
        for kernel in (3, 5, 9):
            assert gaussian_blur(m, kernel, float(kernel)).sum() == pytest.approx(1.0, abs=1e-9)

    def test_impulse_center_matches_direct_formula(self):
        # oracle: 2-D Gaussian weights computed from the closed-form kernel
        m = np.zeros((112, 112))
        m[56, 56] = 1.0
        out = gaussian_blur(m, 5, 5.0)
        offsets = np.arange(-2, 3, dtype=np.float64)
        w = np.exp(-(offsets**2) / (2 * 5.0**2))
        w /= w.sum()
        w2d = np.outer(w, w)
        assert out[56, 56] == pytest.approx(w2d[2, 2], abs=1e-12)
        assert out[56, 57] == pytest.approx(w2d[2, 3], abs=1e-12)

    def test_linearity(self, rng):
        m1 = rng.normal(size=(112, 112))
        m2 = rng.normal(size=(112, 112))
        a, b = 2.5, -0.75
        lhs = gaussian_blur(a * m1 + b * m2, 7, 7.0)
        rhs = a * gaussian_blur(m1, 7, 7.0) + b * gaussian_blur(m2, 7, 7.0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_even_kernel_rounds_up_to_odd(self, rng):
        m = rng.normal(size=(112, 112))
        np.testing.assert_array_equal(gaussian_blur(m, 4, 2.0), gaussian_blur(m, 5, 2.0))
        assert gaussian_kernel_1d(14, 14.0).size == 15

    def test_invalid_parameters(self):
        m = np.zeros((112, 112))
        with pytest.raises(InvalidParameterError):
            gaussian_blur(m, 0, 1.0)
        with pytest.raises(InvalidParameterError):
            gaussian_blur(m, 5, 0.0)
        with pytest.raises(InvalidParameterError):
            gaussian_blur(np.full((4, 4), np.nan), 3, 1.0)


class TestNormalizeSigned:
    def test_divides_by_peak_magnitude(self):
        out = normalize_signed(np.array([[-2.0, 1.0]]))
        np.testing.assert_array_equal(out, [[-1.0, 0.5]])

    def test_zero_map_unchanged(self):
        m = np.zeros((112, 112))
        np.testing.assert_array_equal(normalize_signed(m), m)

    def test_idempotent(self, rng):
        m = rng.normal(size=(112, 112))
        once = normalize_signed(m)
        np.testing.assert_array_equal(normalize_signed(once), once)

    def test_preserves_sign_and_argmax(self, rng):
        m = rng.normal(size=(112, 112))
        out = normalize_signed(m)
        assert np.array_equal(np.sign(out), np.sign(m))
        assert np.argmax(np.abs(out)) == np.argmax(np.abs(m))
        assert np.abs(out).max() == 1.0


class TestColormapDiverging:
    def test_endpoints_and_midpoint(self):
        m = np.array([[0.0, 1.0, -1.0]])
        out = colormap_diverging(m)
        np.testing.assert_array_equal(out[0, 0], (255, 255, 255))
        np.testing.assert_array_equal(out[0, 1], (0, 255, 0))
        np.testing.assert_array_equal(out[0, 2], (255, 0, 0))

    def test_half_positive_rounds_half_up(self):
        out = colormap_diverging(np.array([[0.5]]))
        np.testing.assert_array_equal(out[0, 0], (128, 255, 128))

    def test_out_of_range_clamped(self):
        out = colormap_diverging(np.array([[2.0, -3.0]]))
        np.testing.assert_array_equal(out[0, 0], (0, 255, 0))
        np.testing.assert_array_equal(out[0, 1], (255, 0, 0))

    def test_zero_is_achromatic(self):
        img = colormap_diverging(np.zeros((112, 112)))
        sat = rgb_to_hsv(img)[..., 1]
        assert np.all(sat == 0.0)

    def test_linear_interpolation_toward_white(self, rng):
        # oracle: per-pixel scalar formula evaluated with colorsys-free math
        vals = rng.uniform(-1, 1, size=(112, 112))
        out = colormap_diverging(vals)
        v = np.clip(vals, -1, 1)
        exp_r = np.clip(np.floor(255 * (1 - np.maximum(v, 0)) + 0.5), 0, 255)
        exp_g = np.clip(np.floor(255 * (1 + np.minimum(v, 0)) + 0.5), 0, 255)
        exp_b = np.clip(np.floor(255 * (1 - np.abs(v)) + 0.5), 0, 255)
        np.testing.assert_array_equal(out[..., 0], exp_r.astype(np.uint8))
        np.testing.assert_array_equal(out[..., 1], exp_g.astype(np.uint8))
        np.testing.assert_array_equal(out[..., 2], exp_b.astype(np.uint8))


def lattice_image(step=16):
    """A 112x112 image packing the (0, 16, ..., 255) color-cube lattice."""
    levels = list(range(0, 256, step)) + [255]
    colors = [(r, g, b) for r in levels for g in levels for b in levels]
    img = np.zeros((112 * 112, 3), dtype=np.uint8)
    img[:len(colors)] = colors
    return img.reshape(112, 112, 3), len(colors)


class TestColorConversions:
    def test_hls_matches_colorsys(self, rng):
        img = u8(rng.integers(0, 256, (112, 112, 3)))
        out = rgb_to_hls(img)
        for y, x in [(0, 0), (3, 7), (50, 99), (111, 111)]:
            r, g, b = (img[y, x] / 255.0).tolist()
            np.testing.assert_allclose(out[y, x], colorsys.rgb_to_hls(r, g, b), atol=1e-12)

    def test_hsv_matches_colorsys(self, rng):
        img = u8(rng.integers(0, 256, (112, 112, 3)))
        out = rgb_to_hsv(img)
        for y, x in [(1, 2), (40, 40), (80, 13), (111, 0)]:
            r, g, b = (img[y, x] / 255.0).tolist()
            np.testing.assert_allclose(out[y, x], colorsys.rgb_to_hsv(r, g, b), atol=1e-12)

    def test_primary_red_hls(self):
        img = np.zeros((112, 112, 3), dtype=np.uint8)
        img[..., 0] = 255
        h, l, s = rgb_to_hls(img)[0, 0]
        assert (h, l, s) == (0.0, 0.5, 1.0)

    def test_gray_is_achromatic(self):
        img = np.full((112, 112, 3), 128, dtype=np.uint8)
        assert rgb_to_hls(img)[..., 2].max() == 0.0
        assert rgb_to_hsv(img)[..., 1].max() == 0.0

    def test_primary_green_hsv(self):
        img = np.zeros((112, 112, 3), dtype=np.uint8)
        img[..., 1] = 255
        h, s, v = rgb_to_hsv(img)[0, 0]
        np.testing.assert_allclose((h, s, v), (1.0 / 3.0, 1.0, 1.0), atol=1e-12)

    def test_round_trip_lattice_within_one(self):
        img, n = lattice_image()
        back = hls_to_rgb(rgb_to_hls(img))
        diff = np.abs(back.astype(int) - img.astype(int)).reshape(-1, 3)[:n]
        assert diff.max() <= 1

    def test_round_trip_random_within_one(self, rng):
        img = u8(rng.integers(0, 256, (112, 112, 3)))
        back = hls_to_rgb(rgb_to_hls(img))
        assert np.abs(back.astype(int) - img.astype(int)).max() <= 1


class TestPngIO:
    def test_round_trip(self, tmp_path, rng):
        img = u8(rng.integers(0, 256, (112, 112, 3)))
        path = tmp_path / "img.png"
        write_png(path, img)
        np.testing.assert_array_equal(read_png(path), img)

    def test_decode_matches_read(self, tmp_path, rng):
        img = u8(rng.integers(0, 256, (112, 112, 3)))
        path = tmp_path / "img.png"
        write_png(path, img)
        np.testing.assert_array_equal(decode_png(path.read_bytes()), img)

    def test_rejects_wrong_size(self, tmp_path):
        from PIL import Image

        Image.new("RGB", (64, 64)).save(tmp_path / "small.png")
        with pytest.raises(InvalidParameterError):
            read_png(tmp_path / "small.png")
