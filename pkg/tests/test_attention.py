import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from bimsaliency.attention import (
    MAX_LEVELS,
    center_surround,
    color_conspicuity,
    depth_conspicuity,
    gaussian_pyramid,
    intensity_conspicuity,
    level_count,
    mean_local_maxima,
    normalize_map,
    opponent_channels,
    upsample,
)
from bimsaliency.errors import InvalidScalePair


def gray(h, w, value=0.5):
    return np.full((h, w, 3), value, dtype=np.float64)


# -- pyramid -------------------------------------------------------------------

def test_constant_plane_stays_constant_at_every_level():
    pyr = gaussian_pyramid(np.full((256, 256), 0.3))
    for level in pyr:
        np.testing.assert_allclose(level, 0.3, atol=1e-6)


def test_256_input_gives_nine_halving_levels():
    pyr = gaussian_pyramid(np.zeros((256, 256)))
    assert [p.shape[0] for p in pyr] == [256, 128, 64, 32, 16, 8, 4, 2, 1]


@pytest.mark.parametrize("h, w", [(480, 640), (240, 320), (100, 37), (5, 9), (1, 1)])
def test_level_sizes_floor_halve_down_to_one(h, w):
    pyr = gaussian_pyramid(np.zeros((h, w)))
    assert len(pyr) == min(MAX_LEVELS, int(np.floor(np.log2(min(h, w)))) + 1)
    for prev, cur in zip(pyr, pyr[1:]):
        assert cur.shape == (max(1, prev.shape[0] // 2), max(1, prev.shape[1] // 2))
    assert level_count(h, w) == len(pyr)


def test_impulse_level_one_matches_hand_convolved_binomial():
    plane = np.zeros((32, 32))
    plane[16, 16] = 1.0
    level1 = gaussian_pyramid(plane, levels=2)[1]
    # 5x5 kernel by hand: outer product of [1, 4, 6, 4, 1] / 16.
    taps = {-2: 1, -1: 4, 0: 6, 1: 4, 2: 1}
    expected = np.zeros((16, 16))
    for dy, wy in taps.items():
        for dx, wx in taps.items():
            y, x = 16 + dy, 16 + dx
            if y % 2 == 0 and x % 2 == 0:
                expected[y // 2, x // 2] = wy * wx / 256.0
    np.testing.assert_allclose(level1, expected, atol=1e-7)
    assert level1[8, 8] == pytest.approx(36 / 256)


# -- center-surround -------------------------------------------------------------

def test_constant_pyramid_gives_zero_contrast():
    pyr = gaussian_pyramid(np.full((256, 256), 0.7))
    assert np.abs(center_surround(pyr, 2, 6)).max() < 1e-6


def test_center_surround_is_at_center_resolution():
    pyr = gaussian_pyramid(np.zeros((256, 256)))
    assert center_surround(pyr, 2, 6).shape == (64, 64)


@pytest.mark.parametrize("c, s", [(1, 4), (2, 4), (2, 7), (5, 8), (4, 9)])
def test_invalid_scale_pairs_raise(c, s):
    pyr = gaussian_pyramid(np.zeros((256, 256)))
    with pytest.raises(InvalidScalePair):
        center_surround(pyr, c, s)


def test_step_edge_response_matches_dense_difference_of_gaussians():
    plane = np.zeros((256, 256))
    plane[:, 128:] = 1.0
    c, s = 2, 5
    response = upsample(center_surround(gaussian_pyramid(plane), c, s), plane.shape, 2**c)
    profile = response[128]

    # Level k of the binomial pyramid carries a Gaussian blur of variance
    # (4^k - 1) / 3 in full-resolution pixels.
    sigma_c = np.sqrt((4**c - 1) / 3)
    sigma_s = np.sqrt((4**s - 1) / 3)
    dense = np.abs(
        ndimage.gaussian_filter(plane, sigma_c, mode="nearest")
        - ndimage.gaussian_filter(plane, sigma_s, mode="nearest")
    )[128]

    # |DoG| of a step vanishes on the edge and peaks in two mirrored lobes.
    lobe = abs(int(np.argmax(profile)) - 128)
    dense_lobe = abs(int(np.argmax(dense)) - 128)
    assert abs(lobe - dense_lobe) <= 4
    assert lobe <= 2 * sigma_s
    assert np.corrcoef(profile, dense)[0, 1] > 0.95


# -- N(.) ------------------------------------------------------------------------

def test_single_peak_survives_normalization():
    plane = np.zeros((64, 64))
    plane[20, 30] = 1.0
    out = normalize_map(plane)
    assert out.max() == pytest.approx(1.0)


def test_many_equal_peaks_are_suppressed():
    plane = np.zeros((64, 64))
    plane[2::4, 2::4] = 1.0
    assert normalize_map(plane).max() < 1e-6


def test_two_peaks_scale_by_quarter():
    # Peaks 1.0 and 0.5 in different cells: the mean of the other local
    # maxima is 0.5, so the map is scaled by (1 - 0.5)^2 = 0.25.
    plane = np.zeros((64, 64))
    plane[10, 10] = 1.0
    plane[50, 40] = 0.5
    assert mean_local_maxima(plane) == pytest.approx(0.5)
    np.testing.assert_allclose(normalize_map(plane), plane * 0.25, atol=1e-7)


def test_constant_plane_normalizes_to_zero():
    assert not normalize_map(np.full((32, 32), 3.0)).any()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normalize_output_in_unit_range(seed):
    plane = np.random.default_rng(seed).normal(size=(40, 50))
    out = normalize_map(plane)
    assert out.min() >= 0.0 and out.max() <= 1.0 + 1e-6


# -- channels --------------------------------------------------------------------

def test_uniform_gray_has_no_intensity_contrast():
    assert not intensity_conspicuity(gray(128, 160)).any()


def test_bright_square_is_intensity_maximum():
    img = gray(240, 320, 0.1)
    img[100:140, 200:240] = 0.9
    m = intensity_conspicuity(img)
    y, x = np.unravel_index(np.argmax(m), m.shape)
    assert 100 <= y < 140 and 200 <= x < 240


def test_negative_image_gives_same_intensity_map():
    rng = np.random.default_rng(3)
    img = ndimage.gaussian_filter(rng.uniform(size=(120, 160, 3)), (3, 3, 0))
    np.testing.assert_allclose(intensity_conspicuity(img), intensity_conspicuity(1.0 - img), atol=1e-5)


def test_uniform_red_has_no_color_contrast():
    img = np.zeros((128, 128, 3))
    img[..., 0] = 0.9
    assert not color_conspicuity(img).any()


def test_grayscale_image_has_no_color_contrast():
    rng = np.random.default_rng(1)
    lum = rng.uniform(size=(96, 128, 1))
    img = np.repeat(lum, 3, axis=2)
    rg, by = opponent_channels(img)
    assert not rg.any() and not by.any()
    assert not color_conspicuity(img).any()


def test_red_disk_pops_out_among_green_disks():
    img = np.zeros((240, 320, 3))
    img[:] = (0.3, 0.3, 0.3)
    yy, xx = np.mgrid[0:240, 0:320]
    centers = [(60, 60), (60, 160), (60, 260), (180, 60), (180, 260)]
    for cy, cx in centers:
        img[(yy - cy) ** 2 + (xx - cx) ** 2 < 18**2] = (0.1, 0.7, 0.1)
    red = (yy - 180) ** 2 + (xx - 160) ** 2 < 18**2
    img[red] = (0.7, 0.1, 0.1)
    m = color_conspicuity(img)
    assert red[np.unravel_index(np.argmax(m), m.shape)]


def test_constant_depth_has_no_depth_contrast():
    assert not depth_conspicuity(np.full((120, 160), 7.0)).any()


def test_near_box_dominates_depth_map():
    depth = np.full((240, 320), 20.0)
    depth[90:150, 120:200] = 3.0
    m = depth_conspicuity(depth)
    y, x = np.unravel_index(np.argmax(m), m.shape)
    assert 90 - 8 <= y < 150 + 8 and 120 - 8 <= x < 200 + 8


def test_depth_scale_does_not_matter():
    rng = np.random.default_rng(5)
    depth = ndimage.gaussian_filter(rng.uniform(1, 30, size=(96, 128)), 4)
    np.testing.assert_array_equal(depth_conspicuity(depth), depth_conspicuity(2.0 * depth))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.4), st.floats(0.0, 0.4))
def test_square_contrast_is_monotone(gap, extra):
    def center_value(g):
        img = gray(128, 128, 0.3)
        img[48:80, 48:80] = 0.3 + g
        return intensity_conspicuity(img)[64, 64]

    assert center_value(gap + extra) >= center_value(gap) - 1e-6


@pytest.mark.xfail(strict=True, reason="dyadic decimation and the fixed 16x16 cell grid are not shift-covariant")
def test_translation_covariance():
    rng = np.random.default_rng(9)
    content = ndimage.gaussian_filter(rng.uniform(size=(256, 256, 3)), (4, 4, 0))
    base = np.full((272, 272, 3), 0.5)
    shifted = base.copy()
    base[8:264, 8:264] = content
    shifted[16:272, 16:272] = content
    a = intensity_conspicuity(base)
    b = intensity_conspicuity(shifted)
    np.testing.assert_allclose(a[40:-40, 40:-40], b[48:-32, 48:-32], atol=1e-4)
