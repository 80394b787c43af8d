import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from graphdigitizer.detect import BoundingBox
from graphdigitizer.errors import OutOfBounds, UndecodableImage
from graphdigitizer.raster import (Color, RasterImage, color_distance, crop, dump_png, load_image,
                                   whiten_background)

colors = st.tuples(*[st.integers(0, 255)] * 3)
images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3)))


def test_color_rejects_out_of_range_channel():
    with pytest.raises(ValueError):
        Color(256, 0, 0)


def test_raster_is_read_only():
    img = RasterImage.blank(3, 2)
    assert (img.width, img.height) == (3, 2)
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1


def test_load_white_png(tmp_path):
    path = tmp_path / "w.png"
    Image.new("RGB", (2, 2), (255, 255, 255)).save(path)
    img = load_image(path)
    assert img == RasterImage.blank(2, 2)


def test_load_truncated_file_is_undecodable(tmp_path):
    path = tmp_path / "t.png"
    full = tmp_path / "full.png"
    Image.new("RGB", (40, 40), (10, 20, 30)).save(full)
    path.write_bytes(full.read_bytes()[:30])
    with pytest.raises(UndecodableImage):
        load_image(path)


def test_load_missing_file():
    with pytest.raises(FileNotFoundError):
        load_image("/nonexistent/image.png")


def test_transparent_pixels_become_white(tmp_path):
    path = tmp_path / "a.png"
    im = Image.new("RGBA", (2, 1), (200, 0, 0, 255))
    im.putpixel((1, 0), (0, 0, 0, 0))
    im.save(path)
    img = load_image(path)
    assert img.pixel(0, 0) == Color(200, 0, 0)
    assert img.pixel(1, 0) == Color(255, 255, 255)


def test_grayscale_expands_to_equal_channels(tmp_path):
    path = tmp_path / "g.png"
    Image.new("L", (1, 1), 77).save(path)
    assert load_image(path).pixel(0, 0) == Color(77, 77, 77)


def test_jpeg_roundtrip_loads(tmp_path):
    path = tmp_path / "j.jpg"
    Image.new("RGB", (8, 8), (0, 0, 255)).save(path, quality=95)
    img = load_image(path)
    assert img.width == 8 and img.pixel(4, 4).b > 200


def test_dump_png_roundtrip(tmp_path):
    arr = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    dump_png(RasterImage(arr), tmp_path / "r.png")
    assert load_image(tmp_path / "r.png") == RasterImage(arr)


def test_crop_examples():
    arr = np.arange(4 * 5 * 3, dtype=np.uint8).reshape(4, 5, 3)
    img = RasterImage(arr)
    assert crop(img, BoundingBox(0, 0, 5, 4)) == img
    one = crop(img, BoundingBox(0, 0, 1, 1))
    assert (one.width, one.height) == (1, 1) and one.pixel(0, 0) == img.pixel(0, 0)
    with pytest.raises(OutOfBounds):
        crop(img, BoundingBox(0, 0, 6, 4))


def test_whiten_examples():
    img = RasterImage(np.array([[[250, 250, 250], [200, 30, 30]]], dtype=np.uint8))
    out = whiten_background(img, 245)
    assert out.pixel(0, 0) == Color(255, 255, 255)
    assert out.pixel(1, 0) == Color(200, 30, 30)
    assert whiten_background(img, 0) == RasterImage.blank(2, 1)


def test_color_distance_examples():
    assert color_distance((10, 20, 30), (10, 20, 30)) == 0
    assert color_distance((255, 0, 0), (0, 0, 0)) == 255
    assert color_distance((0, 0, 0), (255, 255, 255)) == pytest.approx(math.sqrt(3 * 255 ** 2))
    assert color_distance((0, 0, 0), (255, 255, 255)) == pytest.approx(441.673, abs=1e-3)


@given(images, st.integers(0, 255))
def test_whiten_idempotent(arr, threshold):
    once = whiten_background(RasterImage(arr), threshold)
    assert whiten_background(once, threshold) == once


@given(images, st.integers(0, 255))
def test_whiten_keeps_pixels_below_threshold(arr, threshold):
    out = whiten_background(RasterImage(arr), threshold).pixels
    keep = (arr < threshold).any(axis=2)
    assert np.array_equal(out[keep], arr[keep])
    assert (out[~keep] == 255).all()


@given(colors, colors, colors)
def test_color_distance_triangle(a, b, c):
    assert color_distance(a, c) <= color_distance(a, b) + color_distance(b, c) + 1e-9
    assert color_distance(a, b) == color_distance(b, a)
    assert (color_distance(a, b) == 0) == (a == b)


@given(images)
def test_full_crop_is_identity(arr):
    img = RasterImage(arr)
    assert crop(img, BoundingBox(0, 0, img.width, img.height)) == img
