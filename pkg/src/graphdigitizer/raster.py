"""RGB raster images, cropping, background whitening and color arithmetic."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterator, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import OutOfBounds, UndecodableImage

if TYPE_CHECKING:
    from .detect import BoundingBox

DEFAULT_WHITEN_THRESHOLD = 245
WHITE = (255, 255, 255)
MAX_COLOR_DISTANCE = math.sqrt(3 * 255**2)


@dataclass(frozen=True)
class Color:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for ch in (self.r, self.g, self.b):
            if not 0 <= ch <= 255:
                raise ValueError(f"channel out of range: {(self.r, self.g, self.b)}")

    def __iter__(self) -> Iterator[int]:
        return iter((self.r, self.g, self.b))

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.r, self.g, self.b)

    @classmethod
    def of(cls, rgb) -> "Color":
        r, g, b = (int(v) for v in rgb)
        return cls(r, g, b)

    @property
    def saturation(self) -> int:
        """Max-minus-min channel spread, the crude saturation used throughout."""
        return max(self) - min(self)

    @property
    def luma(self) -> float:
        return 0.299 * self.r + 0.587 * self.g + 0.114 * self.b


class RasterImage:
    """Immutable RGB pixel grid backed by an ``(height, width, 3)`` uint8 array."""

    __slots__ = ("_pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        self._pixels = arr

    @classmethod
    def blank(cls, width: int, height: int, color=WHITE) -> "RasterImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = tuple(color)
        return cls(arr)

    @property
    def pixels(self) -> np.ndarray:
        """Read-only view of the ``(height, width, 3)`` array."""
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    def pixel(self, x: int, y: int) -> Color:
        return Color.of(self._pixels[y, x])

    def to_array(self) -> np.ndarray:
        """Writable copy of the pixel array."""
        return self._pixels.copy()

    def luma(self) -> np.ndarray:
        p = self._pixels.astype(np.float32)
        return 0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2]

    def saturation(self) -> np.ndarray:
        p = self._pixels.astype(np.int16)
        return p.max(axis=2) - p.min(axis=2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return np.array_equal(self._pixels, other._pixels)

    def __hash__(self):
        return hash((self.width, self.height, self._pixels.tobytes()))

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"


Upscaler = Callable[[RasterImage], RasterImage]


def identity_upscaler(img: RasterImage) -> RasterImage:
    """Default super-resolution hook; returns the image untouched."""
    return img


def load_image(path) -> RasterImage:
    """Decode a PNG/JPEG file, compositing alpha over white."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            im.load()
            rgba = im.convert("RGBA")
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise UndecodableImage(f"{path}: {exc}") from exc
    background = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
    composed = Image.alpha_composite(background, rgba).convert("RGB")
    return RasterImage(np.asarray(composed))


def dump_png(img: RasterImage, path) -> None:
    Image.fromarray(img.pixels).save(os.fspath(path), format="PNG")


def crop(img: RasterImage, box: "BoundingBox") -> RasterImage:
    """Copy of the pixels inside ``box`` (max coordinates exclusive)."""
    if box.x_min < 0 or box.y_min < 0 or box.x_max > img.width or box.y_max > img.height:
        raise OutOfBounds(f"{box} outside {img.width}x{img.height} image")
    return RasterImage(img.pixels[box.y_min:box.y_max, box.x_min:box.x_max])


def whiten_background(img: RasterImage, threshold: int = DEFAULT_WHITEN_THRESHOLD) -> RasterImage:
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {threshold}")
    arr = img.to_array()
    arr[(arr >= threshold).all(axis=2)] = 255
    return RasterImage(arr)


def non_white_mask(img: RasterImage, threshold: int = DEFAULT_WHITEN_THRESHOLD) -> np.ndarray:
    """Boolean mask of pixels that survive whitening (any channel below threshold)."""
    return (img.pixels < threshold).any(axis=2)


def color_distance(a, b) -> float:
    return math.dist(tuple(a), tuple(b))
