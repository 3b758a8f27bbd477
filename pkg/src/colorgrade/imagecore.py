"""Image container, PNG/JPEG I/O, color-space conversions and sharpening.

Images are held as ``(H, W, 3)`` float64 arrays tagged with the color space
they are expressed in.  RGB values live in ``[0, 1]``; nothing is clamped
until :func:`save_image`.

Color-space constants
---------------------
``RGB_TO_XYZ`` and ``XYZ_TO_LMS`` are the matrices published by Reinhard,
Ashikhmin, Gooch and Shirley (2001) for the RGB -> LMS cone-space step;
``LMS_TO_LAB_ALPHA_BETA`` is Ruderman's decorrelating rotation of log-LMS.
CIELAB uses the sRGB primaries with a D65 white point; YIQ is the NTSC
transform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .exceptions import ColorSpaceError, ContractError, ImageFormatError


class ColorSpace(str, enum.Enum):
    RGB = "RGB"
    LALPHABETA = "LAlphaBeta"
    LAB = "Lab"
    YIQ = "YIQ"


@dataclass(frozen=True, eq=False)
class ImagePlanar:
    """A three-channel floating point image tagged with its color space.

    The pixel array is copied on construction and made read-only, so an
    ``ImagePlanar`` never changes after it is built.
    """

    data: np.ndarray
    space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ContractError(f"expected an (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ContractError("image has no pixels")
        if not np.all(np.isfinite(arr)):
            raise ContractError("image contains NaN or infinite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "space", ColorSpace(self.space))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def plane(self, channel: int) -> np.ndarray:
        return self.data[:, :, channel]

    def pixels(self) -> np.ndarray:
        """Pixels as an ``(N, 3)`` array in row-major order."""
        return self.data.reshape(-1, 3)

    def with_data(self, data, space=None) -> "ImagePlanar":
        return ImagePlanar(data, self.space if space is None else space)

    @classmethod
    def from_pixels(cls, pixels, height, width, space=ColorSpace.RGB):
        return cls(np.asarray(pixels).reshape(height, width, 3), space)


def _require(img: ImagePlanar, space: ColorSpace):
    if img.space is not space:
        raise ColorSpaceError(f"expected a {space.value} image, got {img.space.value}")


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

_SUPPORTED_FORMATS = {"PNG", "JPEG"}
_EIGHT_BIT_MODES = {"RGB", "RGBA", "L", "LA", "P", "PA"}


def load_image(path) -> ImagePlanar:
    """Read an 8-bit PNG or JPEG as an RGB image scaled to ``[0, 1]``.

    Alpha is discarded; grayscale and palette images are expanded to RGB.
    Raises ``OSError`` if the file cannot be read and
    :class:`ImageFormatError` for other formats or bit depths.
    """
    with Image.open(path) as im:
        if im.format not in _SUPPORTED_FORMATS:
            raise ImageFormatError(f"{path}: unsupported format {im.format!r}")
        if im.mode not in _EIGHT_BIT_MODES:
            raise ImageFormatError(f"{path}: unsupported pixel mode {im.mode!r} (8-bit only)")
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    return ImagePlanar(rgb / 255.0, ColorSpace.RGB)


def to_bytes(img: ImagePlanar) -> np.ndarray:
    """Clamp to ``[0, 1]`` and quantize with ``round(v * 255)``."""
    _require(img, ColorSpace.RGB)
    return np.round(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)


def quantize(img: ImagePlanar) -> ImagePlanar:
    """The image exactly as it would read back after :func:`save_image`."""
    return ImagePlanar(to_bytes(img) / 255.0, ColorSpace.RGB)


def save_image(img: ImagePlanar, path) -> None:
    """Write ``img`` as an 8-bit PNG (clamped and rounded)."""
    data = to_bytes(img)
    Image.fromarray(data).save(Path(path), format="PNG")


# --------------------------------------------------------------------------
# l-alpha-beta
# --------------------------------------------------------------------------

RGB_TO_XYZ = np.array([
    [0.5141, 0.3239, 0.1604],
    [0.2651, 0.6702, 0.0641],
    [0.0241, 0.1228, 0.8444],
])

XYZ_TO_LMS = np.array([
    [0.3897, 0.6890, -0.0787],
    [-0.2298, 1.1834, 0.0464],
    [0.0000, 0.0000, 1.0000],
])

RGB_TO_LMS = XYZ_TO_LMS @ RGB_TO_XYZ
LMS_TO_RGB = np.linalg.inv(RGB_TO_LMS)

LMS_TO_LAB_ALPHA_BETA = np.diag([1 / np.sqrt(3), 1 / np.sqrt(6), 1 / np.sqrt(2)]) @ np.array([
    [1.0, 1.0, 1.0],
    [1.0, 1.0, -2.0],
    [1.0, -1.0, 0.0],
])
LAB_ALPHA_BETA_TO_LMS = np.linalg.inv(LMS_TO_LAB_ALPHA_BETA)

LOG_FLOOR = 1e-6


def rgb_to_lalphabeta(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.RGB)
    lms = img.data @ RGB_TO_LMS.T
    log_lms = np.log10(np.maximum(lms, LOG_FLOOR))
    return ImagePlanar(log_lms @ LMS_TO_LAB_ALPHA_BETA.T, ColorSpace.LALPHABETA)


def lalphabeta_to_rgb(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.LALPHABETA)
    lms = 10.0 ** (img.data @ LAB_ALPHA_BETA_TO_LMS.T)
    return ImagePlanar(lms @ LMS_TO_RGB.T, ColorSpace.RGB)


# --------------------------------------------------------------------------
# CIELAB (sRGB primaries, D65)
# --------------------------------------------------------------------------

SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
XYZ_TO_SRGB = np.linalg.inv(SRGB_TO_XYZ)
D65_WHITE = SRGB_TO_XYZ @ np.ones(3)

_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


def _srgb_decode(v):
    # odd extension keeps out-of-gamut values invertible
    a = np.abs(v)
    lin = np.where(a <= 0.04045, a / 12.92, ((a + 0.055) / 1.055) ** 2.4)
    return np.sign(v) * lin


def _srgb_encode(v):
    a = np.abs(v)
    enc = np.where(a <= 0.0031308, a * 12.92, 1.055 * a ** (1 / 2.4) - 0.055)
    return np.sign(v) * enc


def _lab_f(t):
    return np.where(t > _LAB_EPS, np.cbrt(t), (_LAB_KAPPA * t + 16.0) / 116.0)


def _lab_f_inv(f):
    t3 = f ** 3
    return np.where(t3 > _LAB_EPS, t3, (116.0 * f - 16.0) / _LAB_KAPPA)


def rgb_to_lab(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.RGB)
    xyz = _srgb_decode(img.data) @ SRGB_TO_XYZ.T / D65_WHITE
    fx, fy, fz = (_lab_f(xyz[..., k]) for k in range(3))
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    return ImagePlanar(lab, ColorSpace.LAB)


def lab_to_rgb(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.LAB)
    L, a, b = img.data[..., 0], img.data[..., 1], img.data[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * D65_WHITE
    return ImagePlanar(_srgb_encode(xyz @ XYZ_TO_SRGB.T), ColorSpace.RGB)


# --------------------------------------------------------------------------
# YIQ
# --------------------------------------------------------------------------

RGB_TO_YIQ = np.array([
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
])
YIQ_TO_RGB = np.linalg.inv(RGB_TO_YIQ)


def rgb_to_yiq(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.RGB)
    return ImagePlanar(img.data @ RGB_TO_YIQ.T, ColorSpace.YIQ)


def yiq_to_rgb(img: ImagePlanar) -> ImagePlanar:
    _require(img, ColorSpace.YIQ)
    return ImagePlanar(img.data @ YIQ_TO_RGB.T, ColorSpace.RGB)


_TO_RGB = {
    ColorSpace.RGB: lambda img: img,
    ColorSpace.LALPHABETA: lalphabeta_to_rgb,
    ColorSpace.LAB: lab_to_rgb,
    ColorSpace.YIQ: yiq_to_rgb,
}
_FROM_RGB = {
    ColorSpace.RGB: lambda img: img,
    ColorSpace.LALPHABETA: rgb_to_lalphabeta,
    ColorSpace.LAB: rgb_to_lab,
    ColorSpace.YIQ: rgb_to_yiq,
}


def convert(img: ImagePlanar, space) -> ImagePlanar:
    """Convert between any two supported spaces, routing through RGB."""
    space = ColorSpace(space)
    if img.space is space:
        return img
    return _FROM_RGB[space](_TO_RGB[img.space](img))


# --------------------------------------------------------------------------
# Sharpening
# --------------------------------------------------------------------------

def gaussian_blur(img: ImagePlanar, radius: float) -> ImagePlanar:
    if radius <= 0:
        raise ContractError("blur radius must be positive")
    out = np.empty_like(img.data)
    for c in range(3):
        out[..., c] = ndimage.gaussian_filter(img.data[..., c], sigma=radius,
                                              mode="reflect", truncate=3.0)
    return img.with_data(out)


def sharpen(img: ImagePlanar, radius: float = 1.0, amount: float = 0.8) -> ImagePlanar:
    """Unsharp mask: ``img + amount * (img - blur(img))``, clamped to [0, 1]."""
    _require(img, ColorSpace.RGB)
    if radius <= 0:
        raise ContractError("sharpen radius must be positive")
    if amount < 0:
        raise ContractError("sharpen amount must be non-negative")
    blurred = gaussian_blur(img, radius).data
    out = img.data + amount * (img.data - blurred)
    return ImagePlanar(np.clip(out, 0.0, 1.0), ColorSpace.RGB)
