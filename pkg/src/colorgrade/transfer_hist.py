"""Histogram equalization, histogram matching and luminance-only transfer.

Equalization and matching work on the 256 histogram bins of
:func:`stats.bin_index` so that their maps are exact integer tables and
agree with the evaluation histograms.  Bin ``k`` is written back as
``k / 255``, which falls in bin ``k`` again.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import stats
from .exceptions import ContractError, DegenerateInputWarning
from .imagecore import ColorSpace, ImagePlanar, convert
from .transfer_idt import LookupTable1D
from .transfer_linear import is_flat, moment_match

LEVELS = 256
_BYTE_KNOTS = np.arange(LEVELS) / (LEVELS - 1.0)


@dataclass(frozen=True, eq=False)
class EqualizationMap:
    table: np.ndarray          # byte -> byte, non-decreasing
    degenerate: bool = False

    def __call__(self, byte_plane):
        return self.table[byte_plane]


def _to_bins(plane) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise ContractError("empty plane")
    return stats.bin_index(plane)


def equalization_map(byte_plane) -> EqualizationMap:
    """``h(v) = round((cdf(v) - cdf_min) / (MN - cdf_min) * 255)`` with cdf in counts."""
    counts = np.bincount(np.ravel(byte_plane), minlength=LEVELS)
    cdf = np.cumsum(counts)
    total = int(cdf[-1])
    cdf_min = int(cdf[np.flatnonzero(cdf)[0]])
    if total == cdf_min:
        return EqualizationMap(np.arange(LEVELS, dtype=np.uint8), degenerate=True)
    h = np.round((cdf - cdf_min) / (total - cdf_min) * (LEVELS - 1))
    return EqualizationMap(np.clip(h, 0, LEVELS - 1).astype(np.uint8))


def equalize_channel(plane):
    """Equalize one ``[0, 1]`` plane; returns ``(plane, EqualizationMap)``.

    A constant plane has no spread to redistribute: it is returned
    unchanged with ``map.degenerate`` set and a warning.
    """
    plane = np.asarray(plane, dtype=np.float64)
    q = _to_bins(plane)
    emap = equalization_map(q)
    if emap.degenerate:
        warnings.warn("constant plane: equalization is the identity", DegenerateInputWarning,
                      stacklevel=2)
        return plane.copy(), emap
    return emap(q) / (LEVELS - 1.0), emap


def equalize(img: ImagePlanar) -> ImagePlanar:
    """Per-channel equalization of an RGB image."""
    if img.space is not ColorSpace.RGB:
        raise ContractError("equalization operates on RGB images")
    out = np.stack([equalize_channel(img.plane(c))[0] for c in range(3)], axis=-1)
    return img.with_data(out)


def matching_table(source_bytes, reference_bytes) -> LookupTable1D:
    """Byte-level quantile map ``t(k) = min{j : G[j] >= F[k]}``, as a lookup table on [0, 1].

    Comparisons are done in integer counts so equal CDF values never split
    on rounding.
    """
    fs = np.cumsum(np.bincount(np.ravel(source_bytes), minlength=LEVELS)).astype(np.int64)
    gr = np.cumsum(np.bincount(np.ravel(reference_bytes), minlength=LEVELS)).astype(np.int64)
    ns, nr = int(fs[-1]), int(gr[-1])
    # G[j] >= F[k]  <=>  gr[j] * ns >= fs[k] * nr; empty leading bins go to the first occupied one
    t = np.searchsorted(gr * ns, np.maximum(fs * nr, 1), side="left")
    t = np.minimum(t, LEVELS - 1)
    return LookupTable1D(knots=_BYTE_KNOTS, values=t / (LEVELS - 1.0))


def match_histogram(source: ImagePlanar, reference: ImagePlanar) -> ImagePlanar:
    """Give each channel of ``source`` the byte histogram of ``reference``'s channel."""
    if source.space is not ColorSpace.RGB or reference.space is not ColorSpace.RGB:
        raise ContractError("histogram matching operates on RGB images")
    out = np.empty_like(source.data)
    for c in range(3):
        q = _to_bins(source.plane(c))
        lut = matching_table(q, _to_bins(reference.plane(c)))
        out[..., c] = lut.values[q]
    return source.with_data(out)


def cdf_distance(a, b) -> float:
    """Sup distance between the 256-bin CDFs of two planes."""
    ca = stats.cdf(stats.histogram(a)).values
    cb = stats.cdf(stats.histogram(b)).values
    return float(np.max(np.abs(ca - cb)))


def match_luminance(style: ImagePlanar, content: ImagePlanar) -> ImagePlanar:
    """Moment-match channel 0 of ``style`` to ``content``; both in the same luminance space.

    Chroma planes are copied from ``style`` untouched.
    """
    if style.space is not content.space or style.space not in (ColorSpace.LAB, ColorSpace.YIQ):
        raise ContractError("expected two Lab or two YIQ images")
    ls = style.plane(0)
    lc = content.plane(0)
    mu_s, sd_s = ls.mean(), ls.std()
    if is_flat(sd_s, mu_s):
        warnings.warn("flat style luminance: shift only", DegenerateInputWarning, stacklevel=3)
    out = style.data.copy()
    out[..., 0] = moment_match(ls, mu_s, sd_s, lc.mean(), lc.std())
    return style.with_data(out)


def luminance_transfer(style: ImagePlanar, content: ImagePlanar, color_space="Lab") -> ImagePlanar:
    """Replace the luminance statistics of ``style`` by those of ``content``.

    ``color_space`` selects CIELAB (``L``) or YIQ (``Y``) as the luminance
    channel; the result is returned in RGB.
    """
    space = ColorSpace(color_space)
    if space not in (ColorSpace.LAB, ColorSpace.YIQ):
        raise ContractError("luminance transfer supports Lab or YIQ")
    if style.space is not ColorSpace.RGB or content.space is not ColorSpace.RGB:
        raise ContractError("luminance transfer takes RGB images")
    return convert(match_luminance(convert(style, space), convert(content, space)), ColorSpace.RGB)
