"""
Equalization, matching and luminance transfer
=============================================
"""

import numpy as np

from colorgrade.imagecore import ColorSpace, ImagePlanar, convert
from colorgrade.transfer_hist import cdf_distance, equalize, luminance_transfer, match_histogram

rng = np.random.default_rng(3)
dark = ImagePlanar(rng.beta(2, 8, (80, 80, 3)))
bright = ImagePlanar(rng.beta(6, 2, (80, 80, 3)))

eq = equalize(dark)
print("equalized red plane, byte quartiles:",
      np.percentile(np.round(eq.plane(0) * 255), [25, 50, 75]))

matched = match_histogram(dark, bright)
for c, name in enumerate("rgb"):
    print(f"{name}: CDF distance to reference {cdf_distance(matched.plane(c), bright.plane(c)):.4f}")

# only the luminance statistics move; chroma stays with the first image
for space in ("Lab", "YIQ"):
    out = convert(luminance_transfer(dark, bright, space), ColorSpace(space))
    ref = convert(bright, ColorSpace(space)).plane(0)
    print(f"{space}: luminance mean {out.plane(0).mean():.4f} vs {ref.mean():.4f}")
