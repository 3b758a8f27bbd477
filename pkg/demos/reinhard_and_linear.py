"""
Statistics-based recoloring
===========================

Recolor one synthetic image toward another with the per-channel
l-alpha-beta method and the three covariance-matching affine maps.
"""

import numpy as np

from colorgrade.imagecore import ImagePlanar, rgb_to_lalphabeta
from colorgrade.transfer_linear import channel_stats, linear_transfer, reinhard_transfer

rng = np.random.default_rng(0)

# a cool, low-contrast source and a warm, saturated target
tilt = np.array([[0.02, 0.00, 0.00], [0.05, 0.03, 0.00], [0.00, -0.04, 0.06]])
source = ImagePlanar(np.clip([0.3, 0.4, 0.6] + rng.standard_normal((64, 64, 3)) @ tilt.T, 0, 1))
mix = np.array([[0.10, 0.00, 0.00], [0.06, 0.05, 0.00], [-0.04, 0.03, 0.04]])
target = ImagePlanar(np.clip([0.7, 0.5, 0.3] + rng.standard_normal((64, 64, 3)) @ mix.T, 0, 1))

out = reinhard_transfer(source, target)
print("l-alpha-beta means, output:", rgb_to_lalphabeta(out).pixels().mean(0).round(4))
print("l-alpha-beta means, target:", rgb_to_lalphabeta(target).pixels().mean(0).round(4))

# the affine maps agree on the covariance they produce but not on the map itself
for method in ("cholesky", "sqrt", "mkl"):
    recolored = linear_transfer(source, target, method)
    gap = np.abs(channel_stats(recolored).cov - channel_stats(target).cov).max()
    shift = np.mean(np.sum((recolored.pixels() - source.pixels()) ** 2, axis=1))
    print(f"{method:8s} covariance gap {gap:.1e}  mean squared displacement {shift:.4f}")
