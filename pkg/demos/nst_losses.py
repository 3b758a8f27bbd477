"""
Style transfer losses on hand-made feature maps
===============================================

Feature maps stand in for network activations; layer ids follow the
VGG-19 names.
"""

import numpy as np

from colorgrade.nst_loss import (LossWeights, content_loss, gram, style_layer_loss, style_loss,
                                 total_loss, total_variation_loss)

rng = np.random.default_rng(5)
layers = ("conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1")
sizes = {"conv1_1": (4, 64), "conv2_1": (8, 16), "conv3_1": (16, 8), "conv4_1": (16, 4),
         "conv5_1": (16, 2)}

generated = {k: rng.standard_normal(s) for k, s in sizes.items()}
style = {k: rng.standard_normal(s) for k, s in sizes.items()}
content = generated["conv4_1"] + 0.1 * rng.standard_normal(sizes["conv4_1"])

per_layer = [(gram(generated[k]), gram(style[k]), *sizes[k]) for k in layers]
for k, layer in zip(layers, per_layer):
    print(f"{k}: E = {style_layer_loss(*layer):.5f}")

image = rng.random((32, 32, 3))
w = LossWeights(alpha=1.0, beta=1e3, gamma=1e-2)
c = content_loss(generated["conv4_1"], content)
s = style_loss(per_layer, w.layer_weights)
tv = total_variation_loss(image, w.gamma, w.kappa)
print(f"content {c:.4f}  style {s:.5f}  tv {tv:.4f}  total {total_loss(c, s, tv, w):.4f}")
