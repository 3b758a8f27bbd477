"""Neural style transfer losses evaluated on precomputed feature maps.

No network is involved: feature maps ``F`` (``N`` filters by ``M``
positions) are read from files or built by hand, and the losses and their
analytic gradients are plain matrix algebra.  Layer ids follow the usual
VGG-19 names (``conv1_1`` ... ``conv5_1``), but any string is accepted.

Conventions
-----------
* content loss sums over every entry of the ``N x M`` map.
* the per-layer style loss sums over every entry of the ``N x N`` Gram
  difference.
* total variation uses forward differences only where the neighbour
  exists, and carries its own weight ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ContractError
from .imagecore import ImagePlanar

VGG_STYLE_LAYERS = ("conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1")
DEFAULT_LAYER_WEIGHT = 0.2


class FeatureFileError(ContractError):
    """Malformed feature map file; ``line`` is the 1-based offending line."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, eq=False)
class FeatureMap:
    layer: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ContractError(f"feature map must be a non-empty N x M matrix, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ContractError("feature map has non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def M(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0
    kappa: int = 2
    layer_weights: tuple = field(default=(DEFAULT_LAYER_WEIGHT,) * len(VGG_STYLE_LAYERS))

    def __post_init__(self):
        if self.kappa not in (1, 2):
            raise ContractError("kappa must be 1 or 2")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ContractError(f"{name} must be finite and non-negative")
        if not np.all(np.isfinite(self.layer_weights)):
            raise ContractError("layer weights must be finite")
        object.__setattr__(self, "layer_weights", tuple(float(w) for w in self.layer_weights))


def _matrix(x) -> np.ndarray:
    return x.data if isinstance(x, FeatureMap) else np.asarray(x, dtype=np.float64)


# --------------------------------------------------------------------------
# Losses
# --------------------------------------------------------------------------

def content_loss(F, P) -> float:
    F, P = _matrix(F), _matrix(P)
    if F.shape != P.shape:
        raise ContractError(f"content maps differ in shape: {F.shape} vs {P.shape}")
    d = F - P
    return 0.5 * float(np.sum(d * d))


def gram(F) -> np.ndarray:
    F = _matrix(F)
    G = F @ F.T
    return 0.5 * (G + G.T)


def style_layer_loss(G, A, N, M) -> float:
    """``E = sum((G - A)^2) / (4 N^2 M^2)``."""
    G, A = np.asarray(G, dtype=np.float64), np.asarray(A, dtype=np.float64)
    if G.shape != A.shape:
        raise ContractError(f"Gram matrices differ in shape: {G.shape} vs {A.shape}")
    if N < 1 or M < 1:
        raise ContractError("N and M must be positive")
    d = G - A
    return float(np.sum(d * d)) / (4.0 * N * N * M * M)


def style_loss(layers, weights=None) -> float:
    """Weighted sum of per-layer losses; ``layers`` holds ``(G, A, N, M)`` tuples."""
    layers = list(layers)
    if weights is None:
        weights = [DEFAULT_LAYER_WEIGHT] * len(layers)
    if len(weights) != len(layers):
        raise ContractError(f"{len(weights)} layer weights for {len(layers)} layers")
    return float(sum(w * style_layer_loss(*layer) for w, layer in zip(weights, layers)))


def _as_planes(img) -> np.ndarray:
    """Image as an ``(H, W, C)`` array; 2-D input is one channel."""
    arr = img.data if isinstance(img, ImagePlanar) else np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise ContractError("expected an (H, W) or (H, W, C) image")
    return arr


def total_variation_loss(img, gamma=1.0, kappa=2) -> float:
    if kappa not in (1, 2):
        raise ContractError("kappa must be 1 or 2")
    f = _as_planes(img)
    dv = np.abs(f[1:, :, :] - f[:-1, :, :])
    dh = np.abs(f[:, 1:, :] - f[:, :-1, :])
    return float(gamma) * float(np.sum(dv ** kappa) + np.sum(dh ** kappa))


def total_loss(content, style, tv, w: LossWeights) -> float:
    if min(content, style, tv) < 0:
        raise ContractError("loss components must be non-negative")
    return w.alpha * content + w.beta * style + tv


# --------------------------------------------------------------------------
# Gradients
# --------------------------------------------------------------------------

def content_gradient(F, P) -> np.ndarray:
    F, P = _matrix(F), _matrix(P)
    if F.shape != P.shape:
        raise ContractError("content maps differ in shape")
    return F - P


def style_layer_gradient(F, A) -> np.ndarray:
    """d E / d F ``= (G - A) F / (N^2 M^2)`` (``A`` symmetrized)."""
    F = _matrix(F)
    A = np.asarray(A, dtype=np.float64)
    N, M = F.shape
    D = gram(F) - 0.5 * (A + A.T)
    return D @ F / (N * N * M * M)


def tv_gradient(img, gamma=1.0, kappa=2) -> np.ndarray:
    """Adjoint of the forward differences; for ``kappa = 1`` sign(0) is taken as 0."""
    if kappa not in (1, 2):
        raise ContractError("kappa must be 1 or 2")
    squeeze = not isinstance(img, ImagePlanar) and np.ndim(img) == 2
    f = _as_planes(img)
    dv = f[1:, :, :] - f[:-1, :, :]
    dh = f[:, 1:, :] - f[:, :-1, :]
    gv = 2.0 * dv if kappa == 2 else np.sign(dv)
    gh = 2.0 * dh if kappa == 2 else np.sign(dh)
    g = np.zeros_like(f)
    g[1:, :, :] += gv
    g[:-1, :, :] -= gv
    g[:, 1:, :] += gh
    g[:, :-1, :] -= gh
    g *= float(gamma)
    return g[..., 0] if squeeze else g


@dataclass
class LossGradients:
    content: np.ndarray
    style: list
    tv: np.ndarray


def loss_gradients(F, P, style_pairs, img, w: LossWeights) -> LossGradients:
    """Gradients of the weighted total loss.

    ``style_pairs`` is a list of ``(F_l, A_l)``; the style gradient for
    layer ``l`` is ``beta * w_l * dE_l/dF_l``.
    """
    style_pairs = list(style_pairs)
    if len(w.layer_weights) != len(style_pairs):
        raise ContractError(f"{len(w.layer_weights)} layer weights for {len(style_pairs)} layers")
    return LossGradients(
        content=w.alpha * content_gradient(F, P),
        style=[w.beta * wl * style_layer_gradient(Fl, Al)
               for wl, (Fl, Al) in zip(w.layer_weights, style_pairs)],
        tv=tv_gradient(img, w.gamma, w.kappa),
    )


# --------------------------------------------------------------------------
# Feature map files
# --------------------------------------------------------------------------

def _parse_header(text, lineno):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3 or not parts[0]:
        raise FeatureFileError("expected header 'layer,N,M'", lineno)
    try:
        n, m = int(parts[1]), int(parts[2])
    except ValueError:
        raise FeatureFileError("N and M must be integers", lineno) from None
    if n < 1 or m < 1:
        raise FeatureFileError("N and M must be positive", lineno)
    return parts[0], n, m


def parse_feature_maps(text: str) -> list[FeatureMap]:
    """Parse one or more ``layer,N,M`` blocks, each followed by ``N`` rows of ``M`` values."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    maps, k = [], 0
    while k < len(lines):
        lineno, header = lines[k]
        layer, n, m = _parse_header(header, lineno)
        rows = []
        for r in range(n):
            if k + 1 + r >= len(lines):
                raise FeatureFileError(f"layer {layer!r} expects {n} rows, file ended",
                                       lines[-1][0] + 1)
            rl, row = lines[k + 1 + r]
            try:
                vals = [float(v) for v in row.split(",")]
            except ValueError:
                raise FeatureFileError("non-numeric value", rl) from None
            if len(vals) != m:
                raise FeatureFileError(f"expected {m} values, found {len(vals)}", rl)
            if not all(np.isfinite(vals)):
                raise FeatureFileError("non-finite value", rl)
            rows.append(vals)
        maps.append(FeatureMap(layer, np.array(rows)))
        k += n + 1
    if not maps:
        raise FeatureFileError("no feature maps found", 1)
    return maps


def read_feature_maps(path) -> list[FeatureMap]:
    return parse_feature_maps(Path(path).read_text())


def format_feature_map(fm: FeatureMap) -> str:
    out = [f"{fm.layer},{fm.N},{fm.M}"]
    out += [",".join(repr(float(v)) for v in row) for row in fm.data]
    return "\n".join(out) + "\n"


def write_feature_maps(path, maps) -> None:
    Path(path).write_text("".join(format_feature_map(fm) for fm in maps))
