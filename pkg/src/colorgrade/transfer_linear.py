"""Affine color mappings driven by first and second moments.

Every map here moves ``source`` pixels so that their statistics match those
of ``target``.  Reinhard matches per-channel mean and standard deviation in
l-alpha-beta; :func:`matched_affine` matches the full RGB mean and
covariance with one of three square-root choices.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DegenerateInputError, DegenerateInputWarning
from .imagecore import ColorSpace, ImagePlanar, lalphabeta_to_rgb, rgb_to_lalphabeta

RIDGE = 1e-8
SINGULAR_TOL = 1e-12
CHANNEL_NAMES = ("r", "g", "b")
FLAT_STD = 1e-10


class AffineMethod(str, enum.Enum):
    CHOLESKY = "cholesky"
    SQRT = "sqrt"
    MKL = "mkl"


@dataclass(frozen=True, eq=False)
class ChannelStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int


@dataclass(frozen=True, eq=False)
class AffineColorMap:
    A: np.ndarray
    b: np.ndarray

    def __call__(self, pixels):
        return pixels @ self.A.T + self.b


def channel_stats(img: ImagePlanar) -> ChannelStats:
    """Population (divide-by-N) mean and covariance of the pixels."""
    x = img.pixels()
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / x.shape[0]
    cov = 0.5 * (cov + cov.T)
    return ChannelStats(mean=mean, cov=cov, n=x.shape[0])


def is_flat(std, mean):
    """Spread indistinguishable from rounding noise (relative to the channel's magnitude)."""
    return np.asarray(std) <= FLAT_STD * np.maximum(1.0, np.abs(mean))


def moment_match(values, src_mean, src_std, dst_mean, dst_std):
    """``(dst_std / src_std) * (values - src_mean) + dst_mean``; flat sources use ratio 1."""
    flat = is_flat(src_std, src_mean)
    ratio = np.where(flat, 1.0, dst_std / np.where(flat, 1.0, src_std))
    return (values - src_mean) * ratio + dst_mean


def reinhard_transfer(source: ImagePlanar, target: ImagePlanar) -> ImagePlanar:
    """Recolor ``source`` with the per-channel l-alpha-beta moments of ``target``.

    A channel with zero spread in ``source`` is shifted onto the target
    mean without scaling and a :class:`DegenerateInputWarning` is issued.
    """
    s = rgb_to_lalphabeta(source).pixels()
    t = rgb_to_lalphabeta(target).pixels()
    s_mean, s_std = s.mean(axis=0), s.std(axis=0)
    t_mean, t_std = t.mean(axis=0), t.std(axis=0)
    if np.any(is_flat(s_std, s_mean)):
        flat = [("l", "alpha", "beta")[c] for c in np.flatnonzero(is_flat(s_std, s_mean))]
        warnings.warn(f"flat source channel(s) {flat}: shift only", DegenerateInputWarning,
                      stacklevel=2)
    out = moment_match(s, s_mean, s_std, t_mean, t_std)
    lab = ImagePlanar.from_pixels(out, source.height, source.width, ColorSpace.LALPHABETA)
    return lalphabeta_to_rgb(lab)


def _regularize(cov):
    """Add the ridge only when ``cov`` is close to singular."""
    cov = 0.5 * (cov + cov.T)
    scale = np.trace(cov) / cov.shape[0]
    if np.linalg.eigvalsh(cov)[0] < RIDGE * scale:
        cov = cov + RIDGE * scale * np.eye(cov.shape[0])
    return cov


def sym_sqrt(cov, inverse=False):
    """Symmetric square root (or inverse root) via eigendecomposition."""
    w, U = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.clip(w, 0.0, None)
    if inverse:
        w = 1.0 / np.sqrt(w)
    else:
        w = np.sqrt(w)
    return (U * w) @ U.T


def _check_definite(cov):
    """Raise :class:`DegenerateInputError` naming the flat channel(s) of a singular ``cov``."""
    w, U = np.linalg.eigh(cov)
    var = np.diag(cov)
    scale = max(np.trace(cov) / cov.shape[0], 0.0)
    if w[0] > SINGULAR_TOL * scale and scale > 0:
        return
    names = CHANNEL_NAMES if cov.shape[0] == 3 else tuple(map(str, range(cov.shape[0])))
    flat = [names[c] for c in np.flatnonzero(var <= SINGULAR_TOL * max(var.max(), 1.0))]
    if not flat:
        # dependent but individually varying channels: name the one dominating the null direction
        flat = [names[int(np.argmax(np.abs(U[:, 0])))]]
    label = ",".join(flat)
    raise DegenerateInputError(
        f"source covariance is singular; flat channel(s): {label}", channel=label)


def _cholesky(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(cov + RIDGE * max(np.trace(cov) / 3.0, 1e-300) * np.eye(3))


def matched_affine(source_stats: ChannelStats, target_stats: ChannelStats,
                   method="mkl") -> AffineColorMap:
    """Affine map ``x -> A x + b`` carrying source mean/covariance onto the target's.

    ``A Sigma_S A' = Sigma_T`` holds for every method; they differ in which
    square root of the covariances they use:

    * ``cholesky``: ``A = L_T L_S^-1`` with lower Cholesky factors.
    * ``sqrt``: ``A = Sigma_T^1/2 Sigma_S^-1/2``.
    * ``mkl``: the symmetric positive-definite solution
      ``Sigma_S^-1/2 (Sigma_S^1/2 Sigma_T Sigma_S^1/2)^1/2 Sigma_S^-1/2``,
      which minimizes mean squared displacement.

    A near-singular source covariance receives a ridge of
    ``1e-8 * tr(Sigma)/3`` before factorization; an exactly flat channel
    raises :class:`DegenerateInputError`.
    """
    method = AffineMethod(method)
    _check_definite(0.5 * (source_stats.cov + source_stats.cov.T))
    cov_s = _regularize(source_stats.cov)
    cov_t = 0.5 * (target_stats.cov + target_stats.cov.T)

    if method is AffineMethod.CHOLESKY:
        L_s = np.linalg.cholesky(cov_s)
        L_t = _cholesky(cov_t) if np.trace(cov_t) > 0 else np.zeros_like(cov_t)
        A = np.linalg.solve(L_s.T, L_t.T).T
    elif method is AffineMethod.SQRT:
        A = sym_sqrt(cov_t) @ sym_sqrt(cov_s, inverse=True)
    else:
        s_half = sym_sqrt(cov_s)
        s_inv_half = sym_sqrt(cov_s, inverse=True)
        A = s_inv_half @ sym_sqrt(s_half @ cov_t @ s_half) @ s_inv_half
        A = 0.5 * (A + A.T)

    b = target_stats.mean - A @ source_stats.mean
    return AffineColorMap(A=A, b=b)


def apply_affine(img: ImagePlanar, cmap: AffineColorMap) -> ImagePlanar:
    if img.space is not ColorSpace.RGB:
        raise ContractError("affine color maps apply to RGB images")
    return ImagePlanar.from_pixels(cmap(img.pixels()), img.height, img.width)


def linear_transfer(source: ImagePlanar, target: ImagePlanar, method="mkl") -> ImagePlanar:
    """Convenience wrapper: fit :func:`matched_affine` and apply it to ``source``."""
    cmap = matched_affine(channel_stats(source), channel_stats(target), method)
    return apply_affine(source, cmap)
