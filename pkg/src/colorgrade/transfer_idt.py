"""Iterative distribution transfer (IDT).

The N-D color distribution of the source is pushed toward the target's by
repeated 1-D quantile transfers along the axes of random rotations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .exceptions import ContractError
from .imagecore import ColorSpace, ImagePlanar

N_KNOTS = 300
DEFAULT_ITERATIONS = 20
TRACE_DIRECTIONS = 64
TRACE_MAX_SAMPLES = 20_000


@dataclass(frozen=True, eq=False)
class LookupTable1D:
    """Piecewise-linear monotone map sampled at ``knots``."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, u):
        return np.interp(u, self.knots, self.values)

    @property
    def step(self) -> float:
        return float(self.knots[1] - self.knots[0]) if len(self.knots) > 1 else 0.0


@dataclass
class IdtTrace:
    kl: list = field(default_factory=list)
    iterations: int = 0
    seed: int = 0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "kl"])
            for i, v in enumerate(self.kl):
                w.writerow([i, repr(float(v))])


def _knot_grid(a, b, n_knots):
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    eps = 1e-6 * max(hi - lo, 1.0)
    return np.linspace(lo - eps, hi + eps, n_knots)


def _empirical_cdf(samples, knots):
    s = np.sort(samples)
    return np.searchsorted(s, knots, side="right") / s.size


def _inverse_cdf(G, knots, alpha):
    """``G^-1(alpha) = inf{v : G(v) >= alpha}`` with linear interpolation."""
    k = np.searchsorted(G, alpha, side="left")
    k = np.clip(k, 1, len(knots) - 1)
    g0, g1 = G[k - 1], G[k]
    x0, x1 = knots[k - 1], knots[k]
    denom = g1 - g0
    frac = np.where(denom > 0, (alpha - g0) / np.where(denom > 0, denom, 1.0), 1.0)
    v = x0 + np.clip(frac, 0.0, 1.0) * (x1 - x0)
    return np.where(alpha <= G[0], knots[0], v)


def pdf_transfer_1d(source, target, n_knots=N_KNOTS) -> LookupTable1D:
    """Monotone map ``t(u) = G^-1(F(u))`` carrying the source samples' law onto the target's.

    ``F`` and ``G`` are the empirical CDFs of ``source`` and ``target``
    sampled on a shared grid spanning both sample ranges.
    """
    source = np.asarray(source, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if source.size == 0 or target.size == 0:
        raise ContractError("pdf transfer needs non-empty sample sets")
    knots = _knot_grid(source, target, n_knots)
    F = _empirical_cdf(source, knots)
    G = _empirical_cdf(target, knots)
    values = _inverse_cdf(G, knots, F)
    values = np.maximum.accumulate(values)
    return LookupTable1D(knots=knots, values=values)


def random_rotation(seed: int, index: int, dim: int = 3) -> np.ndarray:
    """Orthogonal matrix from the QR factorization of a seeded Gaussian draw.

    Rows are the projection axes.  Columns of ``Q`` are sign-flipped so
    that the triangular factor has a non-negative diagonal, which makes the
    result a deterministic function of ``(seed, index)``.
    """
    rng = np.random.default_rng([int(seed), int(index)])
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs


def transfer_along_axis(x, y, axis, n_knots=N_KNOTS):
    """Displace ``x`` along ``axis`` so its projection matches that of ``y``."""
    ps = x @ axis
    lut = pdf_transfer_1d(ps, y @ axis, n_knots)
    return x + np.outer(lut(ps) - ps, axis)


def slice_directions(n=TRACE_DIRECTIONS, dim=3) -> np.ndarray:
    """``n`` near-uniform unit directions on the upper half of the 3-sphere.

    A Fibonacci lattice; ``e`` and ``-e`` give the same 1-D KL, so one
    hemisphere suffices.  Other dimensions fall back to the coordinate axes.
    """
    if dim != 3:
        return np.eye(dim)
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - i / n)
    azimuth = np.pi * (1.0 + 5.0 ** 0.5) * i
    return np.stack([np.cos(azimuth) * np.sin(polar),
                     np.sin(azimuth) * np.sin(polar),
                     np.cos(polar)], axis=1)


def _subsample(x, limit=TRACE_MAX_SAMPLES):
    if x.shape[0] <= limit:
        return x
    return x[np.linspace(0, x.shape[0] - 1, limit).astype(np.intp)]


class _TraceMetric:
    """Average 1-D KDE KL over fixed evaluation directions (a sliced KL).

    Grid and bandwidth are frozen from the target so successive values are
    directly comparable.  Bandwidths never drop below 1/255 of the target's
    widest projected range: spread finer than 8-bit quantization is not
    resolved, which keeps flat target channels from dominating the metric.
    """

    def __init__(self, x, y, axes, grid_size=stats.GRID_SIZE):
        x, y = _subsample(x), _subsample(y)
        self.axes = axes
        self.grid_size = grid_size
        self.targets = []
        scale = max(np.ptp(y @ e) for e in axes)
        h_min = max(scale, 1e-12) / 255.0
        for e in axes:
            py = y @ e
            px = x @ e
            h = stats.silverman_bandwidth(py, min_bandwidth=h_min)
            lo = min(py.min(), px.min()) - h
            hi = max(py.max(), px.max()) + h
            q = stats.kde_epanechnikov(py, h, grid_size, lo, hi)
            self.targets.append((q, h, lo, hi))

    def __call__(self, x):
        total = 0.0
        x = _subsample(x)
        for e, (q, h, lo, hi) in zip(self.axes, self.targets):
            px = np.clip(x @ e, lo, hi)
            p = stats.kde_epanechnikov(px, h, self.grid_size, lo, hi)
            total += stats.kl_divergence(p, q)
        return total / len(self.axes)


def idt_pixels(x, y, iterations=DEFAULT_ITERATIONS, seed=42, n_knots=N_KNOTS,
               trace=True, rotation=random_rotation):
    """IDT on raw ``(n, d)`` sample arrays; returns ``(mapped, IdtTrace)``.

    ``rotation(seed, index, dim)`` supplies the basis for each iteration.
    """
    if iterations < 1:
        raise ContractError("iterations must be at least 1")
    x = np.array(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dim = x.shape[1]
    record = IdtTrace(iterations=iterations, seed=seed)
    metric = _TraceMetric(x, y, slice_directions(dim=dim)) if trace else None
    if metric:
        record.kl.append(metric(x))
    for it in range(iterations):
        basis = rotation(seed, it, dim)
        for axis in basis:
            x = transfer_along_axis(x, y, axis, n_knots)
        if metric:
            record.kl.append(metric(x))
    return x, record


def idt(source: ImagePlanar, target: ImagePlanar, iterations=DEFAULT_ITERATIONS,
        seed=42, n_knots=N_KNOTS, trace=True, rotation=random_rotation):
    """Recolor ``source`` so its RGB distribution matches ``target``'s.

    Each iteration draws a rotation for ``(seed, iteration)`` and, axis by
    axis, remaps the projected source pixels onto the projected target
    pixels.  The trace records, after each iteration (index 0 is the
    input), the 1-D KDE KL between source and target projections averaged
    over 64 fixed directions.  Output is RGB and not clamped.
    """
    if source.space is not ColorSpace.RGB or target.space is not ColorSpace.RGB:
        raise ContractError("idt operates on RGB images")
    out, record = idt_pixels(source.pixels(), target.pixels(), iterations, seed, n_knots,
                             trace, rotation)
    return ImagePlanar.from_pixels(out, source.height, source.width), record
