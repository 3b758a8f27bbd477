"""Histograms, CDFs, Epanechnikov kernel density estimates and KL divergence."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import gamma as _gamma_fn

import numpy as np

from .exceptions import ContractError

N_BINS = 256
GRID_SIZE = 256
DENSITY_FLOOR = 1e-10

# Ratio of canonical bandwidths (Epanechnikov / Gaussian) used to turn a
# Gaussian rule-of-thumb bandwidth into an AMISE-equivalent Epanechnikov one.
_EPANECHNIKOV_PER_GAUSSIAN = 15.0 ** 0.2 / (4.0 * np.pi) ** -0.1

_KDE_BINNING_THRESHOLD = 100_000


def epanechnikov(u):
    """``K(u) = 3/4 (1 - u^2)`` on ``|u| < 1``, zero elsewhere."""
    u = np.asarray(u, dtype=np.float64)
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


# --------------------------------------------------------------------------
# Histogram / CDF
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray
    total: int

    @property
    def bin_count(self) -> int:
        return len(self.counts)


@dataclass(frozen=True, eq=False)
class Cdf:
    values: np.ndarray


def bin_index(values) -> np.ndarray:
    """Byte bin of each value: ``min(floor(v * 256), 255)``, negatives to 0."""
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * N_BINS), 0, N_BINS - 1).astype(np.intp)


def histogram(plane) -> Histogram:
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise ContractError("cannot histogram an empty plane")
    counts = np.bincount(bin_index(plane).ravel(), minlength=N_BINS).astype(np.int64)
    return Histogram(counts=counts, total=int(plane.size))


def cdf(h: Histogram) -> Cdf:
    if h.total <= 0:
        raise ContractError("cdf of an empty histogram is undefined")
    values = np.cumsum(h.counts) / h.total
    values[-1] = 1.0
    return Cdf(values=values)


# --------------------------------------------------------------------------
# Kernel density estimation
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """A pdf sampled on an even grid, floored and normalized.

    ``floored`` marks grid points where the raw estimate fell below the
    floor and was replaced by it.
    """

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    floored: np.ndarray | None = None

    @property
    def floored_fraction(self) -> float:
        return 0.0 if self.floored is None else float(np.mean(self.floored))

    def mass_where_floored(self, other: "DensityEstimate") -> float:
        """Mass of ``other`` on the grid points where this density was floored."""
        if self.floored is None or not self.floored.any():
            return 0.0
        return float(np.trapezoid(np.where(self.floored, other.density, 0.0), self.grid))

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


@dataclass(frozen=True)
class BandwidthParams:
    h0: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.h0) and self.h0 > 0):
            raise ContractError("h0 must be finite and positive")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ContractError("lambda must be finite and positive")


def make_grid(grid_size=GRID_SIZE, lo=0.0, hi=1.0) -> np.ndarray:
    return np.linspace(lo, hi, grid_size)


def density_from_values(grid, values, bandwidth=float("nan")) -> DensityEstimate:
    """Normalize raw density values on ``grid`` and apply the floor."""
    grid = np.asarray(grid, dtype=np.float64)
    raw = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    area = np.trapezoid(raw, grid)
    if area > 0:
        raw = raw / area
    floored = raw < DENSITY_FLOOR
    dens = np.maximum(raw, DENSITY_FLOOR)
    if area <= 0:
        dens = dens / np.trapezoid(dens, grid)
    return DensityEstimate(grid, dens, float(bandwidth), floored)


def _weighted_quantile(sorted_x, cum_w, q):
    return np.interp(q * cum_w[-1], cum_w, sorted_x)


def silverman_bandwidth(samples, weights=None, min_bandwidth=0.0) -> float:
    """Silverman's rule of thumb rescaled to the Epanechnikov kernel."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    n = w.sum()
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    mean = np.dot(ws, xs) / n
    sigma = np.sqrt(max(np.dot(ws, (xs - mean) ** 2) / n, 0.0))
    cw = np.cumsum(ws)
    iqr = _weighted_quantile(xs, cw, 0.75) - _weighted_quantile(xs, cw, 0.25)
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    h = 0.9 * spread * n ** -0.2 * _EPANECHNIKOV_PER_GAUSSIAN
    return float(max(h, min_bandwidth))


class _SortedSamples:
    """Prefix sums over sorted 1-D samples for exact Epanechnikov sums.

    On its support the kernel is a quadratic polynomial, so the kernel sum
    at ``x`` is a combination of windowed sums of ``w``, ``w s`` and
    ``w s^2``; two binary searches per evaluation point suffice.
    """

    def __init__(self, samples, weights=None):
        x = np.asarray(samples, dtype=np.float64).ravel()
        if weights is None:
            s = np.sort(x)
            w = np.ones_like(s)
        else:
            order = np.argsort(x, kind="stable")
            s, w = x[order], np.asarray(weights, dtype=np.float64).ravel()[order]
        self.center = float(s[s.size // 2]) if s.size else 0.0
        self.s = s - self.center
        self.total = float(w.sum())
        zero = np.zeros(1)
        self.c0 = np.concatenate([zero, np.cumsum(w)])
        self.c1 = np.concatenate([zero, np.cumsum(w * self.s)])
        self.c2 = np.concatenate([zero, np.cumsum(w * self.s * self.s)])

    def kernel_sum(self, points, h):
        """``sum_j w_j K((x - s_j) / h)`` for every point (``h`` scalar or per point)."""
        x = np.asarray(points, dtype=np.float64) - self.center
        h = np.broadcast_to(np.asarray(h, dtype=np.float64), x.shape)
        lo = np.searchsorted(self.s, x - h, side="right")
        hi = np.searchsorted(self.s, x + h, side="left")
        w0 = self.c0[hi] - self.c0[lo]
        w1 = self.c1[hi] - self.c1[lo]
        w2 = self.c2[hi] - self.c2[lo]
        quad = (x * x * w0 - 2.0 * x * w1 + w2) / (h * h)
        return np.maximum(0.75 * (w0 - quad), 0.0)


def kde_epanechnikov(samples, h=None, grid_size=GRID_SIZE, lo=0.0, hi=1.0,
                     weights=None) -> DensityEstimate:
    """Fixed-bandwidth Epanechnikov KDE evaluated on an even grid.

    ``density(x) = 1/(n h) * sum_i K((x - s_i) / h)``, then floored at
    :data:`DENSITY_FLOOR` and renormalized to unit trapezoidal area.
    ``weights`` turns the samples into a weighted set (e.g. bin counts).
    Without ``h`` the Silverman bandwidth is used, never narrower than
    one grid step.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ContractError("kde needs at least one sample")
    grid = make_grid(grid_size, lo, hi)
    if h is None:
        step = (hi - lo) / max(grid_size - 1, 1)
        h = silverman_bandwidth(x, weights, min_bandwidth=step)
    if not h > 0:
        raise ContractError("bandwidth must be positive")
    ss = _SortedSamples(x, weights)
    raw = ss.kernel_sum(grid, h) / (ss.total * h)
    return density_from_values(grid, raw, h)


def kde_raw(samples, points, h) -> np.ndarray:
    """Unfloored fixed-bandwidth density at arbitrary points."""
    ss = _SortedSamples(samples)
    return ss.kernel_sum(points, h) / (ss.total * h)


def channel_density(plane, h=None, grid_size=GRID_SIZE) -> DensityEstimate:
    """KDE of one image channel on ``[0, 1]``.

    Planes above 100k pixels are summarized by their 256 byte bins (each
    bin represented by the mean of its members, weighted by its count).
    """
    v = np.asarray(plane, dtype=np.float64).ravel()
    if v.size > _KDE_BINNING_THRESHOLD:
        idx = bin_index(v)
        counts = np.bincount(idx, minlength=N_BINS).astype(np.float64)
        sums = np.bincount(idx, weights=v, minlength=N_BINS)
        keep = counts > 0
        return kde_epanechnikov(sums[keep] / counts[keep], h, grid_size, weights=counts[keep])
    return kde_epanechnikov(v, h, grid_size)


# --------------------------------------------------------------------------
# Variable bandwidth and KL
# --------------------------------------------------------------------------

def _as_points(samples):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError("expected a non-empty (n,) or (n, d) sample array")
    return x


def _unit_ball_volume(d):
    return np.pi ** (d / 2) / _gamma_fn(d / 2 + 1)


def _radial_kernel_sums(points, data, h, chunk=2048):
    """``sum_j K(||p_i - x_j|| / h_i)`` with the (3/4)(1 - r^2) profile."""
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), (points.shape[0],))
    if points.shape[1] == 1:
        return _SortedSamples(data[:, 0]).kernel_sum(points[:, 0], h)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk]
        d2 = ((p[:, None, :] - data[None, :, :]) ** 2).sum(axis=-1)
        r2 = d2 / h[start:start + chunk, None] ** 2
        out[start:start + chunk] = np.where(r2 < 1.0, 0.75 * (1.0 - r2), 0.0).sum(axis=1)
    return out


def default_h0(samples) -> float:
    x = _as_points(samples)
    n, d = x.shape
    if d == 1:
        return silverman_bandwidth(x[:, 0], min_bandwidth=1e-12)
    sigma = float(np.mean(x.std(axis=0)))
    h = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4)) * sigma
    return max(h * _EPANECHNIKOV_PER_GAUSSIAN, 1e-12)


def pilot_density(samples, h0) -> np.ndarray:
    """Fixed-bandwidth Epanechnikov density at each sample, floored."""
    x = _as_points(samples)
    n, d = x.shape
    # (3/4)(1-r^2) matches the normalized radial profile only for d == 1
    norm = (d + 2) / (2.0 * _unit_ball_volume(d)) / 0.75
    f = norm * _radial_kernel_sums(x, x, h0) / (n * h0 ** d)
    return np.maximum(f, DENSITY_FLOOR)


def variable_bandwidth(samples, params: BandwidthParams | None = None) -> np.ndarray:
    """Adaptive per-sample bandwidths ``h_i = h0 * sqrt(lam / f(x_i))``.

    ``f`` is a fixed-bandwidth pilot estimate with ``h0``.  When ``params``
    is omitted, ``h0`` follows Silverman's rule and ``lam`` is the geometric
    mean of the pilot densities.
    """
    if params is None:
        h0 = default_h0(samples)
        f = pilot_density(samples, h0)
        params = BandwidthParams(h0, float(np.exp(np.mean(np.log(f)))))
    else:
        f = pilot_density(samples, params.h0)
    return params.h0 * np.sqrt(params.lam / f)


def kl_divergence(p: DensityEstimate, q: DensityEstimate) -> float:
    """Trapezoidal ``integral p ln(p / q)`` over the shared grid."""
    if p.grid.shape != q.grid.shape or not np.array_equal(p.grid, q.grid):
        raise ContractError("densities are sampled on different grids")
    return float(np.trapezoid(p.density * np.log(p.density / q.density), p.grid))


def kl_sample_epanechnikov(u, v, params: BandwidthParams | None = None) -> float:
    """Sample-based KL estimate ``D(f || g)`` from kernel-sum ratios.

    For each ``u_i`` the Epanechnikov sums over ``u`` and over ``v`` are
    taken with the same adaptive bandwidth ``h_i``; the mean log ratio
    estimates the divergence.  Sums are divided by their sample counts so
    that unequal set sizes are handled (for equal sizes this is a no-op).
    """
    u = _as_points(u)
    v = _as_points(v)
    if u.shape[1] != v.shape[1]:
        raise ContractError("sample sets have different dimensions")
    h = variable_bandwidth(u, params)
    num = _radial_kernel_sums(u, u, h) / u.shape[0]
    den = np.maximum(_radial_kernel_sums(u, v, h), DENSITY_FLOOR) / v.shape[0]
    return float(np.mean(np.log(num / den)))


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

def write_histogram_csv(path, hists) -> None:
    """Write three channel histograms as ``bin,r,g,b`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "r", "g", "b"])
        for i in range(N_BINS):
            w.writerow([i] + [int(h.counts[i]) for h in hists])


def write_density_csv(path, densities) -> None:
    """Write three channel densities on their shared grid as ``x,r,g,b``."""
    grid = densities[0].grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "r", "g", "b"])
        for i, x in enumerate(grid):
            w.writerow([repr(float(x))] + [repr(float(d.density[i])) for d in densities])


def read_density_csv(path) -> list[DensityEstimate]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid = data[:, 0]
    return [DensityEstimate(grid, data[:, k], float("nan")) for k in (1, 2, 3)]
