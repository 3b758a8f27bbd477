"""Gradient-preserving post-process ("regrain") for color-mapped images.

Given the original image ``I`` and its recolored version ``t(I)``, each
channel of the output ``J`` minimizes the discrete energy::

    sum_p psi_p (J_p - t(I)_p)^2 + sum_edges phi_e ((J_q - J_p) - (I_q - I_p))^2

over 4-neighbour edges (forward differences, no edges across the border,
i.e. Neumann boundaries).  Its normal equations are the 5-point system::

    psi J + L_phi J = psi t(I) + L_phi I

where ``L_phi`` is the phi-weighted graph Laplacian (``-div(phi grad)``).
The system is symmetric positive definite whenever ``psi > 0``.

Weight fields follow the usual choice: ``phi = 30 / (1 + 10 |grad I|)``
keeps flat areas flat, and ``psi`` shrinks where the mapping stretches
colors.  Gradients for the weights are measured in 8-bit intensity units
(``gradient_scale = 255``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ContractError, ConvergenceWarning
from .imagecore import ColorSpace, ImagePlanar

PSI_FLOOR = 1e-3
GRADIENT_SCALE = 255.0
_STRETCH_EPS = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    max_sweeps: int = 2000
    tolerance: float = 1e-5
    levels: int = 1
    omega: float = 1.9

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ContractError("tolerance must be positive")
        if not 0 < self.omega < 2:
            raise ContractError("omega must lie in (0, 2)")
        if self.levels < 1:
            raise ContractError("levels must be >= 1")
        if self.max_sweeps < 1:
            raise ContractError("max_sweeps must be >= 1")


@dataclass(frozen=True, eq=False)
class RegrainWeights:
    phi: np.ndarray
    psi: np.ndarray


@dataclass
class SolveInfo:
    converged: bool = True
    sweeps: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def auto_levels(height, width, coarsest=8) -> int:
    levels = 1
    while min(height, width) >= 2 * coarsest:
        height, width = (height + 1) // 2, (width + 1) // 2
        levels += 1
    return levels


# --------------------------------------------------------------------------
# Weight fields
# --------------------------------------------------------------------------

def forward_differences(plane):
    """Forward differences with reflected borders (zero at the last row/column)."""
    dx = np.zeros_like(plane)
    dy = np.zeros_like(plane)
    dx[:, :-1] = plane[:, 1:] - plane[:, :-1]
    dy[:-1, :] = plane[1:, :] - plane[:-1, :]
    return dx, dy


def gradient_norm(img: ImagePlanar, scale=GRADIENT_SCALE) -> np.ndarray:
    """Per-pixel Euclidean norm of the forward differences of all channels."""
    total = np.zeros(img.data.shape[:2])
    for c in range(3):
        dx, dy = forward_differences(img.data[..., c])
        total += dx * dx + dy * dy
    return scale * np.sqrt(total)


def phi_from_gradient(g):
    return 30.0 / (1.0 + 10.0 * np.asarray(g, dtype=np.float64))


def psi_from_gradient(g, stretch):
    g = np.asarray(g, dtype=np.float64)
    psi = np.where(g > 5.0, 2.0 / (1.0 + np.asarray(stretch, dtype=np.float64)), g / 5.0)
    return np.maximum(psi, PSI_FLOOR)


def weight_phi(I: ImagePlanar, scale=GRADIENT_SCALE) -> np.ndarray:
    return phi_from_gradient(gradient_norm(I, scale))


def weight_psi(I: ImagePlanar, mapped: ImagePlanar, scale=GRADIENT_SCALE) -> np.ndarray:
    """``psi`` with the color stretch estimated as ``|grad t(I)| / |grad I|``."""
    if I.data.shape != mapped.data.shape:
        raise ContractError("images differ in size")
    g = gradient_norm(I, scale)
    stretch = gradient_norm(mapped, scale) / np.maximum(g, _STRETCH_EPS)
    return psi_from_gradient(g, stretch)


def regrain_weights(I: ImagePlanar, mapped: ImagePlanar, scale=GRADIENT_SCALE) -> RegrainWeights:
    return RegrainWeights(phi=weight_phi(I, scale), psi=weight_psi(I, mapped, scale))


# --------------------------------------------------------------------------
# Discrete operator and smoothers
# --------------------------------------------------------------------------

@dataclass(eq=False)
class _Level:
    psi: np.ndarray
    wx: np.ndarray   # weight of edge (i, j)-(i, j+1), shape (H, W-1)
    wy: np.ndarray   # weight of edge (i, j)-(i+1, j), shape (H-1, W)
    diag: np.ndarray = None
    red: np.ndarray = None
    factor: tuple = None     # Cholesky factor when this level is solved directly

    def __post_init__(self):
        h, w = self.psi.shape
        diag = self.psi.copy()
        diag[:, :-1] += self.wx
        diag[:, 1:] += self.wx
        diag[:-1, :] += self.wy
        diag[1:, :] += self.wy
        self.diag = diag
        ii, jj = np.indices((h, w))
        self.red = (ii + jj) % 2 == 0

    def laplacian(self, u):
        out = np.zeros_like(u)
        fx = self.wx * (u[:, 1:] - u[:, :-1])
        fy = self.wy * (u[1:, :] - u[:-1, :])
        out[:, :-1] -= fx
        out[:, 1:] += fx
        out[:-1, :] -= fy
        out[1:, :] += fy
        return out

    def apply(self, u):
        return self.psi * u + self.laplacian(u)

    def neighbour_sum(self, u):
        s = np.zeros_like(u)
        s[:, :-1] += self.wx * u[:, 1:]
        s[:, 1:] += self.wx * u[:, :-1]
        s[:-1, :] += self.wy * u[1:, :]
        s[1:, :] += self.wy * u[:-1, :]
        return s

    def sweep(self, u, b, omega):
        """One red-black SOR sweep, in place."""
        for mask in (self.red, ~self.red):
            gs = (b + self.neighbour_sum(u)) / self.diag
            u[mask] += omega * (gs[mask] - u[mask])
        return u

    def assemble(self) -> np.ndarray:
        """Dense matrix of :meth:`apply` (row-major unknown order)."""
        n = self.psi.size
        eye = np.eye(n).reshape(n, *self.psi.shape)
        return np.stack([self.apply(e).ravel() for e in eye], axis=1)

    def coarsen(self):
        """Aggregate 2x2 blocks: psi sums, crossing edge weights are averaged."""
        h, w = self.psi.shape
        hc, wc = (h + 1) // 2, (w + 1) // 2
        psi = np.zeros((2 * hc, 2 * wc))
        psi[:h, :w] = self.psi
        psi_c = psi.reshape(hc, 2, wc, 2).sum(axis=(1, 3))
        wx = np.zeros((2 * hc, 2 * wc))
        wx[:h, :w - 1] = self.wx
        # edges from column 2J+1 to 2J+2 cross between coarse cells J and J+1
        wx_c = 0.5 * (wx[0::2, 1::2] + wx[1::2, 1::2])[:, :wc - 1]
        wy = np.zeros((2 * hc, 2 * wc))
        wy[:h - 1, :w] = self.wy
        wy_c = 0.5 * (wy[1::2, 0::2] + wy[1::2, 1::2])[:hc - 1, :]
        return _Level(psi_c, wx_c, wy_c)


def _restrict(r, shape_c):
    h, w = r.shape
    hc, wc = shape_c
    pad = np.zeros((2 * hc, 2 * wc))
    pad[:h, :w] = r
    return pad.reshape(hc, 2, wc, 2).sum(axis=(1, 3))


def _prolong(e, shape):
    return np.repeat(np.repeat(e, 2, axis=0), 2, axis=1)[:shape[0], :shape[1]]


def _build_hierarchy(psi, phi, levels):
    wx = phi[:, :-1].copy()
    wy = phi[:-1, :].copy()
    hierarchy = [_Level(psi, wx, wy)]
    while len(hierarchy) < levels and min(hierarchy[-1].psi.shape) >= 4:
        hierarchy.append(hierarchy[-1].coarsen())
    return hierarchy


DIRECT_COARSE_MAX = 1024


def _v_cycle(hierarchy, k, u, b, pre=2, post=2, coarse_sweeps=50):
    lvl = hierarchy[k]
    if k == len(hierarchy) - 1:
        if lvl.psi.size <= DIRECT_COARSE_MAX:
            if lvl.factor is None:
                lvl.factor = scipy.linalg.cho_factor(lvl.assemble())
            u[...] = scipy.linalg.cho_solve(lvl.factor, b.ravel()).reshape(u.shape)
        else:
            for _ in range(coarse_sweeps):
                lvl.sweep(u, b, 1.0)
        return u
    for _ in range(pre):
        lvl.sweep(u, b, 1.0)
    r = b - lvl.apply(u)
    coarse = hierarchy[k + 1]
    rc = _restrict(r, coarse.psi.shape)
    ec = _v_cycle(hierarchy, k + 1, np.zeros_like(rc), rc, pre, post, coarse_sweeps)
    u += _prolong(ec, u.shape)
    for _ in range(post):
        lvl.sweep(u, b, 1.0)
    return u


def _relative_residual(lvl, u, b, b_norm):
    return float(np.linalg.norm(b - lvl.apply(u)) / b_norm)


def solve_channel(I_c, T_c, phi, psi, cfg: SolverConfig, check_every=10):
    """Solve one channel; returns ``(J, converged, sweeps, residual)``."""
    hierarchy = _build_hierarchy(psi, phi, cfg.levels)
    fine = hierarchy[0]
    b = psi * T_c + fine.laplacian(I_c)
    b_norm = max(np.linalg.norm(b), np.finfo(float).tiny)
    u = np.array(T_c, dtype=np.float64, copy=True)
    res = _relative_residual(fine, u, b, b_norm)
    sweeps = 0
    if res < cfg.tolerance:
        return u, True, 0, res
    multigrid = len(hierarchy) > 1
    step = 1 if multigrid else check_every
    while sweeps < cfg.max_sweeps:
        for _ in range(min(step, cfg.max_sweeps - sweeps)):
            if multigrid:
                _v_cycle(hierarchy, 0, u, b)
            else:
                fine.sweep(u, b, cfg.omega)
            sweeps += 1
        res = _relative_residual(fine, u, b, b_norm)
        if res < cfg.tolerance:
            return u, True, sweeps, res
    return u, False, sweeps, res


def regrain(I: ImagePlanar, mapped: ImagePlanar, cfg: SolverConfig | None = None,
            weight_override=None, gradient_scale=GRADIENT_SCALE):
    """Restore the gradient field of ``I`` in the recolored image ``mapped``.

    ``weight_override=(phi0, psi0)`` replaces both weight fields by
    constants; it exists to probe limit behaviour in tests.

    Returns ``(J, SolveInfo)``.  If any channel stops at ``max_sweeps``
    before reaching tolerance, the best iterate is returned, the info is
    marked not converged and a :class:`ConvergenceWarning` is issued.
    """
    cfg = cfg or SolverConfig()
    if I.data.shape != mapped.data.shape:
        raise ContractError("original and mapped images differ in size")
    if weight_override is not None:
        phi0, psi0 = weight_override
        if not (phi0 > 0 and psi0 > 0):
            raise ContractError("override weights must be positive")
        weights = RegrainWeights(phi=np.full(I.data.shape[:2], float(phi0)),
                                 psi=np.full(I.data.shape[:2], float(psi0)))
    else:
        weights = regrain_weights(I, mapped, gradient_scale)

    out = np.empty_like(mapped.data)
    info = SolveInfo()
    for c in range(3):
        J, ok, sweeps, res = solve_channel(I.data[..., c], mapped.data[..., c],
                                          weights.phi, weights.psi, cfg)
        out[..., c] = J
        info.converged &= ok
        info.sweeps.append(sweeps)
        info.residuals.append(res)
    if not info.converged:
        warnings.warn(f"regrain did not reach tolerance {cfg.tolerance:g} "
                      f"(residuals {[f'{r:.2e}' for r in info.residuals]})",
                      ConvergenceWarning, stacklevel=2)
    return ImagePlanar(out, ColorSpace.RGB), info
