"""Direct imaging of the rough surface from near-field Cauchy data.

For a sampling point z the indicator is

    I(z) = sum_j h sum_k | I1_jk(z) - 2i e_j^T Im_-Gamma(z, y_k) e_j |^2,

    I1_jk(z) = h sum_i [ Pu^s(x_i; y_k, e_j) . conj(Gamma(x_i, z) e_j)
                         - u^s(x_i; y_k, e_j) . conj(Pi1(x_i, z) e_j) ],

with the stress kernel taken with the line normal (0, 1) and ``Im_-`` the
lower half-circle plane-wave quadrature.  Both the receiver sum and the
background term reduce to matrix products over blocks of sampling points.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .forward import CauchyDataSet
from .kernels import ElasticMedium, StressParams

LINE_NORMAL = np.array([0.0, 1.0])
BLOCK = 512        # sampling points per work item; fixed so results do not depend on threads


@dataclass(frozen=True)
class SamplingGrid:
    x1_min: float = -6.0
    x1_max: float = 6.0
    x2_min: float = 0.0
    x2_max: float = 1.2
    nx1: int = 241
    nx2: int = 61

    def __post_init__(self):
        if self.nx1 < 2 or self.nx2 < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError("grid ranges must be nonempty")

    def axes(self):
        return (np.linspace(self.x1_min, self.x1_max, self.nx1),
                np.linspace(self.x2_min, self.x2_max, self.nx2))

    def points(self) -> np.ndarray:
        """Sampling points, shape (nx1, nx2, 2)."""
        x1, x2 = self.axes()
        g1, g2 = np.meshgrid(x1, x2, indexing="ij")
        return np.stack([g1, g2], axis=-1)


@dataclass(frozen=True)
class ImagingConfig:
    M: int = 256
    normalize: bool = False

    def __post_init__(self):
        if self.M < 8:
            raise ValueError(f"M must be >= 8, got {self.M}")


@dataclass
class ImageGrid:
    """Indicator values ``values[a, b] = I(x1[a], x2[b])``."""

    grid: SamplingGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.grid.nx1, self.grid.nx2):
            raise ValueError("image values do not match the grid shape")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("image values must be finite and nonnegative")


class _Context:
    """Dataset-dependent quantities shared by all sampling points."""

    def __init__(self, dataset: CauchyDataSet, medium: ElasticMedium, params: StressParams,
                 config: ImagingConfig):
        geo = dataset.geometry
        self.medium = medium
        self.params = params
        self.h = geo.spacing
        self.H = geo.H
        self.receivers = geo.points()
        self.sources = geo.points()
        # data rows per polarization j: (source k, receiver i * component l)
        m = geo.count
        self.pus = [dataset.pus[:, :, j, :].reshape(m, 2 * m) for j in range(2)]
        self.us = [dataset.us[:, :, j, :].reshape(m, 2 * m) for j in range(2)]
        d, w = kernels.half_circle_rule("minus", config.M)
        self.dirs = d
        c = 1.0 / (8.0 * math.pi)
        kp, ks = medium.k_p, medium.k_s
        mu, lam = medium.mu, medium.lam
        # e_j^T Im_- Gamma(z, y) e_j = sum_m [A_jm e^{i kp (z-y).d} + B_jm e^{i ks (z-y).d}]
        self.source_p = np.exp(-1j * kp * (self.sources @ d.T))       # (k, m)
        self.source_s = np.exp(-1j * ks * (self.sources @ d.T))
        self.coef_p = [c * w * d[:, j] ** 2 / (lam + 2.0 * mu) for j in range(2)]
        self.coef_s = [c * w * (1.0 - d[:, j] ** 2) / mu for j in range(2)]

    def indicator(self, z: np.ndarray) -> np.ndarray:
        """I(z) for sampling points z of shape (p, 2)."""
        z = np.asarray(z, dtype=float)
        if np.any(z[:, 1] >= self.H):
            raise ValueError("sampling points must lie below the measurement line")
        g, p1 = kernels.gamma_and_pi1(self.medium, self.params, self.receivers[:, None, :],
                                      z[None, :, :], LINE_NORMAL)      # (i, z, l, j)
        kp, ks = self.medium.k_p, self.medium.k_s
        zp = np.exp(1j * kp * (z @ self.dirs.T))                      # (z, m)
        zs = np.exp(1j * ks * (z @ self.dirs.T))
        total = np.zeros(z.shape[0])
        for j in range(2):
            gj = np.conj(g[..., j]).transpose(0, 2, 1).reshape(-1, z.shape[0])   # (i*l, z)
            pj = np.conj(p1[..., j]).transpose(0, 2, 1).reshape(-1, z.shape[0])
            i1 = self.h * (self.pus[j] @ gj - self.us[j] @ pj)                 # (k, z)
            back = ((self.source_p * self.coef_p[j]) @ zp.T
                    + (self.source_s * self.coef_s[j]) @ zs.T)                 # (k, z)
            total += self.h * np.sum(np.abs(i1 - 2j * back) ** 2, axis=0)
        return total


def indicator_at(dataset: CauchyDataSet, medium: ElasticMedium, params: StressParams, z,
                 config: ImagingConfig = ImagingConfig()) -> float:
    """Indicator I(z) at one sampling point."""
    ctx = _Context(dataset, medium, params, config)
    return float(ctx.indicator(np.asarray(z, dtype=float).reshape(1, 2))[0])


def compute_image(dataset: CauchyDataSet, medium: ElasticMedium, params: StressParams,
                  grid: SamplingGrid = SamplingGrid(), config: ImagingConfig = ImagingConfig(),
                  threads: int = 1) -> ImageGrid:
    """Indicator over the whole sampling grid."""
    if grid.x2_max >= dataset.geometry.H:
        raise ValueError("sampling grid must lie strictly below the measurement line")
    ctx = _Context(dataset, medium, params, config)
    pts = grid.points().reshape(-1, 2)
    out = np.empty(pts.shape[0])
    blocks = [slice(i, min(i + BLOCK, pts.shape[0])) for i in range(0, pts.shape[0], BLOCK)]

    def work(sl):
        out[sl] = ctx.indicator(pts[sl])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, blocks))
    else:
        for sl in blocks:
            work(sl)
    values = out.reshape(grid.nx1, grid.nx2)
    if config.normalize:
        values = values / values.max()
    meta = {"M": config.M, "normalize": config.normalize, "surface": dataset.surface_name,
            "noise_delta": dataset.noise_delta, "noise_seed": dataset.noise_seed}
    return ImageGrid(grid, values, meta)


def extract_ridge(image: ImageGrid):
    """Per-column argmax: list of ``(x1, x2)``; ties go to the smaller x2."""
    if image.values.size == 0:
        raise ValueError("empty image")
    x1, x2 = image.grid.axes()
    idx = np.argmax(image.values, axis=1)          # first maximum = smallest x2
    return [(float(a), float(x2[b])) for a, b in zip(x1, idx)]
