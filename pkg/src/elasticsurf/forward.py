"""Truncated Nystrom boundary-integral solver for scattering by a rough surface.

The scattered field is sought as a combined layer

    u^s(x) = int_S [Pi2(x, y) - i eta Gamma(x, y)] phi(y) ds(y)

over the truncated surface ``S = {(t, f(t)) : |t| <= A_f}``.  With the jump
``+phi/2`` of the stress layer, the Dirichlet condition ``u^s = g`` becomes

    (I + D - i eta S) phi = 2 g,    D = 2 int Pi2,  S = 2 int Gamma.

A cosine taper multiplies both the data ``g`` and the layer itself (the
quadrature weights), so the truncated surface fades out smoothly: the
density has no edge singularity and the truncation error is governed by the
taper length rather than by the mesh.

Quadrature
----------
Both kernels split as ``K = L ln|t - s| + R`` with ``L`` and ``R`` smooth
(``L`` is read off the Bessel expansions, see
:func:`elasticsurf.kernels.combined_layer`).  The log part is localized with a
flat-top C-infinity window ``chi`` (identically 1 near the diagonal, so the
remainder stays smooth) and integrated with the Kress periodic product rule
on a window of ``WINDOW_NODES`` cells; the remainder ``K - chi L ln|t - s|``
is smooth and uses the trapezoid rule.  Its diagonal value is found by
polynomial extrapolation of the even part from off-node evaluations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import kernels
from .kernels import ElasticMedium, StressParams

# log window (in cells): flat top, cutoff, and size of the periodic Kress window
WINDOW_FLAT_CELLS = 8
WINDOW_CUTOFF_CELLS = 60
WINDOW_NODES = 128
# offsets (in cells) used to extrapolate the smooth remainder to the diagonal
_DIAG_OFFSETS = np.array([0.25, 0.5, 0.75, 1.0])

FD_STEP_FACTOR = 1e-4          # FD step for the stress is this / k_s
SOURCE_STANDOFF = 0.1          # minimum source-surface distance in shear wavelengths
RESIDUAL_TOL = 1e-11


class SolverError(RuntimeError):
    """Raised when the dense system is numerically singular or inaccurate."""


class NearSurfaceError(ValueError):
    """Raised when a field is requested too close to (or below) the surface."""


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceProfile:
    """Graph ``x2 = f(x1)`` of the rough surface."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]

    def bounds(self, halfwidth: float, samples: int = 20001):
        """Return ``(inf f, sup f, sup |f'|)`` from dense sampling of [-halfwidth, halfwidth]."""
        t = np.linspace(-halfwidth, halfwidth, samples)
        vals = np.asarray(self.f(t), dtype=float)
        slopes = np.asarray(self.f_prime(t), dtype=float)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(slopes))):
            raise ValueError(f"surface {self.name!r} is not bounded on the window")
        return float(vals.min()), float(vals.max()), float(np.abs(slopes).max())


def sine_series(offset: float, terms, name: str = "sines") -> SurfaceProfile:
    """``f(x) = offset + sum a sin(k x + p)`` for ``terms = [(a, k, p), ...]``."""
    terms = [tuple(float(v) for v in term) for term in terms]

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, float(offset))
        for a, k, p in terms:
            out = out + a * np.sin(k * x + p)
        return out

    def fp(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, k, p in terms:
            out = out + a * k * np.cos(k * x + p)
        return out

    return SurfaceProfile(name, f, fp)


def flat(height: float = 0.0) -> SurfaceProfile:
    return sine_series(height, [], name=f"flat({height:g})")


def example1() -> SurfaceProfile:
    pi = math.pi
    return sine_series(0.5, [(0.03, 2.5 * pi, -2.5 * pi), (0.12, 0.4 * pi, -0.4 * pi)],
                       name="example1")


def example2() -> SurfaceProfile:
    def f(x):
        x = np.asarray(x, dtype=float)
        return (0.5 + 0.1 * np.exp(-25.0 * (0.15 * x - 0.5) ** 2)
                + 0.2 * np.exp(-49.0 * (0.15 * x + 0.6) ** 2)
                - 0.25 * np.exp(-4.0 * x ** 2))

    def fp(x):
        x = np.asarray(x, dtype=float)
        return (0.1 * np.exp(-25.0 * (0.15 * x - 0.5) ** 2) * (-50.0 * 0.15 * (0.15 * x - 0.5))
                + 0.2 * np.exp(-49.0 * (0.15 * x + 0.6) ** 2) * (-98.0 * 0.15 * (0.15 * x + 0.6))
                + 0.25 * 8.0 * x * np.exp(-4.0 * x ** 2))

    return SurfaceProfile("example2", f, fp)


def example3() -> SurfaceProfile:
    pi = math.pi
    return sine_series(0.5, [(0.1, pi, 0.0), (0.1, 0.5 * pi, 0.0)], name="example3")


SURFACES = {"example1": example1, "example2": example2, "example3": example3, "flat": flat}


def get_surface(name: str) -> SurfaceProfile:
    try:
        return SURFACES[name]()
    except KeyError:
        raise ValueError(f"unknown surface {name!r}; choose from {sorted(SURFACES)}") from None


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementGeometry:
    """Receivers and sources ``(-A + i h, H)``, ``h = A/N``, ``i = 0..2N``."""

    H: float
    A: float
    N: int

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"aperture A must be positive, got {self.A}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def spacing(self) -> float:
        return self.A / self.N

    @property
    def count(self) -> int:
        return 2 * self.N + 1

    def x1(self) -> np.ndarray:
        return -self.A + self.spacing * np.arange(self.count)

    def points(self) -> np.ndarray:
        x1 = self.x1()
        return np.stack([x1, np.full_like(x1, self.H)], axis=-1)


def default_halfwidth(A: float, taper_fraction: float = 0.2) -> float:
    """``A + max(10, A/2)``, enlarged so the taper-free window covers 1.2 A."""
    return max(A + max(10.0, 0.5 * A), 1.2 * A / (1.0 - 2.0 * taper_fraction))


@dataclass(frozen=True)
class BIEConfig:
    eta: complex
    node_count: int = 2048
    halfwidth: float = 30.0
    taper_fraction: float = 0.2

    def __post_init__(self):
        if not complex(self.eta).real > 0:
            raise ValueError(f"Re(eta) must be positive, got {self.eta}")
        if self.node_count < 16:
            raise ValueError(f"node_count must be >= 16, got {self.node_count}")
        if not self.halfwidth > 0:
            raise ValueError("truncation halfwidth must be positive")
        if not 0.0 <= self.taper_fraction < 0.5:
            raise ValueError(f"taper_fraction must lie in [0, 0.5), got {self.taper_fraction}")

    @classmethod
    def default(cls, medium: ElasticMedium, geometry: MeasurementGeometry, **overrides):
        """eta = k_s and A_f from :func:`default_halfwidth` unless overridden."""
        values = {k: v for k, v in overrides.items() if v is not None}
        values.setdefault("eta", complex(medium.k_s))
        values.setdefault("taper_fraction", 0.2)
        values.setdefault("halfwidth", default_halfwidth(geometry.A, values["taper_fraction"]))
        return cls(**values)

    @property
    def taper_free_halfwidth(self) -> float:
        return self.halfwidth * (1.0 - 2.0 * self.taper_fraction)


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

def cosine_taper(s: np.ndarray, halfwidth: float, fraction: float) -> np.ndarray:
    """1 on ``|s| <= halfwidth (1 - 2 fraction)``, raised-cosine decay to 0 at the ends."""
    s = np.asarray(s, dtype=float)
    if fraction == 0.0:
        return np.ones_like(s)
    inner = halfwidth * (1.0 - 2.0 * fraction)
    width = halfwidth - inner
    if not width > 0.0:         # fraction below rounding: no taper
        return np.ones_like(s)
    x = np.clip((np.abs(s) - inner) / width, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(math.pi * x))


@dataclass
class BoundaryMesh:
    surface: SurfaceProfile
    s: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    jacobians: np.ndarray
    taper: np.ndarray
    weights: np.ndarray          # trapezoid weights in the parameter
    taper_fraction: float = 0.0

    @property
    def size(self) -> int:
        return self.s.size

    @property
    def spacing(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def layer_weights(self) -> np.ndarray:
        """Quadrature weight times jacobian times taper for each node."""
        return self.weights * self.jacobians * self.taper


def _curve(surface: SurfaceProfile, s):
    s = np.asarray(s, dtype=float)
    fp = np.asarray(surface.f_prime(s), dtype=float)
    jac = np.sqrt(1.0 + fp * fp)
    pts = np.stack([s, np.asarray(surface.f(s), dtype=float)], axis=-1)
    normals = np.stack([-fp, np.ones_like(fp)], axis=-1) / jac[..., None]
    return pts, normals, jac


def build_mesh(surface: SurfaceProfile, config: BIEConfig) -> BoundaryMesh:
    n = config.node_count
    a_f = config.halfwidth
    s = np.linspace(-a_f, a_f, n)
    pts, normals, jac = _curve(surface, s)
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(jac))):
        raise ValueError(f"surface {surface.name!r} is not finite on the mesh")
    h = s[1] - s[0]
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    taper = cosine_taper(s, a_f, config.taper_fraction)
    return BoundaryMesh(surface, s, pts, normals, jac, taper, w, config.taper_fraction)


# ---------------------------------------------------------------------------
# incident point sources
# ---------------------------------------------------------------------------

def incident_field(medium: ElasticMedium, y, j: int, x):
    """``Gamma(x, y) e_j`` (``j`` in {1, 2})."""
    return kernels.gamma(medium, x, y)[..., :, _pol(j)]


def incident_stress(medium: ElasticMedium, params: StressParams, y, j: int, x, normal):
    """Generalized stress of ``Gamma(., y) e_j`` at ``x`` with the given normal."""
    return kernels.pi1(medium, params, x, y, normal)[..., :, _pol(j)]


def _pol(j: int) -> int:
    if j not in (1, 2):
        raise ValueError(f"polarization must be 1 or 2, got {j}")
    return j - 1


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------

def kress_weights(count: int, shift: float = 0.0) -> np.ndarray:
    """Weights ``R_m`` of the periodic product rule for
    ``int_0^{2pi} ln(4 sin^2((t - s)/2)) f(t) dt ~ sum_m R_m f(2 pi m / count)``
    with target ``s = 2 pi shift / count``, indexed by m = 0..count-1 (count even)."""
    if count % 2:
        raise ValueError("count must be even")
    n = count // 2
    m = np.arange(1, n)
    theta = np.pi * (np.arange(count) - shift) / n
    r = -(2.0 * np.pi / n) * (np.cos(np.outer(theta, m)) / m).sum(axis=1)
    return r - (np.pi / n ** 2) * np.cos(n * theta)


def smooth_step(x):
    """C-infinity step: 1 for x <= 0, 0 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    out = (x <= 0.0).astype(float)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    out[mid] = np.exp(2.0 * np.exp(-1.0 / xm) / (xm - 1.0))
    return out


def log_window(v, flat: float = WINDOW_FLAT_CELLS, cutoff: float = WINDOW_CUTOFF_CELLS):
    """Flat-top window in cell units: 1 for |v| <= flat, 0 for |v| >= cutoff."""
    return smooth_step((np.abs(v) - flat) / (cutoff - flat))


def log_window_weights(h: float, nodes: int = WINDOW_NODES, shift: float = 0.0):
    """Offsets ``m`` and weights ``omega_m`` with

        int ln|u| chi(u) g(u) du ~ sum_m omega_m g((m - shift) h)

    for smooth ``g``, where ``chi = log_window(u / h)`` and the target sits
    ``shift`` cells (|shift| < 1) to the right of node 0.  Also returns ``chi``
    at the nodes so the caller can remove the windowed log term from the
    trapezoid sum.
    """
    period = nodes * h
    half = nodes // 2
    offsets = np.arange(-half + 1, half)
    v = offsets - shift
    u = v * h
    chi = log_window(v)
    kress = kress_weights(nodes, shift)[np.mod(offsets, nodes)]
    # ln|u| = ln|2 sin(pi u / P)| + smooth correction on (-P/2, P/2)
    corr = np.empty_like(u)
    nz = v != 0
    corr[nz] = np.log(np.abs(u[nz])) - np.log(np.abs(2.0 * np.sin(np.pi * u[nz] / period)))
    corr[~nz] = math.log(period / (2.0 * math.pi))
    omega = chi * (0.5 * period / (2.0 * math.pi) * kress + h * corr)
    return offsets, omega, chi


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _kernel(medium, params, eta, x, y, n_y, log_part=False):
    return kernels.combined_layer(medium, params, x, y, n_y, eta, log_part=log_part)


def _diagonal_remainder(mesh: BoundaryMesh, medium, params, eta, idx):
    """Limit of ``K(s, t) - L(s, t) ln|t - s|`` as t -> s at nodes ``idx``."""
    s = mesh.s[idx]
    x = mesh.points[idx]
    h = mesh.spacing
    v = _DIAG_OFFSETS ** 2
    # Lagrange weights for extrapolation to v = 0 of an even function of u
    lag = np.array([np.prod([-vk / (vj - vk) for k, vk in enumerate(v) if k != j])
                    for j, vj in enumerate(v)])
    out = np.zeros((s.size, 2, 2), dtype=complex)
    for c, frac in zip(lag, _DIAG_OFFSETS):
        for sign in (1.0, -1.0):
            u = sign * frac * h
            pts, normals, _ = _curve(mesh.surface, s + u)
            val = (_kernel(medium, params, eta, x, pts, normals)
                   - _kernel(medium, params, eta, x, pts, normals, log_part=True)
                   * math.log(abs(u)))
            out += 0.5 * c * val
    return out


def _log_diagonal(medium: ElasticMedium, eta):
    """ln r coefficient of the combined kernel at r = 0 (the stress part vanishes)."""
    coef = -(1.0 / medium.mu + 1.0 / (medium.lam + 2.0 * medium.mu)) / (4.0 * math.pi)
    return -1j * eta * coef * np.eye(2)


def _assemble_rows(mesh, medium, params, eta, rows, out, window):
    """Fill ``out[rows]`` (shape (n, 2, n, 2)) with the system matrix rows."""
    n = mesh.size
    h = mesh.spacing
    offsets, omega, chi = window
    pts, nrm = mesh.points, mesh.normals
    jw = mesh.layer_weights
    jac = mesh.jacobians * mesh.taper
    x = pts[rows][:, None, :]
    y = np.broadcast_to(pts[None, :, :], (rows.size, n, 2)).copy()
    ny = np.broadcast_to(nrm[None, :, :], (rows.size, n, 2))
    local = np.arange(rows.size)
    y[local, rows] = x[:, 0] + np.array([1.0, 0.0])     # placeholder, overwritten
    k = _kernel(medium, params, eta, x, y, ny) * jw[None, :, None, None]

    # windowed log part: subtract chi L ln|u| from the trapezoid sum and add
    # the product-rule weights instead
    cols = rows[:, None] + offsets[None, :]
    valid = (cols >= 0) & (cols < n) & (offsets[None, :] != 0)
    ri, oi = np.nonzero(valid)
    ci = cols[ri, oi]
    lk = _kernel(medium, params, eta, pts[rows[ri]], pts[ci], nrm[ci], log_part=True)
    u = offsets[oi] * h
    coef = omega[oi] * jac[ci] - chi[oi] * np.log(np.abs(u)) * jw[ci]
    np.add.at(k, (ri, ci), coef[:, None, None] * lk)

    # diagonal: smooth remainder by extrapolation plus the log product weight
    center = np.nonzero(offsets == 0)[0][0]
    diag = (_diagonal_remainder(mesh, medium, params, eta, rows) * jw[rows, None, None]
            + omega[center] * jac[rows, None, None] * _log_diagonal(medium, eta))
    k[local, rows] = diag
    # factor 2 from the jump relation, then the identity
    k *= 2.0
    k[local, rows] += np.eye(2)
    out[rows] = np.swapaxes(k, 1, 2)


def assemble_system(mesh: BoundaryMesh, medium: ElasticMedium, params: StressParams,
                    eta: complex, chunk: int = 64, threads: int = 1) -> np.ndarray:
    """Dense ``2n x 2n`` Nystrom matrix of ``I + D - i eta S``.

    Unknowns are ordered node-major: index ``2 j + c`` is component c of the
    density at node j.
    """
    if not complex(eta).real > 0:
        raise ValueError("Re(eta) must be positive")
    params.check(medium)
    n = mesh.size
    if n < WINDOW_NODES:
        raise ValueError(f"assembly needs at least {WINDOW_NODES} nodes, got {n}")
    window = log_window_weights(mesh.spacing)
    out = np.empty((n, 2, n, 2), dtype=complex)
    blocks = [np.arange(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    work = lambda rows: _assemble_rows(mesh, medium, params, eta, rows, out, window)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, blocks))
    else:
        for rows in blocks:
            work(rows)
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite entries in the system matrix")
    return out.reshape(2 * n, 2 * n)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

@dataclass
class DensitySolution:
    """Layer density: complex (n, 2) array of phi at the mesh nodes."""

    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]


class FactoredSystem:
    """LU factorization of the Nystrom matrix, reused for many right-hand sides."""

    def __init__(self, matrix: np.ndarray, check_residual: bool = True):
        self.matrix = matrix if check_residual else None
        self.lu, self.piv = scipy.linalg.lu_factor(matrix, check_finite=False,
                                                   overwrite_a=not check_residual)
        anorm = np.abs(matrix).sum(axis=0).max() if check_residual else None
        if anorm is not None:
            rcond, info = scipy.linalg.lapack.zgecon(self.lu, anorm, norm="1")
            self.condition = 1.0 / rcond if rcond > 0 else math.inf
        else:
            self.condition = math.nan
        if not np.all(np.isfinite(np.diag(self.lu))) or np.any(np.diag(self.lu) == 0):
            raise SolverError(f"singular system matrix (condition ~ {self.condition:.3g})")
        if self.condition > 1e13:
            raise SolverError(f"numerically singular system (condition ~ {self.condition:.3g})")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for one (2n,) or many (2n, m) right-hand sides."""
        x = scipy.linalg.lu_solve((self.lu, self.piv), rhs, check_finite=False)
        if self.matrix is not None:
            res = self.matrix @ x - rhs
            num = np.linalg.norm(res, axis=0)
            den = np.linalg.norm(rhs, axis=0)
            rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), num)
            if np.any(rel > RESIDUAL_TOL):
                raise SolverError(f"solve residual {rel.max():.3g} exceeds {RESIDUAL_TOL:g} "
                                  f"(condition ~ {self.condition:.3g})")
        return x


def solve_densities(matrix: np.ndarray, rhs_list) -> list:
    """Factor once and solve each right-hand side (each of length 2n)."""
    system = FactoredSystem(matrix)
    rhs = np.stack([np.asarray(r, dtype=complex).reshape(-1) for r in rhs_list], axis=1)
    sol = system.solve(rhs)
    return [DensitySolution(sol[:, i].reshape(-1, 2)) for i in range(sol.shape[1])]


def dirichlet_rhs(mesh: BoundaryMesh, data: np.ndarray) -> np.ndarray:
    """Right-hand side ``2 taper g`` for Dirichlet data ``g`` of shape (n, 2[, m])."""
    data = np.asarray(data, dtype=complex)
    t = mesh.taper.reshape((-1, 1) + (1,) * (data.ndim - 2))
    return (2.0 * t * data).reshape((2 * mesh.size,) + data.shape[2:])


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

def _check_above(mesh: BoundaryMesh, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    below = x[:, 1] <= np.asarray(mesh.surface.f(x[:, 0]))
    if np.any(below):
        raise NearSurfaceError("evaluation point on or below the surface")
    d = np.min(np.hypot(x[:, None, 0] - mesh.points[None, :, 0],
                        x[:, None, 1] - mesh.points[None, :, 1]), axis=1)
    if np.any(d < mesh.spacing):
        raise NearSurfaceError("evaluation point within one mesh spacing of the surface")


def evaluation_matrix(mesh: BoundaryMesh, medium: ElasticMedium, params: StressParams,
                      eta: complex, x) -> np.ndarray:
    """Matrix ``E`` (2p x 2n) with ``u^s(x) = E phi`` for p points x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_above(mesh, x)
    return _evaluation_matrix(mesh, medium, params, eta, x)


def _evaluation_matrix(mesh, medium, params, eta, x):
    k = _kernel(medium, params, eta, x[:, None, :], mesh.points[None, :, :],
                mesh.normals[None, :, :])
    k = k * mesh.layer_weights[None, :, None, None]
    return np.swapaxes(k, 1, 2).reshape(2 * x.shape[0], 2 * mesh.size)


_FD = ((-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0))


def stress_evaluation_matrix(mesh: BoundaryMesh, medium: ElasticMedium, params: StressParams,
                             eta: complex, x, normal, step: Optional[float] = None):
    """Matrix ``T`` with ``P u^s(x) = T phi``; derivatives by 4th-order central
    differences with step ``1e-4 / k_s``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_above(mesh, x)
    p = x.shape[0]
    n = np.broadcast_to(np.asarray(normal, dtype=float), (p, 2))
    kernels._check_normal(n)
    step = FD_STEP_FACTOR / medium.k_s if step is None else step
    jac = np.zeros((p, 2, 2 * mesh.size, 2), dtype=complex)     # (point, i, column, m)
    for m in range(2):
        e = np.zeros(2)
        e[m] = step
        for c, w in _FD:
            e_mat = _evaluation_matrix(mesh, medium, params, eta, x + c * e)
            jac[..., m] += (w / step) * e_mat.reshape(p, 2, -1)
    out = kernels._stress(params, medium, jac, n)               # (point, i, column)
    return out.reshape(2 * p, 2 * mesh.size)


def evaluate_scattered(density: DensitySolution, mesh: BoundaryMesh, medium: ElasticMedium,
                       params: StressParams, eta: complex, x):
    """``u^s`` at points x (shape (..., 2)); returns complex (..., 2)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    e = evaluation_matrix(mesh, medium, params, eta, flat)
    return (e @ density.values.reshape(-1)).reshape(x.shape)


def evaluate_scattered_stress(density: DensitySolution, mesh: BoundaryMesh,
                              medium: ElasticMedium, params: StressParams, eta: complex,
                              x, normal=(0.0, 1.0), step: Optional[float] = None):
    """Generalized stress of ``u^s`` at points x with the given unit normal."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    t = stress_evaluation_matrix(mesh, medium, params, eta, flat, normal, step)
    return (t @ density.values.reshape(-1)).reshape(x.shape)


def _interpolate_density(mesh: BoundaryMesh, values: np.ndarray, s, order: int = 16):
    """Local Lagrange interpolation of nodal values at parameters ``s``."""
    h = mesh.spacing
    out = np.empty((len(s),) + values.shape[1:], dtype=values.dtype)
    for idx, target in enumerate(s):
        left = int(np.floor((target - mesh.s[0]) / h)) - order // 2 + 1
        left = min(max(left, 0), mesh.size - order)
        nodes = mesh.s[left:left + order]
        w = np.array([np.prod([(target - nodes[k]) / (nodes[j] - nodes[k])
                               for k in range(order) if k != j]) for j in range(order)])
        out[idx] = np.tensordot(w, values[left:left + order], axes=1)
    return out


def boundary_trace(density: DensitySolution, mesh: BoundaryMesh, medium: ElasticMedium,
                   params: StressParams, eta: complex, s) -> np.ndarray:
    """Limit of ``u^s`` on the surface (from above) at off-node parameters ``s``.

    The log-singular integral uses the windowed product rule with a shifted
    target; the jump term ``phi/2`` uses a local interpolant of the density.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    h = mesh.spacing
    n = mesh.size
    phi = density.values
    lw = mesh.layer_weights
    jt = mesh.jacobians * mesh.taper
    pts, nrm = mesh.points, mesh.normals
    x, _, _ = _curve(mesh.surface, s)
    out = np.empty((s.size, 2), dtype=complex)
    for idx, target in enumerate(s):
        base = int(np.floor((target - mesh.s[0]) / h))
        shift = (target - mesh.s[base]) / h
        if shift < 1e-8 or shift > 1.0 - 1e-8:
            raise ValueError("boundary_trace targets must lie strictly between nodes")
        offsets, omega, chi = log_window_weights(h, shift=shift)
        k = _kernel(medium, params, eta, x[idx], pts, nrm)
        total = np.einsum("jab,jb,j->a", k, phi, lw)
        cols = base + offsets
        ok = (cols >= 0) & (cols < n)
        cols, omega, chi = cols[ok], omega[ok], chi[ok]
        u = mesh.s[cols] - target
        lk = _kernel(medium, params, eta, x[idx], pts[cols], nrm[cols], log_part=True)
        coef = omega * jt[cols] - chi * np.log(np.abs(u)) * lw[cols]
        total += np.einsum("jab,jb,j->a", lk, phi[cols], coef)
        out[idx] = total
    taper = cosine_taper(s, mesh.s[-1], mesh.taper_fraction)
    return out + 0.5 * taper[:, None] * _interpolate_density(mesh, phi, s)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass
class CauchyDataSet:
    """Scattered displacement ``us[k, i, j]`` and generalized stress ``pus[k, i, j]``
    (complex 2-vectors) at receiver i for the source at y_k with polarization
    e_{j+1}; arrays have shape (2N+1, 2N+1, 2, 2)."""

    medium: ElasticMedium
    params: StressParams
    geometry: MeasurementGeometry
    surface_name: str
    us: np.ndarray
    pus: np.ndarray
    bie: Optional[BIEConfig] = None
    noise_delta: float = 0.0
    noise_seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.geometry.count
        for name in ("us", "pus"):
            arr = getattr(self, name)
            if arr.shape != (m, m, 2, 2):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(m, m, 2, 2)}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")


def check_source_standoff(surface: SurfaceProfile, points, medium: ElasticMedium,
                          halfwidth: float, samples: int = 40001):
    """Require every point to lie above the surface by >= 0.1 shear wavelength."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.linspace(-halfwidth, halfwidth, samples)
    curve = np.stack([t, surface.f(t)], axis=-1)
    limit = SOURCE_STANDOFF * medium.shear_wavelength
    for p in points:
        if p[1] <= surface.f(p[0]):
            raise NearSurfaceError(f"point {tuple(p)} lies on or below the surface")
        dist = np.min(np.hypot(curve[:, 0] - p[0], curve[:, 1] - p[1]))
        if dist < limit:
            raise NearSurfaceError(
                f"point {tuple(p)} is {dist:.3g} from the surface (< {limit:.3g})")


def generate_dataset(surface: SurfaceProfile, geometry: MeasurementGeometry,
                     medium: ElasticMedium, params: StressParams, bie: BIEConfig,
                     threads: int = 1) -> CauchyDataSet:
    """Solve the forward problem for every source and polarization and record
    the Cauchy data on the measurement line."""
    params.check(medium)
    _, sup_f, _ = surface.bounds(bie.halfwidth)
    if not geometry.H > sup_f:
        raise ValueError(f"measurement line H={geometry.H} is not above sup f = {sup_f}")
    if geometry.A > bie.taper_free_halfwidth:
        raise ValueError(f"aperture A={geometry.A} exceeds the taper-free window "
                         f"{bie.taper_free_halfwidth:g}; increase the truncation halfwidth")
    pts = geometry.points()
    check_source_standoff(surface, pts, medium, bie.halfwidth)
    mesh = build_mesh(surface, bie)
    matrix = assemble_system(mesh, medium, params, bie.eta, threads=threads)
    system = FactoredSystem(matrix)
    m = geometry.count
    # u^i at the nodes: gamma is (node, source, comp, pol) -> (node, comp, source*pol)
    g = kernels.gamma(medium, mesh.points[:, None, :], pts[None, :, :])
    g = g.transpose(0, 2, 1, 3).reshape(mesh.size, 2, 2 * m)
    rhs = dirichlet_rhs(mesh, -g)
    try:
        phi = system.solve(rhs)
    except SolverError as exc:
        raise SolverError(f"solve failed for the source batch: {exc}") from exc
    e = evaluation_matrix(mesh, medium, params, bie.eta, pts)
    t = stress_evaluation_matrix(mesh, medium, params, bie.eta, pts, (0.0, 1.0))
    # (receiver, comp, source, pol) -> (source, receiver, pol, comp)
    us = (e @ phi).reshape(m, 2, m, 2).transpose(2, 0, 3, 1)
    pus = (t @ phi).reshape(m, 2, m, 2).transpose(2, 0, 3, 1)
    return CauchyDataSet(medium, params, geometry, surface.name,
                         np.ascontiguousarray(us), np.ascontiguousarray(pus), bie=bie)


def add_noise(dataset: CauchyDataSet, delta: float, seed: int) -> CauchyDataSet:
    """``us + delta (z1 + i z2) max|us|`` with the max per (source, polarization)
    slice; likewise for ``pus``.  Deterministic in ``seed``."""
    if not delta >= 0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    if delta == 0:
        return replace(dataset, us=dataset.us.copy(), pus=dataset.pus.copy(),
                       noise_delta=0.0, noise_seed=seed)
    rng = np.random.default_rng(seed)
    out = {}
    for name in ("us", "pus"):
        arr = getattr(dataset, name)
        scale = np.abs(arr).max(axis=(1, 3), keepdims=True)
        z = rng.standard_normal(arr.shape + (2,))
        out[name] = arr + delta * (z[..., 0] + 1j * z[..., 1]) * scale
    return replace(dataset, us=out["us"], pus=out["pus"], noise_delta=float(delta),
                   noise_seed=seed)
