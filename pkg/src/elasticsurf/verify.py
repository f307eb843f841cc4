"""Numerical checks of the identities behind the forward model and the imaging
function.  Every check returns an :class:`IdentityReport`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import forward, kernels, special
from .kernels import ElasticMedium, StressParams

REL_FLOOR = 1e-300


@dataclass
class IdentityReport:
    name: str
    params: dict
    lhs: object
    rhs: object
    abs_error: float
    rel_error: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.rel_error <= self.tolerance)

    @classmethod
    def compare(cls, name, params, lhs, rhs, tolerance, absolute: bool = False):
        """Max-entry comparison; relative error is ``max|L - R| / max(max|R|, floor)``.

        With ``absolute`` the tolerance applies to the absolute error instead.
        """
        lhs_a = np.asarray(lhs)
        rhs_a = np.asarray(rhs)
        abs_err = float(np.max(np.abs(lhs_a - rhs_a))) if lhs_a.size else 0.0
        scale = float(np.max(np.abs(rhs_a))) if rhs_a.size else 0.0
        rel = abs_err / max(scale, REL_FLOOR)
        report = cls(name, dict(params), lhs, rhs, abs_err, rel, tolerance)
        if absolute:
            report.passed = abs_err <= tolerance
        return report

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: abs={self.abs_error:.3e} rel={self.rel_error:.3e} "
                f"tol={self.tolerance:.1e} {self.params}")


def check_funk_hecke(k: float, x, y, M: int = 256, tolerance: float = 1e-10) -> IdentityReport:
    """J0(k|x - y|) against the circle-average quadrature (absolute error)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.hypot(*(x - y)))
    lhs = kernels.plane_wave_average(k, x, y, M)
    rhs = special.bessel_j(0, k * r)
    return IdentityReport.compare("funk-hecke", {"k": k, "kr": k * r, "M": M},
                                  complex(lhs), rhs, tolerance, absolute=True)


def _line_nodes(H: float, A: float, n_quad: int):
    t = np.linspace(-A, A, n_quad)
    w = np.full(n_quad, t[1] - t[0])
    w[[0, -1]] *= 0.5
    return np.stack([t, np.full_like(t, H)], axis=-1), w


def hk_integral(medium: ElasticMedium, params: StressParams, x, y, H: float, A: float,
                n_quad: int) -> np.ndarray:
    """Trapezoid value of the line integral over |t| <= A of
    ``Pi1(xi, x)^T conj(Gamma(xi, y)) - Gamma(xi, x)^T conj(Pi1(xi, y))``."""
    xi, w = _line_nodes(H, A, n_quad)
    normal = np.array([0.0, 1.0])
    gx, px = kernels.gamma_and_pi1(medium, params, xi, np.asarray(x, float), normal)
    gy, py = kernels.gamma_and_pi1(medium, params, xi, np.asarray(y, float), normal)
    integrand = (np.swapaxes(px, -1, -2) @ np.conj(gy)
                 - np.swapaxes(gx, -1, -2) @ np.conj(py))
    return np.tensordot(w, integrand, axes=1)


def check_hk_identity(medium: ElasticMedium, params: StressParams, x, y, H: float, A: float,
                      n_quad: int, M: int = 256, tolerance: float = 0.1) -> IdentityReport:
    """Truncated line integral against ``2i Im_+ Gamma(y, x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (x[1] < H and y[1] < H):
        raise ValueError("both points must lie strictly below the line x2 = H")
    lhs = hk_integral(medium, params, x, y, H, A, n_quad)
    rhs = 2j * kernels.im_gamma_half(medium, y, x, "plus", M)
    return IdentityReport.compare("hk-identity", {"H": H, "A": A, "n_quad": n_quad},
                                  lhs, rhs, tolerance)


def check_reciprocity(surface: forward.SurfaceProfile, medium: ElasticMedium,
                      params: StressParams, bie: forward.BIEConfig, x, y, p, q,
                      tolerance: float = 1e-3) -> IdentityReport:
    """``u^s(x; y, p) . q`` against ``u^s(y; x, q) . p`` from two forward solves."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    forward.check_source_standoff(surface, np.stack([x, y]), medium, bie.halfwidth)
    mesh = forward.build_mesh(surface, bie)
    system = forward.FactoredSystem(forward.assemble_system(mesh, medium, params, bie.eta))
    g = np.stack([-(kernels.gamma(medium, mesh.points, y) @ p),
                  -(kernels.gamma(medium, mesh.points, x) @ q)], axis=-1)   # (n, 2, 2)
    phi = system.solve(forward.dirichlet_rhs(mesh, g))
    e = forward.evaluation_matrix(mesh, medium, params, bie.eta, np.stack([x, y]))
    u = (e @ phi).reshape(2, 2, 2)          # (point, comp, solve)
    lhs = complex(u[0, :, 0] @ q)
    rhs = complex(u[1, :, 1] @ p)
    return IdentityReport.compare("reciprocity", {"x": x.tolist(), "y": y.tolist(),
                                                  "nodes": bie.node_count},
                                  lhs, rhs, tolerance)


def point_source_data(medium: ElasticMedium, y, j: int) -> Callable:
    """Dirichlet data ``g = -u^i`` for the point source at y with polarization e_j."""
    y = np.asarray(y, dtype=float)
    return lambda pts: -forward.incident_field(medium, y, j, pts)


def check_boundary_condition(mesh: forward.BoundaryMesh, density: forward.DensitySolution,
                             medium: ElasticMedium, params: StressParams, eta: complex,
                             data: Optional[Callable] = None, tolerance: float = 1e-3,
                             stride: int = 1) -> IdentityReport:
    """Sup-norm of ``u^s - g`` at surface midpoints inside the taper-free window,
    relative to ``max|g|`` there.  ``data=None`` means ``g = 0``."""
    mids = 0.5 * (mesh.s[:-1] + mesh.s[1:])
    inner = mesh.s[-1] * (1.0 - 2.0 * mesh.taper_fraction)
    mids = mids[np.abs(mids) <= inner][::stride]
    trace = forward.boundary_trace(density, mesh, medium, params, eta, mids)
    pts = np.stack([mids, mesh.surface.f(mids)], axis=-1)
    g = np.zeros_like(trace) if data is None else np.asarray(data(pts), dtype=complex)
    report = IdentityReport.compare("boundary-condition", {"points": mids.size},
                                    trace, g, tolerance)
    if data is None:
        report.passed = report.abs_error <= tolerance
    return report


def navier_operator(field: Callable, medium: ElasticMedium, x, step: float) -> np.ndarray:
    """``mu Lap u + (lam + mu) grad div u + w^2 u`` by central differences."""
    x = np.asarray(x, dtype=float)
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    u0 = np.asarray(field(x))
    u11 = (field(x + e1) - 2.0 * u0 + field(x - e1)) / step ** 2
    u22 = (field(x + e2) - 2.0 * u0 + field(x - e2)) / step ** 2
    u12 = (field(x + e1 + e2) - field(x + e1 - e2)
           - field(x - e1 + e2) + field(x - e1 - e2)) / (4.0 * step ** 2)
    lap = u11 + u22
    grad_div = np.array([u11[0] + u12[1], u12[0] + u22[1]])
    return medium.mu * lap + (medium.lam + medium.mu) * grad_div + medium.omega ** 2 * u0


def check_navier_residual(field: Callable, medium: ElasticMedium, x, step: float,
                          tolerance: float = 1e-6) -> IdentityReport:
    """Relative Navier residual of ``field`` at x, measured against ``|w^2 u|``."""
    res = navier_operator(field, medium, x, step)
    ref = medium.omega ** 2 * np.asarray(field(np.asarray(x, dtype=float)))
    report = IdentityReport.compare("navier-residual", {"step": step}, res, np.zeros(2), tolerance)
    report.rel_error = report.abs_error / max(float(np.max(np.abs(ref))), REL_FLOOR)
    report.rhs = ref
    report.passed = report.rel_error <= tolerance
    return report


def check_im_gamma(medium: ElasticMedium, x, y, M: int = 256,
                   tolerance: float = 1e-8) -> IdentityReport:
    """Full-circle plane-wave quadrature against ``Im Gamma(x, y)`` (absolute, entrywise)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = kernels.im_gamma_half(medium, x, y, "full", M)
    if np.hypot(*(x - y)) < kernels.R_MIN:
        rhs = kernels.im_gamma_coincident(medium)
    else:
        rhs = kernels.gamma(medium, x, y).imag
    return IdentityReport.compare("im-gamma", {"ks_r": medium.k_s * float(np.hypot(*(x - y))),
                                               "M": M}, lhs, rhs, tolerance, absolute=True)


def fd_stress(medium: ElasticMedium, params: StressParams, x, y, normal, step: float):
    """Generalized stress of ``Gamma(., y)`` from a fourth-order central-difference Jacobian."""
    x = np.asarray(x, dtype=float)
    jac = np.zeros((2, 2, 2), dtype=complex)
    for m_ax in range(2):
        e = np.zeros(2)
        e[m_ax] = step
        jac[:, :, m_ax] = (-kernels.gamma(medium, x + 2 * e, y) + 8 * kernels.gamma(medium, x + e, y)
                           - 8 * kernels.gamma(medium, x - e, y)
                           + kernels.gamma(medium, x - 2 * e, y)) / (12.0 * step)
    return kernels.stress_apply(params, medium, None, jac, normal)


def check_pi1_fd(medium: ElasticMedium, params: StressParams, x, y, normal,
                 step: Optional[float] = None, tolerance: float = 1e-7) -> IdentityReport:
    """Analytic ``pi1`` against the finite-difference stress of ``gamma``."""
    if step is None:
        step = 1e-3 / medium.k_s
    lhs = kernels.pi1(medium, params, np.asarray(x, float), np.asarray(y, float), normal)
    rhs = fd_stress(medium, params, x, y, normal, step)
    r = float(np.hypot(*(np.asarray(x, float) - np.asarray(y, float))))
    return IdentityReport.compare("pi1-fd", {"r_wavelengths": r / medium.shear_wavelength,
                                             "step": step}, lhs, rhs, tolerance)


def check_stress_limit(medium: ElasticMedium, params: StressParams, y, q, eps: float = 1e-6,
                       direction=(0.0, 1.0), tolerance: float = 1e-4) -> IdentityReport:
    """Pointwise form: ``2 pi eps P(Gamma q)`` at ``x = y + eps d`` with normal ``-d``
    (pointing towards y), compared with q."""
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.hypot(*d)
    lhs = 2.0 * math.pi * eps * (kernels.pi1(medium, params, y + eps * d, y, -d) @ q)
    return IdentityReport.compare("stress-limit-point", {"eps": eps, "direction": d.tolist()},
                                  lhs, q, tolerance)


def check_stress_limit_mean(medium: ElasticMedium, params: StressParams, y, q,
                            eps: float = 1e-6, samples: int = 64,
                            tolerance: float = 1e-4) -> IdentityReport:
    """Circle-mean form: average of ``2 pi eps P(Gamma q)`` over the circle of radius
    eps about y with the normal pointing towards y, compared with q."""
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    th = 2.0 * math.pi * np.arange(samples) / samples
    d = np.stack([np.cos(th), np.sin(th)], axis=-1)
    vals = kernels.pi1(medium, params, y + eps * d, y, -d) @ q
    lhs = 2.0 * math.pi * eps * vals.mean(axis=0)
    return IdentityReport.compare("stress-limit-mean", {"eps": eps, "samples": samples},
                                  lhs, q, tolerance)
