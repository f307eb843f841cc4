"""Free-space kernels of the 2D time-harmonic Navier equation.

The Green's tensor is written as ``Gamma = a(r) I + b(r) R (x) R`` with
``R = (x - y)/r``; ``a``, ``b`` and their radial derivatives come from the
closed-form Hankel decomposition

    Gamma = i/(4 w^2) (kp^2 H0(kp r) - ks^2 H0(ks r)) R(x)R
          - i/(2 w^2 r) (kp H1(kp r) - ks H1(ks r)) R(x)R
          + i/(4 w^2 r) (kp H1(kp r) - ks H1(ks r)) I
          + i/(4 mu) H0(ks r) I.

The difference ``kp H1(kp r) - ks H1(ks r)`` is assembled from the regular part
of Y1 so the 1/r poles cancel analytically, which keeps the kernels accurate
down to r ~ 1e-10.

All array functions broadcast over leading axes: points have shape (..., 2)
and matrix-valued kernels come back with shape (..., 2, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import special

R_MIN = 1e-12


class SingularityError(ValueError):
    """Raised when a kernel is evaluated at (numerically) coincident points."""


@dataclass(frozen=True)
class ElasticMedium:
    """Homogeneous isotropic elastic medium at a fixed angular frequency."""

    mu: float
    lam: float
    omega: float

    def __post_init__(self):
        if not (self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not (self.lam + self.mu >= 0):
            raise ValueError(f"lambda + mu must be nonnegative, got {self.lam + self.mu}")
        if not (self.omega > 0):
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def k_p(self) -> float:
        return self.omega / math.sqrt(2.0 * self.mu + self.lam)

    @property
    def k_s(self) -> float:
        return self.omega / math.sqrt(self.mu)

    @property
    def shear_wavelength(self) -> float:
        return 2.0 * math.pi / self.k_s


@dataclass(frozen=True)
class StressParams:
    """Coefficients (mu~, lambda~) of the generalized stress operator.

    Must satisfy ``mu_t + lam_t == mu + lam`` for the medium they are used
    with; :meth:`for_medium` builds a consistent pair and :meth:`check`
    re-validates against a medium.
    """

    mu_t: float
    lam_t: float

    @classmethod
    def for_medium(cls, medium: ElasticMedium, mu_t: float | None = None) -> "StressParams":
        """Pseudo-stress pair by default, otherwise ``lam_t = mu + lam - mu_t``."""
        mu, lam = medium.mu, medium.lam
        if mu_t is None:
            mu_t = mu * (mu + lam) / (3.0 * mu + lam)
            lam_t = (mu + lam) * (2.0 * mu + lam) / (3.0 * mu + lam)
        else:
            lam_t = mu + lam - mu_t
        params = cls(float(mu_t), float(lam_t))
        params.check(medium)
        return params

    @classmethod
    def traction(cls, medium: ElasticMedium) -> "StressParams":
        """The physical traction (mu~ = mu, lambda~ = lambda)."""
        return cls(medium.mu, medium.lam)

    def check(self, medium: ElasticMedium) -> None:
        lhs = self.mu_t + self.lam_t
        rhs = medium.mu + medium.lam
        if abs(lhs - rhs) > 1e-12 * max(1.0, abs(rhs)):
            raise ValueError(
                f"generalized stress needs mu_t + lam_t == mu + lam ({lhs} != {rhs})"
            )


# ---------------------------------------------------------------------------
# scalar Helmholtz kernel
# ---------------------------------------------------------------------------

def _separation(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r < R_MIN):
        raise SingularityError(f"points closer than r_min={R_MIN}")
    return d, r


def helmholtz_phi(k: float, x, y):
    """Fundamental solution ``(i/4) H0(k|x - y|)`` of the Helmholtz equation."""
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    _, r = _separation(x, y)
    return 0.25j * special.hankel1(0, k * r)


# ---------------------------------------------------------------------------
# radial profile of Gamma
# ---------------------------------------------------------------------------

@dataclass
class _Radial:
    r: np.ndarray
    unit: np.ndarray        # (..., 2) unit vector (x - y)/r
    h0p: np.ndarray
    h1p: np.ndarray
    h0s: np.ndarray
    h1s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    da: np.ndarray
    db: np.ndarray


def _radial(medium: ElasticMedium, d, r, log_part: bool = False) -> _Radial:
    """Radial profile of Gamma.  With ``log_part`` every Bessel expression is
    replaced by its ln(r) coefficient (Y_n -> (2/pi) J_n, J_n -> 0, poles
    dropped), giving the smooth factor multiplying ln r."""
    kp, ks = medium.k_p, medium.k_s
    w2 = medium.omega ** 2
    j0p, j1p, y0p, y1rp = special.bessel_parts(kp * r)
    j0s, j1s, y0s, y1rs = special.bessel_parts(ks * r)
    inv_r = 1.0 / r
    pole = 2.0 / math.pi * inv_r
    if log_part:
        y0p, y1rp, y0s, y1rs = (2.0 / math.pi) * np.stack([j0p, j1p, j0s, j1s])
        j0p = j1p = j0s = j1s = np.zeros_like(r)
        pole = 0.0
    h0p = j0p + 1j * y0p
    h0s = j0s + 1j * y0s
    h1p = j1p + 1j * (y1rp - pole / kp)
    h1s = j1s + 1j * (y1rs - pole / ks)
    # kp H1(kp r) - ks H1(ks r) with the -2i/(pi r) poles removed analytically
    d1 = (kp * j1p - ks * j1s) + 1j * (kp * y1rp - ks * y1rs)
    e0 = kp * kp * h0p - ks * ks * h0s
    f = e0 * inv_r - 2.0 * d1 * inv_r * inv_r
    a = 0.25j / medium.mu * h0s + 0.25j / w2 * d1 * inv_r
    b = 0.25j / w2 * e0 - 0.5j / w2 * d1 * inv_r
    da = -0.25j * ks / medium.mu * h1s + 0.25j / w2 * f
    db = 0.25j / w2 * (ks ** 3 * h1s - kp ** 3 * h1p) - 0.5j / w2 * f
    unit = d * inv_r[..., None]
    return _Radial(r, unit, h0p, h1p, h0s, h1s, a, b, da, db)


def _outer(u):
    return u[..., :, None] * u[..., None, :]


_EYE = np.eye(2)


def gamma(medium: ElasticMedium, x, y):
    """Green's tensor Gamma(x, y) of the Navier equation, shape (..., 2, 2)."""
    d, r = _separation(x, y)
    rad = _radial(medium, d, r)
    return rad.a[..., None, None] * _EYE + rad.b[..., None, None] * _outer(rad.unit)


def gamma_split(medium: ElasticMedium, x, y):
    """Compressional and shear parts ``(Gamma_p, Gamma_s)`` of Gamma."""
    d, r = _separation(x, y)
    kp, ks = medium.k_p, medium.k_s
    w2 = medium.omega ** 2
    rad = _radial(medium, d, r)
    rr = _outer(rad.unit)
    frame = 2.0 * rr - _EYE
    c = 0.25j / w2
    g_p = c * ((kp * kp * rad.h0p)[..., None, None] * rr
               - (kp * rad.h1p / r)[..., None, None] * frame)
    g_s = c * ((ks * ks * rad.h0s)[..., None, None] * (_EYE - rr)
               + (ks * rad.h1s / r)[..., None, None] * frame)
    return g_p, g_s


def gamma_jacobian(medium: ElasticMedium, x, y):
    """Derivatives of Gamma with respect to x.

    Returns an array ``G`` of shape (..., 2, 2, 2) with
    ``G[..., i, k, m] = d Gamma_ik(x, y) / d x_m``.
    """
    d, r = _separation(x, y)
    rad = _radial(medium, d, r)
    return _jacobian_from_radial(rad)


def _jacobian_from_radial(rad: _Radial):
    u = rad.unit
    rr = _outer(u)
    proj = _EYE - rr                      # (delta_im - R_i R_m)
    b_r = (rad.b / rad.r)[..., None, None, None]
    # d/dx_m of a(r) delta_ik + b(r) R_i R_k
    term_a = rad.da[..., None, None, None] * _EYE[:, :, None] * u[..., None, None, :]
    term_b = rad.db[..., None, None, None] * rr[..., :, :, None] * u[..., None, None, :]
    term_c = b_r * (proj[..., :, None, :] * u[..., None, :, None]
                    + u[..., :, None, None] * proj[..., None, :, :])
    return term_a + term_b + term_c


# ---------------------------------------------------------------------------
# generalized stress
# ---------------------------------------------------------------------------

def _check_normal(normal):
    n = np.asarray(normal, dtype=float)
    norm = np.hypot(n[..., 0], n[..., 1])
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise ValueError("normal must have unit length")
    return n


def _stress(params: StressParams, medium: ElasticMedium, jac, n):
    """Generalized stress of fields whose Jacobians are ``jac[..., i, m]`` (plus
    optional trailing column axis: ``jac[..., i, k, m]``)."""
    mu = medium.mu
    column = jac.ndim == n.ndim + 2
    if column:
        # (..., i, k, m) -> stress vector for each column k: (..., i, k)
        grad_n = np.einsum("...ikm,...m->...ik", jac, n)
        div = jac[..., 0, :, 0] + jac[..., 1, :, 1]
        rot = jac[..., 1, :, 0] - jac[..., 0, :, 1]
        n_ = n[..., :, None]
        n_perp = np.stack([-n[..., 1], n[..., 0]], axis=-1)[..., :, None]
        return ((mu + params.mu_t) * grad_n + params.lam_t * n_ * div[..., None, :]
                - params.mu_t * n_perp * rot[..., None, :])
    grad_n = np.einsum("...im,...m->...i", jac, n)
    div = jac[..., 0, 0] + jac[..., 1, 1]
    rot = jac[..., 1, 0] - jac[..., 0, 1]
    n_perp = np.stack([-n[..., 1], n[..., 0]], axis=-1)
    return ((mu + params.mu_t) * grad_n + params.lam_t * n * div[..., None]
            - params.mu_t * n_perp * rot[..., None])


def stress_apply(params: StressParams, medium: ElasticMedium, value, jacobian, normal):
    """Generalized stress ``P u`` on a curve with unit normal ``normal``.

    ``jacobian[i][m]`` is du_i/dx_m.  ``value`` (u itself) does not enter the
    operator and is accepted only so callers can pass a full field sample.
    """
    params.check(medium)
    n = _check_normal(normal)
    jac = np.asarray(jacobian, dtype=complex)
    return _stress(params, medium, jac, n)


def pi1(medium: ElasticMedium, params: StressParams, x, y, normal_at_x):
    """Column k is the generalized stress (in x, normal at x) of Gamma(., y) e_k."""
    params.check(medium)
    n = _check_normal(normal_at_x)
    jac = gamma_jacobian(medium, x, y)
    return _stress(params, medium, jac, np.broadcast_to(n, jac.shape[:-3] + (2,)))


def pi2(medium: ElasticMedium, params: StressParams, x, y, normal_at_y):
    """Stress in the second argument: ``pi2(x, y, n) = pi1(y, x, n)^T``."""
    return np.swapaxes(pi1(medium, params, y, x, normal_at_y), -1, -2)


def gamma_and_pi1(medium: ElasticMedium, params: StressParams, x, y, normal_at_x):
    """``(gamma(x, y), pi1(x, y, n))`` from one radial evaluation."""
    params.check(medium)
    n = _check_normal(normal_at_x)
    d, r = _separation(x, y)
    rad = _radial(medium, d, r)
    g = rad.a[..., None, None] * _EYE + rad.b[..., None, None] * _outer(rad.unit)
    jac = _jacobian_from_radial(rad)
    return g, _stress(params, medium, jac, np.broadcast_to(n, jac.shape[:-3] + (2,)))


def gamma_log_part(medium: ElasticMedium, x, y):
    """Smooth matrix ``L`` with ``Gamma(x, y) = L ln|x - y| + (smooth)``."""
    d, r = _separation(x, y)
    rad = _radial(medium, d, r, log_part=True)
    return rad.a[..., None, None] * _EYE + rad.b[..., None, None] * _outer(rad.unit)


def pi2_log_part(medium: ElasticMedium, params: StressParams, x, y, normal_at_y):
    """Smooth matrix ``L`` with ``pi2(x, y, n) = L ln|x - y| + (smooth)``.

    ``L`` vanishes at x = y, so the log singularity of the stress kernel is
    of the mild ``r ln r`` type.
    """
    params.check(medium)
    n = _check_normal(normal_at_y)
    d, r = _separation(y, x)
    jac = _jacobian_from_radial(_radial(medium, d, r, log_part=True))
    out = _stress(params, medium, jac, np.broadcast_to(n, jac.shape[:-3] + (2,)))
    return np.swapaxes(out, -1, -2)


def combined_layer(medium: ElasticMedium, params: StressParams, x, y, normal_at_y,
                   eta: complex, log_part: bool = False):
    """Combined-layer kernel ``pi2(x, y, n) - i eta Gamma(x, y)`` from a single
    radial evaluation (or its ln r coefficient when ``log_part`` is set)."""
    params.check(medium)
    n = _check_normal(normal_at_y)
    d, r = _separation(x, y)
    rad = _radial(medium, d, r, log_part=log_part)
    g = rad.a[..., None, None] * _EYE + rad.b[..., None, None] * _outer(rad.unit)
    # pi2(x, y) = pi1(y, x)^T; swapping the points flips the unit vector, so
    # the Jacobian (odd in R) changes sign
    rad.unit = -rad.unit
    jac = _jacobian_from_radial(rad)
    p2 = np.swapaxes(_stress(params, medium, jac, np.broadcast_to(n, jac.shape[:-3] + (2,))),
                     -1, -2)
    return p2 - 1j * eta * g


# ---------------------------------------------------------------------------
# imaginary part of Gamma by plane-wave quadrature
# ---------------------------------------------------------------------------

HALF_PARTS = ("plus", "minus", "full")


def half_circle_rule(part: str, M: int):
    """Directions ``d`` (shape (m, 2)) and trapezoid weights on a (half) circle.

    ``plus`` is phi in [0, pi] (d2 >= 0), ``minus`` is phi in [-pi, 0]; each
    uses M + 1 equispaced nodes with halved endpoint weights.  ``full`` is the
    periodic 2M-node rule, i.e. the sum of both halves.
    """
    if part not in HALF_PARTS:
        raise ValueError(f"part must be one of {HALF_PARTS}, got {part!r}")
    if M < 8:
        raise ValueError(f"M must be >= 8, got {M}")
    step = math.pi / M
    if part == "full":
        phi = -math.pi + step * np.arange(2 * M)
        w = np.full(2 * M, step)
    else:
        start = 0.0 if part == "plus" else -math.pi
        phi = start + step * np.arange(M + 1)
        w = np.full(M + 1, step)
        w[0] = w[-1] = 0.5 * step
    d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return d, w


def im_gamma_half(medium: ElasticMedium, x, y, part: str = "full", M: int = 256):
    """Plane-wave quadrature of the (half-)circle integrals whose full-circle
    sum is Im Gamma(x, y).  Returns a complex (..., 2, 2) array; only the
    ``full`` variant is real (up to rounding)."""
    d, w = half_circle_rule(part, M)
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    proj = diff @ d.T                                     # (..., m)
    dd = d[:, :, None] * d[:, None, :]                     # (m, 2, 2)
    ep = np.exp(1j * medium.k_p * proj) * w
    es = np.exp(1j * medium.k_s * proj) * w
    mu, lam = medium.mu, medium.lam
    out = (np.einsum("...m,mij->...ij", ep, dd) / (lam + 2.0 * mu)
           + (es.sum(axis=-1)[..., None, None] * _EYE
              - np.einsum("...m,mij->...ij", es, dd)) / mu)
    return out / (8.0 * math.pi)


def im_gamma_coincident(medium: ElasticMedium):
    """Closed-form ``Im Gamma(x, x) = (1/8)(1/(lambda + 2mu) + 1/mu) I``."""
    return 0.125 * (1.0 / (medium.lam + 2.0 * medium.mu) + 1.0 / medium.mu) * _EYE


def plane_wave_average(k: float, x, y, M: int = 256):
    """(1/2pi) times the periodic trapezoid rule for the circle integral of
    exp(i k (x - y).d); converges to J0(k|x - y|)."""
    d, w = half_circle_rule("full", M)
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return (np.exp(1j * k * (diff @ d.T)) * w).sum(axis=-1) / (2.0 * math.pi)
