"""Bessel and Hankel functions of orders 0 and 1 for real arguments.

Three regimes, all vectorized over numpy arrays:

* ``t < 2``       power series (ascending series with the logarithmic
                  Neumann terms for Y0, Y1)
* ``2 <= t < 25`` Miller backward recurrence for J_n, Neumann series for Y0, Y1
* ``t >= 25``     Hankel asymptotic expansion

Absolute accuracy is about 1e-14 over the whole range.  The singular part of
Y1 is exposed separately through :func:`y1_regular` so that differences such as
``k_p H1(k_p r) - k_s H1(k_s r)`` can be formed without cancellation at small r.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

SERIES_MAX = 2.0
ASYMPTOTIC_MIN = 25.0

_N_SERIES = 36
_N_ASYMPTOTIC = 24
# fixed for the whole regime so a value never depends on the rest of its batch
_MILLER_START = 2 * ((int(ASYMPTOTIC_MIN) + 20 + int(math.sqrt(60.0 * ASYMPTOTIC_MIN))) // 2)


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError("Bessel argument must be finite")
    return arr


def _series(t):
    """Ascending series: returns J0, J1, Y0, Y1 + 2/(pi t)."""
    half = 0.5 * t
    q = -half * half
    term0 = np.ones_like(t)            # (-t^2/4)^p / (p!)^2
    term1 = half.copy()                # (t/2)(-t^2/4)^p / (p! (p+1)!)
    j0 = term0.copy()
    j1 = term1.copy()
    harm = 0.0                         # H_p
    s0 = np.zeros_like(t)              # sum_{p>=1} H_p (-t^2/4)^p / (p!)^2
    s1 = (1.0 - 2.0 * EULER_GAMMA) * term1   # sum (psi(p+1)+psi(p+2)) ...
    for p in range(1, _N_SERIES):
        term0 = term0 * q / (p * p)
        term1 = term1 * q / (p * (p + 1))
        j0 = j0 + term0
        j1 = j1 + term1
        harm += 1.0 / p
        s0 = s0 + harm * term0
        s1 = s1 + (2.0 * harm + 1.0 / (p + 1) - 2.0 * EULER_GAMMA) * term1
    log_half = np.log(t) - math.log(2.0)     # log(t/2) without underflow for subnormal t
    y0 = (2.0 / math.pi) * (log_half + EULER_GAMMA) * j0 - (2.0 / math.pi) * s0
    y1_reg = (2.0 / math.pi) * log_half * j1 - s1 / math.pi
    return j0, j1, y0, y1_reg


def _miller(t):
    """Miller recurrence + Neumann series: returns J0, J1, Y0, Y1."""
    start = _MILLER_START
    inv = 2.0 / t
    upper = np.zeros_like(t)           # J_{m+1}
    cur = np.full_like(t, 1e-30)       # J_m
    norm = np.zeros_like(t)            # J0 + 2 sum J_{2k}
    y0_sum = np.zeros_like(t)          # sum_{k>=1} (-1)^k J_{2k} / k
    y1_sum = np.zeros_like(t)          # sum_{k>=1} (-1)^k (J_{2k-1} - J_{2k+1}) / k
    j1 = np.zeros_like(t)
    odd_above = np.zeros_like(t)
    for m in range(start, 0, -1):
        lower = m * inv * cur - upper  # J_{m-1}
        upper, cur = cur, lower
        order = m - 1
        if order % 2 == 0:
            if order > 0:
                k = order // 2
                sign = -1.0 if k % 2 else 1.0
                norm = norm + 2.0 * cur
                y0_sum = y0_sum + sign * cur / k
        else:
            # order = 2k-1 pairs with J_{2k+1}, the previous odd value
            k = (order + 1) // 2
            sign = -1.0 if k % 2 else 1.0
            y1_sum = y1_sum + sign * (cur - odd_above) / k
            odd_above = cur
            if order == 1:
                j1 = cur
        big = np.abs(cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            cur = cur * scale
            upper = upper * scale
            norm = norm * scale
            y0_sum = y0_sum * scale
            y1_sum = y1_sum * scale
            odd_above = odd_above * scale
            j1 = j1 * scale
    j0 = cur
    norm = norm + j0
    j0 = j0 / norm
    j1 = j1 / norm
    y0_sum = y0_sum / norm
    y1_sum = y1_sum / norm
    log_term = np.log(0.5 * t) + EULER_GAMMA
    y0 = (2.0 / math.pi) * (log_term * j0 - 2.0 * y0_sum)
    y1 = -(2.0 / math.pi) * j0 / t + (2.0 / math.pi) * log_term * j1 + (2.0 / math.pi) * y1_sum
    return j0, j1, y0, y1


def _asymptotic(t):
    """Hankel expansion: returns J0, J1, Y0, Y1."""
    out = []
    for n in (0, 1):
        mu = 4.0 * n * n
        total = np.ones(t.shape, dtype=complex)
        term = np.ones(t.shape, dtype=complex)
        for k in range(1, _N_ASYMPTOTIC):
            term = term * (1j * (mu - (2 * k - 1) ** 2) / (k * 8.0)) / t
            total = total + term
        phase = t - (0.5 * n + 0.25) * math.pi
        h = np.sqrt(2.0 / (math.pi * t)) * np.exp(1j * phase) * total
        out.append(h)
    h0, h1 = out
    return h0.real, h1.real, h0.imag, h1.imag


def _evaluate(t):
    """J0, J1, Y0, Y1 + 2/(pi t) on a flat positive array."""
    j0 = np.empty_like(t)
    j1 = np.empty_like(t)
    y0 = np.empty_like(t)
    y1r = np.empty_like(t)
    small = t < SERIES_MAX
    large = t >= ASYMPTOTIC_MIN
    mid = ~(small | large)
    if np.any(small):
        vals = _series(t[small])
        j0[small], j1[small], y0[small], y1r[small] = vals
    if np.any(mid):
        tm = t[mid]
        a, b, c, d = _miller(tm)
        j0[mid], j1[mid], y0[mid], y1r[mid] = a, b, c, d + 2.0 / (math.pi * tm)
    if np.any(large):
        tl = t[large]
        a, b, c, d = _asymptotic(tl)
        j0[large], j1[large], y0[large], y1r[large] = a, b, c, d + 2.0 / (math.pi * tl)
    return j0, j1, y0, y1r


def bessel_parts(t):
    """Return ``(J0, J1, Y0, Y1 + 2/(pi t))`` for an array of positive arguments."""
    arr = _as_array(t)
    if np.any(arr <= 0.0):
        raise ValueError("argument must be positive")
    flat = arr.ravel()
    parts = _evaluate(flat)
    return tuple(p.reshape(arr.shape) for p in parts)


def bessel_j(order, t):
    """Bessel function of the first kind J_order(t), order in {0, 1}, t >= 0."""
    if order not in (0, 1):
        raise ValueError(f"unsupported order {order!r}; expected 0 or 1")
    arr = _as_array(t)
    if np.any(arr < 0.0):
        raise ValueError("bessel_j requires t >= 0")
    flat = arr.ravel()
    out = np.empty_like(flat)
    zero = flat == 0.0
    out[zero] = 1.0 if order == 0 else 0.0
    if np.any(~zero):
        out[~zero] = _evaluate(flat[~zero])[order]
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_y(order, t):
    """Bessel function of the second kind Y_order(t), t > 0."""
    if order not in (0, 1):
        raise ValueError(f"unsupported order {order!r}; expected 0 or 1")
    j0, j1, y0, y1r = bessel_parts(t)
    arr = np.asarray(t, dtype=float)
    out = y0 if order == 0 else y1r - 2.0 / (math.pi * arr)
    return float(out) if np.ndim(out) == 0 else out


def y1_regular(t):
    """``Y1(t) + 2/(pi t)``, finite and smooth as t -> 0."""
    out = bessel_parts(t)[3]
    return float(out) if np.ndim(out) == 0 else out


def hankel1(order, t):
    """Hankel function of the first kind H^(1)_order(t) for t > 0."""
    if order not in (0, 1):
        raise ValueError(f"unsupported order {order!r}; expected 0 or 1")
    arr = _as_array(t)
    if np.any(arr <= 0.0):
        raise ValueError("hankel1 requires t > 0 (logarithmic singularity at 0)")
    j0, j1, y0, y1r = bessel_parts(arr)
    if order == 0:
        out = j0 + 1j * y0
    else:
        out = j1 + 1j * (y1r - 2.0 / (math.pi * arr))
    return complex(out) if out.ndim == 0 else out
