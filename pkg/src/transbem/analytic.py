"""Series solution for a plane wave hitting a single penetrable sphere.

The spherical Bessel functions are implemented here so that this oracle
shares no code with the boundary element path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModeSystemSingular, PointOnSurface

_HUGE = 1e250


def _j_downward(n_max, z):
    """Miller recurrence for ``j_0..j_{n_max}`` at nonzero complex ``z`` (array)."""
    start = int(n_max + 20 + np.max(np.abs(z)) + 4 * math.sqrt(n_max + 1))
    nxt = np.zeros_like(z)
    cur = np.full_like(z, 1e-300)
    out = np.zeros((n_max + 1,) + z.shape, dtype=np.complex128)
    for n in range(start, 0, -1):
        prev = (2 * n + 1) / z * cur - nxt
        nxt, cur = cur, prev
        if n - 1 <= n_max:
            out[n - 1] = cur
        big = np.abs(cur) > _HUGE
        if np.any(big):
            scale = np.where(big, 1.0 / _HUGE, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            out *= scale
    # match the upward values at the highest order where they are stable
    up = _j_upward(n_max, z)
    m = np.minimum(np.floor(np.abs(z)), n_max).astype(int)
    j1 = np.sin(z) / z**2 - np.cos(z) / z if n_max >= 1 else np.zeros_like(z)
    small = (m == 0) & (np.abs(up[0]) < np.abs(j1))
    m = np.where(small, min(1, n_max), m)
    ref = np.take_along_axis(up, m[None], 0)[0]
    raw = np.take_along_axis(out, m[None], 0)[0]
    return out * (ref / raw)


def _j_upward(n_max, z):
    out = np.empty((n_max + 1,) + z.shape, dtype=np.complex128)
    out[0] = np.sin(z) / z
    if n_max >= 1:
        out[1] = np.sin(z) / z**2 - np.cos(z) / z
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def spherical_jn_all(n_max: int, z) -> np.ndarray:
    """``j_n(z)`` for ``n = 0..n_max``; shape ``(n_max + 1,) + z.shape``.

    Orders below ``|z|`` come from upward recurrence, the rest from Miller's
    downward recurrence.
    """
    z = np.asarray(z, dtype=np.complex128)
    zero = z == 0
    zs = np.where(zero, 1.0, z)
    out = _j_downward(n_max, zs)
    up = _j_upward(n_max, zs)
    n = np.arange(n_max + 1).reshape((-1,) + (1,) * z.ndim)
    out = np.where(n < np.abs(zs), up, out)
    if np.any(zero):
        out[:, zero] = 0.0
        out[0, zero] = 1.0
    return out


def spherical_yn_all(n_max: int, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z == 0):
        raise ValueError("y_n has a pole at z = 0")
    out = np.empty((n_max + 1,) + z.shape, dtype=np.complex128)
    out[0] = -np.cos(z) / z
    if n_max >= 1:
        out[1] = -np.cos(z) / z**2 - np.sin(z) / z
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def spherical_h1_all(n_max: int, z) -> np.ndarray:
    return spherical_jn_all(n_max, z) + 1j * spherical_yn_all(n_max, z)


def derivative_all(values, z) -> np.ndarray:
    """``f_n'`` from ``f_0..f_N`` via ``f_n' = f_{n-1} - (n + 1) f_n / z``."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty_like(values)
    out[0] = -values[1] if len(values) > 1 else -(np.sin(z) / z**2 - np.cos(z) / z)
    n = np.arange(1, len(values)).reshape((-1,) + (1,) * z.ndim)
    out[1:] = values[:-1] - (n + 1) * values[1:] / z
    return out


def spherical_bessel(kind: str, n: int, z) -> complex:
    """Single value of ``j_n`` or ``h1_n`` (also ``y_n``)."""
    if n < 0:
        raise ValueError("order must be non-negative")
    z = complex(z)
    m = max(n, 1)
    if kind == "j":
        return complex(spherical_jn_all(m, z)[n])
    if z == 0:
        raise ValueError(f"{kind}_n has a pole at z = 0")
    if kind == "y":
        return complex(spherical_yn_all(m, z)[n])
    if kind == "h1":
        return complex(spherical_h1_all(m, z)[n])
    raise ValueError(f"unknown kind {kind!r}")


def legendre_all(n_max: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


@dataclass(frozen=True)
class SphereSeries:
    a: float
    k0: complex
    k1: complex
    rho0: float
    rho1: float
    c: np.ndarray
    d: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.c) - 1

    @property
    def tail_ratio(self) -> float:
        return float(abs(self.c[-1]) / np.max(np.abs(self.c)))


def sphere_coefficients(a, k0, k1, rho0, rho1, n_max: int | None = None) -> SphereSeries:
    """Scattered (``c_n``) and transmitted (``d_n``) mode amplitudes.

    Continuity of ``p`` and ``(1/rho) dp/dr`` at ``r = a`` gives, per mode,
    ``j_n(k0 a) + c_n h_n(k0 a) = d_n j_n(k1 a)`` and
    ``(k0/rho0)(j_n'(k0 a) + c_n h_n'(k0 a)) = (k1/rho1) d_n j_n'(k1 a)``.
    """
    if a <= 0:
        raise ValueError("radius must be positive")
    k0, k1 = complex(k0), complex(k1)
    if k0.real <= 0 or k1.real <= 0:
        raise ValueError("wavenumbers need positive real parts")
    N = int(math.ceil(abs(k0) * a)) + 20 if n_max is None else int(n_max)
    z0, z1 = k0 * a, k1 * a
    j0 = spherical_jn_all(N, z0)
    h0 = spherical_h1_all(N, z0)
    j1 = spherical_jn_all(N, z1)
    dj0, dh0, dj1 = derivative_all(j0, z0), derivative_all(h0, z0), derivative_all(j1, z1)
    s0, s1 = k0 / rho0, k1 / rho1
    # [h, -j1; s0 h', -s1 j1'] [c; d] = [-j0; -s0 j0']
    det = -h0 * s1 * dj1 + j1 * s0 * dh0
    scale = np.abs(h0 * s1 * dj1) + np.abs(j1 * s0 * dh0)
    bad = np.nonzero(np.abs(det) <= 1e-14 * scale)[0]
    if bad.size:
        raise ModeSystemSingular(f"mode {bad[0]} system is singular", int(bad[0]))
    c = (j0 * s1 * dj1 - j1 * s0 * dj0) / det
    d = (-h0 * s0 * dj0 + j0 * s0 * dh0) / det
    return SphereSeries(float(a), k0, k1, float(rho0), float(rho1), c, d)


def series_field(series: SphereSeries, points, direction=(0.0, 0.0, 1.0), center=(0.0, 0.0, 0.0),
                 scattered_only: bool = False) -> np.ndarray:
    """Total field (or scattered field outside) at ``points``.

    The series is written for incidence along +z; other directions are
    handled by measuring the polar angle from ``direction``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(center)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    r = np.linalg.norm(x, axis=1)
    a = series.a
    if np.any(np.abs(r - a) < 1e-12 * a):
        raise PointOnSurface("evaluation point lies on the sphere surface")
    cos_t = np.where(r > 0, (x @ d) / np.where(r > 0, r, 1.0), 1.0)
    N = series.n_max
    n = np.arange(N + 1)[:, None]
    P = legendre_all(N, cos_t)
    weights = (2 * n + 1) * (1j**n)
    out = np.empty(len(r), dtype=np.complex128)
    ext = r > a
    if np.any(ext):
        h = spherical_h1_all(N, series.k0 * r[ext])
        sca = np.sum(weights * series.c[:, None] * h * P[:, ext], axis=0)
        out[ext] = sca if scattered_only else sca + np.exp(1j * series.k0 * (x[ext] @ d))
    if np.any(~ext):
        j = spherical_jn_all(N, series.k1 * r[~ext])
        out[~ext] = np.sum(weights * series.d[:, None] * j * P[:, ~ext], axis=0)
    return out
