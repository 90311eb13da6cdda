"""Materials, attenuating wavenumbers, OSRC damping and plane-wave incidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonPositiveKR


@dataclass(frozen=True)
class Material:
    """Homogeneous fluid with power-law attenuation.

    ``alpha`` is in Np/m at 1 MHz and scales as ``(f / 1 MHz) ** b``.
    """

    rho: float
    c: float
    alpha: float = 0.0
    b: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.rho <= 0 or self.c <= 0:
            raise ValueError("density and sound speed must be positive")
        if self.alpha < 0 or self.b < 0:
            raise ValueError("attenuation parameters must be non-negative")

    def wavelength(self, f: float) -> float:
        return self.c / f


PRESETS = {
    "water": Material(1000.0, 1500.0, 0.015, 2.0, "water"),
    "fat": Material(917.0, 1412.0, 9.334, 1.0, "fat"),
    "bone": Material(1912.0, 4080.0, 47.20, 1.0, "bone"),
}


def material(spec) -> Material:
    """Resolve a preset name, a ``(rho, c, alpha, b)`` tuple or a Material."""
    if isinstance(spec, Material):
        return spec
    if isinstance(spec, str):
        try:
            return PRESETS[spec.lower()]
        except KeyError:
            raise ConfigError(f"unknown material preset {spec!r}; choose from {sorted(PRESETS)}") from None
    try:
        rho, c, alpha, b = (float(x) for x in spec)
    except (TypeError, ValueError):
        raise ConfigError(f"material must be a preset name or (rho, c, alpha, b), got {spec!r}") from None
    return Material(rho, c, alpha, b)


def wavenumber(mat: Material, f: float) -> complex:
    """``2 pi f / c + i alpha (f * 1e-6) ** b``."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    return complex(2.0 * np.pi * f / mat.c, mat.alpha * (f * 1e-6) ** mat.b)


def damped_wavenumber(k: complex, r_eff: float) -> complex:
    """Complex-shifted wavenumber ``k (1 + 0.4 i (Re(k) r_eff) ** (-2/3))``."""
    kr = complex(k).real * r_eff
    if not kr > 0:
        raise NonPositiveKR(f"Re(k) * r_eff must be positive, got {kr:g}")
    return complex(k) * (1.0 + 0.4j * kr ** (-2.0 / 3.0))


@dataclass(frozen=True)
class OsrcParams:
    k_eps: complex
    n_pade: int = 4
    theta: float = np.pi / 3
    r_eff: float = 0.0

    def __post_init__(self):
        if self.n_pade < 1:
            raise ValueError("n_pade must be >= 1")
        if not 0 < self.theta < np.pi:
            raise ValueError("theta must lie in (0, pi)")


def osrc_params(k: complex, radius: float, n_pade: int = 4, theta: float = np.pi / 3,
                r_eff: float | None = None) -> OsrcParams:
    """OSRC parameters with the default effective radius of one tenth of ``radius``."""
    r = radius / 10.0 if r_eff is None else r_eff
    return OsrcParams(damped_wavenumber(k, r), n_pade, theta, r)


@dataclass(frozen=True)
class PlaneWave:
    direction: tuple = (1.0, 0.0, 0.0)
    wavenumber: complex = 1.0
    amplitude: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / n))

    def __call__(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        return self.amplitude * np.exp(1j * self.wavenumber * (x @ np.asarray(self.direction)))

    def normal_derivative(self, points, normals) -> np.ndarray:
        d = np.asarray(self.direction)
        return 1j * self.wavenumber * (np.asarray(normals) @ d) * self(points)


def incident_traces(wave: PlaneWave, mesh):
    """Nodal Dirichlet and Neumann traces of a plane wave on a mesh.

    Neumann values use area-weighted vertex normals.
    """
    dirichlet = wave(mesh.vertices)
    neumann = wave.normal_derivative(mesh.vertices, mesh.vertex_normals)
    return dirichlet, neumann
