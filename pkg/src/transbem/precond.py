"""Left preconditioners for the block systems: mass, block-diagonal Calderon and OSRC."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ASSEMBLY_STATS, P1Space, laplace_beltrami, mass_matrix
from .errors import ConfigError, FormulationMismatch, InvalidTheta, SingularFactorisation
from .formulations import BlockSystem, DIRICHLET_ROW
from .medium import OsrcParams, osrc_params


@dataclass(frozen=True)
class PadeCoefficients:
    """Rotated-branch Pade approximation ``f(z) ~ sqrt(z)``."""

    n_pade: int
    theta: float
    c0: complex
    a: np.ndarray
    b: np.ndarray

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.full_like(z, self.c0)
        for a, b in zip(self.a, self.b):
            out = out + a * (z - 1) / (1 + b * (z - 1))
        return out


def pade_coefficients(n_pade: int = 4, theta: float = np.pi / 3) -> PadeCoefficients:
    if n_pade < 1:
        raise ValueError("n_pade must be >= 1")
    if not (np.isfinite(theta) and 0 <= theta < np.pi):
        raise InvalidTheta(f"theta must lie in [0, pi), got {theta!r}")
    j = np.arange(1, n_pade + 1)
    a = 2.0 / (2 * n_pade + 1) * np.sin(j * np.pi / (2 * n_pade + 1)) ** 2
    b = np.cos(j * np.pi / (2 * n_pade + 1)) ** 2
    rot = np.exp(-1j * theta)
    rho = 1 + b * (rot - 1)
    c0 = np.exp(0.5j * theta) * (1 + np.sum(a * (rot - 1) / rho))
    a_t = np.exp(-0.5j * theta) * a / rho**2
    b_t = rot * b / rho
    return PadeCoefficients(n_pade, float(theta), complex(c0), a_t, b_t)


def _splu(matrix, term):
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SingularFactorisation(f"factorisation of Pade term {term} failed: {exc}", term) from exc


class OsrcOperator:
    """Localised DtN or NtD map on one interface.

    All sparse factorisations are computed once here. ``apply`` maps nodal
    coefficients to nodal coefficients.
    """

    def __init__(self, role: str, space: P1Space, k_osrc: complex, params: OsrcParams,
                 mass=None, stiffness=None):
        if role not in ("DtN", "NtD"):
            raise ValueError("role must be 'DtN' or 'NtD'")
        self.role = role
        self.k_osrc = complex(k_osrc)
        self.k_eps = complex(params.k_eps)
        self.params = params
        self.mass = mass_matrix(space) if mass is None else mass
        self.stiffness = laplace_beltrami(space) if stiffness is None else stiffness
        self.pade = pade_coefficients(params.n_pade, params.theta)
        self._scaled_s = (self.stiffness / self.k_eps**2).astype(np.complex128)
        M = self.mass.astype(np.complex128)
        self.factors = [_splu(M - b * self._scaled_s, j + 1) for j, b in enumerate(self.pade.b)]
        self.outer = _splu(M - self._scaled_s, 0) if role == "NtD" else None
        self.shape = self.mass.shape

    def _sqrt(self, v):
        rhs = -(self._scaled_s @ v)
        out = self.pade.c0 * v
        for a, lu in zip(self.pade.a, self.factors):
            out = out + a * lu.solve(rhs)
        return out

    def apply(self, v):
        v = np.asarray(v, dtype=np.complex128)
        if self.role == "DtN":
            return 1j * self.k_osrc * self._sqrt(v)
        w = self.outer.solve(self.mass @ self._sqrt(v))
        return w / (1j * self.k_osrc)

    __matmul__ = apply


def osrc_dtn_apply(op: OsrcOperator, v):
    if op.role != "DtN":
        raise ValueError("operator is not a DtN map")
    return op.apply(v)


def osrc_ntd_apply(op: OsrcOperator, v):
    if op.role != "NtD":
        raise ValueError("operator is not an NtD map")
    return op.apply(v)


class Preconditioner:
    """A linear map ``y -> P y`` acting on weak-form residuals."""

    def __init__(self, kind, apply, system, setup_seconds=0.0, assembled_blocks=0, operators=None):
        self.kind = kind
        self._apply = apply
        self.system = system
        self.setup_seconds = setup_seconds
        self.assembled_blocks = assembled_blocks
        self.operators = operators or []
        self.shape = system.shape

    def __call__(self, y):
        return self._apply(np.asarray(y))

    apply = __call__


KINDS = ("none", "mass", "calderon", "osrc", "osrc-interior", "osrc-exterior")


def make_preconditioner(kind: str, system: BlockSystem, osrc_side: str = "interior", params=None, *,
                        n_pade: int = 4, theta: float = np.pi / 3, r_eff=None) -> Preconditioner:
    """Build a left preconditioner for ``system``.

    ``mass`` is ``M^-1``, ``calderon`` is ``M^-1 C M^-1`` with ``C`` the
    diagonal superblocks of the system, and ``osrc`` is ``L M^-1`` with
    ``L = diag(L_DtN, L_NtD)`` per interface. ``params`` may be one
    OsrcParams or one per interface; otherwise they are derived from the
    chosen wavenumber, ``n_pade``, ``theta`` and ``r_eff``.
    """
    if kind.startswith("osrc-"):
        kind, osrc_side = "osrc", kind[5:]
    if kind not in ("none", "mass", "calderon", "osrc"):
        raise ConfigError(f"unknown preconditioner {kind!r}")
    before = ASSEMBLY_STATS["dense_blocks"]
    t0 = time.perf_counter()
    ops = []

    if kind == "none":
        def apply(y):
            return y.astype(np.complex128)
    elif kind == "mass":
        apply = system.mass_solve
    elif kind == "calderon":
        def apply(y):
            return system.mass_solve(system.matvec(system.mass_solve(y), diagonal_only=True))
    else:
        if system.formulation != "pmchwt-permuted":
            raise FormulationMismatch("OSRC preconditioning requires the permuted PMCHWT system")
        if osrc_side not in ("interior", "exterior"):
            raise ConfigError("osrc_side must be 'interior' or 'exterior'")
        sops = system.operators
        ell = len(sops.spaces)
        if params is None or isinstance(params, OsrcParams):
            params = [params] * ell
        if len(params) != ell:
            raise ConfigError("one OsrcParams per interface is required")
        per_row = []
        for m in range(ell):
            k = sops.k_int[m] if osrc_side == "interior" else sops.k0
            p = params[m] or osrc_params(k, sops.scene.radii[m], n_pade, theta, r_eff)
            space, M = sops.spaces[m], sops.masses[m]
            S = laplace_beltrami(space)
            dtn = OsrcOperator("DtN", space, k, p, M, S)
            ntd = OsrcOperator("NtD", space, k, p, M, S)
            ops += [dtn, ntd]
            per_row.append((dtn, ntd))
        maps = [per_row[m][0] if trace == DIRICHLET_ROW else per_row[m][1] for m, trace in system.rows]

        def apply(y):
            z = system.mass_solve(y)
            out = np.empty_like(z)
            for r, op in enumerate(maps):
                s = system._slice(r)
                out[s] = op.apply(z[s])
            return out

    return Preconditioner(kind, apply, system, time.perf_counter() - t0,
                          ASSEMBLY_STATS["dense_blocks"] - before, ops)
