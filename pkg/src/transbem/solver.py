"""Left-preconditioned GMRES without restart."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import Breakdown, DimensionMismatch


@dataclass
class SolveReport:
    """Outcome of one GMRES run.

    ``residual_history[i]`` is the preconditioned relative residual after
    ``i`` iterations, so it starts at 1.0.
    """

    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time_total_s: float = 0.0
    wall_time_per_iteration_s: float = 0.0
    matvec_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _as_map(op):
    if op is None:
        return lambda v: v
    if callable(op):
        return op
    return lambda v: op @ v


def gmres(apply_A, apply_P, b, tol: float = 1e-7, max_iter: int | None = None):
    """Solve ``P A x = P b`` from a zero initial guess.

    Stops once ``||P (b - A x)|| / ||P b|| <= tol``. The Krylov basis is
    kept in full and orthogonalised by modified Gram-Schmidt with one
    reorthogonalisation pass. Returns ``(x, SolveReport)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b)
    n = b.shape[0]
    for op in (apply_A, apply_P):
        shape = getattr(op, "shape", None)
        if shape is not None and tuple(shape) != (n, n):
            raise DimensionMismatch(f"operator of shape {tuple(shape)} for a vector of length {n}")
    A, P = _as_map(apply_A), _as_map(apply_P)
    dtype = np.result_type(b, np.complex128)
    max_iter = min(n, 2000) if max_iter is None else int(max_iter)
    report = SolveReport()
    t0 = time.perf_counter()

    r0 = np.asarray(P(b), dtype=dtype)
    if r0.shape != b.shape:
        raise DimensionMismatch(f"preconditioner maps {b.shape} to {r0.shape}")
    beta = np.linalg.norm(r0)
    x = np.zeros(n, dtype=dtype)
    if beta == 0:
        report.residual_history = [0.0]
        report.converged = True
        report.wall_time_total_s = time.perf_counter() - t0
        return x, report

    V = np.zeros((max_iter + 1, n), dtype=dtype)
    H = np.zeros((max_iter + 1, max_iter), dtype=dtype)
    cs = np.zeros(max_iter, dtype=dtype)
    sn = np.zeros(max_iter, dtype=dtype)
    g = np.zeros(max_iter + 1, dtype=dtype)
    g[0] = beta
    V[0] = r0 / beta
    history = [1.0]
    k = 0

    for j in range(max_iter):
        Av = np.asarray(A(V[j]))
        report.matvec_count += 1
        if Av.shape != b.shape:
            raise DimensionMismatch(f"operator maps {b.shape} to {Av.shape}")
        w = np.array(P(Av), dtype=dtype)  # copy: P may return its input
        for _ in range(2):
            for i in range(j + 1):
                h = np.vdot(V[i], w)
                H[i, j] += h
                w -= h * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        lucky = H[j + 1, j] == 0
        if not lucky:
            V[j + 1] = w / H[j + 1, j]

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        a, c = H[j, j], H[j + 1, j]
        denom = np.hypot(abs(a), abs(c))
        if denom == 0:
            raise Breakdown(f"singular Hessenberg matrix at iteration {j + 1}", j + 1)
        cs[j] = abs(a) / denom
        sn[j] = (a / abs(a)) * np.conj(c) / denom if abs(a) > 0 else 1.0
        H[j, j] = cs[j] * a + sn[j] * c
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        k = j + 1
        res = abs(g[j + 1]) / beta
        history.append(float(res))
        if res <= tol or lucky:
            break

    y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0, dtype=dtype)
    x = V[:k].T @ y
    report.iterations = k
    report.residual_history = history
    report.converged = history[-1] <= tol
    report.wall_time_total_s = time.perf_counter() - t0
    report.wall_time_per_iteration_s = report.wall_time_total_s / k if k else 0.0
    return x, report
