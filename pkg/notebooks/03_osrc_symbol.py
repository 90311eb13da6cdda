"""
The localised DtN map on spherical harmonics
============================================

On a sphere the surface Laplacian is diagonal in spherical harmonics, so the
OSRC approximation should act on ``P_n(cos theta)`` as multiplication by
``ik sqrt(1 - n(n+1)/(k_eps a)^2)``. The Pade form only needs sparse solves.
"""

# %%
import numpy as np

from transbem.assembly import P1Space, laplace_beltrami, mass_matrix
from transbem.medium import osrc_params
from transbem.mesh import generate_icosphere
from transbem.precond import OsrcOperator, pade_coefficients

a, k = 0.005, 2 * np.pi * 500e3 / 1500
space = P1Space(generate_icosphere(a, 4))
M, S = mass_matrix(space), laplace_beltrami(space)
params = osrc_params(k, a)
dtn = OsrcOperator("DtN", space, k, params, M, S)
print("k_eps / k =", params.k_eps / k)

# %%
p = pade_coefficients(4, np.pi / 3)
for z in (1.0, 4.0, -2.0):
    print(f"f({z:+.0f}) = {complex(p(z)):.4f}   sqrt = {np.sqrt(complex(z)):.4f}")

# %%
cos_t = space.mesh.vertices[:, 2] / a
for n in range(8):
    c = np.zeros(n + 1)
    c[n] = 1
    y = np.polynomial.legendre.legval(cos_t, c)
    out = dtn.apply(y)
    eig = np.vdot(y, M @ out) / np.vdot(y, M @ y)
    exact = 1j * k * np.sqrt(1 - n * (n + 1) / (params.k_eps * a) ** 2)
    print(f"n={n}  discrete {complex(eig):.1f}   symbol {complex(exact):.1f}")
