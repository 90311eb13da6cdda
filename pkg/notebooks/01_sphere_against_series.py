"""
Penetrable sphere against the series solution
=============================================

A 5 mm fat sphere in water, hit by a 250 kHz plane wave travelling along +x.
We solve the PMCHWT system, evaluate the field on a 3 x 3 cm grid through
the sphere's centre and compare amplitudes with the exact series.
"""

# %%
import numpy as np

from transbem.fields import relative_error_grid, series_reference
from transbem.formulations import assemble_operators, build_pmchwt
from transbem.mesh import Scene, generate_icosphere
from transbem.precond import make_preconditioner
from transbem.solver import gmres

f = 250e3
scene = Scene([generate_icosphere(0.005, 3)], "water", ["fat"])
ops = assemble_operators(scene, f)
print(f"{ops.spaces[0].dof_count} nodes, assembled in {ops.assembly_seconds:.1f} s")

# %%
# Left preconditioning with the inverse mass matrix turns the Galerkin
# system into its strong form; GMRES runs without restart.
system = build_pmchwt(scene, operators=ops)
x, report = gmres(system.matvec, make_preconditioner("mass", system), system.rhs)
print(f"{report.iterations} iterations, converged={report.converged}")

# %%
# Points closer to the surface than half an element are left out of the norm.
computed, reference = series_reference(system.solution(x), scene)
print("amplitude error", relative_error_grid(computed, reference))
print("complex error  ", relative_error_grid(computed, reference, amplitude=False))
print("excluded points", int(np.sum(~computed.mask)), "of", len(computed.points))

# %%
# A coarse text rendering of |u| along the x axis.
on_axis = np.abs(computed.points[:, 1]) < 1e-12
for xv, u, r in zip(computed.points[on_axis, 0][::10], computed.values[on_axis][::10],
                    reference.values[on_axis][::10]):
    print(f"x = {xv * 1e3:6.1f} mm   |u| = {abs(u):.3f}   exact {abs(r):.3f}")
