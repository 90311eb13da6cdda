"""
How preconditioners change GMRES iteration counts
=================================================

Water-bone sphere at two frequencies, six elements per wavelength. The
operators are assembled once per frequency; every preconditioner reuses them.
"""

# %%
from transbem.cli import RunConfig, build_scene
from transbem.formulations import BUILDERS, assemble_operators
from transbem.precond import make_preconditioner
from transbem.solver import gmres

runs = [("pmchwt", "mass"), ("pmchwt", "calderon"), ("pmchwt-permuted", "osrc-interior"),
        ("pmchwt-permuted", "osrc-exterior"), ("muller", "mass")]
cfg = RunConfig.load(None, ['materials.interior="bone"'])

# %%
for f in (125e3, 250e3):
    scene = build_scene(cfg, f)
    ops = assemble_operators(scene, f)
    print(f"\n{f / 1e3:.0f} kHz, {scene.n_dofs} nodes, assembly {ops.assembly_seconds:.1f} s")
    for form, prec in runs:
        system = BUILDERS[form](scene, operators=ops)
        P = make_preconditioner(prec, system)
        _, rep = gmres(system.matvec, P, system.rhs)
        print(f"  {form:16s} {prec:14s} {rep.iterations:4d} its  "
              f"{rep.wall_time_per_iteration_s * 1e3:6.1f} ms/it  setup {P.setup_seconds * 1e3:.1f} ms")
