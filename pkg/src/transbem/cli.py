"""Command-line front end: ``verify-sphere``, ``sweep`` and ``solve``.

Runs are described by a TOML file whose tables flatten to dotted keys
(``gmres.tol``, ``osrc.n_pade`` ...). ``--set key=value`` overrides a key;
the value is parsed as a TOML value and falls back to a plain string.
See README.md for the list of keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MeshError, SceneError, TransbemError
from .fields import evaluate_potentials, square_grid, relative_error_grid, series_reference
from .formulations import BUILDERS, assemble_operators
from .medium import PlaneWave, material
from .mesh import Scene, generate_icosphere, parse_msh, subdivisions_for_density, validate
from .precond import make_preconditioner
from .solver import gmres

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_INTERNAL = 0, 2, 3, 4

DEFAULTS = {
    "geometry.radius": 0.005,
    "geometry.centers": [[0.0, 0.0, 0.0]],
    "geometry.msh": [],
    "materials.exterior": "water",
    "materials.interior": "fat",
    "frequencies": None,
    "mesh.n_h": 6.0,
    "mesh.max_subdivisions": 9,
    "formulation": "pmchwt",
    "preconditioner": "mass",
    "osrc.n_pade": 4,
    "osrc.theta_degrees": 60.0,
    "osrc.r_eff": None,
    "gmres.tol": 1e-7,
    "gmres.max_iter": None,
    "incident.direction": [1.0, 0.0, 0.0],
    "outputs.dir": "transbem-out",
    "outputs.report": "report.json",
    "outputs.grid": "grid.csv",
    "outputs.grid_preset": "square",
    "outputs.write_grid": None,
}

SWEEP_FREQUENCIES = [125e3, 250e3, 500e3]
PRECONDITIONERS = ("none", "mass", "calderon", "osrc-interior", "osrc-exterior")


def _flatten(table, prefix=""):
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def load(cls, path=None, overrides=()):
        values = dict(DEFAULTS)
        base = Path(".")
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file {str(path)!r} does not exist")
            try:
                data = tomllib.loads(path.read_text(encoding="utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from None
            values.update(cls._checked(_flatten(data)))
            base = path.parent
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, text = item.split("=", 1)
            values.update(cls._checked({key.strip(): _parse_value(text.strip())}))
        cfg = cls(values, base)
        cfg.validate()
        return cfg

    @staticmethod
    def _checked(flat):
        unknown = sorted(set(flat) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return flat

    def validate(self):
        v = self.values
        if v["frequencies"] is not None:
            freqs = _as_list(v["frequencies"])
            if not freqs or any(not isinstance(f, (int, float)) or f <= 0 for f in freqs):
                raise ConfigError("frequencies must be a non-empty list of positive numbers")
        if not isinstance(v["mesh.n_h"], (int, float)) or v["mesh.n_h"] < 2:
            raise ConfigError("mesh.n_h must be >= 2")
        for f in _as_list(v["formulation"]):
            if f not in BUILDERS:
                raise ConfigError(f"unknown formulation {f!r}; choose from {sorted(BUILDERS)}")
        for p in _as_list(v["preconditioner"]):
            if p not in PRECONDITIONERS:
                raise ConfigError(f"unknown preconditioner {p!r}; choose from {list(PRECONDITIONERS)}")
        if not (0 < float(v["osrc.theta_degrees"]) < 180):
            raise ConfigError("osrc.theta_degrees must lie in (0, 180)")
        if int(v["osrc.n_pade"]) < 1:
            raise ConfigError("osrc.n_pade must be >= 1")
        if float(v["gmres.tol"]) <= 0:
            raise ConfigError("gmres.tol must be positive")
        if not v["geometry.msh"] and not _as_list(v["geometry.centers"]):
            raise ConfigError("the geometry is empty")
        for p in _as_list(v["geometry.msh"]):
            if not (self.base_dir / p).is_file() and not Path(p).is_file():
                raise ConfigError(f"mesh file {p!r} does not exist")
        try:
            material(v["materials.exterior"])
            for m in self.interior_materials():
                material(m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def frequencies(self, default):
        f = self.values["frequencies"]
        return [float(x) for x in (_as_list(f) if f is not None else default)]

    def n_objects(self):
        msh = _as_list(self.values["geometry.msh"])
        return len(msh) if msh else len(_as_list(self.values["geometry.centers"]))

    def interior_materials(self):
        mats = self.values["materials.interior"]
        n = self.n_objects()
        # a bare (rho, c, alpha, b) list counts as one material
        if isinstance(mats, str) or (isinstance(mats, list) and mats and not isinstance(mats[0], (str, list))):
            return [mats] * n
        mats = list(mats)
        if len(mats) == 1:
            return mats * n
        if len(mats) != n:
            raise ConfigError(f"{len(mats)} interior materials given for {n} objects")
        return mats

    def osrc_kwargs(self):
        r = self.values["osrc.r_eff"]
        return {"n_pade": int(self.values["osrc.n_pade"]),
                "theta": math.radians(float(self.values["osrc.theta_degrees"])),
                "r_eff": None if r is None else float(r)}

    @property
    def out_dir(self) -> Path:
        return Path(self.values["outputs.dir"])


def build_scene(cfg: RunConfig, f: float) -> Scene:
    ext = material(cfg["materials.exterior"])
    ints = [material(m) for m in cfg.interior_materials()]
    msh = _as_list(cfg["geometry.msh"])
    if msh:
        meshes = []
        for p in msh:
            path = cfg.base_dir / p if (cfg.base_dir / p).is_file() else Path(p)
            mesh, _ = validate(parse_msh(path.read_bytes()), strict=True)
            meshes.append(mesh)
        return Scene(meshes, ext, ints)
    radius = float(cfg["geometry.radius"])
    meshes = []
    for center, mat in zip(_as_list(cfg["geometry.centers"]), ints):
        h = min(ext.wavelength(f), mat.wavelength(f)) / float(cfg["mesh.n_h"])
        level = subdivisions_for_density(radius, h, cap=int(cfg["mesh.max_subdivisions"]))
        meshes.append(generate_icosphere(radius, level, center=center))
    return Scene(meshes, ext, ints, radii=[radius] * len(meshes))


def _system_for(ops, formulation, preconditioner, cfg):
    if preconditioner.startswith("osrc"):
        if formulation == "muller":
            raise ConfigError("OSRC preconditioning is defined for PMCHWT only")
        formulation = "pmchwt-permuted"
    wave = PlaneWave(cfg["incident.direction"], ops.k0)
    system = BUILDERS[formulation](ops.scene, operators=ops, wave=wave)
    P = make_preconditioner(preconditioner, system, **(cfg.osrc_kwargs() if preconditioner.startswith("osrc") else {}))
    return system, P


def _solve(system, P, cfg):
    max_iter = cfg["gmres.max_iter"]
    return gmres(system.matvec, P, system.rhs, float(cfg["gmres.tol"]),
                 None if max_iter is None else int(max_iter))


def _write_json(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2))


def _grid_points(cfg):
    preset = cfg["outputs.grid_preset"]
    if preset != "square":
        raise ConfigError(f"unknown grid preset {preset!r}")
    return square_grid()


def run_verify_sphere(cfg: RunConfig) -> int:
    if cfg["geometry.msh"] or len(_as_list(cfg["geometry.centers"])) != 1:
        raise ConfigError("verify-sphere needs exactly one generated sphere")
    formulation = _as_list(cfg["formulation"])[0]
    preconditioner = _as_list(cfg["preconditioner"])[0]
    runs, code = [], EXIT_OK
    freqs = cfg.frequencies([500e3])
    for f in freqs:
        t0 = time.perf_counter()
        scene = build_scene(cfg, f)
        ops = assemble_operators(scene, f)
        system, P = _system_for(ops, formulation, preconditioner, cfg)
        x, report = _solve(system, P, cfg)
        t1 = time.perf_counter()
        grid, reference = series_reference(system.solution(x), scene, _grid_points(cfg))
        run = {
            "frequency_hz": f,
            "formulation": system.formulation,
            "preconditioner": preconditioner,
            "dofs": system.shape[0],
            "nodes": scene.n_dofs,
            "error": relative_error_grid(grid, reference),
            "error_complex": relative_error_grid(grid, reference, amplitude=False),
            "iterations": report.iterations,
            "converged": report.converged,
            "timings": {
                "assembly_s": ops.assembly_seconds,
                "preconditioner_setup_s": P.setup_seconds,
                "solve_s": report.wall_time_total_s,
                "field_s": time.perf_counter() - t1,
                "total_s": time.perf_counter() - t0,
            },
            "solver": report.to_dict(),
        }
        runs.append(run)
        grid_name = cfg["outputs.grid"] if len(freqs) == 1 else f"{Path(cfg['outputs.grid']).stem}_{int(f)}.csv"
        if cfg["outputs.write_grid"] is not False:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            grid.write_csv(cfg.out_dir / grid_name)
        if not report.converged:
            code = EXIT_NOT_CONVERGED
    _write_json(cfg.out_dir / cfg["outputs.report"], runs[0] if len(runs) == 1 else {"runs": runs})
    return code


SWEEP_COLUMNS = ["frequency_hz", "formulation", "preconditioner", "dofs", "iterations", "converged",
                 "t_per_iter_s", "t_total_s"]


def run_sweep(cfg: RunConfig) -> int:
    freqs = cfg.frequencies(SWEEP_FREQUENCIES)
    if len(freqs) < 2:
        raise ConfigError("a sweep needs at least two frequencies")
    combos = [(f, p) for f in _as_list(cfg["formulation"]) for p in _as_list(cfg["preconditioner"])]
    for form, prec in combos:
        if form == "muller" and prec.startswith("osrc"):
            raise ConfigError("OSRC preconditioning is defined for PMCHWT only")
    rows = []
    for f in freqs:
        scene = build_scene(cfg, f)
        ops = assemble_operators(scene, f)
        for form, prec in combos:
            system, P = _system_for(ops, form, prec, cfg)
            _, report = _solve(system, P, cfg)
            rows.append({
                "frequency_hz": f, "formulation": system.formulation, "preconditioner": prec,
                "dofs": system.shape[0], "iterations": report.iterations, "converged": report.converged,
                "t_per_iter_s": report.wall_time_per_iteration_s, "t_total_s": report.wall_time_total_s,
            })
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    _write_json(cfg.out_dir / cfg["outputs.report"], {"rows": rows})
    return EXIT_OK


def run_solve(cfg: RunConfig) -> int:
    formulation = _as_list(cfg["formulation"])[0]
    preconditioner = _as_list(cfg["preconditioner"])[0]
    f = cfg.frequencies([500e3])[0]
    scene = build_scene(cfg, f)
    ops = assemble_operators(scene, f)
    system, P = _system_for(ops, formulation, preconditioner, cfg)
    x, report = _solve(system, P, cfg)
    sol = system.solution(x)

    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    layout, chunks, offset = [], [], 0
    for m in range(len(scene)):
        for trace, values in (("phi", sol.phi[m]), ("psi", sol.psi[m])):
            layout.append({"interface": m + 1, "trace": trace, "offset": offset, "length": int(values.size)})
            chunks.append(values)
            offset += values.size
    stacked = np.concatenate(chunks).astype(np.complex128)
    stacked.view(np.float64).astype("<f8").tofile(out / "solution.bin")
    sidecar = {
        "file": "solution.bin",
        "dtype": "little-endian float64, interleaved real/imaginary",
        "n_complex": int(stacked.size),
        "layout": layout,
        "interface_dofs": [int(s.dof_count) for s in ops.spaces],
        "system_size": system.shape[0],
        "frequency_hz": f,
        "formulation": system.formulation,
        "preconditioner": preconditioner,
        "incident_direction": list(system.wave.direction),
        "assembly_s": ops.assembly_seconds,
        "solver": report.to_dict(),
    }
    _write_json(out / "solution.json", sidecar)
    if cfg["outputs.write_grid"]:
        points = _grid_points(cfg)
        grid = evaluate_potentials(sol, scene, points)
        grid.write_csv(out / cfg["outputs.grid"])
    _write_json(out / cfg["outputs.report"], {k: sidecar[k] for k in
                ("system_size", "interface_dofs", "frequency_hz", "formulation", "preconditioner", "solver")})
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


COMMANDS = {"verify-sphere": run_verify_sphere, "sweep": run_sweep, "solve": run_solve}


def _fail(code, kind, message):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="transbem", description="Acoustic transmission BEM runs.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", help="TOML run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    parser.add_argument("-o", "--out", help="output directory (same as --set outputs.dir=...)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"outputs.dir={json.dumps(args.out)}")
    try:
        cfg = RunConfig.load(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MeshError, SceneError) as exc:
        # bad input files and impossible geometries are configuration problems
        return _fail(EXIT_CONFIG, exc.code, str(exc))
    except TransbemError as exc:
        return _fail(EXIT_INTERNAL, exc.code, str(exc))
    except Exception as exc:  # noqa: BLE001 - every failure must map to an exit code
        return _fail(EXIT_INTERNAL, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
