"""Command-line entry point.

Subcommands: basis, polytope, functional, ground-state, square.  Model
definitions come from a JSON config validated against the published
schema (unknown keys rejected); results go out as RFC 4180 CSV with
17-significant-digit floats, byte-stable for a fixed seed.  Exit codes:
0 success, 1 domain errors (infeasible occupations, empty sectors),
2 usage and config errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from . import hubbard_square
from .basis import (SectorLabel, adapt_symmetry, enumerate_all_sectors,
                    enumerate_sector)
from .errors import (CapacityError, InfeasibleOccupationError,
                     InvalidOrbitalError, SectorMismatchError)
from .functional import (ConstrainedSearchProblem, FunctionalOptions,
                         boundary_expansion, exchange_force,
                         functional_general)
from .model import (build_interaction_matrix, model_from_config,
                    orbital_from_index)
from .oracle import SectorHamiltonian, ground_state
from .polytope import sector_polytope

logger = logging.getLogger(__name__)

DOMAIN_ERRORS = (InfeasibleOccupationError, SectorMismatchError,
                 InvalidOrbitalError, CapacityError)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything one invocation needs, config file plus flags."""

    lattice: object = None
    interaction: object = None
    particles: int = 0
    sector: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    workers: int = 1
    constraint_tol: float = 1e-10
    value_tol: float = 1e-6
    dry_run: bool = False
    extras: dict = field(default_factory=dict)


def _schema():
    with resources.files("latrdmft").joinpath("schema.json").open("rb") as fh:
        return json.load(fh)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"config schema violation at {pointer}: {err.message}")
    return raw


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def emit_csv(table, path: Optional[str]) -> None:
    """Write (header, rows) as RFC 4180 CSV; '-' or None means stdout."""
    header, rows = table
    for row in rows:
        if len(row) != len(header):
            raise ValueError("table is not rectangular")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    data = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(data)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(data)


def _parse_sector(text: str, lattice) -> SectorLabel:
    parts = [p for p in text.replace(";", ",").split(",") if p != ""]
    need = lattice.dimension + (1 if lattice.spinful else 0)
    if len(parts) != need:
        kind = "K components plus Mz" if lattice.spinful else "K components"
        raise ConfigError(f"sector '{text}' must give {need} values ({kind})")
    momentum = tuple(int(p) for p in parts[:lattice.dimension])
    mz = float(parts[lattice.dimension]) if lattice.spinful else None
    return SectorLabel(momentum=momentum, mz=mz)


def _orbital_text(lattice, q: int) -> str:
    orb = orbital_from_index(lattice, q)
    nu = ".".join(str(x) for x in orb.nu)
    if orb.m is None:
        return nu
    return nu + ("u" if orb.m > 0 else "d")


def _parse_grid(spec: str) -> np.ndarray:
    lo, hi, steps = spec.split(":")
    return np.linspace(float(lo), float(hi), int(steps))


def _sector_bases(run: RunConfig, sector_text: str):
    if sector_text == "all":
        return list(enumerate_all_sectors(run.lattice, run.particles).values())
    label = _parse_sector(sector_text, run.lattice)
    return [enumerate_sector(run.lattice, run.particles, label)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_basis(run: RunConfig, args) -> int:
    bases = _sector_bases(run, args.sector)
    if args.csv or run.output:
        d = run.lattice.n_orbitals
        header = ["sector", "orbitals"] + [f"v{q}" for q in range(d)]
        rows = []
        for basis in bases:
            for config in basis.configurations:
                occupied = set(config)
                rows.append([str(basis.sector),
                             " ".join(_orbital_text(run.lattice, q) for q in config)]
                            + [1 if q in occupied else 0 for q in range(d)])
        emit_csv((header, rows), run.output)
    else:
        for basis in bases:
            print(f"{basis.sector}: R={len(basis)}")
            for config in basis.configurations:
                print("  " + " ".join(_orbital_text(run.lattice, q) for q in config))
    return 0


def _cmd_polytope(run: RunConfig, args) -> int:
    bases = _sector_bases(run, args.sector)
    if len(bases) != 1:
        raise ConfigError("polytope needs a single sector, not 'all'")
    basis = bases[0]
    if len(basis) == 0:
        raise SectorMismatchError(f"sector {basis.sector} is empty")
    basis = _maybe_adapt(basis, args)
    poly = sector_polytope(basis)
    k = poly.chart.dimension
    header = ["kind", "constant"] + [f"c{i}" for i in range(k)]
    rows = []
    for point in poly.chart_vertices():
        rows.append(["vertex", ""] + [float(x) for x in point])
    for f in poly.facets:
        rows.append(["facet", f.constant] + list(f.coefficients))
    emit_csv((header, rows), run.output)
    print(f"chart dimension {k}, independent coordinates "
          f"{[ _orbital_text(run.lattice, q) for q in poly.chart.independent ]}, "
          f"{poly.n_facets} facets", file=sys.stderr)
    return 0


def _maybe_adapt(basis, args):
    adapt = getattr(args, "adapt", None)
    if not adapt:
        return basis
    spin_text, parity_text = adapt.split(",")
    adapted = adapt_symmetry(basis, spin=float(spin_text), parity=int(parity_text))
    if len(adapted) == 0:
        raise SectorMismatchError(f"requested symmetry block ({adapt}) is empty")
    return adapted


def _cmd_functional(run: RunConfig, args) -> int:
    bases = _sector_bases(run, args.sector)
    if len(bases) != 1:
        raise ConfigError("functional needs a single sector")
    basis = bases[0]
    if len(basis) == 0:
        raise SectorMismatchError(f"sector {basis.sector} is empty")
    basis = _maybe_adapt(basis, args)
    V = build_interaction_matrix(run.interaction, basis)
    poly = sector_polytope(basis)
    problem = ConstrainedSearchProblem(poly, V)
    options = FunctionalOptions(seed=run.seed, constraint_tol=run.constraint_tol,
                                value_tol=run.value_tol)
    k = poly.chart.dimension

    if args.ray:
        if args.facet is None:
            raise ConfigError("--ray needs --facet")
        fit = boundary_expansion(problem, args.facet, options=options)
        header = ["distance", "F"]
        rows = [[d, v] for d, v in zip(fit.distances, fit.values)]
        emit_csv((header, rows), run.output)
        print(f"facet {args.facet}: F0={fit.f0:.12g} G={fit.g:.12g} "
              f"beta={fit.beta:.6g} residual={fit.residual:.3g}"
              + (" (poor fit)" if fit.poor_fit else ""), file=sys.stderr)
        return 0

    if args.n:
        points = [np.array([float(v) for v in args.n.split(",")])]
    elif args.grid:
        if len(args.grid) != k:
            raise ConfigError(f"--grid needs {k} axis specs for this sector")
        axes = [_parse_grid(g) for g in args.grid]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = [np.array(p) for p in zip(*(m.ravel() for m in mesh))]
    else:
        raise ConfigError("functional needs --n or --grid")

    def evaluate(point):
        ev = functional_general(problem, None, point, options)
        grad = [float("nan")] * k
        if args.gradient:
            grad = list(exchange_force(problem, point, options=options))
        margin = float(ev.facet_margins.min()) if len(ev.facet_margins) else 0.0
        return list(point) + [ev.value, int(ev.converged), margin] + grad

    if run.workers > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            rows = list(pool.map(evaluate, points))
    else:
        rows = [evaluate(p) for p in points]
    header = ([f"n{i}" for i in range(k)] + ["F", "converged", "margin"]
              + [f"dF_dn{i}" for i in range(k)])
    emit_csv((header, rows), run.output)
    return 0


def _cmd_ground_state(run: RunConfig, args) -> int:
    bases = _sector_bases(run, args.sector)
    d = run.lattice.n_orbitals
    header = ["sector", "R", "E0"] + [f"n{q}" for q in range(d)]
    rows = []
    for basis in bases:
        if len(basis) == 0:
            continue
        basis_run = _maybe_adapt(basis, args)
        V = build_interaction_matrix(run.interaction, basis_run)
        gs = ground_state(SectorHamiltonian.build(basis_run, V))
        rows.append([str(basis_run.sector), len(basis_run), gs.energy]
                    + list(gs.occupations))
    if not rows:
        raise SectorMismatchError("no nonempty sector matched the request")
    emit_csv((header, rows), run.output)
    return 0


def _cmd_square(run: RunConfig, args) -> int:
    if args.grid_n2:
        n2_grid = _parse_grid(args.grid_n2)
    else:
        n2_grid = np.linspace(0.005, 0.995, 199)
    u_grid = np.geomspace(args.u_min, args.u_max, args.u_points)
    tables = hubbard_square.figure_data(u_grid, n2_grid, u_functional=args.u)
    table = tables["functional"] if args.figure == 1 else tables["energy"]
    emit_csv(table, run.output)
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latrdmft",
        description="Occupation-number functionals for one-band lattice models")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="model JSON file")
        p.add_argument("--output", default=None, help="CSV output path ('-' = stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--tol-constraint", type=float, default=1e-10)
        p.add_argument("--tol-value", type=float, default=1e-6)
        p.add_argument("--dry-run", action="store_true",
                       help="validate config and arguments, compute nothing")

    p = sub.add_parser("basis", help="enumerate sector configurations")
    common(p)
    p.add_argument("--sector", required=True, help="'K[,Mz]' or 'all'")
    p.add_argument("--csv", action="store_true", help="emit one CSV row per configuration")
    p.set_defaults(func=_cmd_basis)

    p = sub.add_parser("polytope", help="vertices and facets of one sector")
    common(p)
    p.add_argument("--sector", required=True)
    p.add_argument("--adapt", default=None, metavar="S,P",
                   help="restrict to a total-spin/parity block, e.g. '0,-1'")
    p.set_defaults(func=_cmd_polytope)

    p = sub.add_parser("functional", help="constrained-search functional values")
    common(p)
    p.add_argument("--sector", required=True)
    p.add_argument("--adapt", default=None, metavar="S,P")
    p.add_argument("--n", default=None, help="single chart point 'x1,x2,...'")
    p.add_argument("--grid", nargs="+", default=None, metavar="LO:HI:STEPS",
                   help="one axis spec per chart coordinate")
    p.add_argument("--gradient", action="store_true",
                   help="add central-difference dF/dn columns")
    p.add_argument("--facet", type=int, default=None)
    p.add_argument("--ray", action="store_true",
                   help="boundary study along an interior ray of --facet")
    p.set_defaults(func=_cmd_functional)

    p = sub.add_parser("ground-state", help="dense sector diagonalization")
    common(p)
    p.add_argument("--sector", required=True, help="'K[,Mz]' or 'all'")
    p.add_argument("--adapt", default=None, metavar="S,P")
    p.set_defaults(func=_cmd_ground_state)

    p = sub.add_parser("square", help="half-filled four-site Hubbard data")
    common(p, needs_config=False)
    p.add_argument("--figure", type=int, choices=(1, 2), required=True)
    p.add_argument("--u", type=float, default=1.0,
                   help="coupling for the functional table")
    p.add_argument("--u-min", type=float, default=0.1)
    p.add_argument("--u-max", type=float, default=100.0)
    p.add_argument("--u-points", type=int, default=40)
    p.add_argument("--grid-n2", default=None, metavar="LO:HI:STEPS")
    p.set_defaults(func=_cmd_square)
    return parser


def run(argv) -> int:
    """Execute one CLI invocation; returns the process exit code."""
    logging.basicConfig(level=os.environ.get("LATRDMFT_LOG", "WARNING"))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        runcfg = RunConfig(seed=args.seed, workers=args.workers,
                           constraint_tol=args.tol_constraint,
                           value_tol=args.tol_value, output=args.output,
                           dry_run=args.dry_run)
        if getattr(args, "config", None):
            raw = load_config(args.config)
            lattice, interaction, particles = model_from_config(raw)
            runcfg.lattice = lattice
            runcfg.interaction = interaction
            runcfg.particles = particles
            runcfg.seed = raw.get("seed", runcfg.seed)
            runcfg.workers = raw.get("workers", runcfg.workers)
            tols = raw.get("tolerances", {})
            runcfg.constraint_tol = tols.get("constraint", runcfg.constraint_tol)
            runcfg.value_tol = tols.get("value", runcfg.value_tol)
        if runcfg.dry_run:
            print("configuration ok")
            return 0
        return args.func(runcfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
