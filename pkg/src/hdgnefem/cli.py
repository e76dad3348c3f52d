"""Command-line driver: ``solve``, ``converge``, ``adapt`` and ``compare``.

Options may also come from a ``key = value`` file given with ``--config``;
command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path

import numpy as np

from . import export
from .adaptivity import AdaptConfig, adapt_loop, estimate_error, exact_error
from .benchmarks import Benchmark, StokesExact, get_benchmark
from .errors import HdgError
from .geometry import GeometryStrategy
from .hdg import ProblemSpec, SolverConfig, solve
from .mesh import read_mesh
from .nurbs import read_curves
from .studies import run_adapt_compare, run_convergence

log = logging.getLogger("hdgnefem")

DEFAULTS = {
    "solve": dict(mesh="circle", strategy="nefem", k="2", levels="1", out="out"),
    "converge": dict(mesh="circle", strategy="nefem", k="1,2,3,4,5,6", levels="4",
                     out="out", mode="variable"),
    "adapt": dict(mesh="wavy", strategy="nefem", eps="0.005", out="out", iterations="10"),
    "compare": dict(mesh="wavy", strategy="nefem,iso-fixed:1", eps="0.005", out="out",
                    iterations="10"),
}
KEYS = ("mesh", "geometry", "strategy", "k", "eps", "levels", "out", "mode", "iterations")


def read_config(path) -> dict[str, str]:
    """``key = value`` lines (``#`` comments) into a dict."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[cli]\n" + text)
    out = dict(parser["cli"])
    unknown = set(out) - set(KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    return out


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _strategies(text: str) -> list[GeometryStrategy]:
    return [GeometryStrategy.parse(v.strip()) for v in str(text).split(",") if v.strip()]


def load_problem(opts: dict) -> Benchmark:
    """A registered benchmark, or a mesh file with the manufactured solution."""
    name = opts["mesh"]
    if not Path(name).is_file():
        return get_benchmark(name)
    curves = read_curves(opts["geometry"]) if opts.get("geometry") else []
    mesh = read_mesh(name, curves)
    exact = StokesExact(1.0)
    spec = ProblemSpec(exact.viscosity, exact.source, exact.velocity, exact.traction,
                       mesh.pure_dirichlet)
    return Benchmark(Path(name).stem, tuple(curves), mesh, spec, exact)


def cmd_solve(opts: dict) -> int:
    bench = load_problem(opts)
    strategy = GeometryStrategy.parse(opts["strategy"])
    mesh = bench.mesh(int(opts["levels"]) - 1)
    k = _ints(opts["k"])[0]
    sol = solve(mesh, bench.spec, SolverConfig(strategy=strategy), np.full(mesh.n_elements, k))
    est = np.array([estimate_error(sol, e) for e in range(mesh.n_elements)])
    exact = np.array([exact_error(sol, e, bench.exact.velocity) for e in range(mesh.n_elements)])
    out = Path(opts["out"])
    export.write_csv(out / "solve.csv", ("element", "k", "E_e", "exact"),
                     [(e, k, est[e], exact[e]) for e in range(mesh.n_elements)])
    export.write_vtk(out / "solution.vtk", sol, est)
    print(f"{bench.name}: {mesh.n_elements} elements, k={k}, {strategy}, {sol.n_dofs} dofs")
    print(f"max E_e = {est.max():.4e}, max exact = {exact.max():.4e}, "
          f"residual = {sol.residual:.2e}")
    return 0


def cmd_converge(opts: dict) -> int:
    bench = load_problem(opts)
    out = Path(opts["out"])
    tables = []
    for strategy in _strategies(opts["strategy"]):
        table = run_convergence(bench, strategy, int(opts["levels"]), mode=opts["mode"],
                                degrees=(1, 2, 3, 4, 5, 6) if opts["mode"] == "variable"
                                else _ints(opts["k"]),
                                track=_ints(opts["k"]))
        tables.append(table)
        tag = str(strategy).replace(":", "")
        export.write_convergence(out / f"convergence_{tag}.csv", table)
        print(f"{strategy}: {table.seconds:.1f} s" + ("" if table.monotone else " (non-monotone)"))
        for k, s in sorted(table.slopes.items()):
            print(f"  k={k}: u {s['u']:.2f}  u* {s['ustar']:.2f}  L {s['L']:.2f}  p {s['p']:.2f}")
    export.write_slopes(out / "slopes.csv", tables)
    return 0


def cmd_adapt(opts: dict) -> int:
    bench = load_problem(opts)
    strategy = GeometryStrategy.parse(opts["strategy"])
    eps = _floats(opts["eps"])[0]
    rep = adapt_loop(bench.coarse, bench.spec, SolverConfig(strategy=strategy),
                     AdaptConfig(eps, int(opts["iterations"])), exact_u=bench.exact.velocity)
    out = Path(opts["out"])
    tag = str(strategy).replace(":", "")
    export.write_adapt(out / f"adapt_{tag}.csv", rep)
    export.write_vtk(out / f"adapt_{tag}.vtk", rep.solution, rep.final.estimate)
    for it, max_e, max_x, dofs in rep.rows():
        print(f"iter {it}: max E_e {max_e:.3e}  max exact {max_x:.3e}  dofs {dofs}")
    print("converged" if rep.converged else "not converged")
    return 0


def cmd_compare(opts: dict) -> int:
    bench = load_problem(opts)
    comp = run_adapt_compare(bench, _strategies(opts["strategy"]), _floats(opts["eps"]),
                             int(opts["iterations"]))
    export.write_comparison(Path(opts["out"]) / "comparison.csv", comp)
    for (strategy, eps), rep in comp.reports.items():
        f = rep.final
        print(f"{strategy:>12} eps={eps:g}: {len(rep.iterations)} iterations, "
              f"max E_e {f.max_estimate:.3e}, max exact {f.max_exact:.3e}, "
              f"{'converged' if rep.converged else 'not converged'}")
    return 0


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "adapt": cmd_adapt,
            "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdgnefem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value file with default options")
        s.add_argument("--mesh", help="benchmark name (circle, wavy) or mesh file")
        s.add_argument("--geometry", help="NURBS curve file for a mesh file")
        s.add_argument("--strategy", help="iso-fixed:q, iso-regen or nefem (comma list)")
        s.add_argument("--k", help="degree, or comma list of tracked degrees")
        s.add_argument("--eps", help="desired error (comma list for compare)")
        s.add_argument("--levels", help="number of nested mesh levels")
        s.add_argument("--out", help="output directory")
        s.add_argument("--mode", choices=("variable", "uniform"))
        s.add_argument("--iterations", help="maximum adaptive iterations")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = dict(DEFAULTS[args.command])
    try:
        if args.config:
            opts.update(read_config(args.config))
        opts.update({k: v for k, v in vars(args).items() if k in KEYS and v is not None})
        return COMMANDS[args.command](opts)
    except (HdgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
