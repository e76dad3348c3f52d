"""CSV tables and legacy VTK output."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .adaptivity import AdaptReport
from .approximation import lattice_triangles
from .hdg import HdgSolution
from .studies import Comparison, ConvergenceTable

CONVERGENCE_HEADER = ("level", "h", "k", "err_u", "err_ustar", "err_L", "err_p")
ADAPT_HEADER = ("iter", "max_Ee", "max_exact", "dofs")
COMPARE_HEADER = ("strategy", "eps") + ADAPT_HEADER
SLOPE_HEADER = ("strategy", "k", "slope_u", "slope_ustar", "slope_L", "slope_p")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_convergence(path, table: ConvergenceTable) -> Path:
    return write_csv(path, CONVERGENCE_HEADER, table.rows)


def write_slopes(path, tables: Sequence[ConvergenceTable]) -> Path:
    rows = [(t.strategy, k, s["u"], s["ustar"], s["L"], s["p"])
            for t in tables for k, s in sorted(t.slopes.items())]
    return write_csv(path, SLOPE_HEADER, rows)


def write_adapt(path, report: AdaptReport) -> Path:
    return write_csv(path, ADAPT_HEADER, report.rows())


def write_comparison(path, comp: Comparison) -> Path:
    return write_csv(path, COMPARE_HEADER, comp.rows())


def vtk_text(sol: HdgSolution, estimate: np.ndarray | None = None) -> str:
    """Legacy ASCII unstructured grid; each element split at its nodal set."""
    pts, cells, u, p, deg, est = [], [], [], [], [], []
    offset = 0
    for e in range(sol.mesh.n_elements):
        k = int(sol.degrees[e])
        nodes = sol.geometry[e].nodes(k)
        tris = lattice_triangles(k)
        pts.append(nodes)
        u.append(sol.u[e])
        p.append(sol.p[e])
        cells.append(tris + offset)
        offset += nodes.shape[0]
        deg += [k] * tris.shape[0]
        est += [0.0 if estimate is None else float(estimate[e])] * tris.shape[0]
    pts = np.vstack(pts)
    cells = np.vstack(cells)
    u = np.vstack(u)
    p = np.concatenate(p)
    out = ["# vtk DataFile Version 3.0", "hdg solution", "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {pts.shape[0]} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    out.append(f"CELLS {cells.shape[0]} {4 * cells.shape[0]}")
    out += [f"3 {a} {b} {c}" for a, b, c in cells.tolist()]
    out.append(f"CELL_TYPES {cells.shape[0]}")
    out += ["5"] * cells.shape[0]
    out += [f"POINT_DATA {pts.shape[0]}", "VECTORS u double"]
    out += [f"{a!r} {b!r} 0.0" for a, b in u.tolist()]
    out += ["SCALARS p double 1", "LOOKUP_TABLE default"]
    out += [repr(v) for v in p.tolist()]
    out += [f"CELL_DATA {cells.shape[0]}", "SCALARS degree int 1", "LOOKUP_TABLE default"]
    out += [str(v) for v in deg]
    out += ["SCALARS E_e double 1", "LOOKUP_TABLE default"]
    out += [repr(v) for v in est]
    return "\n".join(out) + "\n"


def write_vtk(path, sol: HdgSolution, estimate: np.ndarray | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(vtk_text(sol, estimate))
    return path


def export(outputs: dict, directory, fmt: str = "csv") -> list[Path]:
    """Write named outputs: tables, reports, comparisons (csv) or solutions (vtk)."""
    directory = Path(directory)
    written = []
    for name, obj in outputs.items():
        if fmt == "csv":
            if isinstance(obj, ConvergenceTable):
                written.append(write_convergence(directory / f"{name}.csv", obj))
            elif isinstance(obj, AdaptReport):
                written.append(write_adapt(directory / f"{name}.csv", obj))
            elif isinstance(obj, Comparison):
                written.append(write_comparison(directory / f"{name}.csv", obj))
            else:
                raise TypeError(f"cannot write {type(obj).__name__} as csv")
        elif fmt == "vtk":
            if isinstance(obj, tuple):
                sol, est = obj
            else:
                sol, est = obj, None
            written.append(write_vtk(directory / f"{name}.vtk", sol, est))
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    return written
