"""Legacy ASCII VTK output for fine-grid fields and patch eigenfunctions."""
from pathlib import Path

import numpy as np


def write_vtk(path, nodes, triangles, point_data, title="cgmsfem"):
    """Write an unstructured P1 triangle grid with scalar point arrays.

    ``point_data`` maps array names to length-``n_nodes`` vectors. Values are
    written with 17 significant digits so a re-read reproduces them exactly.
    """
    path = Path(path)
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    n = nodes.shape[0]
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " "), "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in nodes[:, :2]]
    lines.append(f"CELLS {triangles.shape[0]} {4 * triangles.shape[0]}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    lines.append(f"CELL_TYPES {triangles.shape[0]}")
    lines += ["5"] * triangles.shape[0]
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, values in point_data.items():
            v = np.asarray(values, dtype=float).ravel()
            if v.size != n:
                raise ValueError(f"array {name!r} has {v.size} values for {n} points")
            if " " in name:
                raise ValueError(f"array name {name!r} contains whitespace")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{x:.17g}" for x in v]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Read a file produced by :func:`write_vtk`; returns ``(nodes, triangles, point_data)``."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens)
    nodes = triangles = None
    data = {}
    for line in it:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "POINTS":
            n = int(parts[1])
            nodes = np.array([[float(t) for t in next(it).split()[:2]] for _ in range(n)])
        elif parts[0] == "CELLS":
            m = int(parts[1])
            triangles = np.array([[int(t) for t in next(it).split()[1:]] for _ in range(m)])
        elif parts[0] == "SCALARS":
            name = parts[1]
            next(it)  # LOOKUP_TABLE
            data[name] = np.array([float(next(it)) for _ in range(nodes.shape[0])])
    if nodes is None:
        raise ValueError(f"{path}: no POINTS section")
    return nodes, triangles, data


def write_state(path, mesh, w, extra=None):
    """Fine-grid state ``w = [u1, u2, theta]`` as point arrays ``u1``, ``u2``, ``theta``."""
    n = mesh.n_nodes
    w = np.asarray(w, dtype=float)
    if w.size != 3 * n:
        raise ValueError(f"state has {w.size} entries, mesh needs {3 * n}")
    arrays = {"u1": w[:n], "u2": w[n:2 * n], "theta": w[2 * n:]}
    arrays.update(extra or {})
    return write_vtk(path, mesh.nodes, mesh.triangles, arrays)


def export_eigenfunctions(spectrum, pair, patch_id, out_dir, count=None, prefix="psi"):
    """One VTK file per kept eigenvector on patch ``patch_id`` with ``psi_theta``, ``psi_u1``, ``psi_u2``.

    The patch sub-mesh keeps the fine node coordinates and renumbers nodes
    locally. Returns the written paths in eigenvalue order.
    """
    nodes = pair.patch_nodes(patch_id)
    elems = pair.coarse.patches[patch_id]
    tri = np.searchsorted(nodes, pair.fine.triangles[elems])
    m = nodes.size
    V = np.real(spectrum.vectors)
    if V.shape[0] != 3 * m:
        raise ValueError(f"spectrum has {V.shape[0]} rows, patch {patch_id} has {3 * m} dofs")
    count = V.shape[1] if count is None else min(int(count), V.shape[1])
    out_dir = Path(out_dir)
    paths = []
    for l in range(count):
        v = V[:, l]
        lam = complex(spectrum.scaled[l])
        paths.append(write_vtk(
            out_dir / f"{prefix}_patch{patch_id:04d}_{l:03d}.vtk",
            pair.fine.nodes[nodes], tri,
            {"psi_theta": v[2 * m:], "psi_u1": v[:m], "psi_u2": v[m:2 * m]},
            title=f"patch {patch_id} mode {l} Lambda {lam.real:.10g} {lam.imag:+.3g}i",
        ))
    return paths
