"""File formats: spectrum JSON, legacy VTK fields, provenance headers."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import DiscreteSystem
from .eigen import Spectrum
from .mesh import Mesh


class FormatError(ValueError):
    pass


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(command: str, argv: list[str], config: dict, inputs=()) -> dict:
    """Metadata block embedded in every output; ``created`` is the only volatile field."""
    return {
        "tool": "bulksurf",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": config,
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None


def spectrum_payload(spectrum: Spectrum, system: DiscreteSystem, meta: dict,
                     include_vectors=True) -> dict:
    out = spectrum.to_dict(system, include_vectors=include_vectors)
    out["meta"] = meta
    return out


def spectrum_from_payload(payload: dict, system: DiscreteSystem) -> Spectrum:
    """Rebuild a spectrum on ``system``; vectors are stored vertex-indexed."""
    try:
        lam = np.asarray(payload["lambda"], dtype=float)
        res = np.asarray(payload["residual"], dtype=float)
        vecs = payload["vectors"]
    except KeyError as exc:
        raise FormatError(f"spectrum file lacks field {exc}") from None
    ref = payload.get("mesh_ref")
    if ref is not None and system.mesh_ref is not None and ref != system.mesh_ref:
        raise FormatError(f"spectrum was computed on mesh {ref}, not {system.mesh_ref}")
    V = np.asarray(vecs, dtype=float).T
    if V.shape != (system.n_vertices, len(lam)):
        raise FormatError("spectrum vectors do not match the mesh vertex count")
    return Spectrum(lam, V[system.free_dofs], res, int(payload.get("k_requested", len(lam))),
                    dict(payload.get("diagnostics", {})), ref)


def write_vtk(path, mesh: Mesh, fields: dict[str, np.ndarray], title="bulksurf") -> None:
    """Legacy ASCII unstructured grid with triangles and per-vertex scalars."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    if fields:
        lines.append(f"POINT_DATA {nv}")
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (nv,):
                raise FormatError(f"field {name!r} must have one value per vertex")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(v) for v in values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
