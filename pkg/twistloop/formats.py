"""
Text file formats: loops, real forms, frames, factors and surface exports.
"""

import csv
import io
import json
import os
from typing import Dict, List, Optional

import numpy as np

from .errors import FormatError, ParameterViolation
from .involutions import (
    KINDS,
    CatalogEntry,
    FiniteAutomorphism,
    InvolutionSpec,
    RealFormSpec,
    form_by_name,
)
from .integrable import GridFrame, SurfaceSample
from .loops import LaurentLoop
from .utils import atomic_write

POLE_TOL = 1e-12


def matrix_to_json(matrix: np.ndarray) -> List:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]


def matrix_from_json(data, size: Optional[int] = None) -> np.ndarray:
    try:
        array = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise FormatError(f"Matrix entries must be [re, im] pairs: {e}")
    if array.ndim != 3 or array.shape[2] != 2 or array.shape[0] != array.shape[1]:
        raise FormatError(f"Expected an n x n array of [re, im] pairs, got shape {array.shape}")
    if size is not None and array.shape[0] != size:
        raise FormatError(f"Matrix has size {array.shape[0]}, expected {size}")
    return array[..., 0] + 1j * array[..., 1]


def loop_to_dict(x: LaurentLoop) -> Dict:
    terms = [
        {"deg": int(d), "matrix": matrix_to_json(c)}
        for d, c in zip(x.degrees, x.coeffs)
        if np.any(c != 0)
    ]
    if not terms:
        terms = [{"deg": 0, "matrix": matrix_to_json(np.zeros((x.size, x.size)))}]
    return {"size": x.size, "terms": terms}


def loop_from_dict(data: Dict) -> LaurentLoop:
    if not isinstance(data, dict) or "size" not in data or "terms" not in data:
        raise FormatError("A loop object needs 'size' and 'terms'")
    size = data["size"]
    if not isinstance(size, int) or size < 1:
        raise FormatError(f"Loop size must be a positive integer, got {size!r}")
    terms: Dict[int, np.ndarray] = {}
    for term in data["terms"]:
        try:
            degree = term["deg"]
            matrix = term["matrix"]
        except (KeyError, TypeError):
            raise FormatError("Every term needs 'deg' and 'matrix'")
        if not isinstance(degree, int):
            raise FormatError(f"Degree must be an integer, got {degree!r}")
        if degree in terms:
            raise FormatError(f"Degree {degree} appears twice")
        terms[degree] = matrix_from_json(matrix, size)
    return LaurentLoop.from_terms(terms, size)


def _dumps(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}")


def write_json(path: str, data) -> None:
    atomic_write(path, _dumps(data))


def write_loop(path: str, x: LaurentLoop) -> None:
    write_json(path, loop_to_dict(x))


def read_loop(path: str) -> LaurentLoop:
    return loop_from_dict(_load(path))


def _atoms(auto: FiniteAutomorphism) -> List[str]:
    atoms = []
    if not np.allclose(auto.matrix, np.eye(auto.size)):
        atoms.append("adq")
    if auto.conjugate and auto.inverse_transpose:
        atoms.append("ict")
    elif auto.conjugate:
        atoms.append("conj")
    elif auto.inverse_transpose:
        atoms.append("it")
    return atoms or ["id"]


def involution_to_dict(spec: InvolutionSpec) -> Dict:
    atoms = _atoms(spec.automorphism)
    data = {
        "name": spec.name,
        "auto": atoms[0] if len(atoms) == 1 else atoms,
        "kind": spec.kind,
        "rotation": [spec.rotation.real, spec.rotation.imag],
    }
    if "adq" in atoms:
        data["matrix"] = matrix_to_json(spec.automorphism.matrix)
    return data


def involution_from_dict(data: Dict, size: int) -> InvolutionSpec:
    auto = data.get("auto")
    atoms = auto if isinstance(auto, list) else [auto]
    unknown = set(atoms) - {"adq", "conj", "ict", "it", "id"}
    if unknown:
        raise FormatError(f"Unknown automorphism atoms {sorted(unknown)}")
    kind = data.get("kind", "first")
    if kind not in KINDS:
        raise FormatError(f"Kind must be one of {KINDS}, got {kind!r}")
    matrix = np.eye(size)
    if "adq" in atoms:
        if "matrix" not in data:
            raise FormatError("An 'adq' involution needs a 'matrix'")
        matrix = matrix_from_json(data["matrix"], size)
    automorphism = FiniteAutomorphism(
        matrix,
        conjugate="conj" in atoms or "ict" in atoms,
        inverse_transpose="it" in atoms or "ict" in atoms,
        label="*".join(atoms),
    )
    rotation = data.get("rotation", [1.0, 0.0])
    return InvolutionSpec(
        automorphism, kind, complex(rotation[0], rotation[1]), name=data.get("name", "")
    )


def form_to_dict(entry: CatalogEntry) -> Dict:
    specs = list(entry.form.involutions)
    if entry.tau is not None:
        specs.append(entry.tau)
    return {
        "name": entry.name,
        "size": entry.form.size,
        "involutions": [involution_to_dict(s) for s in specs],
    }


def form_from_dict(data: Dict) -> CatalogEntry:
    try:
        name, size, items = data["name"], data["size"], data["involutions"]
    except (KeyError, TypeError):
        raise FormatError("A form object needs 'name', 'size' and 'involutions'")
    specs = [involution_from_dict(item, size) for item in items]
    first = tuple(s for s in specs if s.kind == "first")
    second = [s for s in specs if s.kind == "second"]
    if len(second) > 1:
        raise FormatError("A form file carries at most one second-kind partner")
    return CatalogEntry(name, RealFormSpec(name, first, size), second[0] if second else None)


def write_form(path: str, entry: CatalogEntry) -> None:
    write_json(path, form_to_dict(entry))


def read_form(path: str) -> CatalogEntry:
    return form_from_dict(_load(path))


def frame_to_dict(frame: GridFrame) -> Dict:
    return {
        "n": frame.n,
        "k": frame.k,
        "origin": list(frame.origin),
        "h": frame.h,
        "counts": list(frame.counts),
        "form": form_to_dict(frame.entry),
        "tau": frame.tau.name,
        "points": [loop_to_dict(value) for value in frame.values],
    }


def _frame_entry(data: Dict) -> CatalogEntry:
    """The frame's form: an embedded form object or a catalog name."""
    form = data["form"]
    if isinstance(form, dict):
        entry = form_from_dict(form)
    else:
        try:
            entry = form_by_name(form)
        except ParameterViolation as e:
            raise FormatError(f"Frame form {form!r} is not in the catalog: {e}")
    if entry.tau is None:
        raise FormatError(f"Frame form {entry.name} has no second-kind partner")
    if data["tau"] != entry.tau.name:
        raise FormatError(
            f"Frame records tau {data['tau']!r} but form {entry.name} "
            f"carries {entry.tau.name!r}"
        )
    size = int(data["n"]) + int(data["k"]) + 1
    if entry.form.size != size:
        raise FormatError(f"Frame form has size {entry.form.size}, expected n + k + 1 = {size}")
    return entry


def frame_from_dict(data: Dict) -> GridFrame:
    try:
        entry = _frame_entry(data)
        return GridFrame(
            origin=tuple(data["origin"]),
            h=float(data["h"]),
            counts=tuple(data["counts"]),
            values=tuple(loop_from_dict(p) for p in data["points"]),
            entry=entry,
            n=int(data["n"]),
            k=int(data["k"]),
        )
    except (KeyError, TypeError) as e:
        raise FormatError(f"Malformed frame file: missing or invalid {e}")


def write_frame(path: str, frame: GridFrame) -> None:
    write_json(path, frame_to_dict(frame))


def read_frame(path: str) -> GridFrame:
    return frame_from_dict(_load(path))


def write_birkhoff(directory: str, factors, winding: int) -> None:
    write_loop(os.path.join(directory, "x_minus.json"), factors.x_minus)
    write_loop(os.path.join(directory, "x_plus.json"), factors.x_plus)
    diagnostics = {
        "residual": factors.residual,
        "smin": factors.toeplitz_smallest_singular_value,
        "condition": factors.condition,
        "winding": winding,
        "indices": list(factors.indices),
        "membership": list(factors.membership),
        "order": factors.order,
    }
    write_json(os.path.join(directory, "diagnostics.json"), diagnostics)


def write_iwasawa(directory: str, factors) -> None:
    write_loop(os.path.join(directory, "z_tau.json"), factors.z_tau)
    write_loop(os.path.join(directory, "y_plus.json"), factors.y_plus)
    diagnostics = dict(factors.diagnostics)
    diagnostics["c"] = matrix_to_json(factors.c)
    diagnostics["b"] = matrix_to_json(factors.b)
    write_json(os.path.join(directory, "diagnostics.json"), diagnostics)


def surface_csv(sample: SurfaceSample) -> str:
    """CSV with grid coordinates x1..xn and point coordinates."""
    dimension = len(sample.counts)
    width = sample.points.shape[-1]
    header = [f"x{i + 1}" for i in range(dimension)]
    if sample.path == "sphere":
        header += [f"p{i + 1}" for i in range(width)]
    else:
        header += [f"p{i + 1}_{part}" for i in range(width) for part in ("re", "im")]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    origin = np.asarray(sample.origin)
    for point in np.ndindex(*sample.counts):
        coords = origin + sample.h * np.asarray(point, dtype=float)
        vector = sample.points[point]
        if sample.path == "sphere":
            values = [repr(float(v)) for v in vector]
        else:
            values = [repr(float(part)) for z in vector for part in (z.real, z.imag)]
        writer.writerow([repr(float(c)) for c in coords] + values)
    return buffer.getvalue()


def surface_obj(sample: SurfaceSample, pole_index: int) -> str:
    """OBJ point cloud: stereographic projection from -e_pole, first three axes."""
    if sample.path != "sphere":
        raise FormatError("OBJ export needs real sphere points")
    lines = [f"# {int(np.prod(sample.counts))} points, lambda0 = {sample.lam0}"]
    for point in np.ndindex(*sample.counts):
        vector = sample.points[point]
        denominator = 1.0 + vector[pole_index]
        if denominator <= POLE_TOL:
            raise FormatError(
                f"Point {point} lies at the projection pole -e_{pole_index} "
                f"(1 + x_pole = {denominator:.1e})"
            )
        rest = np.delete(vector, pole_index) / denominator
        coords = list(rest[:3]) + [0.0] * max(0, 3 - rest.size)
        lines.append("v " + " ".join(repr(float(c)) for c in coords))
    return "\n".join(lines) + "\n"


def write_surface(directory: str, sample: SurfaceSample, pole_index: int) -> List[str]:
    """Write surface.csv (and surface.obj for 2-dimensional sphere grids)."""
    written = [os.path.join(directory, "surface.csv")]
    atomic_write(written[0], surface_csv(sample))
    if sample.path == "sphere" and len(sample.counts) == 2:
        written.append(os.path.join(directory, "surface.obj"))
        atomic_write(written[1], surface_obj(sample, pole_index))
    return written
