"""Mesh and point-cloud file I/O: OBJ and PLY meshes (ascii and binary
little-endian), and PLY point clouds with confidence/label/bbox channels.

Meshes are returned as (vertices, faces) arrays with faces fan-triangulated;
units are meters.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParseError
from .scenegeom import PointCloud

__all__ = [
    "load_mesh",
    "write_obj",
    "load_point_cloud_ply",
    "write_point_cloud_ply",
]

_PLY_DTYPES = {
    "char": "i1",
    "int8": "i1",
    "uchar": "u1",
    "uint8": "u1",
    "short": "i2",
    "int16": "i2",
    "ushort": "u2",
    "uint16": "u2",
    "int": "i4",
    "int32": "i4",
    "uint": "u4",
    "uint32": "u4",
    "float": "f4",
    "float32": "f4",
    "double": "f8",
    "float64": "f8",
}


def _fan_triangulate(polygons: list[list[int]]) -> np.ndarray:
    tris = []
    for poly in polygons:
        if len(poly) < 3:
            raise ParseError(f"face with {len(poly)} vertices")
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    return np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def _load_obj(path: str):
    vertices = []
    polygons = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if tokens[0] == "v":
                if len(tokens) < 4:
                    raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad vertex: {exc}") from exc
            elif tokens[0] == "f":
                try:
                    # "f v", "f v/vt", "f v/vt/vn", "f v//vn"; OBJ is 1-based,
                    # negative indices count from the end
                    idx = [int(t.split("/")[0]) for t in tokens[1:]]
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad face: {exc}") from exc
                poly = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                if any(i < 0 or i >= len(vertices) for i in poly):
                    raise ParseError(f"{path}:{lineno}: face index out of range")
                polygons.append(poly)
    if not vertices:
        raise ParseError(f"{path}: no vertices")
    return np.asarray(vertices, dtype=float), _fan_triangulate(polygons)


class _PlyHeader:
    def __init__(self, fmt: str, elements: list[tuple[str, int, list]]):
        self.format = fmt  # "ascii" | "binary_little_endian"
        self.elements = elements  # [(name, count, [(prop, dtype, is_list, count_dtype)])]


def _parse_ply_header(fh, path: str) -> _PlyHeader:
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise ParseError(f"{path}: not a PLY file")
    fmt = None
    elements: list[tuple[str, int, list]] = []
    while True:
        raw = fh.readline()
        if not raw:
            raise ParseError(f"{path}: truncated header (no end_header)")
        tokens = raw.decode("ascii", "replace").split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"{path}: unsupported PLY format {tokens[1:2]}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError(f"{path}: bad element line")
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except ValueError as exc:
                raise ParseError(f"{path}: bad element count") from exc
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element")
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise ParseError(f"{path}: bad list property")
                cdt, dt = _PLY_DTYPES.get(tokens[2]), _PLY_DTYPES.get(tokens[3])
                if cdt is None or dt is None:
                    raise ParseError(f"{path}: unknown property type in {tokens}")
                elements[-1][2].append((tokens[4], dt, True, cdt))
            else:
                if len(tokens) != 3:
                    raise ParseError(f"{path}: bad property line")
                dt = _PLY_DTYPES.get(tokens[1])
                if dt is None:
                    raise ParseError(f"{path}: unknown property type {tokens[1]}")
                elements[-1][2].append((tokens[2], dt, False, None))
        elif tokens[0] == "end_header":
            break
        else:
            raise ParseError(f"{path}: unknown header keyword {tokens[0]}")
    if fmt is None:
        raise ParseError(f"{path}: missing format line")
    return _PlyHeader(fmt, elements)


def _read_ply_elements(path: str):
    """Parse a PLY file into {element: {property: array-or-list}}."""
    with open(path, "rb") as fh:
        header = _parse_ply_header(fh, path)
        out: dict[str, dict[str, object]] = {}
        if header.format == "ascii":
            text = fh.read().decode("ascii", "replace").split()
            pos = 0

            def take(n):
                nonlocal pos
                if pos + n > len(text):
                    raise ParseError(f"{path}: truncated data section")
                vals = text[pos : pos + n]
                pos += n
                return vals

            for name, count, props in header.elements:
                cols: dict[str, list] = {p[0]: [] for p in props}
                for _ in range(count):
                    for pname, dt, is_list, _cdt in props:
                        try:
                            if is_list:
                                k = int(take(1)[0])
                                cols[pname].append([float(v) for v in take(k)])
                            else:
                                cols[pname].append(float(take(1)[0]))
                        except ValueError as exc:
                            raise ParseError(f"{path}: bad value in {name}.{pname}") from exc
                out[name] = {
                    p[0]: (cols[p[0]] if p[2] else np.asarray(cols[p[0]])) for p in props
                }
        else:
            for name, count, props in header.elements:
                if any(p[2] for p in props):
                    # list properties force row-by-row reads
                    cols = {p[0]: [] for p in props}
                    for _ in range(count):
                        for pname, dt, is_list, cdt in props:
                            if is_list:
                                k = int(_read_scalar(fh, cdt, path))
                                vals = np.frombuffer(
                                    _read_exact(fh, k * np.dtype(dt).itemsize, path),
                                    dtype="<" + dt,
                                )
                                cols[pname].append(vals.astype(float).tolist())
                            else:
                                cols[pname].append(_read_scalar(fh, dt, path))
                    out[name] = {
                        p[0]: (cols[p[0]] if p[2] else np.asarray(cols[p[0]])) for p in props
                    }
                else:
                    dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
                    buf = _read_exact(fh, count * dtype.itemsize, path)
                    rec = np.frombuffer(buf, dtype=dtype)
                    out[name] = {p[0]: rec[p[0]].astype(float) for p in props}
        return out


def _read_exact(fh, n: int, path: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ParseError(f"{path}: truncated data section")
    return buf


def _read_scalar(fh, dt: str, path: str) -> float:
    raw = _read_exact(fh, np.dtype(dt).itemsize, path)
    return float(np.frombuffer(raw, dtype="<" + dt)[0])


def _load_ply_mesh(path: str):
    data = _read_ply_elements(path)
    if "vertex" not in data:
        raise ParseError(f"{path}: PLY mesh without vertex element")
    vtx = data["vertex"]
    for axis in ("x", "y", "z"):
        if axis not in vtx:
            raise ParseError(f"{path}: vertex element missing '{axis}'")
    vertices = np.column_stack([vtx["x"], vtx["y"], vtx["z"]])
    polygons: list[list[int]] = []
    if "face" in data:
        face = data["face"]
        key = "vertex_indices" if "vertex_indices" in face else "vertex_index"
        if key not in face:
            raise ParseError(f"{path}: face element missing vertex indices")
        polygons = [[int(i) for i in poly] for poly in face[key]]
        for poly in polygons:
            if any(i < 0 or i >= len(vertices) for i in poly):
                raise ParseError(f"{path}: face index out of range")
    return vertices, _fan_triangulate(polygons)


def load_mesh(path: str):
    """Load an OBJ or PLY triangle mesh.

    Returns (vertices (n,3) float, faces (m,3) int); polygonal faces are
    fan-triangulated.  Format is chosen by file extension.
    """
    if not os.path.exists(path):
        raise ParseError(f"{path}: no such file")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".obj":
        return _load_obj(path)
    if ext == ".ply":
        return _load_ply_mesh(path)
    raise ParseError(f"{path}: unsupported mesh extension '{ext}' (expected .obj or .ply)")


def write_obj(path: str, vertices: np.ndarray, faces: np.ndarray) -> None:
    """Write a triangle mesh as ASCII OBJ (1-based indices)."""
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        for v in vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    os.replace(tmp, path)


def load_point_cloud_ply(path: str) -> PointCloud:
    """Read a PLY point cloud with a scalar ``confidence`` property and
    optional ``label`` (LABEL_* codes) and ``in_bbox`` properties.

    Missing confidence defaults to 1 for every point.
    """
    if not os.path.exists(path):
        raise ParseError(f"{path}: no such file")
    data = _read_ply_elements(path)
    if "vertex" not in data:
        raise ParseError(f"{path}: PLY cloud without vertex element")
    vtx = data["vertex"]
    for axis in ("x", "y", "z"):
        if axis not in vtx:
            raise ParseError(f"{path}: vertex element missing '{axis}'")
    points = np.column_stack([vtx["x"], vtx["y"], vtx["z"]])
    n = points.shape[0]
    confidence = np.asarray(vtx.get("confidence", np.ones(n)), dtype=float)
    label = None if "label" not in vtx else np.asarray(vtx["label"], dtype=np.int64)
    in_bbox = None if "in_bbox" not in vtx else np.asarray(vtx["in_bbox"], dtype=bool)
    try:
        return PointCloud(points, confidence, label, in_bbox)
    except Exception as exc:
        raise ParseError(f"{path}: invalid point cloud ({exc})") from exc


def write_point_cloud_ply(path: str, cloud: PointCloud, binary: bool = True) -> None:
    """Write a point cloud as PLY (binary little-endian by default)."""
    n = len(cloud)
    props = [("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("confidence", "<f8")]
    names = ["double x", "double y", "double z", "double confidence"]
    if cloud.label is not None:
        props.append(("label", "<u1"))
        names.append("uchar label")
    if cloud.in_bbox is not None:
        props.append(("in_bbox", "<u1"))
        names.append("uchar in_bbox")
    rec = np.zeros(n, dtype=np.dtype(props))
    rec["x"], rec["y"], rec["z"] = cloud.points.T
    rec["confidence"] = cloud.confidence
    if cloud.label is not None:
        rec["label"] = cloud.label
    if cloud.in_bbox is not None:
        rec["in_bbox"] = np.asarray(cloud.in_bbox, dtype=np.uint8)
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0"]
    header.append(f"element vertex {n}")
    header += [f"property {nm}" for nm in names]
    header.append("end_header")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(rec.tobytes())
        else:
            for row in rec:
                fh.write(
                    (" ".join(format(float(row[p[0]]), ".12g") for p in props) + "\n").encode(
                        "ascii"
                    )
                )
    os.replace(tmp, path)
