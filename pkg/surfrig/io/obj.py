"""
Wavefront OBJ reading and writing for triangle meshes.

Only ``v`` and ``f`` records are interpreted; texture coordinates, normals,
groups and materials are skipped.
"""

from pathlib import Path

import numpy as np

from surfrig.core.errors import IoError, NonTriangleFace, ParseError
from surfrig.core.logging import get_logger
from surfrig.models.mesh import TriMesh

logger = get_logger(__name__)


def _face_index(token: str, n_vertices: int, line: int, path: str) -> int:
    head = token.split("/")[0]
    try:
        index = int(head)
    except ValueError:
        raise ParseError(f"bad face index {token!r}", line, path) from None
    if index < 0:
        index = n_vertices + index + 1
    if not 1 <= index <= n_vertices:
        raise ParseError(f"face index {head} out of range (1..{n_vertices})", line, path)
    return index - 1


def load_obj(path) -> TriMesh:
    """
    Raises:
        IoError: the file cannot be read.
        ParseError: a ``v`` or ``f`` record is malformed (with line number).
        NonTriangleFace: a face has more than three vertices.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}", {"path": str(path)}) from exc

    vertices = []
    faces = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise ParseError("vertex needs three coordinates", number, str(path))
            try:
                vertices.append([float(t) for t in tokens[1:4]])
            except ValueError:
                raise ParseError(f"bad vertex coordinates {tokens[1:4]}", number, str(path)) from None
        elif tokens[0] == "f":
            corners = tokens[1:]
            if len(corners) > 3:
                raise NonTriangleFace(number, len(corners))
            if len(corners) < 3:
                raise ParseError(f"face has only {len(corners)} vertices", number, str(path))
            # forward references are not allowed
            faces.append([_face_index(t, len(vertices), number, str(path)) for t in corners])

    logger.debug(f"loaded {path}: {len(vertices)} vertices, {len(faces)} faces")
    return TriMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(mesh: TriMesh, path) -> Path:
    path = Path(path)
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.faces.tolist()]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path
