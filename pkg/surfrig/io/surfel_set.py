"""
Conversion between in-memory surfels and the JSON surfel-set documents.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from surfrig.core.errors import DimensionMismatch, IoError, SurfelSetError
from surfrig.geometry.mat3 import matrix_to_quaternion, quaternion_to_matrix
from surfrig.models.appearance import ASGLobe, SpecularHead
from surfrig.models.mesh import Adjacency
from surfrig.models.surfel import BlendTopology, DeformedSurfel, Surfel
from surfrig.schemas.surfel_set import (
    DeformedSurfelRecord,
    DeformedSurfelSetFile,
    LobeRecord,
    SpecularHeadRecord,
    SurfelRecord,
    SurfelSetFile,
)


@dataclass
class LoadedSurfelSet:
    """A parsed surfel-set file together with the objects built from it."""

    document: SurfelSetFile
    surfels: List[Surfel] = field(default_factory=list)
    logits: List[np.ndarray] = field(default_factory=list)
    head: Optional[SpecularHead] = None

    def topology(self, adjacency: Adjacency) -> BlendTopology:
        """Blend topology over ``adjacency``; uniform when the file has no logits."""
        if not self.logits:
            return BlendTopology.uniform(adjacency)
        if len(self.logits) != len(adjacency) or any(
            len(row) != len(nbrs) for row, nbrs in zip(self.logits, adjacency.neighbors)
        ):
            raise DimensionMismatch("blend logits do not match the mesh adjacency")
        return BlendTopology(adjacency, [row.copy() for row in self.logits])


def surfel_to_record(s: Surfel) -> SurfelRecord:
    return SurfelRecord(
        parent=s.parent,
        mu_c=tuple(float(v) for v in s.mu_c),
        rotation=tuple(float(v) for v in matrix_to_quaternion(s.R_c)),
        scales=(float(s.scales[0]), float(s.scales[1])),
        alpha=float(s.alpha),
        sh=np.asarray(s.sh, dtype=np.float64).tolist(),
        eye_flag=bool(s.eye_flag),
    )


def record_to_surfel(record: SurfelRecord) -> Surfel:
    return Surfel(
        parent=record.parent,
        mu_c=np.array(record.mu_c, dtype=np.float64),
        R_c=quaternion_to_matrix(record.rotation),
        scales=np.array(record.scales, dtype=np.float64),
        alpha=record.alpha,
        sh=np.array(record.sh, dtype=np.float64),
        eye_flag=record.eye_flag,
    )


def head_to_record(head: SpecularHead) -> SpecularHeadRecord:
    return SpecularHeadRecord(
        lobes=[
            LobeRecord(
                z=tuple(lobe.z.tolist()),
                x=tuple(lobe.x.tolist()),
                y=tuple(lobe.y.tolist()),
                lam=lobe.lam,
                mu=lobe.mu,
                xi=lobe.xi,
            )
            for lobe in head.lobes
        ],
        pe_freqs=head.pe_freqs,
        W1=head.W1.tolist(),
        b1=head.b1.tolist(),
        W2=head.W2.tolist(),
        b2=head.b2.tolist(),
        W3=head.W3.tolist(),
        b3=head.b3.tolist(),
    )


def record_to_head(record: SpecularHeadRecord) -> SpecularHead:
    W1 = np.array(record.W1, dtype=np.float64)
    W2 = np.array(record.W2, dtype=np.float64)
    return SpecularHead(
        lobes=[
            ASGLobe(
                z=np.array(lobe.z),
                x=np.array(lobe.x),
                y=np.array(lobe.y),
                lam=lobe.lam,
                mu=lobe.mu,
                xi=lobe.xi,
            )
            for lobe in record.lobes
        ],
        pe_freqs=record.pe_freqs,
        W1=W1,
        b1=np.array(record.b1, dtype=np.float64),
        W2=W2,
        b2=np.array(record.b2, dtype=np.float64),
        W3=np.array(record.W3, dtype=np.float64),
        b3=np.array(record.b3, dtype=np.float64),
        hidden=(W1.shape[0], W2.shape[0]),
    )


def to_document(
    surfels: Sequence[Surfel],
    topology: Optional[BlendTopology] = None,
    head: Optional[SpecularHead] = None,
    origin: Optional[LoadedSurfelSet] = None,
) -> SurfelSetFile:
    """
    Build a SurfelSetFile. Surfels, logits and head that are the very objects
    loaded in ``origin`` reuse its records, so an untouched set writes back
    byte for byte.
    """
    records = []
    for i, s in enumerate(surfels):
        if origin is not None and i < len(origin.surfels) and s is origin.surfels[i]:
            records.append(origin.document.surfels[i])
        else:
            records.append(surfel_to_record(s))

    logits: List[List[float]] = []
    if topology is not None:
        if (
            origin is not None
            and len(origin.logits) == len(topology.logits)
            and all(np.array_equal(a, b) for a, b in zip(origin.logits, topology.logits))
        ):
            logits = origin.document.blend_logits
        elif origin is None or origin.logits or any(np.any(row != 0.0) for row in topology.logits):
            logits = [row.tolist() for row in topology.logits]

    if head is not None and origin is not None and head is origin.head:
        head_record = origin.document.specular_head
    else:
        head_record = head_to_record(head) if head is not None else None

    return SurfelSetFile(
        adjacency=topology.adjacency.mode if topology is not None else (origin.document.adjacency if origin else "edge"),
        surfels=records,
        blend_logits=logits,
        specular_head=head_record,
    )


def _write_model(model: BaseModel, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path


def save_surfel_set(document: SurfelSetFile, path) -> Path:
    return _write_model(document, path)


def load_surfel_set(path) -> LoadedSurfelSet:
    """
    Raises:
        IoError: unreadable file.
        SurfelSetError: wrong schema version, non-unit quaternion or malformed records.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise SurfelSetError(f"{path} is not valid JSON: {exc}", {"path": str(path)}) from exc
    try:
        document = SurfelSetFile.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise SurfelSetError(
            f"{path}: {'.'.join(str(p) for p in first['loc'])}: {first['msg']}",
            {"path": str(path)},
        ) from exc
    return LoadedSurfelSet(
        document=document,
        surfels=[record_to_surfel(r) for r in document.surfels],
        logits=[np.array(row, dtype=np.float64) for row in document.blend_logits],
        head=record_to_head(document.specular_head) if document.specular_head is not None else None,
    )


def deformed_to_document(surfels: Sequence[DeformedSurfel]) -> DeformedSurfelSetFile:
    return DeformedSurfelSetFile(
        surfels=[
            DeformedSurfelRecord(
                mu=tuple(float(v) for v in s.mu),
                tangent_u=tuple(float(v) for v in s.H[:, 0]),
                tangent_v=tuple(float(v) for v in s.H[:, 1]),
                normal=tuple(float(v) for v in s.n_d),
                rotation=tuple(float(v) for v in matrix_to_quaternion(s.U_b)),
                alpha=float(s.alpha),
                sh=np.asarray(s.sh, dtype=np.float64).tolist(),
                eye_flag=bool(s.eye_flag),
            )
            for s in surfels
        ]
    )


def save_deformed_set(surfels: Sequence[DeformedSurfel], path) -> Path:
    return _write_model(deformed_to_document(surfels), path)
