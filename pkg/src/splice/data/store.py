"""Shape archive format.

One shape = one ZIP archive:

  shape.json    -- id, category, seed, bbox, part table (label, name, blob)
  parts/NNN.bin -- one blob per part:
                     magic  b"SPLM"
                     u32LE  version (1)
                     u32LE  vertex count V
                     u32LE  face count F
                     f32LE  V*3 vertex coordinates
                     u32LE  F*3 face indices

Archives are written deterministically (fixed timestamps, stored entries,
sorted JSON keys) so equal shapes serialize to identical bytes.
"""

from __future__ import annotations

import io
import json
import struct
import zipfile
from pathlib import Path

import numpy as np

from splice.data.types import LabeledShape, PartMesh

_MAGIC = b"SPLM"
_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _pack_part(part: PartMesh) -> bytes:
    verts = np.ascontiguousarray(part.vertices, dtype="<f4")
    faces = np.ascontiguousarray(part.faces, dtype="<u4")
    head = _MAGIC + struct.pack("<III", _VERSION, len(verts), len(faces))
    return head + verts.tobytes() + faces.tobytes()


def _unpack_part(blob: bytes, label: int, name: str) -> PartMesh:
    if blob[:4] != _MAGIC:
        raise ValueError("bad part blob magic")
    version, nv, nf = struct.unpack("<III", blob[4:16])
    if version != _VERSION:
        raise ValueError(f"unsupported part blob version {version}")
    off = 16
    verts = np.frombuffer(blob, dtype="<f4", count=nv * 3, offset=off)
    off += nv * 12
    faces = np.frombuffer(blob, dtype="<u4", count=nf * 3, offset=off)
    return PartMesh(vertices=verts.reshape(nv, 3).astype(np.float64),
                    faces=faces.reshape(nf, 3).astype(np.int64),
                    part_label=label, name=name)


def shape_to_bytes(shape: LabeledShape) -> bytes:
    buf = io.BytesIO()
    manifest = {
        "format": "splice-shape/1",
        "id": shape.id,
        "category": shape.category,
        "seed": shape.seed,
        "bbox": shape.bbox.tolist(),
        "parts": [
            {"label": int(p.part_label), "name": p.name,
             "blob": f"parts/{i:03d}.bin"}
            for i, p in enumerate(shape.parts)
        ],
    }
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("shape.json", date_time=_EPOCH)
        zf.writestr(info, json.dumps(manifest, sort_keys=True, indent=1))
        for i, part in enumerate(shape.parts):
            info = zipfile.ZipInfo(f"parts/{i:03d}.bin", date_time=_EPOCH)
            zf.writestr(info, _pack_part(part))
    return buf.getvalue()


def shape_from_bytes(data: bytes) -> LabeledShape:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            manifest = json.loads(zf.read("shape.json"))
            if manifest.get("format") != "splice-shape/1":
                raise ValueError("unknown shape archive format")
            parts = []
            for entry in manifest["parts"]:
                blob = zf.read(entry["blob"])
                parts.append(_unpack_part(blob, entry["label"], entry["name"]))
    except (zipfile.BadZipFile, KeyError, struct.error) as exc:
        raise ValueError(f"malformed shape archive: {exc}") from exc
    shape = LabeledShape(id=manifest["id"], parts=parts,
                         bbox=np.array(manifest["bbox"]),
                         category=manifest.get("category", ""),
                         seed=manifest.get("seed", -1))
    return shape


def save_shape(shape: LabeledShape, path: str | Path) -> None:
    Path(path).write_bytes(shape_to_bytes(shape))


def load_shape(path: str | Path) -> LabeledShape:
    return shape_from_bytes(Path(path).read_bytes())
