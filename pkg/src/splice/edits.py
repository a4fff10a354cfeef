"""Direct part-edit algebra over a session's part records.

Operations mutate only the targeted records; every operation pushes a
byte-exact restore patch so undo recovers the precise prior state. A
deleted part keeps its record with ``valid = False`` so undo and
diffusion completion share one mechanism.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from splice.config import SIGMA_MIN
from splice.geometry import GaussianProxy, quat_multiply, quat_normalize
from splice.pose import AffineEdit, apply_affine


class UnknownPart(KeyError):
    """An edit referenced a part id that is not in the session."""


class EmptyHistory(RuntimeError):
    """Undo requested on a session with no recorded operations."""


@dataclass
class PartRecord:
    """Latent code + pose proxy + validity flag for one editable part."""

    id: str
    z: np.ndarray            # (D_z,) float32
    proxy: GaussianProxy
    valid: bool = True

    def __post_init__(self):
        self.z = np.ascontiguousarray(self.z, dtype=np.float32)

    def copy(self) -> "PartRecord":
        return PartRecord(self.id, self.z.copy(), self.proxy.copy(), self.valid)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "valid": self.valid,
            "proxy": self.proxy.to_dict(),
            "z_b64": base64.b64encode(
                np.ascontiguousarray(self.z, dtype="<f4").tobytes()).decode(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartRecord":
        z = np.frombuffer(base64.b64decode(d["z_b64"]), dtype="<f4").copy()
        return cls(id=d["id"], z=z, proxy=GaussianProxy.from_dict(d["proxy"]),
                   valid=bool(d["valid"]))

    def serialized(self) -> bytes:
        """Canonical bytes; equality here is the session's exactness oracle."""
        return json.dumps(self.to_dict(), sort_keys=True).encode()


# One history entry: list of (part_id, prior record or None-if-added).
_Patch = list[tuple[str, PartRecord | None]]


@dataclass
class EditSession:
    """Single-writer editable view of one shape's part records."""

    source_shape: str
    records: dict[str, PartRecord] = field(default_factory=dict)
    history: list[tuple[str, _Patch]] = field(default_factory=list)
    version: int = 0
    _id_counter: int = 0

    @classmethod
    def from_records(cls, source_shape: str,
                     records: list[PartRecord]) -> "EditSession":
        session = cls(source_shape=source_shape)
        for rec in records:
            session.records[rec.id] = rec
            session._id_counter = max(session._id_counter,
                                      _id_number(rec.id) + 1)
        return session

    def fresh_id(self) -> str:
        pid = f"p{self._id_counter:04d}"
        self._id_counter += 1
        return pid

    def get(self, part_id: str) -> PartRecord:
        try:
            return self.records[part_id]
        except KeyError as exc:
            raise UnknownPart(part_id) from exc

    def active_records(self) -> list[PartRecord]:
        return [r for r in self.records.values() if r.valid]

    def all_records(self) -> list[PartRecord]:
        return list(self.records.values())

    def state_bytes(self) -> bytes:
        return b"\n".join(r.serialized() for r in self.records.values())

    def _require(self, part_ids: list[str]) -> list[PartRecord]:
        return [self.get(pid) for pid in part_ids]

    def _commit(self, op: str, patch: _Patch) -> None:
        self.history.append((op, patch))
        self.version += 1


def _id_number(pid: str) -> int:
    try:
        return int(pid.lstrip("p"))
    except ValueError:
        return -1


def _snapshot(records: list[PartRecord]) -> _Patch:
    return [(r.id, r.copy()) for r in records]


def move(session: EditSession, part_ids: list[str],
         delta: np.ndarray) -> EditSession:
    targets = session._require(part_ids)
    patch = _snapshot(targets)
    delta = np.asarray(delta, dtype=np.float64).reshape(3)
    for rec in targets:
        rec.proxy.center = rec.proxy.center + delta
    session._commit("move", patch)
    return session


def rotate(session: EditSession, part_ids: list[str],
           quaternion: np.ndarray) -> EditSession:
    """Compose a rotation about each target's own center (center fixed)."""
    targets = session._require(part_ids)
    patch = _snapshot(targets)
    q_e = quat_normalize(quaternion)
    for rec in targets:
        rec.proxy.quaternion = quat_normalize(
            quat_multiply(q_e, rec.proxy.quaternion))
    session._commit("rotate", patch)
    return session


def scale(session: EditSession, part_ids: list[str],
          factors: np.ndarray) -> EditSession:
    """Multiply per-axis radii in each target's local frame (center fixed)."""
    factors = np.asarray(factors, dtype=np.float64).reshape(3)
    if np.any(factors <= 0):
        raise ValueError("scale factors must be positive")
    targets = session._require(part_ids)
    patch = _snapshot(targets)
    for rec in targets:
        rec.proxy.scale = np.maximum(rec.proxy.scale * factors, SIGMA_MIN)
    session._commit("scale", patch)
    return session


def affine(session: EditSession, part_ids: list[str],
           edit: AffineEdit) -> EditSession:
    """Apply a full affine edit to the targeted proxies."""
    targets = session._require(part_ids)
    patch = _snapshot(targets)
    for rec in targets:
        rec.proxy = apply_affine(edit, rec.proxy)
        rec.proxy.scale = np.maximum(rec.proxy.scale, SIGMA_MIN)
    session._commit("affine", patch)
    return session


def delete(session: EditSession, part_ids: list[str]) -> EditSession:
    targets = session._require(part_ids)
    patch = _snapshot(targets)
    for rec in targets:
        rec.valid = False
    session._commit("delete", patch)
    return session


def duplicate(session: EditSession, part_ids: list[str],
              delta: np.ndarray) -> EditSession:
    targets = session._require(part_ids)
    delta = np.asarray(delta, dtype=np.float64).reshape(3)
    patch: _Patch = []
    for rec in targets:
        clone = rec.copy()
        clone.id = session.fresh_id()
        clone.proxy.center = clone.proxy.center + delta
        session.records[clone.id] = clone
        patch.append((clone.id, None))
    session._commit("duplicate", patch)
    return session


def mix(session: EditSession, donor_records: list[PartRecord]) -> EditSession:
    """Import donor records (fresh ids); donors are not re-aligned."""
    patch: _Patch = []
    for donor in donor_records:
        clone = donor.copy()
        clone.id = session.fresh_id()
        session.records[clone.id] = clone
        patch.append((clone.id, None))
    session._commit("mix", patch)
    return session


def replace_all(session: EditSession, new_records: list[PartRecord],
                op: str = "refine") -> EditSession:
    """Swap the full record set (used by diffusion refinement); undoable."""
    patch: _Patch = [(pid, rec.copy()) for pid, rec in session.records.items()]
    patch += [(rec.id, None) for rec in new_records
              if rec.id not in session.records]
    session.records = {rec.id: rec for rec in new_records}
    for rec in new_records:
        session._id_counter = max(session._id_counter, _id_number(rec.id) + 1)
    session._commit(op, patch)
    return session


def undo(session: EditSession) -> EditSession:
    if not session.history:
        raise EmptyHistory("nothing to undo")
    _, patch = session.history.pop()
    # Re-add restored records first (keeps original insertion order when a
    # replace_all removed them), then drop records the operation added.
    for pid, prior in patch:
        if prior is not None:
            session.records[pid] = prior
    for pid, prior in patch:
        if prior is None:
            session.records.pop(pid, None)
    session.version += 1
    return session


# ---------------------------------------------------------------------------
# Edit script (JSON lines): {"op": ..., "part_ids": [...], "params": {...}}

def apply_op(session: EditSession, op: dict) -> EditSession:
    name = op.get("op")
    part_ids = op.get("part_ids", [])
    params = op.get("params", {})
    if name == "move":
        return move(session, part_ids, np.array(params["delta"], dtype=float))
    if name == "rotate":
        return rotate(session, part_ids, np.array(params["quaternion"], dtype=float))
    if name == "scale":
        return scale(session, part_ids, np.array(params["factors"], dtype=float))
    if name == "affine":
        return affine(session, part_ids, AffineEdit.from_dict(params))
    if name == "delete":
        return delete(session, part_ids)
    if name == "duplicate":
        return duplicate(session, part_ids,
                         np.array(params.get("delta", [0, 0, 0]), dtype=float))
    if name == "mix":
        donors = [PartRecord.from_dict(d) for d in params["records"]]
        return mix(session, donors)
    if name == "undo":
        return undo(session)
    raise ValueError(f"unknown edit op {name!r}")


def apply_script(session: EditSession, ops: list[dict]) -> EditSession:
    """Apply a batch of ops in order. Validation errors raise before any
    mutation when possible (unknown ids are checked op-by-op; callers that
    need all-or-nothing semantics should apply to a copy)."""
    for op in ops:
        apply_op(session, op)
    return session


def script_to_jsonl(ops: list[dict]) -> str:
    return "\n".join(json.dumps(op, sort_keys=True) for op in ops)


def script_from_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def session_snapshot(session: EditSession) -> str:
    """JSON-lines snapshot: one serialized record per line."""
    return "\n".join(json.dumps(r.to_dict(), sort_keys=True)
                     for r in session.records.values())


def session_from_snapshot(source_shape: str, text: str) -> EditSession:
    records = [PartRecord.from_dict(json.loads(line))
               for line in text.splitlines() if line.strip()]
    return EditSession.from_records(source_shape, records)
