"""Session store: the shared memory layer plus the persistent version tree.

Layout on disk, one directory per session:

    <root>/<id>/meta.json
    <root>/<id>/memory/<key>            (+ <key>.meta for media type)
    <root>/<id>/versions/<label>/index.html
    <root>/<id>/versions/<label>/meta.json
    <root>/<id>/versions/<label>/critique.json   (when reviewed)

All writes go through tmp-file + rename so readers never observe partial
blobs. Mutating calls are serialized per session; the store itself holds no
authoritative state in memory, so a restart reproduces every snapshot.
"""
from __future__ import annotations

import json
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .codegen import WebsiteArtifact, artifact_digest
from .errors import (
    BranchBusy,
    FediffError,
    InvalidArgument,
    InvalidStateTransition,
    KeyNotFound,
    NamespaceViolation,
    RootAlreadyExists,
    UnknownParent,
    UnknownSession,
    UnknownVersion,
)

SESSION_STATES = (
    "created", "prd_pending", "prd_ready", "generating", "reviewing", "complete", "failed",
)

# Pipeline order, plus re-entry from `complete` when a branch is re-run.
_TRANSITIONS: dict[str, set[str]] = {
    "created": {"prd_pending", "failed"},
    "prd_pending": {"prd_ready", "failed"},
    "prd_ready": {"generating", "failed"},
    "generating": {"reviewing", "failed"},
    "reviewing": {"generating", "complete", "failed"},
    "complete": {"generating", "reviewing", "failed"},
    "failed": set(),
}

_HEAD_STATES = {"generating", "reviewing", "complete"}

_KEY_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._/-]*$")
_QUALIFIED_RE = re.compile(r"^sessions/([^/]+)/(.+)$")


@dataclass
class Session:
    id: str
    created_at: float
    prompt: str
    sketch_digest: str
    state: str = "created"
    active_head: Optional[str] = None
    warnings: list[str] = field(default_factory=list)
    state_history: list[str] = field(default_factory=lambda: ["created"])
    version_order: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "prompt": self.prompt,
            "sketch_digest": self.sketch_digest,
            "state": self.state,
            "active_head": self.active_head,
            "warnings": self.warnings,
            "state_history": self.state_history,
            "version_order": self.version_order,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Session":
        return cls(**data)


@dataclass(frozen=True)
class VersionNode:
    label: str
    parent: Optional[str]
    artifact_digest: str
    created_by: str  # "code_agent" or "critic_agent"
    critique_ref: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "parent": self.parent,
            "artifact_digest": self.artifact_digest,
            "created_by": self.created_by,
            "critique_ref": self.critique_ref,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VersionNode":
        return cls(**data)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}.{threading.get_ident()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class SessionStore:
    """Filesystem-backed store; single writer per session, many readers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._session_locks: dict[str, threading.RLock] = {}
        self._loop_running: set[str] = set()
        self._guard = threading.Lock()

    # -- plumbing -------------------------------------------------------------

    def _lock(self, session_id: str) -> threading.RLock:
        with self._guard:
            return self._session_locks.setdefault(session_id, threading.RLock())

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _meta_path(self, session_id: str) -> Path:
        return self._session_dir(session_id) / "meta.json"

    def _save(self, session: Session) -> None:
        _atomic_write(
            self._meta_path(session.id),
            json.dumps(session.to_dict(), indent=2).encode("utf-8"),
        )

    # -- sessions ---------------------------------------------------------------

    def create_session(self, prompt: str, sketch_digest: str = "") -> Session:
        if not prompt.strip():
            raise InvalidArgument("prompt must be non-empty")
        session = Session(
            id=uuid.uuid4().hex[:12],
            created_at=time.time(),
            prompt=prompt,
            sketch_digest=sketch_digest,
        )
        sdir = self._session_dir(session.id)
        (sdir / "memory").mkdir(parents=True)
        (sdir / "versions").mkdir()
        self._save(session)
        return session

    def get_session(self, session_id: str) -> Session:
        path = self._meta_path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        return Session.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "meta.json").exists())

    def set_state(self, session_id: str, state: str) -> Session:
        if state not in SESSION_STATES:
            raise InvalidArgument(f"unknown state: {state!r}")
        with self._lock(session_id):
            session = self.get_session(session_id)
            if state == session.state:
                return session
            if state not in _TRANSITIONS[session.state]:
                raise InvalidStateTransition(f"{session.state} -> {state}")
            session.state = state
            session.state_history.append(state)
            if state not in _HEAD_STATES:
                session.active_head = None
            self._save(session)
            return session

    def add_warning(self, session_id: str, message: str) -> None:
        with self._lock(session_id):
            session = self.get_session(session_id)
            session.warnings.append(message)
            self._save(session)

    # -- shared memory ----------------------------------------------------------

    def _resolve_key(self, session_id: str, key: str) -> str:
        qualified = _QUALIFIED_RE.match(key)
        if qualified:
            if qualified.group(1) != session_id:
                raise NamespaceViolation(
                    f"key {key!r} is outside session {session_id!r}"
                )
            key = qualified.group(2)
        if not _KEY_RE.match(key) or ".." in key.split("/"):
            raise NamespaceViolation(f"illegal memory key: {key!r}")
        return key

    def put(self, session_id: str, key: str, blob: bytes,
            media_type: str = "application/octet-stream") -> str:
        key = self._resolve_key(session_id, key)
        with self._lock(session_id):
            self.get_session(session_id)
            path = self._session_dir(session_id) / "memory" / key
            path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(path, blob)
            _atomic_write(
                path.with_name(path.name + ".meta"),
                json.dumps({"media_type": media_type, "written_at": time.time()}).encode(),
            )
        return f"sessions/{session_id}/{key}"

    def get(self, session_id: str, key: str) -> bytes:
        key = self._resolve_key(session_id, key)
        self.get_session(session_id)
        path = self._session_dir(session_id) / "memory" / key
        if not path.exists():
            raise KeyNotFound(key)
        return path.read_bytes()

    def has(self, session_id: str, key: str) -> bool:
        try:
            self.get(session_id, key)
            return True
        except KeyNotFound:
            return False

    # -- version tree -----------------------------------------------------------

    def _version_dir(self, session_id: str, label: str) -> Path:
        return self._session_dir(session_id) / "versions" / label

    def _load_node(self, session_id: str, label: str) -> VersionNode:
        path = self._version_dir(session_id, label) / "meta.json"
        if not path.exists():
            raise UnknownVersion(label)
        return VersionNode.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def commit_version(
        self,
        session_id: str,
        parent: Optional[str],
        artifact: WebsiteArtifact,
        created_by: str,
        critique_ref: Optional[str] = None,
    ) -> VersionNode:
        if created_by not in ("code_agent", "critic_agent"):
            raise InvalidArgument(f"unknown provenance: {created_by!r}")
        with self._lock(session_id):
            session = self.get_session(session_id)
            if parent is None:
                if session.version_order:
                    raise RootAlreadyExists(session.version_order[0])
            else:
                if parent not in session.version_order:
                    raise UnknownParent(parent)
            label = f"v{len(session.version_order)}"
            node = VersionNode(
                label=label,
                parent=parent,
                artifact_digest=artifact.byte_digest,
                created_by=created_by,
                critique_ref=critique_ref,
            )
            vdir = self._version_dir(session_id, label)
            vdir.mkdir(parents=True)
            _atomic_write(vdir / "index.html", artifact.html.encode("utf-8"))
            _atomic_write(vdir / "meta.json", json.dumps(node.to_dict(), indent=2).encode())
            session.version_order.append(label)
            session.active_head = label
            self._save(session)
            return node

    def get_artifact(self, session_id: str, label: str) -> WebsiteArtifact:
        node = self._load_node(session_id, label)
        html = (self._version_dir(session_id, label) / "index.html").read_text("utf-8")
        if artifact_digest(html) != node.artifact_digest:
            raise FediffError(f"artifact {label} was mutated after commit")
        return WebsiteArtifact(html=html, version_label=label)

    def store_critique(self, session_id: str, label: str, critique: dict) -> str:
        with self._lock(session_id):
            self._load_node(session_id, label)
            path = self._version_dir(session_id, label) / "critique.json"
            _atomic_write(path, json.dumps(critique, indent=2).encode("utf-8"))
        return f"sessions/{session_id}/versions/{label}/critique.json"

    def load_critique(self, session_id: str, label: str) -> Optional[dict]:
        path = self._version_dir(session_id, label) / "critique.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def branch_from(self, session_id: str, label: str) -> Session:
        with self._lock(session_id):
            if session_id in self._loop_running:
                raise BranchBusy(session_id)
            session = self.get_session(session_id)
            if label not in session.version_order:
                raise UnknownVersion(label)
            session.active_head = label
            self._save(session)
            return session

    def list_versions(self, session_id: str) -> list[dict]:
        """Snapshot of the tree in creation order, with critique summaries.

        Recomputes artifact digests against the committed ones, so mutation
        after commit is detected on every read.
        """
        session = self.get_session(session_id)
        snapshot = []
        for label in session.version_order:
            node = self._load_node(session_id, label)
            self.get_artifact(session_id, label)  # digest stability check
            critique = self.load_critique(session_id, label)
            summary = None
            if critique is not None:
                summary = {
                    "suggestion_count": len(critique.get("suggestions", [])),
                    "categories": sorted(
                        {s["category"] for s in critique.get("suggestions", [])}
                    ),
                }
            entry = node.to_dict()
            entry["critique_summary"] = summary
            snapshot.append(entry)
        return snapshot

    def branch_length(self, session_id: str, head: str) -> int:
        """Number of versions on the root..head path."""
        length = 0
        label: Optional[str] = head
        while label is not None:
            node = self._load_node(session_id, label)
            label = node.parent
            length += 1
        return length

    # -- loop guard ---------------------------------------------------------------

    def begin_loop(self, session_id: str) -> None:
        with self._guard:
            if session_id in self._loop_running:
                raise BranchBusy(session_id)
            self._loop_running.add(session_id)

    def end_loop(self, session_id: str) -> None:
        with self._guard:
            self._loop_running.discard(session_id)

    def loop_running(self, session_id: str) -> bool:
        return session_id in self._loop_running
