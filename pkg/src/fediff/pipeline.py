"""End-to-end orchestration: sketch + prompt -> refined website versions.

Each step is a standalone function over the session store so the RPC layer
can expose them individually; `run_pipeline` chains them in order:

    created -> prd_pending -> prd_ready -> generating -> reviewing -> complete
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import codegen, critic, design
from .errors import FediffError, InvalidArgument, KeyNotFound
from .gateway import ModelGateway
from .images import ImageClient, ImageSearchConfig, resolve_keywords
from .store import Session, SessionStore

SKETCH_KEY = "sketch"
SKETCH_FORMAT_KEY = "sketch.format"
SKETCH_JPG_KEY = "sketch.jpg"
PRD_RAW_KEY = "prd.raw"
PRD_INJECTED_KEY = "prd.injected"
ASSETS_KEY = "assets.json"

SKETCH_MEDIA_TYPES = {
    "image/svg+xml": "svg",
    "image/png": "raster",
    "image/jpeg": "raster",
}


def create_session_with_sketch(
    store: SessionStore, prompt: str, sketch: design.SketchInput
) -> Session:
    """Create a session and stage the sketch in shared memory."""
    raster = design.rasterize_sketch(sketch)  # validate before persisting anything
    session = store.create_session(prompt, sketch_digest=raster.digest)
    media_type = "image/svg+xml" if sketch.format == "svg" else "image/png"
    store.put(session.id, SKETCH_KEY, sketch.data, media_type=media_type)
    store.put(session.id, SKETCH_FORMAT_KEY, sketch.format.encode("ascii"), "text/plain")
    store.put(session.id, SKETCH_JPG_KEY, raster.data, media_type="image/jpeg")
    return session


def step_generate_prd(
    store: SessionStore, session_id: str, gateway: ModelGateway
) -> design.PrdDocument:
    """Sketch -> raw PRD. On model failure the session stays in prd_pending
    with no partial PRD persisted."""
    session = store.get_session(session_id)
    if session.state == "created":
        store.set_state(session_id, "prd_pending")
    try:
        raster_bytes = store.get(session_id, SKETCH_JPG_KEY)
    except KeyNotFound:
        raise InvalidArgument("session has no staged sketch") from None
    raster = design.RasterSketch.from_jpeg(raster_bytes)
    prd = design.generate_prd(raster, session.prompt, gateway)
    store.put(session_id, PRD_RAW_KEY, prd.markdown.encode("utf-8"), "text/markdown")
    return prd


def step_inject_images(
    store: SessionStore, session_id: str, image_client: ImageClient
) -> design.InjectionResult:
    """Resolve keywords and inject URLs; search failures degrade to placeholders."""
    try:
        raw = store.get(session_id, PRD_RAW_KEY)
    except KeyNotFound:
        raise InvalidArgument("session has no raw PRD") from None
    prd = design.PrdDocument(markdown=raw.decode("utf-8"), stage="raw")
    keywords = design.extract_keywords(prd)
    assignments, search_warnings = resolve_keywords(keywords, image_client)
    result = design.inject_images(prd, assignments)
    for message in search_warnings + result.warnings:
        store.add_warning(session_id, message)
    store.put(
        session_id, PRD_INJECTED_KEY, result.document.markdown.encode("utf-8"),
        "text/markdown",
    )
    store.put(
        session_id, ASSETS_KEY, json.dumps({"urls": result.urls}).encode("utf-8"),
        "application/json",
    )
    store.set_state(session_id, "prd_ready")
    return result


def load_allowed_urls(store: SessionStore, session_id: str) -> list[str]:
    try:
        return json.loads(store.get(session_id, ASSETS_KEY))["urls"]
    except KeyNotFound:
        return []


def step_generate_site(
    store: SessionStore, session_id: str, gateway: ModelGateway
) -> codegen.WebsiteArtifact:
    """Injected PRD -> validated v0, committed as the tree root."""
    session = store.get_session(session_id)
    try:
        injected = store.get(session_id, PRD_INJECTED_KEY)
    except KeyNotFound:
        raise InvalidArgument("session has no injected PRD") from None
    prd = design.PrdDocument(markdown=injected.decode("utf-8"), stage="images_injected")
    store.set_state(session_id, "generating")
    allowed = load_allowed_urls(store, session_id)
    artifact = codegen.generate_site(prd, session.prompt, gateway, allowed_urls=allowed)
    node = store.commit_version(session_id, parent=None, artifact=artifact,
                                created_by="code_agent")
    return artifact.with_label(node.label)


def step_run_loop(
    store: SessionStore,
    session_id: str,
    gateway: ModelGateway,
    loop_config: critic.LoopConfig,
) -> list[str]:
    session = store.get_session(session_id)
    allowed = load_allowed_urls(store, session_id)
    return critic.run_loop(
        store, session_id, loop_config, gateway,
        allowed_urls=allowed, prompt=session.prompt,
    )


@dataclass
class Pipeline:
    """Binds the store, gateway, and image client for full runs."""

    store: SessionStore
    gateway: ModelGateway
    image_config: ImageSearchConfig = field(default_factory=ImageSearchConfig)
    loop_config: critic.LoopConfig = field(default_factory=critic.LoopConfig)

    def __post_init__(self) -> None:
        self.image_client = ImageClient(self.image_config)

    def run(self, session_id: str) -> list[str]:
        """Full flow from a created session; sets state=failed on error."""
        try:
            step_generate_prd(self.store, session_id, self.gateway)
            step_inject_images(self.store, session_id, self.image_client)
            step_generate_site(self.store, session_id, self.gateway)
            return step_run_loop(self.store, session_id, self.gateway, self.loop_config)
        except FediffError:
            session = self.store.get_session(session_id)
            if session.state != "failed":
                self.store.set_state(session_id, "failed")
            raise
