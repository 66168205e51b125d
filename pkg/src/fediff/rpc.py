"""JSON-RPC 2.0 service over HTTP POST /rpc, plus artifact preview serving.

Every method is a thin adapter over the module operations; behavior is
identical to calling them directly. `pipeline.run` executes in a background
thread so `session.status` can be polled while the run progresses.
"""
from __future__ import annotations

import base64
import binascii
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional

from . import pipeline as pl
from .critic import LoopConfig
from .design import SketchInput
from .errors import (
    AuthError,
    BranchBusy,
    EmptyResponse,
    FediffError,
    GenerationInvalid,
    InvalidArgument,
    KeyNotFound,
    NamespaceViolation,
    OutputTooLarge,
    PrdEmpty,
    ProviderUnavailable,
    RootAlreadyExists,
    UnknownParent,
    UnknownProvider,
    UnknownSession,
    UnknownVersion,
)
from .gateway import ModelGateway, ProviderRegistry
from .images import ImageClient, ImageSearchConfig
from .store import SessionStore

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603

# Application error range -32000..-32099.
APP_ERROR_CODES: dict[type, int] = {
    UnknownSession: -32000,
    UnknownVersion: -32001,
    UnknownParent: -32002,
    RootAlreadyExists: -32003,
    BranchBusy: -32004,
    KeyNotFound: -32005,
    NamespaceViolation: -32006,
    UnknownProvider: -32007,
    ProviderUnavailable: -32010,
    AuthError: -32011,
    EmptyResponse: -32012,
    OutputTooLarge: -32013,
    PrdEmpty: -32014,
    GenerationInvalid: -32015,
}


def _error_code(exc: FediffError) -> int:
    if isinstance(exc, InvalidArgument):
        return INVALID_PARAMS
    for cls, code in APP_ERROR_CODES.items():
        if isinstance(exc, cls):
            return code
    return -32050


@dataclass
class RpcService:
    """Method registry plus the wiring for background pipeline runs."""

    store: SessionStore
    registry: ProviderRegistry = field(default_factory=ProviderRegistry)
    provider_id: str = "stub"
    image_config: ImageSearchConfig = field(default_factory=ImageSearchConfig)

    def __post_init__(self) -> None:
        self._image_client = ImageClient(self.image_config)
        self._runs: dict[str, threading.Thread] = {}
        self.methods: dict[str, Callable[[dict], Any]] = {
            "session.create": self.session_create,
            "session.get": self.session_get,
            "session.status": self.session_status,
            "session.list_versions": self.session_list_versions,
            "session.branch_from": self.session_branch_from,
            "session.get_prd": self.session_get_prd,
            "design.generate_prd": self.design_generate_prd,
            "code.generate_site": self.code_generate_site,
            "critic.run_loop": self.critic_run_loop,
            "pipeline.run": self.pipeline_run,
        }

    def _gateway(self, params: dict) -> ModelGateway:
        provider_id = params.get("provider_id", self.provider_id)
        return ModelGateway(registry=self.registry, provider_id=provider_id)

    def _loop_config(self, params: dict) -> LoopConfig:
        return LoopConfig(
            max_versions=int(params.get("max_versions", 4)),
            early_stop=bool(params.get("early_stop", True)),
        )

    # -- methods ---------------------------------------------------------------

    def session_create(self, params: dict) -> dict:
        prompt = params.get("prompt", "")
        sketch_b64 = params.get("sketch_b64", "")
        sketch_format = params.get("sketch_format", "svg")
        if not prompt or not sketch_b64:
            raise InvalidArgument("prompt and sketch_b64 are required")
        try:
            data = base64.b64decode(sketch_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise InvalidArgument(f"sketch_b64 is not valid base64: {exc}") from exc
        session = pl.create_session_with_sketch(
            self.store, prompt, SketchInput(format=sketch_format, data=data)
        )
        return {"session_id": session.id, "state": session.state}

    def session_get(self, params: dict) -> dict:
        return self.store.get_session(self._sid(params)).to_dict()

    def session_status(self, params: dict) -> dict:
        session = self.store.get_session(self._sid(params))
        return {
            "state": session.state,
            "last_completed_step": session.state_history[-1],
            "state_history": session.state_history,
            "versions": session.version_order,
            "active_head": session.active_head,
            "warnings": session.warnings,
            "loop_running": self.store.loop_running(session.id),
        }

    def session_list_versions(self, params: dict) -> list[dict]:
        return self.store.list_versions(self._sid(params))

    def session_branch_from(self, params: dict) -> dict:
        label = params.get("label", "")
        session = self.store.branch_from(self._sid(params), label)
        return {"active_head": session.active_head}

    def session_get_prd(self, params: dict) -> dict:
        sid = self._sid(params)
        stage = params.get("stage", "injected")
        key = pl.PRD_INJECTED_KEY if stage == "injected" else pl.PRD_RAW_KEY
        return {"stage": stage, "markdown": self.store.get(sid, key).decode("utf-8")}

    def design_generate_prd(self, params: dict) -> dict:
        sid = self._sid(params)
        prd = pl.step_generate_prd(self.store, sid, self._gateway(params))
        result = pl.step_inject_images(self.store, sid, self._image_client)
        return {"prd": result.document.markdown, "urls": result.urls,
                "warnings": result.warnings}

    def code_generate_site(self, params: dict) -> dict:
        artifact = pl.step_generate_site(self.store, self._sid(params), self._gateway(params))
        return {"version": artifact.version_label, "digest": artifact.byte_digest}

    def critic_run_loop(self, params: dict) -> dict:
        labels = pl.step_run_loop(
            self.store, self._sid(params), self._gateway(params), self._loop_config(params)
        )
        return {"versions": labels}

    def pipeline_run(self, params: dict) -> dict:
        sid = self._sid(params)
        self.store.get_session(sid)
        wait = bool(params.get("wait", False))
        pipe = pl.Pipeline(
            store=self.store,
            gateway=self._gateway(params),
            image_config=self.image_config,
            loop_config=self._loop_config(params),
        )
        if wait:
            return {"versions": pipe.run(sid)}
        existing = self._runs.get(sid)
        if existing is not None and existing.is_alive():
            raise BranchBusy(sid)

        def _run() -> None:
            try:
                pipe.run(sid)
            except FediffError as exc:
                self.store.add_warning(sid, f"pipeline failed: {exc}")

        thread = threading.Thread(target=_run, name=f"pipeline-{sid}", daemon=True)
        self._runs[sid] = thread
        thread.start()
        return {"started": True, "session_id": sid}

    # -- dispatch ----------------------------------------------------------------

    @staticmethod
    def _sid(params: dict) -> str:
        sid = params.get("session_id", "")
        if not sid:
            raise InvalidArgument("session_id is required")
        return sid

    def handle_request(self, request: Any) -> Optional[dict]:
        """One JSON-RPC request object -> response object (None for notifications)."""
        if not isinstance(request, dict) or request.get("jsonrpc") != "2.0" \
                or not isinstance(request.get("method"), str):
            return _error_response(None if not isinstance(request, dict) else request.get("id"),
                                   INVALID_REQUEST, "invalid request")
        req_id = request.get("id")
        is_notification = "id" not in request
        method = request["method"]
        params = request.get("params", {})
        if not isinstance(params, dict):
            return None if is_notification else _error_response(
                req_id, INVALID_PARAMS, "params must be an object")
        handler = self.methods.get(method)
        if handler is None:
            return None if is_notification else _error_response(
                req_id, METHOD_NOT_FOUND, f"method not found: {method}")
        try:
            result = handler(params)
        except FediffError as exc:
            return None if is_notification else _error_response(
                req_id, _error_code(exc), str(exc), data={"error": exc.code})
        except Exception as exc:  # pragma: no cover - defensive
            return None if is_notification else _error_response(
                req_id, INTERNAL_ERROR, f"internal error: {exc}")
        if is_notification:
            return None
        return {"jsonrpc": "2.0", "id": req_id, "result": result}

    def handle_payload(self, body: bytes) -> Optional[Any]:
        """Raw POST body -> response payload. Supports batches."""
        try:
            parsed = json.loads(body)
        except ValueError:
            return _error_response(None, PARSE_ERROR, "parse error")
        if isinstance(parsed, list):
            if not parsed:
                return _error_response(None, INVALID_REQUEST, "empty batch")
            responses = [r for r in (self.handle_request(item) for item in parsed)
                         if r is not None]
            return responses or None
        return self.handle_request(parsed)


def _error_response(req_id: Any, code: int, message: str, data: Optional[dict] = None) -> dict:
    error: dict = {"code": code, "message": message}
    if data:
        error["data"] = data
    return {"jsonrpc": "2.0", "id": req_id, "error": error}


class _Handler(BaseHTTPRequestHandler):
    service: RpcService  # set by serve()

    def log_message(self, *args: Any) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, payload: Any) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_POST(self) -> None:
        if self.path != "/rpc":
            self._send_json(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        response = self.service.handle_payload(body)
        if response is None:
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            return
        self._send_json(200, response)

    def do_GET(self) -> None:
        # /preview/<session>/<label>/[index.html]
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) >= 3 and parts[0] == "preview":
            session_id, label = parts[1], parts[2]
            try:
                artifact = self.service.store.get_artifact(session_id, label)
            except FediffError:
                self._send_json(404, {"error": "unknown session or version"})
                return
            body = artifact.html.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            # Generated code must never script against the UI's origin.
            self.send_header("Content-Security-Policy", "sandbox allow-scripts")
            self.end_headers()
            self.wfile.write(body)
            return
        self._send_json(404, {"error": "not found"})


def serve(bind_address: str, service: RpcService) -> ThreadingHTTPServer:
    """Start the HTTP server; caller runs serve_forever (or a thread does)."""
    host, _, port = bind_address.rpartition(":")
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    return server
