"""Provider-agnostic model gateway.

One entry point (`complete`) routes a pipeline request to either the
deterministic offline stub or a live HTTP provider. The stub makes the whole
pipeline reproducible without network access: its output is a pure function
of (role, system_text, user_text, image digest).
"""
from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .errors import (
    AuthError,
    DuplicateProvider,
    EmptyResponse,
    InvalidArgument,
    OutputTooLarge,
    ProviderUnavailable,
    UnknownProvider,
)

ROLES = ("design", "code", "critic_review", "critic_refine")

# Markers the agents put into their prompts; the stub keys off them.
PROMPT_MARKER = "User prompt:"
PRD_MARKER = "PRD:"
REVIEW_VERSION_MARKER = "Version under review:"
PARENT_VERSION_MARKER = "Parent version:"

DEFAULT_MAX_OUTPUT_CHARS = 400_000

_MD_IMAGE_RE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)\)")
_HTML_IMG_RE = re.compile(r"<img[^>]*\bsrc=\"([^\"]+)\"", re.IGNORECASE)


@dataclass(frozen=True)
class ImagePayload:
    data: bytes
    media_type: str


@dataclass(frozen=True)
class ModelRequest:
    role: str
    system_text: str
    user_text: str
    image: Optional[ImagePayload] = None
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise InvalidArgument(f"unknown role: {self.role!r}")
        if self.image is not None and self.role != "design":
            raise InvalidArgument("image input is only allowed for the design role")
        if self.max_output_chars <= 0:
            raise InvalidArgument("max_output_chars must be positive")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    provider_id: str
    latency_ms: int


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    endpoint_url: str = "stub"
    model_name: str = "stub"
    credentials_env_var: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.timeout_ms < 1000:
            raise InvalidArgument("timeout_ms must be >= 1000")
        if self.max_retries < 0:
            raise InvalidArgument("max_retries must be >= 0")

    @property
    def is_stub(self) -> bool:
        return self.endpoint_url == "stub"


STUB_CONFIG = ProviderConfig(provider_id="stub")
# Variant whose critic always finds something to fix; used when the full
# four-version chain is wanted rather than an early stop.
STUB_EAGER_CONFIG = ProviderConfig(provider_id="stub-eager", model_name="stub-eager")


class ProviderRegistry:
    """Read-mostly map of provider_id -> ProviderConfig.

    The stub providers are always pre-registered.
    """

    def __init__(self) -> None:
        self._configs: dict[str, ProviderConfig] = {}
        self._configs[STUB_CONFIG.provider_id] = STUB_CONFIG
        self._configs[STUB_EAGER_CONFIG.provider_id] = STUB_EAGER_CONFIG

    def register(self, config: ProviderConfig) -> str:
        if config.provider_id in self._configs:
            raise DuplicateProvider(config.provider_id)
        self._configs[config.provider_id] = config
        return config.provider_id

    def get(self, provider_id: str) -> ProviderConfig:
        try:
            return self._configs[provider_id]
        except KeyError:
            raise UnknownProvider(provider_id) from None

    def ids(self) -> list[str]:
        return sorted(self._configs)


def load_providers(path: str | Path) -> ProviderRegistry:
    """Load a registry from a TOML or JSON file with a `providers` list."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        data = json.loads(raw)
    else:
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib  # type: ignore[no-redef]
        data = tomllib.loads(raw.decode("utf-8"))
    registry = ProviderRegistry()
    for entry in data.get("providers", []):
        config = ProviderConfig(**entry)
        if not config.is_stub:
            registry.register(config)
    return registry


# --- stub provider ----------------------------------------------------------

STUB_PRD_HERO_TOKEN = "[hero(landscape)]"
STUB_PRD_PROFILE_TOKEN = "[profile(large)]"


def _extract_after_marker(text: str, marker: str) -> str:
    idx = text.find(marker)
    if idx < 0:
        return ""
    line = text[idx + len(marker):].split("\n", 1)[0]
    return line.strip()


def _stub_design(request: ModelRequest) -> str:
    prompt = _extract_after_marker(request.user_text, PROMPT_MARKER) or "a personal website"
    sketch_digest = "none"
    if request.image is not None:
        sketch_digest = hashlib.sha256(request.image.data).hexdigest()[:16]
    return (
        "# Product Requirements Document\n"
        "\n"
        "## Overview\n"
        f"A single-page site for: {prompt}\n"
        f"Sketch digest: {sketch_digest}\n"
        "\n"
        "## Layout\n"
        f"- Full-width hero banner at the top: {STUB_PRD_HERO_TOKEN}\n"
        f"- Profile section with a portrait image: {STUB_PRD_PROFILE_TOKEN}\n"
        "- Content column below the profile section.\n"
        "\n"
        "## Components\n"
        "- Hero: page title and tagline over the hero image.\n"
        "- Profile: photo, name, short bio.\n"
        "- Content: prose sections taken from the user's prompt.\n"
    )


def _found_urls(text: str) -> list[str]:
    """Image URLs in document order, markdown refs first, deduplicated."""
    urls: list[str] = []
    for match in _MD_IMAGE_RE.finditer(text):
        if match.group(2) not in urls:
            urls.append(match.group(2))
    for match in _HTML_IMG_RE.finditer(text):
        if match.group(1) not in urls:
            urls.append(match.group(1))
    return urls


def _site_template(title: str, urls: list[str], revision_note: str = "") -> str:
    imgs = "\n".join(
        f'      <img src="{url}" alt="site image {i}">' for i, url in enumerate(urls)
    )
    note = f"\n  <!-- {revision_note} -->" if revision_note else ""
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n'
        "<head>\n"
        '  <meta charset="utf-8">\n'
        f"  <title>{title}</title>\n"
        "  <style>\n"
        "    body { font-family: sans-serif; margin: 0; }\n"
        "    img { max-width: 100%; display: block; }\n"
        "    main { max-width: 960px; margin: 0 auto; padding: 1rem; }\n"
        "  </style>\n"
        f"</head>{note}\n"
        "<body>\n"
        "  <main>\n"
        f"    <h1>{title}</h1>\n"
        "    <section>\n"
        f"{imgs}\n"
        "    </section>\n"
        "  </main>\n"
        "  <script>document.title = document.title;</script>\n"
        "</body>\n"
        "</html>\n"
    )


def _stub_code(request: ModelRequest) -> str:
    prompt = _extract_after_marker(request.user_text, PROMPT_MARKER) or "Generated site"
    urls = _found_urls(request.user_text)
    return _site_template(prompt, urls)


def _stub_critic_review(request: ModelRequest, eager: bool) -> str:
    version = _extract_after_marker(request.user_text, REVIEW_VERSION_MARKER)
    if eager or version == "v0":
        return (
            "```\n"
            "layout | major | Increase vertical spacing between the hero and the profile section.\n"
            "accessibility | minor | Give every image descriptive alt text instead of a generic label.\n"
            "```\n"
        )
    return "```\n```\n"


def _stub_critic_refine(request: ModelRequest) -> str:
    parent = _extract_after_marker(request.user_text, PARENT_VERSION_MARKER) or "unknown"
    prompt = _extract_after_marker(request.user_text, PROMPT_MARKER) or "Generated site"
    urls = _found_urls(request.user_text)
    return _site_template(prompt, urls, revision_note=f"refined from {parent}")


def _stub_complete(request: ModelRequest, config: ProviderConfig) -> str:
    eager = config.model_name == "stub-eager"
    if request.role == "design":
        return _stub_design(request)
    if request.role == "code":
        return _stub_code(request)
    if request.role == "critic_review":
        return _stub_critic_review(request, eager)
    return _stub_critic_refine(request)


# --- live provider ----------------------------------------------------------

BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0


class TransientTransportError(Exception):
    """Raised by transports for failures worth retrying."""


def _http_transport(request: ModelRequest, config: ProviderConfig, api_key: str) -> str:
    import base64

    import requests

    payload: dict = {
        "model": config.model_name,
        "role": request.role,
        "system": request.system_text,
        "user": request.user_text,
    }
    if request.image is not None:
        payload["image_b64"] = base64.b64encode(request.image.data).decode("ascii")
        payload["image_media_type"] = request.image.media_type
    try:
        resp = requests.post(
            config.endpoint_url,
            json=payload,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=config.timeout_ms / 1000.0,
        )
    except requests.RequestException as exc:
        raise TransientTransportError(str(exc)) from exc
    if resp.status_code in (401, 403):
        raise AuthError(f"provider {config.provider_id} rejected credentials")
    if resp.status_code >= 500:
        raise TransientTransportError(f"server error {resp.status_code}")
    if resp.status_code != 200:
        raise ProviderUnavailable(f"unexpected status {resp.status_code}")
    return resp.json()["text"]


Transport = Callable[[ModelRequest, ProviderConfig, str], str]


def complete(
    request: ModelRequest,
    config: ProviderConfig,
    *,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> ModelResponse:
    """Run one model call; retries transient transport failures with backoff."""
    start = time.monotonic()

    if config.is_stub:
        text = _stub_complete(request, config)
    else:
        api_key = os.environ.get(config.credentials_env_var or "", "")
        if not api_key:
            raise AuthError(
                f"credential env var {config.credentials_env_var!r} is not set"
            )
        transport = transport or _http_transport
        rng = rng or random.Random()
        attempts = 1 + config.max_retries
        text = None
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                text = transport(request, config, api_key)
                break
            except TransientTransportError as exc:
                last_error = exc
                if attempt + 1 < attempts:
                    delay = BACKOFF_BASE_S * (BACKOFF_FACTOR ** attempt)
                    sleep(delay * rng.uniform(0.5, 1.5))
        if text is None:
            raise ProviderUnavailable(str(last_error))

    if not text.strip():
        raise EmptyResponse(f"provider {config.provider_id} returned blank text")
    if len(text) > request.max_output_chars:
        raise OutputTooLarge(
            f"response is {len(text)} chars, limit {request.max_output_chars}"
        )
    latency_ms = int((time.monotonic() - start) * 1000)
    return ModelResponse(text=text, provider_id=config.provider_id, latency_ms=latency_ms)


@dataclass
class ModelGateway:
    """Binds a registry and a selected provider; what the agents call."""

    registry: ProviderRegistry = field(default_factory=ProviderRegistry)
    provider_id: str = "stub"
    transport: Transport | None = None

    @property
    def config(self) -> ProviderConfig:
        return self.registry.get(self.provider_id)

    def complete(self, request: ModelRequest) -> ModelResponse:
        return complete(request, self.config, transport=self.transport)
