"""Code agent: PRD -> initial website artifact, plus artifact validation.

Artifacts are single self-contained HTML documents. Validation is report
based: problems become coded violations, never exceptions, so callers can
decide between repair and failure.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from importlib import resources
from typing import Iterable, Optional

from .design import PrdDocument
from .errors import GenerationInvalid, InvalidArgument
from .gateway import ModelGateway, ModelRequest, PRD_MARKER, PROMPT_MARKER

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

ALLOWED_IMG_SCHEMES = ("https://", "placeholder://", "placeholder-fixture://")


def artifact_digest(html: str) -> str:
    return hashlib.sha256(html.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class WebsiteArtifact:
    html: str
    version_label: str = ""

    @property
    def byte_digest(self) -> str:
        return artifact_digest(self.html)

    def with_label(self, label: str) -> "WebsiteArtifact":
        return WebsiteArtifact(html=self.html, version_label=label)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    location: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class _DocumentScanner(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.depth = 0
        self.top_level_tags: list[tuple[str, int]] = []
        self.img_srcs: list[tuple[str, int]] = []
        self.script_srcs: list[tuple[str, int]] = []
        self.style_hrefs: list[tuple[str, int]] = []
        self.tag_count = 0
        self.unbalanced = False

    def _line(self) -> int:
        return self.getpos()[0]

    def _observe(self, tag: str, attrs: list) -> None:
        self.tag_count += 1
        attrmap = {k: (v or "") for k, v in attrs}
        if tag == "img" and "src" in attrmap:
            self.img_srcs.append((attrmap["src"], self._line()))
        if tag == "script" and "src" in attrmap:
            self.script_srcs.append((attrmap["src"], self._line()))
        if tag == "link" and attrmap.get("rel", "").lower() == "stylesheet":
            self.style_hrefs.append((attrmap.get("href", ""), self._line()))

    def handle_starttag(self, tag: str, attrs: list) -> None:
        self._observe(tag, attrs)
        if self.depth == 0:
            self.top_level_tags.append((tag, self._line()))
        if tag not in VOID_ELEMENTS:
            self.depth += 1

    def handle_startendtag(self, tag: str, attrs: list) -> None:
        self._observe(tag, attrs)
        if self.depth == 0:
            self.top_level_tags.append((tag, self._line()))

    def handle_endtag(self, tag: str) -> None:
        if tag in VOID_ELEMENTS:
            return
        if self.depth == 0:
            self.unbalanced = True
        else:
            self.depth -= 1


_DOCTYPE_RE = re.compile(r"<!doctype\s+html", re.IGNORECASE)


def validate_artifact(
    artifact: WebsiteArtifact,
    allowed_urls: Optional[Iterable[str]] = None,
    origin_allowlist: Optional[Iterable[str]] = None,
) -> ValidationReport:
    """Structural checks on one artifact.

    `allowed_urls` is the session's asset map (URLs injected into the PRD);
    image sources must come from it or use a placeholder scheme.
    `origin_allowlist` lists origins external scripts/styles may come from
    (default: none allowed).
    """
    html = artifact.html
    allowed = set(allowed_urls or ())
    origins = tuple(origin_allowlist or ())
    violations: list[Violation] = []

    if not html.strip():
        return ValidationReport((Violation("EMPTY_DOCUMENT", "artifact is blank"),))

    scanner = _DocumentScanner()
    scanner.feed(html)
    scanner.close()

    if scanner.tag_count == 0:
        return ValidationReport(
            (Violation("PARSE_ERROR", "no markup elements found", "line 1"),)
        )
    if scanner.unbalanced or scanner.depth != 0:
        violations.append(
            Violation("PARSE_ERROR", "unbalanced element nesting", f"depth {scanner.depth}")
        )

    if not _DOCTYPE_RE.search(html):
        violations.append(Violation("NO_DOCTYPE", "missing <!DOCTYPE html> declaration"))

    if len(scanner.top_level_tags) == 0:
        violations.append(Violation("NO_ROOT", "no top-level document element"))
    elif len(scanner.top_level_tags) > 1:
        extras = ", ".join(t for t, _ in scanner.top_level_tags)
        violations.append(
            Violation("MULTIPLE_ROOTS", f"expected one top-level element, found: {extras}")
        )

    for src, line in scanner.img_srcs:
        if src in allowed or src.startswith(("placeholder://", "placeholder-fixture://")):
            continue
        if not src.startswith(ALLOWED_IMG_SCHEMES):
            violations.append(
                Violation("IMG_SRC_INSECURE", f"non-https image source: {src}", f"line {line}")
            )
        else:
            violations.append(
                Violation("IMG_SRC_UNKNOWN", f"image source not in asset map: {src}", f"line {line}")
            )

    for src, line in scanner.script_srcs:
        if not any(src.startswith(origin) for origin in origins):
            violations.append(
                Violation("EXTERNAL_SCRIPT", f"external script reference: {src}", f"line {line}")
            )
    for href, line in scanner.style_hrefs:
        if not any(href.startswith(origin) for origin in origins):
            violations.append(
                Violation("EXTERNAL_STYLE", f"external stylesheet reference: {href}", f"line {line}")
            )

    return ValidationReport(tuple(violations))


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    """Unwrap model output: take the largest fenced block if any, else as-is."""
    blocks = _FENCE_RE.findall(text)
    if blocks:
        return max(blocks, key=len).strip()
    return text.strip()


def _code_system_text() -> str:
    return resources.files("fediff").joinpath("prompts/code.md").read_text(encoding="utf-8")


def _code_user_text(prd: PrdDocument, prompt: str, repair_notes: str = "") -> str:
    parts = [f"{PROMPT_MARKER} {prompt}", "", PRD_MARKER, prd.markdown]
    if repair_notes:
        parts += ["", "The previous attempt failed validation:", repair_notes,
                  "Fix these problems and output the corrected document."]
    return "\n".join(parts)


def generate_site(
    prd: PrdDocument,
    prompt: str,
    gateway: ModelGateway,
    allowed_urls: Optional[Iterable[str]] = None,
) -> WebsiteArtifact:
    """Generate the initial artifact; one repair re-prompt if validation fails."""
    if prd.stage != "images_injected":
        raise InvalidArgument("PRD must have images injected before code generation")
    if not prompt.strip():
        raise InvalidArgument("prompt must be non-empty")

    repair_notes = ""
    for attempt in range(2):
        response = gateway.complete(
            ModelRequest(
                role="code",
                system_text=_code_system_text(),
                user_text=_code_user_text(prd, prompt, repair_notes),
            )
        )
        artifact = WebsiteArtifact(html=strip_code_fences(response.text))
        report = validate_artifact(artifact, allowed_urls=allowed_urls)
        if report.ok:
            return artifact
        repair_notes = "\n".join(f"- {v.code}: {v.message}" for v in report.violations)
    raise GenerationInvalid(f"artifact failed validation after repair: {repair_notes}")
