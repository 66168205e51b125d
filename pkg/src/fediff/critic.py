"""Critic agent: structured review, refinement, and the bounded loop.

The loop alternates review/refine from the session's active head until the
branch holds `max_versions` artifacts or a review approves (no suggestions).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .codegen import WebsiteArtifact, strip_code_fences, validate_artifact
from .errors import GenerationInvalid, InvalidArgument
from .gateway import (
    ModelGateway,
    ModelRequest,
    PARENT_VERSION_MARKER,
    PROMPT_MARKER,
    REVIEW_VERSION_MARKER,
)
from .store import SessionStore

CATEGORIES = ("layout", "accessibility", "performance", "content", "style")
SEVERITIES = ("minor", "major")


@dataclass(frozen=True)
class Suggestion:
    category: str
    severity: str
    description: str

    def to_dict(self) -> dict:
        return {"category": self.category, "severity": self.severity,
                "description": self.description}


@dataclass(frozen=True)
class CritiqueReport:
    version_reviewed: str
    suggestions: tuple[Suggestion, ...] = ()

    def to_dict(self) -> dict:
        return {
            "version_reviewed": self.version_reviewed,
            "suggestions": [s.to_dict() for s in self.suggestions],
        }


@dataclass(frozen=True)
class LoopConfig:
    max_versions: int = 4
    early_stop: bool = True

    def __post_init__(self) -> None:
        if self.max_versions < 1:
            raise InvalidArgument("max_versions must be >= 1")


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def _parse_suggestion_line(line: str) -> Optional[Suggestion]:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 3:
        return None
    category, severity, description = parts
    category = category.lstrip("-* ").lower()
    if category not in CATEGORIES or severity.lower() not in SEVERITIES or not description:
        return None
    return Suggestion(category, severity.lower(), description)


def parse_critique(text: str, version_label: str) -> CritiqueReport:
    """Lenient parse of critic output into the structured schema.

    Lines inside the first fenced block are parsed as
    `category | severity | description`; unparseable non-empty lines are kept
    verbatim as content/minor. Output with no fenced block and no parseable
    lines becomes a single content/minor suggestion wrapping the prose.
    An empty fenced block is an approval.
    """
    blocks = _FENCE_RE.findall(text)
    body = blocks[0] if blocks else text
    suggestions: list[Suggestion] = []
    unparsed: list[str] = []
    for line in body.splitlines():
        if not line.strip():
            continue
        parsed = _parse_suggestion_line(line)
        if parsed:
            suggestions.append(parsed)
        else:
            unparsed.append(line.strip())
    if blocks:
        for line in unparsed:
            suggestions.append(Suggestion("content", "minor", line))
    elif not suggestions and text.strip():
        suggestions.append(Suggestion("content", "minor", text.strip()))
    return CritiqueReport(version_reviewed=version_label, suggestions=tuple(suggestions))


def _prompt_text(name: str) -> str:
    return resources.files("fediff").joinpath(f"prompts/{name}.md").read_text(encoding="utf-8")


def review(artifact: WebsiteArtifact, gateway: ModelGateway) -> CritiqueReport:
    if not artifact.version_label:
        raise InvalidArgument("only committed versions can be reviewed")
    response = gateway.complete(
        ModelRequest(
            role="critic_review",
            system_text=_prompt_text("critic_review"),
            user_text=(
                f"{REVIEW_VERSION_MARKER} {artifact.version_label}\n\n{artifact.html}"
            ),
        )
    )
    return parse_critique(response.text, artifact.version_label)


def refine(
    artifact: WebsiteArtifact,
    critique: CritiqueReport,
    gateway: ModelGateway,
    allowed_urls=None,
    prompt: str = "",
) -> WebsiteArtifact:
    """Produce the next version from a non-empty critique; one repair attempt."""
    if not critique.suggestions:
        raise InvalidArgument("refine requires a non-empty critique")
    if critique.version_reviewed != artifact.version_label:
        raise InvalidArgument(
            f"critique reviews {critique.version_reviewed}, artifact is "
            f"{artifact.version_label}"
        )
    suggestion_lines = "\n".join(
        f"- {s.category} | {s.severity} | {s.description}" for s in critique.suggestions
    )
    repair_notes = ""
    for attempt in range(2):
        user_text = (
            f"{PARENT_VERSION_MARKER} {artifact.version_label}\n"
            + (f"{PROMPT_MARKER} {prompt}\n" if prompt else "")
            + f"\nSuggestions:\n{suggestion_lines}\n\nCurrent version:\n{artifact.html}"
        )
        if repair_notes:
            user_text += (
                f"\n\nThe previous attempt failed validation:\n{repair_notes}\n"
                "Fix these problems and output the corrected document."
            )
        response = gateway.complete(
            ModelRequest(
                role="critic_refine",
                system_text=_prompt_text("critic_refine"),
                user_text=user_text,
            )
        )
        candidate = WebsiteArtifact(html=strip_code_fences(response.text))
        report = validate_artifact(candidate, allowed_urls=allowed_urls)
        if report.ok:
            return candidate
        repair_notes = "\n".join(f"- {v.code}: {v.message}" for v in report.violations)
    raise GenerationInvalid(f"refinement failed validation after repair: {repair_notes}")


def run_loop(
    store: SessionStore,
    session_id: str,
    config: LoopConfig,
    gateway: ModelGateway,
    allowed_urls=None,
    prompt: str = "",
) -> list[str]:
    """Review/refine from the active head until the branch is full or approved.

    Returns the labels on the active branch in creation order, including the
    versions that existed before the loop started.
    """
    session = store.get_session(session_id)
    if not session.version_order:
        raise InvalidArgument("run_loop requires an initial version v0")
    head = session.active_head or session.version_order[-1]

    store.begin_loop(session_id)
    try:
        if session.state != "reviewing":
            store.set_state(session_id, "reviewing")
        while store.branch_length(session_id, head) < config.max_versions:
            artifact = store.get_artifact(session_id, head)
            critique = review(artifact, gateway)
            critique_ref = store.store_critique(session_id, head, critique.to_dict())
            if not critique.suggestions:
                break
            refined = refine(artifact, critique, gateway, allowed_urls=allowed_urls,
                             prompt=prompt)
            node = store.commit_version(
                session_id,
                parent=head,
                artifact=refined,
                created_by="critic_agent",
                critique_ref=critique_ref,
            )
            head = node.label
        store.set_state(session_id, "complete")
    finally:
        store.end_loop(session_id)

    # Root..head path in creation order.
    labels: list[str] = []
    label: Optional[str] = head
    while label is not None:
        labels.append(label)
        label = store._load_node(session_id, label).parent
    return list(reversed(labels))
