"""Design agent: sketch canonicalization, PRD generation, keyword handling.

Sketches arrive as SVG or raster bytes and are canonicalized to a 1024-px-wide
JPEG before prompting the model. The SVG renderer here covers the shape
primitives a layout sketch uses (rect, circle, ellipse, line, polyline,
polygon, simple paths, text); it is deliberately small and deterministic.
"""
from __future__ import annotations

import hashlib
import io
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from PIL import Image, ImageDraw, UnidentifiedImageError

from .errors import (
    EmptyResponse,
    InvalidArgument,
    MalformedSvg,
    PrdEmpty,
    StaleSpans,
    UnsupportedRasterFormat,
    ZeroAreaSketch,
)
from .gateway import ImagePayload, ModelGateway, ModelRequest, PROMPT_MARKER

CANONICAL_WIDTH = 1024
JPEG_QUALITY = 90

MODIFIERS = ("landscape", "portrait", "square", "large", "medium", "small")
ORIENTATION_MODIFIERS = ("landscape", "portrait", "square")
SIZE_MODIFIERS = ("large", "medium", "small")

KEYWORD_RE = re.compile(r"\[([a-z][a-z0-9_-]*)\(([a-z]+)\)\]")


@dataclass(frozen=True)
class SketchInput:
    format: str  # "svg" or "raster"
    data: bytes

    def __post_init__(self) -> None:
        if self.format not in ("svg", "raster"):
            raise InvalidArgument(f"unknown sketch format: {self.format!r}")
        if not self.data:
            raise InvalidArgument("sketch bytes are empty")


@dataclass(frozen=True)
class RasterSketch:
    data: bytes  # JPEG
    width_px: int
    height_px: int

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()

    @classmethod
    def from_jpeg(cls, data: bytes) -> "RasterSketch":
        image = Image.open(io.BytesIO(data))
        return cls(data=data, width_px=image.width, height_px=image.height)


@dataclass(frozen=True)
class PrdDocument:
    markdown: str
    stage: str = "raw"  # "raw" or "images_injected"

    def __post_init__(self) -> None:
        if self.stage not in ("raw", "images_injected"):
            raise InvalidArgument(f"unknown PRD stage: {self.stage!r}")
        if not self.markdown:
            raise InvalidArgument("PRD markdown is empty")


@dataclass(frozen=True)
class ImageKeyword:
    name: str
    modifier: Optional[str]  # one of MODIFIERS, or None for unknown modifiers
    span: tuple[int, int]  # character offsets of the [name(modifier)] token
    raw_modifier: str = ""

    @property
    def search_key(self) -> tuple[str, Optional[str]]:
        return (self.name, self.modifier)


# --- SVG rendering -----------------------------------------------------------

_LENGTH_RE = re.compile(r"^\s*([0-9.]+)\s*(px)?\s*$")


def _parse_length(value: str | None) -> Optional[float]:
    if not value:
        return None
    m = _LENGTH_RE.match(value)
    return float(m.group(1)) if m else None


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_points(raw: str) -> list[tuple[float, float]]:
    nums = [float(x) for x in re.split(r"[\s,]+", raw.strip()) if x]
    return list(zip(nums[0::2], nums[1::2]))


def _parse_path_points(d: str) -> list[tuple[float, float]]:
    """Flatten a path's M/L/H/V command endpoints; curves use their endpoints."""
    tokens = re.findall(r"[A-Za-z]|-?[0-9.]+(?:e-?[0-9]+)?", d)
    points: list[tuple[float, float]] = []
    x = y = 0.0
    i = 0
    cmd = ""
    while i < len(tokens):
        if tokens[i].isalpha():
            cmd = tokens[i]
            i += 1
            continue
        rel = cmd.islower()
        op = cmd.upper()
        if op in ("M", "L", "T"):
            nx, ny = float(tokens[i]), float(tokens[i + 1])
            i += 2
        elif op == "H":
            nx, ny = float(tokens[i]), 0.0 if rel else y
            i += 1
        elif op == "V":
            nx, ny = (0.0 if rel else x), float(tokens[i])
            i += 1
        elif op in ("C", "S", "Q", "A"):
            take = {"C": 6, "S": 4, "Q": 4, "A": 7}[op]
            nx, ny = float(tokens[i + take - 2]), float(tokens[i + take - 1])
            i += take
        else:
            i += 1
            continue
        if rel:
            nx, ny = x + nx, y + ny
        x, y = nx, ny
        points.append((x, y))
    return points


_DRAWABLE_TAGS = ("rect", "circle", "ellipse", "line", "polyline", "polygon", "path", "text")


def _collect_drawables(root: ET.Element) -> list[tuple[str, ET.Element]]:
    out = []
    for el in root.iter():
        tag = _local(el.tag)
        if tag in _DRAWABLE_TAGS:
            out.append((tag, el))
    return out


def _element_bounds(tag: str, el: ET.Element) -> Optional[tuple[float, float, float, float]]:
    def attr(name: str, default: float = 0.0) -> float:
        v = _parse_length(el.get(name))
        return default if v is None else v

    if tag == "rect":
        x, y, w, h = attr("x"), attr("y"), attr("width"), attr("height")
        return (x, y, x + w, y + h) if w > 0 and h > 0 else None
    if tag == "circle":
        cx, cy, r = attr("cx"), attr("cy"), attr("r")
        return (cx - r, cy - r, cx + r, cy + r) if r > 0 else None
    if tag == "ellipse":
        cx, cy, rx, ry = attr("cx"), attr("cy"), attr("rx"), attr("ry")
        return (cx - rx, cy - ry, cx + rx, cy + ry) if rx > 0 and ry > 0 else None
    if tag == "line":
        x1, y1, x2, y2 = attr("x1"), attr("y1"), attr("x2"), attr("y2")
        if (x1, y1) == (x2, y2):
            return None
        return (min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
    if tag in ("polyline", "polygon"):
        pts = _parse_points(el.get("points", ""))
        if len(pts) < 2:
            return None
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))
    if tag == "path":
        pts = _parse_path_points(el.get("d", ""))
        if len(pts) < 2:
            return None
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))
    if tag == "text":
        if not (el.text or "").strip():
            return None
        x, y = attr("x"), attr("y")
        width = 8 * len(el.text.strip())
        return (x, max(y - 12, 0), x + width, y + 4)
    return None


def _draw_element(draw: ImageDraw.ImageDraw, tag: str, el: ET.Element, scale: float) -> None:
    def attr(name: str, default: float = 0.0) -> float:
        v = _parse_length(el.get(name))
        return default if v is None else v

    fill = el.get("fill") or "black"
    stroke = el.get("stroke")
    width = max(1, round((_parse_length(el.get("stroke-width")) or 2) * scale))
    filled = fill != "none"
    outline = stroke if stroke and stroke != "none" else ("black" if not filled else None)

    def s(v: float) -> float:
        return v * scale

    if tag == "rect":
        box = [s(attr("x")), s(attr("y")), s(attr("x") + attr("width")), s(attr("y") + attr("height"))]
        draw.rectangle(box, fill=fill if filled else None, outline=outline, width=width)
    elif tag in ("circle", "ellipse"):
        rx = attr("r") if tag == "circle" else attr("rx")
        ry = attr("r") if tag == "circle" else attr("ry")
        box = [s(attr("cx") - rx), s(attr("cy") - ry), s(attr("cx") + rx), s(attr("cy") + ry)]
        draw.ellipse(box, fill=fill if filled else None, outline=outline, width=width)
    elif tag == "line":
        draw.line(
            [s(attr("x1")), s(attr("y1")), s(attr("x2")), s(attr("y2"))],
            fill=stroke or "black",
            width=width,
        )
    elif tag in ("polyline", "polygon", "path"):
        pts = _parse_points(el.get("points", "")) if tag != "path" else _parse_path_points(el.get("d", ""))
        scaled = [(s(x), s(y)) for x, y in pts]
        if len(scaled) < 2:
            return
        if tag == "polygon" and filled:
            draw.polygon(scaled, fill=fill, outline=outline)
        else:
            draw.line(scaled, fill=stroke or "black", width=width)
    elif tag == "text":
        draw.text((s(attr("x")), s(attr("y") - 12)), (el.text or "").strip(), fill=fill if filled else "black")


def _render_svg(data: bytes) -> Image.Image:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedSvg(str(exc)) from exc
    if _local(root.tag) != "svg":
        raise MalformedSvg(f"root element is <{_local(root.tag)}>, not <svg>")

    drawables = [
        (tag, el) for tag, el in _collect_drawables(root)
        if _element_bounds(tag, el) is not None
    ]
    if not drawables:
        raise ZeroAreaSketch("SVG has no drawable elements")

    src_w = _parse_length(root.get("width"))
    src_h = _parse_length(root.get("height"))
    viewbox = root.get("viewBox")
    if (src_w is None or src_h is None) and viewbox:
        parts = [float(p) for p in re.split(r"[\s,]+", viewbox.strip())]
        if len(parts) == 4:
            src_w, src_h = parts[2], parts[3]
    if src_w is None or src_h is None:
        bounds = [_element_bounds(t, e) for t, e in drawables]
        src_w = max(b[2] for b in bounds if b)
        src_h = max(b[3] for b in bounds if b)
    if src_w <= 0 or src_h <= 0:
        raise ZeroAreaSketch("SVG viewport has zero area")

    scale = CANONICAL_WIDTH / src_w
    out_h = max(1, round(src_h * scale))
    image = Image.new("RGB", (CANONICAL_WIDTH, out_h), "white")
    draw = ImageDraw.Draw(image)
    for tag, el in drawables:
        _draw_element(draw, tag, el, scale)
    return image


def _canonicalize_raster(data: bytes) -> Image.Image:
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except UnidentifiedImageError as exc:
        raise UnsupportedRasterFormat(str(exc)) from exc
    if image.format not in ("JPEG", "PNG"):
        raise UnsupportedRasterFormat(f"unsupported raster format: {image.format}")
    if image.width == 0 or image.height == 0:
        raise ZeroAreaSketch("raster sketch has zero area")
    if image.mode in ("RGBA", "LA", "P"):
        rgba = image.convert("RGBA")
        flattened = Image.new("RGB", rgba.size, "white")
        flattened.paste(rgba, mask=rgba.split()[-1])
        image = flattened
    elif image.mode != "RGB":
        image = image.convert("RGB")
    if image.width != CANONICAL_WIDTH:
        out_h = max(1, round(image.height * CANONICAL_WIDTH / image.width))
        image = image.resize((CANONICAL_WIDTH, out_h), Image.LANCZOS)
    return image


def rasterize_sketch(sketch: SketchInput) -> RasterSketch:
    """Canonicalize any sketch input to a 1024-px-wide JPEG on white."""
    if sketch.format == "svg":
        image = _render_svg(sketch.data)
    else:
        image = _canonicalize_raster(sketch.data)
    buf = io.BytesIO()
    image.save(buf, format="JPEG", quality=JPEG_QUALITY)
    return RasterSketch(data=buf.getvalue(), width_px=image.width, height_px=image.height)


# --- PRD generation ----------------------------------------------------------

def _design_system_text() -> str:
    return resources.files("fediff").joinpath("prompts/design.md").read_text(encoding="utf-8")


def generate_prd(sketch: RasterSketch, prompt: str, gateway: ModelGateway) -> PrdDocument:
    if not prompt.strip():
        raise InvalidArgument("prompt must be non-empty")
    request = ModelRequest(
        role="design",
        system_text=_design_system_text(),
        user_text=f"{PROMPT_MARKER} {prompt}\n",
        image=ImagePayload(data=sketch.data, media_type="image/jpeg"),
    )
    try:
        response = gateway.complete(request)
    except EmptyResponse as exc:
        raise PrdEmpty(str(exc)) from exc
    if not response.text.strip():
        raise PrdEmpty("model returned a blank PRD")
    return PrdDocument(markdown=response.text, stage="raw")


# --- keyword extraction and image injection ----------------------------------

def extract_keywords(prd: PrdDocument) -> list[ImageKeyword]:
    """All [name(modifier)] tokens in document order, one entry per occurrence.

    Unknown modifiers are kept with modifier=None; malformed near-tokens are
    silently ignored.
    """
    if prd.stage != "raw":
        raise InvalidArgument("keywords are extracted from a raw PRD")
    keywords = []
    for match in KEYWORD_RE.finditer(prd.markdown):
        name, raw_modifier = match.group(1), match.group(2)
        modifier = raw_modifier if raw_modifier in MODIFIERS else None
        keywords.append(
            ImageKeyword(name=name, modifier=modifier, span=match.span(), raw_modifier=raw_modifier)
        )
    return keywords


def unique_search_keys(keywords: list[ImageKeyword]) -> list[tuple[str, Optional[str]]]:
    """Deduplicated (name, modifier) pairs in first-occurrence order."""
    seen: list[tuple[str, Optional[str]]] = []
    for kw in keywords:
        if kw.search_key not in seen:
            seen.append(kw.search_key)
    return seen


PLACEHOLDER_SCHEME = "placeholder"


def placeholder_url(name: str) -> str:
    return f"{PLACEHOLDER_SCHEME}://{name}"


@dataclass
class InjectionResult:
    document: PrdDocument
    warnings: list[str] = field(default_factory=list)
    urls: list[str] = field(default_factory=list)


def inject_images(prd: PrdDocument, assignments: dict) -> InjectionResult:
    """Replace each keyword token with a markdown image reference.

    `assignments` maps (name, modifier) to an object with a `url` attribute.
    Keywords without an assignment get a placeholder URL plus a warning.
    Text outside the token spans is preserved byte for byte.
    """
    if prd.stage != "raw":
        raise InvalidArgument("images are injected into a raw PRD")
    keywords = extract_keywords(prd)
    text = prd.markdown
    warnings: list[str] = []
    urls: list[str] = []
    pieces: list[str] = []
    cursor = 0
    for kw in keywords:
        start, end = kw.span
        token = f"[{kw.name}({kw.raw_modifier})]"
        if text[start:end] != token:
            raise StaleSpans(f"span {kw.span} no longer holds {token!r}")
        asset = assignments.get(kw.search_key)
        if asset is None:
            url = placeholder_url(kw.name)
            warnings.append(f"no image asset for {token}; placeholder injected")
        else:
            url = asset.url
        if url not in urls:
            urls.append(url)
        pieces.append(text[cursor:start])
        pieces.append(f"![{kw.name}]({url})")
        cursor = end
    pieces.append(text[cursor:])
    return InjectionResult(
        document=PrdDocument(markdown="".join(pieces), stage="images_injected"),
        warnings=warnings,
        urls=urls,
    )
