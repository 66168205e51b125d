import io
import re

import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from fediff.design import (
    ImageKeyword,
    PrdDocument,
    SketchInput,
    extract_keywords,
    generate_prd,
    inject_images,
    rasterize_sketch,
    unique_search_keys,
)
from fediff.errors import (
    InvalidArgument,
    MalformedSvg,
    StaleSpans,
    UnsupportedRasterFormat,
    ZeroAreaSketch,
)
from fediff.images import ImageAsset

# Independent oracle for the keyword grammar (kept separate from the
# implementation's compiled pattern on purpose).
ORACLE_RE = re.compile(r"\[([a-z][a-z0-9_-]*)\(([a-z]+)\)\]")


def svg(body: str, width=200, height=100) -> bytes:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}">{body}</svg>'
    ).encode()


RECT = '<rect x="20" y="20" width="160" height="60" fill="black"/>'


class TestRasterize:
    def test_svg_rect_scales_to_canonical_width(self):
        raster = rasterize_sketch(SketchInput("svg", svg(RECT)))
        assert (raster.width_px, raster.height_px) == (1024, 512)
        image = Image.open(io.BytesIO(raster.data))
        assert image.size == (1024, 512)
        # the rectangle must actually cover pixels
        grey = image.convert("L")
        dark = sum(1 for p in grey.tobytes() if p < 128)
        assert dark > 0.3 * 1024 * 512

    def test_raster_fixed_point(self):
        canvas = Image.new("RGB", (1024, 768), "white")
        buf = io.BytesIO()
        canvas.save(buf, format="JPEG")
        raster = rasterize_sketch(SketchInput("raster", buf.getvalue()))
        assert (raster.width_px, raster.height_px) == (1024, 768)

    def test_raster_rescaled_and_flattened(self):
        canvas = Image.new("RGBA", (512, 256), (0, 0, 0, 0))
        buf = io.BytesIO()
        canvas.save(buf, format="PNG")
        raster = rasterize_sketch(SketchInput("raster", buf.getvalue()))
        assert (raster.width_px, raster.height_px) == (1024, 512)
        image = Image.open(io.BytesIO(raster.data)).convert("L")
        assert min(image.tobytes()) > 200  # transparency became white

    def test_empty_svg_is_zero_area(self):
        with pytest.raises(ZeroAreaSketch):
            rasterize_sketch(SketchInput("svg", svg("")))

    def test_malformed_svg(self):
        with pytest.raises(MalformedSvg):
            rasterize_sketch(SketchInput("svg", b"<svg><rect"))

    def test_non_svg_root(self):
        with pytest.raises(MalformedSvg):
            rasterize_sketch(SketchInput("svg", b"<html></html>"))

    def test_unsupported_raster(self):
        with pytest.raises(UnsupportedRasterFormat):
            rasterize_sketch(SketchInput("raster", b"GIF89a not really"))

    def test_determinism(self, sketch_svg):
        a = rasterize_sketch(SketchInput("svg", sketch_svg))
        b = rasterize_sketch(SketchInput("svg", sketch_svg))
        assert a.digest == b.digest

    def test_empty_bytes_rejected(self):
        with pytest.raises(InvalidArgument):
            SketchInput("svg", b"")


class TestGeneratePrd:
    def test_stub_prd_contains_the_two_tokens(self, sketch, stub_gateway):
        raster = rasterize_sketch(sketch)
        prd = generate_prd(raster, "minimalist researcher homepage", stub_gateway)
        assert prd.stage == "raw"
        assert "[hero(landscape)]" in prd.markdown
        assert "[profile(large)]" in prd.markdown
        assert "## " in prd.markdown

    def test_empty_prompt_rejected(self, sketch, stub_gateway):
        raster = rasterize_sketch(sketch)
        with pytest.raises(InvalidArgument):
            generate_prd(raster, "   ", stub_gateway)


class TestExtractKeywords:
    def test_single_token(self):
        prd = PrdDocument("Use [hero(landscape)] above the fold")
        kws = extract_keywords(prd)
        assert [(k.name, k.modifier) for k in kws] == [("hero", "landscape")]

    def test_no_tokens(self):
        assert extract_keywords(PrdDocument("nothing here")) == []

    def test_duplicates_dedupe_for_search_but_keep_spans(self):
        text = "a [profile(large)] b [profile(large)] c [gallery(small)]"
        kws = extract_keywords(PrdDocument(text))
        assert len(kws) == 3
        assert unique_search_keys(kws) == [("profile", "large"), ("gallery", "small")]

    def test_malformed_near_tokens_ignored(self):
        text = "[hero(] [Hero(landscape)] [hero()] [hero(landscape]"
        assert extract_keywords(PrdDocument(text)) == []

    def test_unknown_modifier_kept_with_none(self):
        kws = extract_keywords(PrdDocument("[hero(weird)]"))
        assert len(kws) == 1
        assert kws[0].modifier is None
        assert kws[0].raw_modifier == "weird"

    def test_idempotent(self):
        prd = PrdDocument("x [a(large)] y [b(small)] z")
        assert extract_keywords(prd) == extract_keywords(prd)


token_st = st.builds(
    lambda name, mod: f"[{name}({mod})]",
    st.from_regex(r"[a-z][a-z0-9_-]{0,8}", fullmatch=True),
    st.sampled_from(["landscape", "portrait", "square", "large", "medium", "small", "zzz"]),
)
near_token_st = st.sampled_from(["[hero(]", "[X(large)]", "[hero]", "(large)", "[h(LARGE)]"])
filler_st = st.text(
    alphabet=st.characters(blacklist_characters="[]", blacklist_categories=("Cs",)),
    max_size=20,
)
prd_text_st = st.lists(
    st.one_of(filler_st, token_st, near_token_st), min_size=1, max_size=12
).map("".join).filter(lambda s: s.strip())


@settings(max_examples=200)
@given(prd_text_st)
def test_extraction_matches_regex_oracle(text):
    prd = PrdDocument(markdown=text)
    got = [(k.name, k.raw_modifier, k.span) for k in extract_keywords(prd)]
    expected = [(m.group(1), m.group(2), m.span()) for m in ORACLE_RE.finditer(text)]
    assert got == expected


@settings(max_examples=200)
@given(prd_text_st)
def test_injection_round_trip(text):
    prd = PrdDocument(markdown=text)
    keywords = extract_keywords(prd)
    result = inject_images(prd, {})
    out = result.document.markdown
    assert result.document.stage == "images_injected"
    # zero residual tokens
    assert not ORACLE_RE.search(out)
    # substituting original tokens back over the replacements reconstructs input
    rebuilt = out
    for kw in reversed(keywords):
        token = f"[{kw.name}({kw.raw_modifier})]"
        replacement = f"![{kw.name}](placeholder://{kw.name})"
        idx = rebuilt.rfind(replacement)
        assert idx >= 0
        rebuilt = rebuilt[:idx] + token + rebuilt[idx + len(replacement):]
    assert rebuilt == text


class TestInjectImages:
    def asset(self, url):
        return ImageAsset(url=url, width_px=10, height_px=10)

    def test_basic_substitution(self):
        prd = PrdDocument("see [hero(landscape)] here")
        result = inject_images(prd, {("hero", "landscape"): self.asset("https://u/x.jpg")})
        assert result.document.markdown == "see ![hero](https://u/x.jpg) here"
        assert result.warnings == []

    def test_no_keywords_advances_stage(self):
        prd = PrdDocument("plain text")
        result = inject_images(prd, {})
        assert result.document.markdown == "plain text"
        assert result.document.stage == "images_injected"

    def test_missing_assignment_gets_placeholder_and_warning(self):
        result = inject_images(PrdDocument("x [hero(landscape)] y"), {})
        assert "![hero](placeholder://hero)" in result.document.markdown
        assert len(result.warnings) == 1

    def test_stale_spans_detected(self):
        prd = PrdDocument("x [hero(landscape)] y")
        kws = extract_keywords(prd)
        shifted = ImageKeyword(name="hero", modifier="landscape",
                               span=(kws[0].span[0] + 1, kws[0].span[1] + 1),
                               raw_modifier="landscape")
        import fediff.design as design_mod
        original = design_mod.extract_keywords
        design_mod.extract_keywords = lambda p: [shifted]
        try:
            with pytest.raises(StaleSpans):
                inject_images(prd, {})
        finally:
            design_mod.extract_keywords = original

    def test_injected_stage_cannot_be_reinjected(self):
        injected = inject_images(PrdDocument("plain"), {}).document
        with pytest.raises(InvalidArgument):
            inject_images(injected, {})
