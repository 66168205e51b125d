"""fediff: multi-agent sketch-to-website generation.

Design agent turns a sketch + prompt into a PRD with image keywords, the
code agent generates the initial site, and the critic agent drives a bounded
review/refine loop over a branchable version tree.
"""
from .codegen import ValidationReport, WebsiteArtifact, validate_artifact
from .critic import CritiqueReport, LoopConfig, run_loop
from .design import (
    ImageKeyword,
    PrdDocument,
    RasterSketch,
    SketchInput,
    extract_keywords,
    generate_prd,
    inject_images,
    rasterize_sketch,
)
from .gateway import (
    ModelGateway,
    ModelRequest,
    ModelResponse,
    ProviderConfig,
    ProviderRegistry,
    complete,
)
from .images import ImageAsset, ImageClient, ImageSearchConfig
from .pipeline import Pipeline, create_session_with_sketch
from .store import Session, SessionStore, VersionNode

__version__ = "0.1.0"
