from pathlib import Path

import pytest

from fediff.design import SketchInput
from fediff.gateway import ModelGateway
from fediff.images import ImageSearchConfig
from fediff.pipeline import Pipeline, create_session_with_sketch
from fediff.store import SessionStore

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def sketch_svg() -> bytes:
    return (FIXTURES / "layout.svg").read_bytes()


@pytest.fixture
def sketch(sketch_svg) -> SketchInput:
    return SketchInput(format="svg", data=sketch_svg)


@pytest.fixture
def store(tmp_path) -> SessionStore:
    return SessionStore(tmp_path / "sessions")


@pytest.fixture
def stub_gateway() -> ModelGateway:
    """Default stub: critic suggests twice on v0, approves afterwards."""
    return ModelGateway(provider_id="stub")


@pytest.fixture
def eager_gateway() -> ModelGateway:
    """Stub variant whose critic always has suggestions (fills the branch)."""
    return ModelGateway(provider_id="stub-eager")


@pytest.fixture
def pipeline(store, eager_gateway, tmp_path) -> Pipeline:
    return Pipeline(
        store=store,
        gateway=eager_gateway,
        image_config=ImageSearchConfig(cache_dir=tmp_path / "image-cache"),
    )


@pytest.fixture
def run_session(pipeline, store, sketch):
    """Run the full pipeline once; returns (session_id, labels)."""
    def _run(prompt: str = "minimalist researcher homepage"):
        session = create_session_with_sketch(store, prompt, sketch)
        labels = pipeline.run(session.id)
        return session.id, labels
    return _run
