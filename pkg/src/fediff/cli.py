"""Command line interface: headless pipeline runs and the RPC server."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .critic import LoopConfig
from .design import SketchInput
from .errors import FediffError
from .gateway import ModelGateway, ProviderRegistry, load_providers
from .images import ImageSearchConfig
from .pipeline import Pipeline, create_session_with_sketch
from .rpc import RpcService, serve
from .store import SessionStore

DEFAULT_BIND = "127.0.0.1:8787"


def _registry(providers_path: str | None) -> ProviderRegistry:
    if providers_path:
        return load_providers(providers_path)
    return ProviderRegistry()


def _sketch_from_path(path: Path) -> SketchInput:
    fmt = "svg" if path.suffix.lower() == ".svg" else "raster"
    return SketchInput(format=fmt, data=path.read_bytes())


@click.group()
def main() -> None:
    """Sketch + prompt -> iteratively refined website versions."""


@main.command()
@click.option("--sketch", "sketch_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Sketch file (.svg, .png, or .jpg).")
@click.option("--prompt", required=True, help="What the site should be.")
@click.option("--iterations", default=4, show_default=True,
              help="Maximum versions on the branch (v0 counts).")
@click.option("--providers", "providers_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML/JSON provider registry file.")
@click.option("--provider", "provider_id", default="stub-eager", show_default=True,
              help="Provider id to use for all agents.")
@click.option("--images", "image_endpoint", default="fixture", show_default=True,
              help='Image search endpoint URL, or "fixture" for offline mode.')
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              default=Path("sessions"), show_default=True,
              help="Directory holding session state and artifacts.")
def run(sketch_path: Path, prompt: str, iterations: int, providers_path: str | None,
        provider_id: str, image_endpoint: str, out_dir: Path) -> None:
    """Run the full pipeline once and write the session directory."""
    try:
        store = SessionStore(out_dir)
        pipe = Pipeline(
            store=store,
            gateway=ModelGateway(registry=_registry(providers_path), provider_id=provider_id),
            image_config=ImageSearchConfig(
                endpoint_url=image_endpoint, cache_dir=out_dir / ".image-cache"
            ),
            loop_config=LoopConfig(max_versions=iterations),
        )
        session = create_session_with_sketch(store, prompt, _sketch_from_path(sketch_path))
        labels = pipe.run(session.id)
    except FediffError as exc:
        click.echo(f"error: {exc.code}: {exc}", err=True)
        sys.exit(1)
    click.echo(f"session: {session.id}")
    click.echo(f"versions: {' '.join(labels)}")
    click.echo(f"output: {out_dir / session.id}")


@main.command()
@click.option("--bind", default=DEFAULT_BIND, show_default=True, help="host:port to listen on.")
@click.option("--providers", "providers_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML/JSON provider registry file.")
@click.option("--provider", "provider_id", default="stub-eager", show_default=True,
              help="Default provider id for RPC calls.")
@click.option("--images", "image_endpoint", default="fixture", show_default=True,
              help='Image search endpoint URL, or "fixture" for offline mode.')
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              default=Path("sessions"), show_default=True)
def serve_cmd(bind: str, providers_path: str | None, provider_id: str,
              image_endpoint: str, out_dir: Path) -> None:
    """Serve the JSON-RPC API and artifact previews."""
    service = RpcService(
        store=SessionStore(out_dir),
        registry=_registry(providers_path),
        provider_id=provider_id,
        image_config=ImageSearchConfig(
            endpoint_url=image_endpoint, cache_dir=out_dir / ".image-cache"
        ),
    )
    try:
        server = serve(bind, service)
    except OSError as exc:
        click.echo(f"error: bind_failure: {exc}", err=True)
        sys.exit(1)
    click.echo(f"listening on http://{bind}/rpc")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


main.add_command(serve_cmd, name="serve")
