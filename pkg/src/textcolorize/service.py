"""HTTP front end for colorization over loaded checkpoints.

Endpoints:

* ``GET /api/health`` — ``{"status": "ok"|"degraded", "checkpoints": [...],
  "version": "..."}``; degraded means no model is loaded yet.
* ``POST /api/models`` — register a checkpoint by path; idempotent per
  path; 422 when the file is corrupt.
* ``GET /api/models`` — list registered checkpoints.
* ``POST /api/colorize`` — JSON ``{"image": <base64 PNG>, "description":
  str, "checkpoint": optional id}`` or a multipart form with an ``image``
  file and ``description``/``checkpoint`` fields.  Returns
  ``{"image": <base64 PNG>, "model": id, "elapsed_ms": float}``.
  Status codes: 400 undecodable image or missing description (empty
  string is allowed and means "no conditioning"), 404 unknown checkpoint
  id, 503 when no model is loaded.

Requests never mutate model weights; the registry is the only mutable
state and is serialized behind a lock, so concurrent identical requests
return identical bytes.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.staticfiles import StaticFiles

from . import __version__
from .data import decode_png_bytes, encode_png_bytes
from .errors import CheckpointError, ConfigError, DataError
from .inference import InferenceModel, checkpoint_id, colorize_rgb, load_inference_model

log = logging.getLogger(__name__)

MAX_DESCRIPTION_LENGTH = 1024


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    checkpoints: tuple[str, ...] = ()
    checkpoint_dir: str | None = None
    frontend_dir: str | None = None


def load_service_config(path: str | Path | None = None, env=None) -> ServiceConfig:
    """Config file (JSON) with environment overrides.

    Recognized variables: TEXTCOLORIZE_HOST, TEXTCOLORIZE_PORT,
    TEXTCOLORIZE_CHECKPOINT_DIR, TEXTCOLORIZE_FRONTEND_DIR.
    """
    env = env if env is not None else os.environ
    tree: dict = {}
    if path is not None:
        try:
            tree = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read service config {path}: {exc}") from exc
    unknown = set(tree) - {"host", "port", "checkpoints", "checkpoint_dir", "frontend_dir"}
    if unknown:
        raise ConfigError(f"unknown service config key(s): {', '.join(sorted(unknown))}")
    if "TEXTCOLORIZE_HOST" in env:
        tree["host"] = env["TEXTCOLORIZE_HOST"]
    if "TEXTCOLORIZE_PORT" in env:
        tree["port"] = int(env["TEXTCOLORIZE_PORT"])
    if "TEXTCOLORIZE_CHECKPOINT_DIR" in env:
        tree["checkpoint_dir"] = env["TEXTCOLORIZE_CHECKPOINT_DIR"]
    if "TEXTCOLORIZE_FRONTEND_DIR" in env:
        tree["frontend_dir"] = env["TEXTCOLORIZE_FRONTEND_DIR"]
    if "checkpoints" in tree:
        tree["checkpoints"] = tuple(tree["checkpoints"])
    return ServiceConfig(**tree)


@dataclass
class ModelRegistry:
    """Path-keyed collection of loaded checkpoints; single-writer, many readers."""

    models: dict[str, InferenceModel] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    default_id: str | None = None

    def register(self, path: str | Path) -> InferenceModel:
        model_id = checkpoint_id(path)
        with self.lock:
            existing = self.models.get(model_id)
            if existing is not None:
                return existing
        model = load_inference_model(path)  # load outside the lock; may be slow
        with self.lock:
            self.models[model_id] = model
            if self.default_id is None:
                self.default_id = model_id
        return model

    def resolve(self, model_id: str | None) -> InferenceModel:
        with self.lock:
            if not self.models:
                raise HTTPException(status_code=503, detail="no model loaded")
            if model_id is None:
                return self.models[self.default_id]
            if model_id not in self.models:
                raise HTTPException(status_code=404, detail=f"unknown checkpoint id {model_id!r}")
            return self.models[model_id]

    def ids(self) -> list[str]:
        with self.lock:
            return sorted(self.models)

    def entries(self) -> list[dict[str, str]]:
        with self.lock:
            return [{"id": m.id, "path": m.path} for m in sorted(self.models.values(), key=lambda m: m.id)]


async def _parse_colorize_request(request: Request) -> tuple[bytes | None, str | None, str | None]:
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = form.get("image")
        image_bytes = await upload.read() if hasattr(upload, "read") else None
        description = form.get("description")
        model_id = form.get("checkpoint") or None
        return image_bytes, description, model_id
    try:
        body = await request.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise HTTPException(status_code=400, detail=f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise HTTPException(status_code=400, detail="request body must be a JSON object")
    image_b64 = body.get("image")
    image_bytes = None
    if isinstance(image_b64, str):
        try:
            image_bytes = base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"image field is not valid base64: {exc}") from exc
    description = body.get("description")
    model_id = body.get("checkpoint") or None
    return image_bytes, description, model_id


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="textcolorize", version=__version__)
    registry = ModelRegistry()
    app.state.registry = registry
    app.state.config = config

    paths = list(config.checkpoints)
    if config.checkpoint_dir:
        paths += sorted(str(p) for p in Path(config.checkpoint_dir).glob("*.pt"))
    for path in paths:
        try:
            model = registry.register(path)
            log.info("loaded checkpoint %s as %s", path, model.id)
        except (CheckpointError, OSError) as exc:
            log.warning("skipping checkpoint %s: %s", path, exc)

    @app.get("/api/health")
    def health():
        ids = registry.ids()
        return {
            "status": "ok" if ids else "degraded",
            "checkpoints": ids,
            "version": __version__,
        }

    @app.get("/api/models")
    def list_models():
        return {"models": registry.entries()}

    @app.post("/api/models")
    def register_model(body: dict):
        path = body.get("path") if isinstance(body, dict) else None
        if not isinstance(path, str) or not path:
            raise HTTPException(status_code=400, detail="missing `path` field")
        try:
            model = registry.register(path)
        except (CheckpointError, OSError) as exc:
            raise HTTPException(status_code=422, detail=f"cannot load checkpoint: {exc}") from exc
        return {"id": model.id, "path": model.path}

    @app.post("/api/colorize")
    async def colorize(request: Request):
        image_bytes, description, model_id = await _parse_colorize_request(request)
        if image_bytes is None:
            raise HTTPException(status_code=400, detail="missing `image` field")
        if description is None or not isinstance(description, str):
            raise HTTPException(status_code=400, detail="missing `description` field")
        if len(description) > MAX_DESCRIPTION_LENGTH:
            raise HTTPException(
                status_code=400,
                detail=f"description longer than {MAX_DESCRIPTION_LENGTH} characters",
            )
        model = registry.resolve(model_id)
        try:
            rgb = decode_png_bytes(image_bytes)
        except DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        started = time.perf_counter()
        result = colorize_rgb(model, rgb, description)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return {
            "image": base64.b64encode(encode_png_bytes(result)).decode("ascii"),
            "model": model.id,
            "elapsed_ms": elapsed_ms,
        }

    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
