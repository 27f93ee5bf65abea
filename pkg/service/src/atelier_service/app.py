"""HTTP surface: POST /v1/refine, GET /v1/info, GET /v1/health.

Error payloads echo the request's pass_id verbatim so the engine can map
failures back to tiles. Health returns 503 until the backend is ready.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .backends import Backend, BackendError, decode_tile, encode_tile
from .config import ServiceConfig


class RefineBody(BaseModel):
    image: str
    denoise: float = 0.0
    prompt: str = ""
    adapter_scale: float = Field(default=1.0)
    seed: int = 0
    pass_id: str = ""


def create_app(config: ServiceConfig, start_ready: bool = True) -> FastAPI:
    app = FastAPI(title="atelier refiner service")
    app.state.config = config
    app.state.ready = False
    app.state.backend = None

    def ensure_backend() -> Backend:
        if app.state.backend is None:
            app.state.backend = Backend(config)
            app.state.ready = True
        return app.state.backend

    if start_ready:
        ensure_backend()

    def error(status: int, message: str, pass_id: str | None = None):
        return JSONResponse(status_code=status,
                            content={"error": message, "pass_id": pass_id})

    @app.get("/v1/info")
    def info():
        return config.info()

    @app.get("/v1/health")
    def health():
        if not app.state.ready:
            return PlainTextResponse("loading", status_code=503)
        return PlainTextResponse("ok")

    @app.post("/v1/refine")
    def refine(body: RefineBody):
        if not 0.0 <= body.denoise <= 1.0:
            return error(400, f"denoise {body.denoise} outside [0, 1]", body.pass_id)
        if body.adapter_scale < 0:
            return error(400, "adapter_scale must be >= 0", body.pass_id)
        try:
            tile = decode_tile(base64.b64decode(body.image, validate=True))
        except Exception as exc:
            return error(400, f"bad image payload: {exc}", body.pass_id)
        if max(tile.shape[0], tile.shape[1]) > config.max_tile_px:
            return error(413, f"tile {tile.shape[1]}x{tile.shape[0]} exceeds "
                              f"max_tile_px {config.max_tile_px}", body.pass_id)
        try:
            out = ensure_backend().refine(tile, body.denoise, body.prompt,
                                          body.adapter_scale, body.seed)
            payload = encode_tile(out)
        except BackendError as exc:
            return error(500, str(exc), body.pass_id)
        return {"image": base64.b64encode(payload).decode("ascii")}

    return app
