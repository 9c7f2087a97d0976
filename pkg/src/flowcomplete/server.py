"""HTTP service over the completion pipeline.

Error contract: 400 for malformed request bodies, 422 for inputs that fail
lexical or structural validation, 503 while no model is loaded.  The engine
is an immutable snapshot; reloading a checkpoint swaps the whole object, so
concurrent requests always see a consistent model."""

from __future__ import annotations

import json
from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import sfiles
from .graph import SchemaViolation, from_json, graph_to_dict
from .pipeline import Candidate, CompletionEngine, CompletionRequest, NoModelLoaded
from .tokenizer import StrayCharacter, TokenizeError

_REQUEST_FIELDS = {
    "sfiles_prefix": str,
    "graph": dict,
    "strategy": str,
    "beam_width": int,
    "p": (int, float),
    "k": int,
    "temperature": (int, float),
    "max_new_tokens": int,
    "num_return": int,
    "seed": int,
    "lenient": bool,
    "return_graphs": bool,
}


def _error(status: int, message: str, position: int | None = None) -> JSONResponse:
    body = {"error": message}
    if position is not None:
        body["position"] = position
    return JSONResponse(body, status_code=status)


async def _json_body(request: Request) -> dict:
    try:
        body = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise _BadRequest(f"request body is not valid JSON: {exc}")
    if not isinstance(body, dict):
        raise _BadRequest("request body must be a JSON object")
    return body


class _BadRequest(Exception):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.message = message
        self.position = position


def create_app(engine: CompletionEngine | None = None) -> FastAPI:
    app = FastAPI(title="flowcomplete")
    app.state.engine = engine

    @app.exception_handler(_BadRequest)
    async def bad_request(_request, exc: _BadRequest):
        return _error(400, exc.message, exc.position)

    def require_engine() -> CompletionEngine:
        if app.state.engine is None:
            raise NoModelLoaded("no model loaded")
        return app.state.engine

    @app.exception_handler(NoModelLoaded)
    async def no_model(_request, exc: NoModelLoaded):
        return _error(503, str(exc))

    @app.get("/api/health")
    async def health():
        require_engine()
        return {"status": "ok"}

    @app.get("/api/model")
    async def model_info():
        return require_engine().model_info()

    @app.post("/api/parse")
    async def parse(request: Request):
        body = await _json_body(request)
        s = body.get("sfiles")
        if not isinstance(s, str):
            raise _BadRequest("field 'sfiles' must be a string")
        mode = body.get("mode", "strict")
        if mode not in ("strict", "lenient"):
            raise _BadRequest("field 'mode' must be 'strict' or 'lenient'")
        warnings: list = []
        try:
            g = sfiles.parse(s, mode=mode, warnings=warnings)
        except StrayCharacter as exc:
            return _error(422, str(exc), exc.position)
        except (TokenizeError, sfiles.SfilesError) as exc:
            return _error(422, f"{type(exc).__name__}: {exc}")
        return {"graph": graph_to_dict(g), "warnings": warnings}

    @app.post("/api/serialize")
    async def serialize(request: Request):
        body = await _json_body(request)
        doc = body.get("graph")
        if not isinstance(doc, dict):
            raise _BadRequest("field 'graph' must be an object")
        try:
            g = from_json(doc)
        except SchemaViolation as exc:
            raise _BadRequest(f"graph schema violation: {exc}")
        try:
            return {"sfiles": sfiles.serialize(g)}
        except sfiles.SfilesError as exc:
            return _error(422, f"{type(exc).__name__}: {exc}")

    @app.post("/api/complete")
    async def complete(request: Request):
        engine = require_engine()
        body = await _json_body(request)
        kwargs = {}
        for name, value in body.items():
            expected = _REQUEST_FIELDS.get(name)
            if expected is None:
                raise _BadRequest(f"unknown field {name!r}")
            if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
                raise _BadRequest(f"field {name!r} has the wrong type")
            kwargs[name] = value
        req = CompletionRequest(**kwargs)
        try:
            response = engine.complete(req)
        except StrayCharacter as exc:
            return _error(422, str(exc), exc.position)
        except (TokenizeError, sfiles.SfilesError) as exc:
            return _error(422, f"{type(exc).__name__}: {exc}")
        except (ValueError, SchemaViolation) as exc:
            raise _BadRequest(str(exc))
        return {
            "prefix": response.prefix,
            "candidates": [asdict(c) for c in response.candidates],
        }

    return app


def serve(checkpoint: str | None, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    engine = CompletionEngine.from_checkpoint(checkpoint)
    uvicorn.run(create_app(engine), host=host, port=port)
