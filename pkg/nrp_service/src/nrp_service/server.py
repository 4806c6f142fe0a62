"""HTTP serving of the next-response wire protocol.

Endpoints: POST /score, POST /score_batch, GET /health. Requests carry a
direction field; the app hosts one scorer per direction it was given
(deployments run one process per direction, conformance setups may load
both). Handlers are stateless over the shared read-only scorers. Responses
add a truncated flag only when truncation actually happened, malformed
requests get 400 {"error": ...}, scoring failures 500, unknown paths 404.
"""

from __future__ import annotations

import json
import logging
from typing import Mapping, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

__all__ = ["create_app", "serve"]

log = logging.getLogger(__name__)


async def _json_body(request: Request) -> dict:
    try:
        payload = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise HTTPException(400, f"bad request: body is not JSON: {exc}")
    if not isinstance(payload, dict):
        raise HTTPException(400, "bad request: body must be a JSON object")
    return payload


def _pick_scorer(payload: dict, scorers: Mapping[str, object]):
    if "direction" not in payload:
        raise HTTPException(400, "bad request: missing field 'direction'")
    direction = payload["direction"]
    scorer = scorers.get(direction)
    if scorer is None:
        raise HTTPException(400, f"unknown direction {direction!r}")
    return scorer


def _pair_fields(obj: dict, where: str) -> tuple[list[str], str]:
    for field in ("context", "candidate"):
        if field not in obj:
            raise HTTPException(400, f"bad request: missing field {field!r}{where}")
    context, candidate = obj["context"], obj["candidate"]
    if not isinstance(context, list) or not all(isinstance(s, str) for s in context):
        raise HTTPException(400, f"bad request: context must be a list of strings{where}")
    if not isinstance(candidate, str):
        raise HTTPException(400, f"bad request: candidate must be a string{where}")
    return context, candidate


def create_app(scorers: Mapping[str, object], model_id: str | None = None) -> FastAPI:
    """Wire-protocol app over direction-keyed scorers.

    Each scorer must provide score_pairs(items) -> (probabilities,
    truncated_flags) and a model_id attribute; /health reports the first
    scorer's model_id unless one is given explicitly.
    """
    if not scorers:
        raise ValueError("at least one direction's scorer is required")
    health_model_id = model_id or getattr(next(iter(scorers.values())), "model_id", "unknown")
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": f"bad request: {exc}"})

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "model_id": health_model_id}

    def _scored(scorer, pairs: Sequence[tuple[list[str], str]]):
        try:
            return scorer.score_pairs(pairs)
        except Exception as exc:
            log.exception("scoring failed")
            raise HTTPException(500, f"scoring failed: {exc}")

    @app.post("/score")
    async def score(request: Request) -> JSONResponse:
        payload = await _json_body(request)
        scorer = _pick_scorer(payload, scorers)
        pair = _pair_fields(payload, "")
        probs, flags = _scored(scorer, [pair])
        body: dict = {"probability": probs[0]}
        if flags[0]:
            body["truncated"] = True
        return JSONResponse(body)

    @app.post("/score_batch")
    async def score_batch(request: Request) -> JSONResponse:
        payload = await _json_body(request)
        scorer = _pick_scorer(payload, scorers)
        items = payload.get("items")
        if not isinstance(items, list):
            raise HTTPException(400, "bad request: 'items' must be a list")
        pairs = [_pair_fields(item, f" in items[{i}]") for i, item in enumerate(items)]
        probs, flags = _scored(scorer, pairs) if pairs else ([], [])
        body: dict = {"probabilities": probs}
        if any(flags):
            body["truncated"] = flags
        return JSONResponse(body)

    return app


def serve(scorers: Mapping[str, object], host: str, port: int) -> None:
    """Run the app under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(create_app(scorers), host=host, port=port, log_level="info")
