"""JSON-over-HTTP adapter in front of the engine, plus static hosting for the UI.

The HTTP layer is deliberately thin: every behavior here is reachable through
the in-process engine API with identical results. Errors map onto a small
typed vocabulary so the UI can distinguish a busy campaign from an upstream
model failure from a content-filter refusal.
"""

from __future__ import annotations

import random
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .engine import BusyError, GmEngine
from .llm import BackendError, ContentFilterError, ScriptError, TransportError
from .state import EngineVersion, StateError, StorageError
from .v1 import V1TurnError
from .v2 import V2TurnError


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _classify(exc: Exception) -> ApiError:
    if isinstance(exc, ApiError):
        return exc
    # Engine-level wrappers chain the backend failure; the filter verdict must
    # survive the wrapping so the UI can tell it apart from a flaky provider.
    cause, depth = exc, 0
    while cause is not None and depth < 6:
        if isinstance(cause, ContentFilterError):
            return ApiError(502, "ContentFiltered", str(cause))
        cause = getattr(cause, "cause", None) or cause.__cause__
        depth += 1
    if isinstance(exc, BusyError):
        return ApiError(409, "Busy", str(exc))
    if isinstance(exc, StorageError):
        if "no saved campaign" in str(exc):
            return ApiError(404, "NotFound", str(exc))
        return ApiError(500, "Internal", str(exc))
    if isinstance(exc, StateError):
        return ApiError(400, "BadRequest", str(exc))
    if isinstance(exc, ContentFilterError):
        return ApiError(502, "ContentFiltered", str(exc))
    if isinstance(exc, (TransportError, ScriptError, BackendError, V1TurnError, V2TurnError)):
        return ApiError(502, "UpstreamLlm", str(exc))
    return ApiError(500, "Internal", f"{type(exc).__name__}: {exc}")


class CreateCampaignBody(BaseModel):
    setting: str = "fantasy"
    startScenario: str = ""
    playerName: str
    playerDescription: str = ""
    engine: str
    seed: int | None = Field(default=None, ge=0)


class TurnBody(BaseModel):
    actionKind: str
    text: str


def create_app(engine: GmEngine, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="solo-gm", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "BadRequest", "message": str(exc.errors()[:3])}
        )

    @app.exception_handler(Exception)
    async def handle_any(request: Request, exc: Exception):
        error = _classify(exc)
        return JSONResponse(
            status_code=error.status, content={"code": error.code, "message": error.message}
        )

    @app.post("/api/campaigns", status_code=201)
    def create_campaign(body: CreateCampaignBody, play: int = 0):
        engine_token = body.engine.strip().casefold()
        if engine_token not in ("v1", "v2"):
            raise ApiError(400, "BadRequest", f"engine must be 'v1' or 'v2', not {body.engine!r}")
        if not body.playerName.strip():
            raise ApiError(400, "BadRequest", "playerName must be non-empty")
        seed = body.seed if body.seed is not None else random.SystemRandom().getrandbits(64)
        try:
            campaign, introduction = engine.create_campaign(
                body.setting,
                body.startScenario,
                body.playerName,
                body.playerDescription,
                EngineVersion.V1 if engine_token == "v1" else EngineVersion.V2,
                seed,
            )
        except Exception as exc:
            raise _classify(exc)
        payload = {"campaignId": campaign.id, "seed": campaign.rng_seed}
        if play:
            payload["narrative"] = introduction
        return payload

    @app.post("/api/campaigns/{campaign_id}/messages")
    def post_message(campaign_id: str, body: TurnBody):
        if body.actionKind.strip().casefold() not in ("do", "say", "attack"):
            raise ApiError(
                400, "BadRequest", f"actionKind must be do, say, or attack, not {body.actionKind!r}"
            )
        if not body.text.strip():
            raise ApiError(400, "BadRequest", "text must be non-empty")
        try:
            outcome = engine.take_turn(campaign_id, body.actionKind, body.text)
        except Exception as exc:
            raise _classify(exc)
        return {
            "narrative": outcome.narrative,
            "stateDelta": outcome.state_delta,
            "turn": outcome.record.get("turn"),
        }

    @app.get("/api/campaigns")
    def list_campaigns():
        campaigns = []
        for campaign_id in engine.store.list_ids():
            try:
                campaign = engine.store.load(campaign_id)
            except StorageError:
                continue
            campaigns.append(
                {
                    "id": campaign.id,
                    "setting": campaign.setting,
                    "engine": campaign.engine.value,
                    "updatedAt": campaign.updated_at,
                }
            )
        campaigns.sort(key=lambda c: c["updatedAt"], reverse=True)
        return {"campaigns": campaigns}

    @app.get("/api/campaigns/{campaign_id}")
    def get_campaign(campaign_id: str):
        try:
            return engine.get_campaign(campaign_id).to_dict()
        except Exception as exc:
            raise _classify(exc)

    @app.get("/api/campaigns/{campaign_id}/trace")
    def get_trace(campaign_id: str):
        try:
            engine.get_campaign(campaign_id)
        except Exception as exc:
            raise _classify(exc)
        return engine.get_trace(campaign_id)

    @app.delete("/api/campaigns/{campaign_id}", status_code=204)
    def delete_campaign(campaign_id: str):
        try:
            engine.store.delete(campaign_id)
        except Exception as exc:
            raise _classify(exc)

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
