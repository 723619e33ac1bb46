"""Session-oriented web service over the conversation runtime.

The API is plain JSON request/response; attachments travel base64-encoded
inside the message body rather than as multipart forms, so every client
(including the test suite) speaks one uniform notation. Replies are whole
messages, never streams.

Backend selection is part of the service configuration: MOCK wires the
runtime with no language backend at all, so extraction falls to the built-in
rule grammar and the whole service runs with no network and no credentials.
REMOTE points extraction at a configured endpoint; the credential is named
by environment variable and its value is read only at request time, never
stored in the configuration, logs, or replies.

Every error, including request-shape errors, is a JSON object of the shape
{code, field_path?, message} with a 4xx/5xx status derived from the code.
"""

from __future__ import annotations

import base64
import binascii
import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import __version__
from .agent import AGENTS, AgentRuntime, ChatSession, message_to_dict
from .emitters import PROFILES
from .errors import (
    BadAttachment,
    ConfigError,
    SlopeAgentError,
    UnknownArtifact,
    UnknownDocument,
    UnsupportedMediaType,
    UploadTooLarge,
)
from .extraction import LlmBackendConfig
from .kb import KbDocument

BACKENDS = ("MOCK", "REMOTE")

DEFAULT_MEDIA_TYPES = ("image/png", "image/jpeg", "text/plain", "application/json")

#: HTTP status per error code; anything unlisted is a 400 (caller mistake).
_STATUS = {
    "unknown_session": 404,
    "unknown_artifact": 404,
    "unknown_document": 404,
    "duplicate_document": 409,
    "upload_too_large": 413,
    "backend_unavailable": 503,
    "tool_timeout": 504,
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8732
    data_dir: str = "slopeagent-data"
    backend: str = "MOCK"
    remote_endpoint: str = ""
    remote_model: str = "default"
    credential_env: str = ""        # name of the variable, never its value
    remote_timeout: float = 30.0
    remote_retries: int = 2
    upload_limit: int = 10 * 1024 * 1024
    allowed_media_types: tuple[str, ...] = DEFAULT_MEDIA_TYPES
    tool_budget: float = 30.0
    static_dir: str = ""            # optional built web UI to serve at /

    def backend_config(self) -> LlmBackendConfig | None:
        if self.backend == "MOCK":
            return None
        return LlmBackendConfig(
            endpoint=self.remote_endpoint,
            model=self.remote_model,
            credential_env=self.credential_env,
            timeout=self.remote_timeout,
            max_retries=self.remote_retries,
        )


def load_config(path=None, overrides: dict | None = None) -> ServiceConfig:
    """Build a ServiceConfig from defaults, an optional file, the data-dir
    environment override, and explicit overrides, in that order."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        values.update(loaded)
    env_dir = os.environ.get("SLOPEAGENT_DATA")
    if env_dir:
        values["data_dir"] = env_dir
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    known = {f.name for f in dataclasses.fields(ServiceConfig)}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}", field_path=key)
    if "allowed_media_types" in values:
        values["allowed_media_types"] = tuple(values["allowed_media_types"])
    config = ServiceConfig(**values)
    if config.backend not in BACKENDS:
        raise ConfigError(f"backend must be one of {', '.join(BACKENDS)}",
                          field_path="backend")
    if config.backend == "REMOTE" and not config.remote_endpoint:
        raise ConfigError("REMOTE backend needs remote_endpoint", field_path="remote_endpoint")
    if config.upload_limit < 1:
        raise ConfigError("upload_limit must be positive", field_path="upload_limit")
    return config


# -- request bodies ----------------------------------------------------------------

class CreateSessionBody(BaseModel):
    agent: str = "SLOPE_STABILITY"
    target: str = "NONE"


class AttachmentBody(BaseModel):
    filename: str
    media_type: str
    data_base64: str


class MessageBody(BaseModel):
    text: str = ""
    attachments: list[AttachmentBody] = []


class IngestBody(BaseModel):
    doc_id: str
    title: str
    body: str
    source_path: str = ""
    tags: list[str] = []


# -- responses ----------------------------------------------------------------------

def _session_summary(session: ChatSession) -> dict:
    return {
        "session_id": session.session_id,
        "agent": session.agent,
        "target": session.target,
        "effective_target": session.effective_target(),
        "accumulated": dict(session.accumulated.fields),
        "missing_required": session.accumulated.missing_required(),
        "pending_conflicts": sorted(session.pending_conflicts),
        "artifacts": [dataclasses.asdict(a) for a in session.artifacts],
    }


def _decoded_attachments(body: MessageBody, config: ServiceConfig):
    out = []
    total = 0
    for i, att in enumerate(body.attachments):
        if att.media_type not in config.allowed_media_types:
            raise UnsupportedMediaType(
                f"media type {att.media_type!r} is not accepted; allowed: "
                + ", ".join(config.allowed_media_types),
                field_path=f"attachments[{i}].media_type",
            )
        try:
            data = base64.b64decode(att.data_base64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise BadAttachment(
                f"attachment is not valid base64: {exc}",
                field_path=f"attachments[{i}].data_base64",
            ) from exc
        total += len(data)
        if total > config.upload_limit:
            raise UploadTooLarge(
                f"attachments exceed the {config.upload_limit} byte limit",
                field_path=f"attachments[{i}]",
            )
        out.append((att.filename, att.media_type, data))
    return out


def create_app(config: ServiceConfig | None = None, runtime: AgentRuntime | None = None) -> FastAPI:
    """Assemble the service; a caller-supplied runtime wins over config."""
    config = config or ServiceConfig()
    if runtime is None:
        data_dir = Path(config.data_dir)
        try:
            data_dir.mkdir(parents=True, exist_ok=True)
            probe = data_dir / ".write-probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"data directory is not writable: {exc}",
                              field_path="data_dir") from exc
        runtime = AgentRuntime(data_dir, backend=config.backend_config(),
                               tool_budget=config.tool_budget)

    app = FastAPI(title="slopeagent", version=__version__, docs_url=None, redoc_url=None)
    app.state.runtime = runtime
    app.state.config = config

    @app.exception_handler(SlopeAgentError)
    async def _domain_error(request: Request, exc: SlopeAgentError):
        return JSONResponse(status_code=_STATUS.get(exc.code, 400), content=exc.payload())

    @app.exception_handler(RequestValidationError)
    async def _shape_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        loc = ".".join(str(part) for part in first["loc"] if part != "body")
        payload = {"code": "request_validation", "message": first["msg"]}
        if loc:
            payload["field_path"] = loc
        return JSONResponse(status_code=400, content=payload)

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "backend": config.backend,
            "kb_chunks": runtime.kb.chunk_count,
        }

    @app.get("/api/agents")
    def list_agents():
        return {"agents": [
            {"id": name, "label": name.replace("_", " ").title()} for name in AGENTS
        ]}

    @app.get("/api/targets")
    def list_targets():
        targets = [{
            "id": "NONE",
            "label": "Decide later",
            "token": "",
            "supports_water_table": True,
            "supports_multilayer": True,
        }]
        for key in sorted(PROFILES):
            profile = PROFILES[key]
            targets.append({
                "id": key,
                "label": profile.token,
                "token": profile.token,
                "supports_water_table": profile.supports_water_table,
                "supports_multilayer": profile.supports_multilayer,
            })
        return {"targets": targets}

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": runtime.list_sessions()}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = runtime.create_session(agent=body.agent, target=body.target)
        return _session_summary(session)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = runtime.get_session(session_id)
        out = _session_summary(session)
        out["messages"] = [message_to_dict(m) for m in session.transcript]
        return out

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        attachments = _decoded_attachments(body, config)
        session = runtime.get_session(session_id)
        before = len(session.artifacts)
        reply = runtime.handle_turn(session_id, body.text, attachments)
        return {
            "message": message_to_dict(reply),
            "new_artifacts": [dataclasses.asdict(a) for a in session.artifacts[before:]],
            "session": _session_summary(session),
        }

    @app.get("/api/sessions/{session_id}/artifacts/{artifact_id}")
    def get_artifact(session_id: str, artifact_id: str):
        try:
            data, media_type, kind = runtime.get_artifact(session_id, artifact_id)
        except KeyError:
            raise UnknownArtifact(f"no artifact {artifact_id!r} in session {session_id!r}")
        return Response(content=data, media_type=media_type,
                        headers={"X-Artifact-Kind": kind})

    @app.get("/api/kb/documents")
    def kb_documents():
        return {"documents": runtime.kb.list_documents()}

    @app.post("/api/kb/documents", status_code=201)
    def kb_ingest(body: IngestBody):
        doc = KbDocument(doc_id=body.doc_id, title=body.title, body=body.body,
                         source_path=body.source_path, tags=tuple(body.tags))
        chunks = runtime.kb.ingest(doc)
        return {"doc_id": body.doc_id, "chunks": chunks}

    @app.delete("/api/kb/documents/{doc_id}")
    def kb_delete(doc_id: str):
        removed = runtime.kb.delete(doc_id)
        if removed == 0:
            raise UnknownDocument(f"no document {doc_id!r}")
        return {"doc_id": doc_id, "removed": removed}

    @app.get("/api/kb/search")
    def kb_search(q: str, k: int = 4):
        hits = runtime.kb.search(q, k=max(1, min(k, 50)))
        return {"hits": [
            {"chunk_id": h.chunk_id, "score": h.score,
             "doc_id": h.citation.doc_id, "title": h.citation.title,
             "char_span": list(h.citation.char_span)}
            for h in hits
        ]}

    if config.static_dir and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def run(config: ServiceConfig) -> None:
    """Blocking entry point used by the CLI serve verb."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
