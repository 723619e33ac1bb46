"""Conversation orchestration: sessions, the turn pipeline, and tools.

Every turn runs the same fixed pipeline: retrieve context from the knowledge
base, extract fields from the message, merge them into the session's
accumulated problem, pick exactly one action from a deterministic decision
table, execute it through the tool registry, and compose the reply. The
table, not the language backend, decides what happens; the backend only
extracts fields and never chooses actions.

Decision table (first matching row wins):
  conflicts this turn        -> RESOLVE_CONFLICT (quote both values, keep old)
  required fields missing    -> ASK_CLARIFICATION (geometry first)
  complete, no target        -> ANSWER_FROM_KB (and prompt to pick software)
  complete, target selected  -> EMIT_SCRIPT, or RUN_SOLVER when the message
                                matches the run-intent rule; RUN_SOLVER
                                subsumes emission (script, result, plot)

Conflicts are sticky: a restated field with a different value is NOT applied,
and the reply quotes both values. While a conflict is pending, restating that
field applies the new value (the user has just seen both candidates, so the
restatement is the resolution).

Determinism: the default clock is logical (0, 1, 2, ... per reading), so
timestamps, durations, and therefore whole transcripts are byte-identical
across runs with the same inputs; artifact ids are content hashes. Inject
time.time as the clock to get wall-clock stamps instead.

Sessions persist as an append-only event log under sessions/<id>.log, one
canonical-notation record per line; replaying the log reconstructs the exact
session state.
"""

import concurrent.futures
import dataclasses
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .canon import canonical_bytes, fnv1a64, problem_from_dict, problem_to_dict
from .emitters import PROFILES, emit, lint, parse_script
from .errors import (
    ArgumentValidation,
    BackendUnavailable,
    InvalidProblem,
    MalformedBackendReply,
    ProblemFormatError,
    SlopeAgentError,
    ToolTimeout,
    UnknownAgent,
    UnknownProfile,
    UnknownSession,
    UnknownTool,
)
from .extraction import (
    Conflict,
    ExtractionResult,
    LlmBackendConfig,
    annotation_fields,
    extract_llm,
    extract_rule_based,
    load_annotation,
    merge_turns,
    wants_run,
)
from .kb import KbStore, ingest_default_docs
from .model import PartialProblem, SlopeProblem, build_problem, validate
from .plot import render_result
from .solver import search_critical, result_to_dict

AGENTS = ("SLOPE_STABILITY",)
ACTIONS = ("ASK_CLARIFICATION", "EMIT_SCRIPT", "RUN_SOLVER", "ANSWER_FROM_KB",
           "RESOLVE_CONFLICT")

FIELD_HINTS = {
    "geometry.height": "slope height, m",
    "geometry.slope_angle": "slope angle, degrees",
    "layers[0].unit_weight": "unit weight, kN/m3",
    "layers[0].cohesion": "cohesion, kPa",
    "layers[0].friction_angle": "friction angle, degrees",
}


# --- records -------------------------------------------------------------------

@dataclass(frozen=True)
class Attachment:
    filename: str
    media_type: str
    ref: str                    # data-dir-relative path of the stored blob


@dataclass(frozen=True)
class CitationNote:
    chunk_id: str
    doc_id: str
    title: str
    score: float


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: dict


@dataclass(frozen=True)
class ToolResult:
    ok: bool
    payload: Any
    error: dict | None
    duration: float


@dataclass(frozen=True)
class Message:
    role: str                   # USER | ASSISTANT | TOOL
    text: str
    attachments: tuple[Attachment, ...] = ()
    citations: tuple[CitationNote, ...] = ()
    timestamp: float = 0.0
    tool_call: ToolCall | None = None
    tool_result: ToolResult | None = None


@dataclass(frozen=True)
class Artifact:
    artifact_id: str
    kind: str                   # SCRIPT | RESULT | PLOT
    path: str                   # data-dir-relative


@dataclass(frozen=True)
class TurnPlan:
    action: str
    payload: dict


@dataclass
class ChatSession:
    session_id: str
    agent: str
    target: str                 # dropdown selection; chat statements override
    accumulated: PartialProblem = field(default_factory=PartialProblem)
    transcript: list[Message] = field(default_factory=list)
    artifacts: list[Artifact] = field(default_factory=list)
    pending_conflicts: set[str] = field(default_factory=set)

    def effective_target(self) -> str:
        return self.accumulated.fields.get("analysis.target") or self.target


# --- tool registry ----------------------------------------------------------------

@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str                   # string | number | integer | boolean | object
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[ParamSpec, ...]
    result: str


_KINDS = {
    "string": str,
    "number": (int, float),
    "integer": int,
    "boolean": bool,
    "object": dict,
}


class ToolRegistry:
    """Immutable-after-freeze name -> (spec, handler) table.

    dispatch schema-validates arguments, then runs the handler on a worker
    thread under a wall-clock budget. UnknownTool, ArgumentValidation, and
    ToolTimeout raise; any other package error comes back as a structured
    not-ok ToolResult. A timed-out handler thread is abandoned, not killed;
    the budget bounds the chat's latency, not the worker's lifetime.
    """

    def __init__(self, budget: float = 30.0):
        self.budget = budget
        self._tools: dict[str, tuple[ToolSpec, Callable]] = {}
        self._frozen = False

    def register(self, spec: ToolSpec, handler: Callable) -> None:
        if self._frozen:
            raise RuntimeError("registry is frozen")
        if spec.name in self._tools:
            raise ValueError(f"tool {spec.name!r} already registered")
        self._tools[spec.name] = (spec, handler)

    def freeze(self) -> None:
        self._frozen = True

    def specs(self) -> tuple[ToolSpec, ...]:
        return tuple(spec for spec, _ in self._tools.values())

    def _validated(self, spec: ToolSpec, arguments: dict) -> dict:
        by_name = {p.name: p for p in spec.parameters}
        for name in arguments:
            if name not in by_name:
                raise ArgumentValidation(name, f"not a parameter of {spec.name}")
        for p in spec.parameters:
            if p.name not in arguments:
                if p.required:
                    raise ArgumentValidation(p.name, "required")
                continue
            value = arguments[p.name]
            expected = _KINDS[p.kind]
            # bool is an int subclass; keep the kinds disjoint
            if isinstance(value, bool) and p.kind != "boolean":
                raise ArgumentValidation(p.name, f"expected {p.kind}, got boolean")
            if not isinstance(value, expected):
                raise ArgumentValidation(
                    p.name, f"expected {p.kind}, got {type(value).__name__}")
        return arguments

    def dispatch(self, call: ToolCall, clock: Callable[[], float] | None = None) -> ToolResult:
        clock = clock or (lambda: 0.0)
        entry = self._tools.get(call.tool)
        if entry is None:
            raise UnknownTool(f"no tool named {call.tool!r}")
        spec, handler = entry
        arguments = self._validated(spec, call.arguments)
        started = clock()
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        try:
            future = pool.submit(handler, **arguments)
            try:
                payload = future.result(timeout=self.budget)
            except concurrent.futures.TimeoutError:
                raise ToolTimeout(f"{call.tool} exceeded its {self.budget:g} s budget") from None
            except (ArgumentValidation,):
                raise
            except SlopeAgentError as exc:
                return ToolResult(ok=False, payload=None, error=exc.payload(),
                                  duration=clock() - started)
            return ToolResult(ok=True, payload=payload, error=None,
                              duration=clock() - started)
        finally:
            pool.shutdown(wait=False)


def _problem_from_arg(problem: dict) -> SlopeProblem:
    built = problem_from_dict(problem)
    violations = validate(built)
    if violations:
        v = violations[0]
        raise ArgumentValidation(v.field_path, v.message)
    return built


def build_default_registry(kb: KbStore, budget: float = 30.0) -> ToolRegistry:
    registry = ToolRegistry(budget=budget)

    def emit_script(problem: dict, target: str | None = None) -> dict:
        built = _problem_from_arg(problem)
        script = emit(built, target)
        return {
            "target": script.target,
            "text": script.text,
            "problem_hash": script.problem_hash,
            "grammar_version": script.grammar_version,
            "lint": [dataclasses.asdict(w) for w in lint(built)],
        }

    def run_solver(problem: dict, method: str | None = None,
                   slice_count: int | None = None) -> dict:
        built = _problem_from_arg(problem)
        analysis = built.analysis
        if method is not None:
            analysis = dataclasses.replace(analysis, method=method)
        if slice_count is not None:
            analysis = dataclasses.replace(analysis, slice_count=slice_count)
        built = dataclasses.replace(built, analysis=analysis)
        violations = validate(built)
        if violations:
            raise ArgumentValidation(violations[0].field_path, violations[0].message)
        result = search_critical(built)
        return result_to_dict(result, built)

    def kb_search(query: str, k: int = 4) -> dict:
        hits = kb.search(query, k=k)
        return {"hits": [
            {"chunk_id": h.chunk_id, "score": h.score, "doc_id": h.citation.doc_id,
             "title": h.citation.title, "char_span": list(h.citation.char_span)}
            for h in hits
        ]}

    def make_plot(result: dict) -> dict:
        return {"svg": render_result(result)}

    registry.register(ToolSpec(
        name="emit_script",
        description="Render a complete problem as a script for its target dialect",
        parameters=(
            ParamSpec("problem", "object", description="problem-file mapping"),
            ParamSpec("target", "string", required=False,
                      description="confirm the dialect; must match the problem"),
        ),
        result="script text, problem hash, grammar version, lint warnings",
    ), emit_script)
    registry.register(ToolSpec(
        name="run_solver",
        description="Search for the critical slip circle and report the factor of safety",
        parameters=(
            ParamSpec("problem", "object", description="problem-file mapping"),
            ParamSpec("method", "string", required=False,
                      description="override: BISHOP_SIMPLIFIED or FELLENIUS"),
            ParamSpec("slice_count", "integer", required=False,
                      description="override slice count"),
        ),
        result="result-file mapping with the problem embedded under meta.problem",
    ), run_solver)
    registry.register(ToolSpec(
        name="kb_search",
        description="Retrieve the most relevant reference chunks for a query",
        parameters=(
            ParamSpec("query", "string"),
            ParamSpec("k", "integer", required=False),
        ),
        result="ranked hits with chunk ids, scores, and citations",
    ), kb_search)
    registry.register(ToolSpec(
        name="make_plot",
        description="Render a result file as an SVG cross-section",
        parameters=(ParamSpec("result", "object", description="result-file mapping"),),
        result="svg text",
    ), make_plot)
    registry.freeze()
    return registry


# --- planning ------------------------------------------------------------------

def plan_turn(session: ChatSession, extraction: ExtractionResult) -> TurnPlan:
    """Pure decision-table policy; does not mutate the session."""
    outcome = merge_turns(session.accumulated, extraction)
    conflicts = tuple(extraction.conflicts) + tuple(outcome.conflicts)
    if conflicts:
        return TurnPlan("RESOLVE_CONFLICT", {"conflicts": [
            {"field_path": c.field_path, "existing_value": _canon(c.existing_value),
             "new_value": _canon(c.new_value)} for c in conflicts]})
    missing = outcome.merged.missing_required()
    if missing:
        return TurnPlan("ASK_CLARIFICATION", {"missing": list(missing)})
    target = outcome.merged.fields.get("analysis.target") or session.target
    if target == "NONE":
        return TurnPlan("ANSWER_FROM_KB", {"prompt_target": True})
    text = session.transcript[-1].text if session.transcript else ""
    if wants_run(text):
        return TurnPlan("RUN_SOLVER", {"target": target})
    return TurnPlan("EMIT_SCRIPT", {"target": target})


# --- helpers ----------------------------------------------------------------------

def _canon(value):
    """Round-trip a value through the canonical notation.

    Everything that enters session state passes through here first, so the
    live session holds exactly what its event log holds: tuples become lists
    and floats take the notation's 12-significant-digit resolution. Without
    this, replaying a log would reconstruct a state that differs from the
    live one in the last bits of every computed float.
    """
    if value is None:
        return None
    return json.loads(canonical_bytes(value).decode("utf-8"))


def _content_id(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


class _LogicalClock:
    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            value = float(self._n)
            self._n += 1
            return value


def message_to_dict(m: Message) -> dict:
    out: dict[str, Any] = {
        "role": m.role,
        "text": m.text,
        "attachments": [dataclasses.asdict(a) for a in m.attachments],
        "citations": [dataclasses.asdict(c) for c in m.citations],
        "timestamp": m.timestamp,
    }
    if m.tool_call is not None:
        out["tool_call"] = {"tool": m.tool_call.tool,
                            "arguments": m.tool_call.arguments}
    if m.tool_result is not None:
        out["tool_result"] = {"ok": m.tool_result.ok,
                              "payload": m.tool_result.payload,
                              "error": m.tool_result.error,
                              "duration": m.tool_result.duration}
    return out


def _message_from_dict(d: dict) -> Message:
    tool_call = None
    if "tool_call" in d:
        tool_call = ToolCall(d["tool_call"]["tool"], d["tool_call"]["arguments"])
    tool_result = None
    if "tool_result" in d:
        r = d["tool_result"]
        tool_result = ToolResult(r["ok"], r["payload"], r["error"], r["duration"])
    return Message(
        role=d["role"],
        text=d["text"],
        attachments=tuple(Attachment(**a) for a in d["attachments"]),
        citations=tuple(CitationNote(**c) for c in d["citations"]),
        timestamp=d["timestamp"],
        tool_call=tool_call,
        tool_result=tool_result,
    )


# --- runtime -------------------------------------------------------------------

class AgentRuntime:
    """Owns sessions, the artifact store, and the tool registry.

    One turn is in flight per session at a time; distinct sessions proceed
    concurrently. The registry is frozen at construction and safe to share.
    """

    def __init__(
        self,
        data_dir,
        kb: KbStore | None = None,
        backend: LlmBackendConfig | None = None,
        clock: Callable[[], float] | None = None,
        tool_budget: float = 30.0,
        seed_kb: bool = True,
    ):
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "artifacts").mkdir(parents=True, exist_ok=True)
        self.kb = kb if kb is not None else KbStore(self.data_dir / "kb")
        if seed_kb:
            ingest_default_docs(self.kb)
        self.backend = backend
        self.clock = clock or _LogicalClock()
        self.registry = build_default_registry(self.kb, budget=tool_budget)
        self._sessions: dict[str, ChatSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._master = threading.Lock()

    # -- session lifecycle ------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.log"

    def _next_session_id(self) -> str:
        taken = {p.stem for p in (self.data_dir / "sessions").glob("s*.log")}
        n = 1
        while f"s{n}" in taken:
            n += 1
        return f"s{n}"

    def create_session(self, agent: str = "SLOPE_STABILITY", target: str = "NONE") -> ChatSession:
        if agent not in AGENTS:
            raise UnknownAgent(f"no agent named {agent!r}", field_path="agent")
        if target != "NONE" and target not in PROFILES:
            raise UnknownProfile(f"no script profile for target {target!r}",
                                 field_path="target")
        with self._master:
            session_id = self._next_session_id()
            session = ChatSession(session_id=session_id, agent=agent, target=target)
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
            self._append_event(session_id, {
                "event": "created", "session_id": session_id, "agent": agent,
                "target": target, "timestamp": self.clock(),
            })
        return session

    def get_session(self, session_id: str) -> ChatSession:
        with self._master:
            session = self._sessions.get(session_id)
            if session is not None:
                return session
            if self._log_path(session_id).exists():
                session = self.replay_session(session_id)
                self._sessions[session_id] = session
                self._locks.setdefault(session_id, threading.Lock())
                return session
        raise UnknownSession(f"no session named {session_id!r}")

    def list_sessions(self) -> list[str]:
        ids = [p.stem for p in (self.data_dir / "sessions").glob("s*.log")]
        return sorted(ids, key=lambda s: (len(s), s))

    def replay_session(self, session_id: str) -> ChatSession:
        """Rebuild the exact session state from its event log alone."""
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSession(f"no session named {session_id!r}")
        session: ChatSession | None = None
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                kind = record.get("event")
                if kind == "created":
                    session = ChatSession(session_id=record["session_id"],
                                          agent=record["agent"], target=record["target"])
                elif session is None:
                    continue
                elif kind == "message":
                    session.transcript.append(_message_from_dict(record["message"]))
                elif kind == "state":
                    session.accumulated = PartialProblem(
                        record["fields"], record["provenance"])
                    session.pending_conflicts = set(record["pending_conflicts"])
                elif kind == "artifact":
                    session.artifacts.append(Artifact(
                        record["artifact_id"], record["kind"], record["path"]))
        if session is None:
            raise UnknownSession(f"session log {session_id!r} has no creation record")
        return session

    def _append_event(self, session_id: str, record: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8", newline="\n") as fh:
            fh.write(canonical_bytes(record).decode("ascii"))
            fh.write("\n")

    # -- artifacts ----------------------------------------------------------------

    _SUFFIX = {"SCRIPT": ".script.txt", "RESULT": ".result.json", "PLOT": ".plot.svg"}
    _MEDIA = {"SCRIPT": "text/plain; charset=utf-8",
              "RESULT": "application/json",
              "PLOT": "image/svg+xml"}

    def _store_artifact(self, session: ChatSession, kind: str, data: bytes) -> Artifact:
        artifact_id = _content_id(data)
        rel = f"artifacts/{artifact_id}{self._SUFFIX[kind]}"
        path = self.data_dir / rel
        if not path.exists():
            path.write_bytes(data)
        artifact = Artifact(artifact_id=artifact_id, kind=kind, path=rel)
        session.artifacts.append(artifact)
        self._append_event(session.session_id, {
            "event": "artifact", "artifact_id": artifact_id, "kind": kind, "path": rel})
        return artifact

    def _store_attachment(self, filename: str, media_type: str, data: bytes) -> Attachment:
        ref = f"artifacts/{_content_id(data)}.upload"
        path = self.data_dir / ref
        if not path.exists():
            path.write_bytes(data)
        return Attachment(filename=filename, media_type=media_type, ref=ref)

    def get_artifact(self, session_id: str, artifact_id: str) -> tuple[bytes, str, str]:
        """Returns (bytes, media type, kind); raises KeyError for unknown ids."""
        session = self.get_session(session_id)
        for artifact in session.artifacts:
            if artifact.artifact_id == artifact_id:
                data = (self.data_dir / artifact.path).read_bytes()
                return data, self._MEDIA[artifact.kind], artifact.kind
        raise KeyError(artifact_id)

    # -- the turn pipeline ----------------------------------------------------------

    def handle_turn(self, session_id: str, text: str, attachments=()) -> Message:
        """attachments: iterable of (filename, media_type, bytes)."""
        session = self.get_session(session_id)
        with self._locks[session_id]:
            return self._turn(session, text, attachments)

    def _turn(self, session: ChatSession, text: str, attachments) -> Message:
        stored = tuple(self._store_attachment(fn, mt, data)
                       for fn, mt, data in attachments)
        user = Message(role="USER", text=text, attachments=stored,
                       timestamp=_canon(self.clock()))
        self._record(session, user)

        # (1) retrieval for citation context
        hits = self.kb.search(text, k=4) if text.strip() else []
        citations = tuple(CitationNote(h.chunk_id, h.citation.doc_id,
                                       h.citation.title, _canon(h.score))
                          for h in hits)

        # (2) extraction, degrading to the rule set when the backend is down
        extraction, notice = self._extract(text, stored)

        # pending-conflict resolution: a restated field is the user's answer
        resolved: list[str] = []
        for path in sorted(session.pending_conflicts):
            if path in extraction.partial.fields:
                session.accumulated.fields[path] = _canon(extraction.partial.fields[path])
                session.accumulated.provenance[path] = (
                    extraction.partial.provenance.get(path, "USER"))
                session.pending_conflicts.discard(path)
                resolved.append(path)

        # (3+4) merge and plan from the same pre-merge state
        plan = plan_turn(session, extraction)
        outcome = merge_turns(session.accumulated, extraction)
        session.accumulated = PartialProblem(_canon(outcome.merged.fields),
                                             dict(outcome.merged.provenance))
        if plan.action == "RESOLVE_CONFLICT":
            session.pending_conflicts.update(
                c["field_path"] for c in plan.payload["conflicts"])
        self._append_event(session.session_id, {
            "event": "state",
            "fields": session.accumulated.fields,
            "provenance": session.accumulated.provenance,
            "pending_conflicts": sorted(session.pending_conflicts),
        })

        # (5) execute the plan through the registry
        tool_messages, artifacts, failures = self._execute(session, plan, text)

        # (6) compose
        reply_text = self._compose(session, plan, notice, resolved, hits,
                                   tool_messages, artifacts, failures)
        reply = Message(role="ASSISTANT", text=reply_text, citations=citations,
                        timestamp=_canon(self.clock()))
        self._record(session, reply)
        return reply

    def _record(self, session: ChatSession, message: Message) -> None:
        session.transcript.append(message)
        self._append_event(session.session_id,
                           {"event": "message", "message": message_to_dict(message)})

    def _extract(self, text: str, stored: tuple[Attachment, ...]):
        annotation = None
        notice = None
        for att in stored:
            if att.media_type == "application/json" or att.filename.endswith(".annotation.json"):
                try:
                    annotation = load_annotation(self.data_dir / att.ref)
                except ProblemFormatError as exc:
                    notice = f"Attachment {att.filename} was ignored: {exc.message}"
                break
        if self.backend is not None:
            try:
                return extract_llm(text, annotation, self.backend), notice
            except BackendUnavailable as exc:
                degraded = f"Language backend unavailable ({exc.message}); used rule-based extraction."
            except MalformedBackendReply as exc:
                degraded = f"Language backend reply was malformed ({exc.message}); used rule-based extraction."
            notice = degraded if notice is None else f"{notice} {degraded}"
        extraction = extract_rule_based(text)
        if annotation is not None:
            extraction = _fold_annotation(extraction, annotation)
        return extraction, notice

    def _call_tool(self, session: ChatSession, tool: str, arguments: dict) -> ToolResult:
        call = ToolCall(tool=tool, arguments=_canon(arguments))
        try:
            result = self.registry.dispatch(call, clock=self.clock)
            result = dataclasses.replace(result, payload=_canon(result.payload),
                                         duration=_canon(result.duration))
        except (UnknownTool, ArgumentValidation, ToolTimeout) as exc:
            result = ToolResult(ok=False, payload=None, error=exc.payload(), duration=0)
        summary = f"{tool}: {'ok' if result.ok else 'error ' + result.error['code']}"
        message = Message(role="TOOL", text=summary, timestamp=_canon(self.clock()),
                          tool_call=call, tool_result=result)
        self._record(session, message)
        return result

    def _build_problem(self, session: ChatSession, target: str) -> SlopeProblem:
        partial = session.accumulated.copy()
        partial.fields.setdefault("analysis.target", target)
        partial.provenance.setdefault("analysis.target", "USER")
        return build_problem(partial)

    def _execute(self, session: ChatSession, plan: TurnPlan, text: str):
        tool_messages: list[ToolResult] = []
        artifacts: dict[str, Artifact] = {}
        failures: list[dict] = []

        if plan.action == "ANSWER_FROM_KB":
            result = self._call_tool(session, "kb_search", {"query": text, "k": 4})
            tool_messages.append(result)
            if not result.ok:
                failures.append(result.error)
            return tool_messages, artifacts, failures

        if plan.action not in ("EMIT_SCRIPT", "RUN_SOLVER"):
            return tool_messages, artifacts, failures

        try:
            problem = self._build_problem(session, plan.payload["target"])
        except SlopeAgentError as exc:
            failures.append(exc.payload())
            return tool_messages, artifacts, failures
        violations = validate(problem)
        if violations:
            failures.append(InvalidProblem(
                violations[0].message, field_path=violations[0].field_path).payload())
            return tool_messages, artifacts, failures
        problem_dict = problem_to_dict(problem)

        emitted = self._call_tool(session, "emit_script", {"problem": problem_dict})
        tool_messages.append(emitted)
        if not emitted.ok:
            failures.append(emitted.error)
            return tool_messages, artifacts, failures
        artifacts["script"] = self._store_artifact(
            session, "SCRIPT", emitted.payload["text"].encode("utf-8"))

        if plan.action == "RUN_SOLVER":
            solved = self._call_tool(session, "run_solver", {"problem": problem_dict})
            tool_messages.append(solved)
            if not solved.ok:
                failures.append(solved.error)
                return tool_messages, artifacts, failures
            result_bytes = canonical_bytes(solved.payload) + b"\n"
            artifacts["result"] = self._store_artifact(session, "RESULT", result_bytes)

            plotted = self._call_tool(session, "make_plot", {"result": solved.payload})
            tool_messages.append(plotted)
            if plotted.ok:
                artifacts["plot"] = self._store_artifact(
                    session, "PLOT", plotted.payload["svg"].encode("utf-8"))
            else:
                failures.append(plotted.error)
        return tool_messages, artifacts, failures

    # -- reply composition ------------------------------------------------------------

    def _compose(self, session, plan, notice, resolved, hits,
                 tool_messages, artifacts, failures) -> str:
        lines: list[str] = []
        if notice:
            lines.append(f"[notice] {notice}")
        if resolved:
            for path in resolved:
                value = session.accumulated.fields.get(path)
                lines.append(f"Updated {path} to {value}.")

        if plan.action == "RESOLVE_CONFLICT":
            lines.append("The last message restates fields that already have different values:")
            for c in plan.payload["conflicts"]:
                lines.append(f"  - {c['field_path']}: stored {c['existing_value']}, "
                             f"message says {c['new_value']}")
            lines.append("Nothing was changed. Restate the field with the value to keep.")

        elif plan.action == "ASK_CLARIFICATION":
            lines.append("To set up the analysis I still need:")
            for path in plan.payload["missing"]:
                hint = FIELD_HINTS.get(path)
                lines.append(f"  - {path}" + (f" ({hint})" if hint else ""))

        elif plan.action == "ANSWER_FROM_KB":
            for hit in hits[:2]:
                chunk = self.kb.get_chunk(hit.chunk_id)
                if chunk is not None:
                    excerpt = " ".join(chunk.text.split())
                    if len(excerpt) > 240:
                        excerpt = excerpt[:240].rstrip() + "..."
                    lines.append(f"From \"{hit.citation.title}\": {excerpt}")
            if not hits:
                lines.append("The knowledge base has nothing relevant to that.")
            if plan.payload.get("prompt_target") and not session.accumulated.missing_required():
                lines.append("The problem is fully specified. Select target software "
                             "(ADONIS_PROFILE or HYRCAN_PROFILE) and I will emit the script.")

        elif plan.action in ("EMIT_SCRIPT", "RUN_SOLVER"):
            emitted = tool_messages[0] if tool_messages else None
            if emitted is not None and emitted.ok:
                profile = PROFILES[emitted.payload["target"]]
                lines.append(f"{profile.token}-profile script "
                             f"(problem {emitted.payload['problem_hash']}, "
                             f"artifact {artifacts['script'].artifact_id}):")
                lines.append(emitted.payload["text"].rstrip("\n"))
                for w in emitted.payload["lint"]:
                    lines.append(f"lint[{w['code']}] {w['field_path']}: {w['message']}")
            if plan.action == "RUN_SOLVER" and "result" in artifacts:
                solved = tool_messages[1]
                fos = solved.payload["fos"]
                circle = solved.payload["critical_circle"]
                method = solved.payload["meta"]["method"]
                lines.append(
                    f"FS = {fos:.3f} ({method}) at critical circle "
                    f"x={circle['x']:.6g}, y={circle['y']:.6g}, r={circle['radius']:.6g} "
                    f"(result artifact {artifacts['result'].artifact_id}"
                    + (f", plot artifact {artifacts['plot'].artifact_id}"
                       if "plot" in artifacts else "") + ").")

        for failure in failures:
            detail = failure.get("field_path")
            lines.append(f"[error {failure['code']}] "
                         + (f"{detail}: " if detail else "") + failure["message"])
        return "\n".join(lines)


def _fold_annotation(extraction: ExtractionResult, annotation) -> ExtractionResult:
    """Mirror extract_llm's annotation handling for the rule-based path."""
    fields = dict(extraction.partial.fields)
    prov = dict(extraction.partial.provenance)
    conflicts = list(extraction.conflicts)
    for path, value in annotation_fields(annotation).items():
        if path not in fields:
            fields[path] = value
            prov[path] = "IMAGE_ANNOTATION"
        elif fields[path] != value:
            conflicts.append(Conflict(path, fields[path], value))
    partial = PartialProblem(fields, prov)
    return ExtractionResult(
        partial=partial,
        missing_required=tuple(partial.missing_required()),
        conflicts=tuple(conflicts),
    )
