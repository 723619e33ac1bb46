"""Headless command line covering every pipeline stage.

Every verb reads and writes the canonical problem/result notation, so files
produced here are interchangeable with service artifacts byte for byte.
Errors exit nonzero and the first stderr line is machine parseable:

    error:<code>: <message>

with any detail lines after it. `main` returns the exit code instead of
calling sys.exit so tests can drive it in process.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .agent import AgentRuntime
from .canon import canonical_bytes, canonical_hash, problem_from_dict, problem_to_dict
from .emitters import PROFILES, emit, parse_script
from .errors import ProblemFormatError, SlopeAgentError
from .kb import KbDocument, KbStore, ingest_default_docs
from .model import validate
from .plot import render_result
from .solver import result_to_dict, search_critical

#: friendly dialect tokens accepted wherever a --target is expected
_TARGET_ALIASES = {p.token: key for key, p in PROFILES.items()} | {k: k for k in PROFILES}


def _resolve_target(name: str) -> str:
    return _TARGET_ALIASES.get(name.lower(), _TARGET_ALIASES.get(name, name))


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ProblemFormatError(f"{path} must hold a JSON object")
    return loaded


def _load_problem(path: str):
    return problem_from_dict(_read_json(path))


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_bytes(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(path).write_bytes(data)


def _data_dir(args) -> Path:
    # precedence: flag, environment override, conventional default
    if getattr(args, "data_dir", None):
        return Path(args.data_dir)
    env = os.environ.get("SLOPEAGENT_DATA")
    if env:
        return Path(env)
    return Path("slopeagent-data")


def _open_kb(args) -> KbStore:
    kb = KbStore(_data_dir(args) / "kb")
    ingest_default_docs(kb)
    return kb


# -- verbs ----------------------------------------------------------------------


def _cmd_validate(args) -> int:
    problem = _load_problem(args.problem)
    violations = validate(problem)
    if violations:
        print(f"error:invalid_problem: {len(violations)} violation(s) in {args.problem}",
              file=sys.stderr)
        for v in violations:
            print(f"  {v.field_path}: {v.message}", file=sys.stderr)
        return 1
    print(f"valid {canonical_hash(problem)}")
    return 0


def _cmd_emit(args) -> int:
    problem = _load_problem(args.problem)
    target = _resolve_target(args.target)
    if problem.analysis.target == "NONE":
        # the file left the dialect open; the flag completes the choice
        problem = dataclasses.replace(
            problem, analysis=dataclasses.replace(problem.analysis, target=target))
    script = emit(problem, target)
    _write_text(args.output, script.text)
    if args.output and args.output != "-":
        print(f"emitted {script.target} script for problem {script.problem_hash} "
              f"to {args.output}")
    return 0


def _cmd_parse(args) -> int:
    text = Path(args.script).read_text(encoding="utf-8")
    expect = _resolve_target(args.target) if args.target else None
    problem = parse_script(text, expect_target=expect)
    _write_bytes(args.output, canonical_bytes(problem_to_dict(problem)) + b"\n")
    if args.output and args.output != "-":
        print(f"parsed {args.script} (problem {canonical_hash(problem)}) to {args.output}")
    return 0


def _cmd_solve(args) -> int:
    problem = _load_problem(args.problem)
    analysis = problem.analysis
    if args.method:
        analysis = dataclasses.replace(
            analysis, method={"bishop": "BISHOP_SIMPLIFIED", "fellenius": "FELLENIUS"}[args.method])
    if args.slices is not None:
        analysis = dataclasses.replace(analysis, slice_count=args.slices)
    problem = dataclasses.replace(problem, analysis=analysis)
    violations = validate(problem)
    if violations:
        v = violations[0]
        print(f"error:invalid_problem: {v.field_path}: {v.message}", file=sys.stderr)
        for extra in violations[1:]:
            print(f"  {extra.field_path}: {extra.message}", file=sys.stderr)
        return 1
    result = search_critical(problem)
    payload = result_to_dict(result, problem)
    if args.output:
        _write_bytes(args.output, canonical_bytes(payload) + b"\n")
    circle = payload["critical_circle"]
    print(f"FS = {payload['fos']:.6g} ({payload['meta']['method']})")
    print(f"critical circle: x={circle['x']:g} y={circle['y']:g} r={circle['radius']:g}")
    if args.output:
        print(f"result written to {args.output}")
    return 0


def _cmd_plot(args) -> int:
    payload = _read_json(args.result)
    svg = render_result(payload)
    _write_text(args.output, svg)
    if args.output and args.output != "-":
        print(f"plot written to {args.output}")
    return 0


def _cmd_kb_ingest(args) -> int:
    kb = _open_kb(args)
    body = Path(args.file).read_text(encoding="utf-8")
    doc_id = args.doc_id or Path(args.file).stem
    title = args.title or doc_id.replace("-", " ").replace("_", " ")
    chunks = kb.ingest(KbDocument(doc_id=doc_id, title=title, body=body,
                                  source_path=str(args.file)))
    print(f"ingested {doc_id}: {chunks} chunk(s)")
    return 0


def _cmd_kb_delete(args) -> int:
    kb = _open_kb(args)
    removed = kb.delete(args.doc_id)
    if removed == 0:
        print(f"error:unknown_document: no document {args.doc_id!r}", file=sys.stderr)
        return 1
    print(f"deleted {args.doc_id}: {removed} chunk(s)")
    return 0


def _cmd_kb_search(args) -> int:
    kb = _open_kb(args)
    for hit in kb.search(args.query, k=args.k):
        print(f"{hit.score:.4f} {hit.chunk_id} [{hit.citation.title}]")
    return 0


def _cmd_kb_list(args) -> int:
    kb = _open_kb(args)
    for doc in kb.list_documents():
        print(f"{doc['doc_id']} ({doc['chunks']} chunks) {doc['title']}")
    return 0


def _cmd_chat(args) -> int:
    from .service import load_config

    backend = None
    if args.backend == "remote":
        if not args.config:
            print("error:config: remote chat needs --config with backend settings",
                  file=sys.stderr)
            return 1
        config = load_config(args.config)
        if config.backend != "REMOTE":
            print("error:config: config file does not select the REMOTE backend",
                  file=sys.stderr)
            return 1
        backend = config.backend_config()
    runtime = AgentRuntime(_data_dir(args), backend=backend)
    session = runtime.create_session(target=_resolve_target(args.target)
                                     if args.target else "NONE")
    print(f"session {session.session_id} (backend {args.backend}); empty line or EOF quits")
    while True:
        try:
            line = input("> ")
        except EOFError:
            print()
            break
        if not line.strip():
            break
        reply = runtime.handle_turn(session.session_id, line)
        print(reply.text)
        for artifact in session.artifacts:
            print(f"  [artifact {artifact.kind} {artifact.artifact_id}] {artifact.path}")
    return 0


def _cmd_serve(args) -> int:
    from .service import load_config, run

    overrides = {"host": args.host, "port": args.port, "data_dir": args.data_dir,
                 "static_dir": args.static_dir}
    config = load_config(args.config, overrides=overrides)
    run(config)
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slopeagent",
        description="Slope-stability assistant: validate, emit, solve, plot, chat, serve.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="check a problem file against the model rules")
    p.add_argument("problem")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("emit", help="compile a problem file into a target-dialect script")
    p.add_argument("--target", required=True, help="adonis | hyrcan | full profile id")
    p.add_argument("problem")
    p.add_argument("-o", "--output", default=None, help="script file (default stdout)")
    p.set_defaults(func=_cmd_emit)

    p = sub.add_parser("parse", help="parse a script back into a canonical problem file")
    p.add_argument("--target", default=None, help="require this dialect")
    p.add_argument("script")
    p.add_argument("-o", "--output", default=None, help="problem file (default stdout)")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("solve", help="run the critical-circle search on a problem file")
    p.add_argument("problem")
    p.add_argument("--method", choices=("bishop", "fellenius"), default=None)
    p.add_argument("--slices", type=int, default=None)
    p.add_argument("-o", "--output", default=None, help="write the full result JSON here")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("plot", help="render a result file as an SVG cross-section")
    p.add_argument("result")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_plot)

    kb = sub.add_parser("kb", help="manage the knowledge base").add_subparsers(
        dest="kb_verb", required=True)
    p = kb.add_parser("ingest", help="add a text/markdown file")
    p.add_argument("file")
    p.add_argument("--doc-id", default=None)
    p.add_argument("--title", default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=_cmd_kb_ingest)
    p = kb.add_parser("delete")
    p.add_argument("doc_id")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=_cmd_kb_delete)
    p = kb.add_parser("search")
    p.add_argument("query")
    p.add_argument("-k", type=int, default=4)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=_cmd_kb_search)
    p = kb.add_parser("list")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=_cmd_kb_list)

    p = sub.add_parser("chat", help="interactive terminal conversation")
    p.add_argument("--backend", choices=("mock", "remote"), default="mock")
    p.add_argument("--config", default=None, help="service config file (remote backend)")
    p.add_argument("--target", default=None, help="preselect the script dialect")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=_cmd_chat)

    p = sub.add_parser("serve", help="run the web service")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--static-dir", default=None, help="serve a built web UI from /")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SlopeAgentError as exc:
        print(f"error:{exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error:io_error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io_error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
