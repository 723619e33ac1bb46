"""Web service: wire contract, uniform errors, offline guarantee, CLI parity."""

import base64
import json
import socket

import pytest
from fastapi.testclient import TestClient

from slopeagent.agent import AgentRuntime
from slopeagent.canon import canonical_bytes, problem_to_dict
from slopeagent.cli import main as cli_main
from slopeagent.errors import ConfigError
from slopeagent.service import ServiceConfig, create_app, load_config

from test_agent import COMPLETE_TEXT, SCRIPTED


@pytest.fixture()
def client(tmp_path):
    app = create_app(ServiceConfig(data_dir=str(tmp_path / "data")))
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def _create(client, target="NONE"):
    r = client.post("/api/sessions", json={"target": target})
    assert r.status_code == 201
    return r.json()["session_id"]


def _say(client, sid, text, attachments=None):
    body = {"text": text}
    if attachments is not None:
        body["attachments"] = attachments
    r = client.post(f"/api/sessions/{sid}/messages", json=body)
    assert r.status_code == 200, r.text
    return r.json()


# -- enumerations and lifecycle ---------------------------------------------------


def test_health_reports_backend_and_kb(client):
    body = client.get("/api/health").json()
    assert body["status"] == "ok"
    assert body["backend"] == "MOCK"
    assert body["kb_chunks"] > 0


def test_agents_and_targets_drive_dropdowns(client):
    agents = client.get("/api/agents").json()["agents"]
    assert {a["id"] for a in agents} == {"SLOPE_STABILITY"}
    targets = client.get("/api/targets").json()["targets"]
    ids = [t["id"] for t in targets]
    assert ids[0] == "NONE"
    assert set(ids) == {"NONE", "ADONIS_PROFILE", "HYRCAN_PROFILE"}
    by_id = {t["id"]: t for t in targets}
    assert by_id["ADONIS_PROFILE"]["token"] == "adonis"
    assert by_id["HYRCAN_PROFILE"]["token"] == "hyrcan"


def test_create_session_returns_fresh_ids(client):
    assert _create(client, "ADONIS_PROFILE") == "s1"
    assert _create(client) == "s2"
    assert client.get("/api/sessions").json()["sessions"] == ["s1", "s2"]


def test_create_session_rejects_unknown_agent_and_target(client):
    r = client.post("/api/sessions", json={"agent": "TUNNELING"})
    assert r.status_code == 400
    assert r.json() == {"code": "unknown_agent", "field_path": "agent",
                        "message": r.json()["message"]}
    r = client.post("/api/sessions", json={"target": "PLAXIS"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown_profile"
    assert r.json()["field_path"] == "target"


def test_unknown_session_is_not_found(client):
    r = client.post("/api/sessions/s99/messages", json={"text": "hi"})
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_session"
    assert client.get("/api/sessions/s99").status_code == 404


def test_request_shape_errors_use_uniform_payload(client):
    sid = _create(client)
    r = client.post(f"/api/sessions/{sid}/messages", json={"text": 42})
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "request_validation"
    assert body["field_path"] == "text"
    assert set(body) <= {"code", "field_path", "message"}


# -- conversation flow ---------------------------------------------------------------


def test_clarification_then_script_then_run(client):
    sid = _create(client, "HYRCAN_PROFILE")
    body = _say(client, sid, "The slope is 10 m high at 30 degrees.")
    assert "I still need" in body["message"]["text"]
    assert body["session"]["missing_required"] == [
        "layers[0].unit_weight", "layers[0].cohesion", "layers[0].friction_angle"]
    assert body["new_artifacts"] == []

    body = _say(client, sid, "Unit weight 18 kN/m3, cohesion 20 kPa, "
                             "friction angle 20 degrees. Run it.")
    kinds = [a["kind"] for a in body["new_artifacts"]]
    assert kinds == ["SCRIPT", "RESULT", "PLOT"]
    assert "FS = " in body["message"]["text"]
    assert body["session"]["missing_required"] == []

    transcript = client.get(f"/api/sessions/{sid}").json()
    roles = [m["role"] for m in transcript["messages"]]
    assert roles[0] == "USER" and roles[-1] == "ASSISTANT"
    assert transcript["effective_target"] == "HYRCAN_PROFILE"


def test_artifact_download_carries_media_type(client):
    sid = _create(client, "ADONIS_PROFILE")
    body = _say(client, sid, COMPLETE_TEXT + " Run the analysis.")
    arts = {a["kind"]: a["artifact_id"] for a in body["new_artifacts"]}
    r = client.get(f"/api/sessions/{sid}/artifacts/{arts['SCRIPT']}")
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/plain")
    assert r.headers["x-artifact-kind"] == "SCRIPT"
    r = client.get(f"/api/sessions/{sid}/artifacts/{arts['RESULT']}")
    assert r.headers["content-type"].startswith("application/json")
    assert json.loads(r.content)["fos"] > 0
    r = client.get(f"/api/sessions/{sid}/artifacts/{arts['PLOT']}")
    assert r.headers["content-type"] == "image/svg+xml"
    assert r.content.startswith(b"<svg")


def test_unknown_artifact_is_not_found(client):
    sid = _create(client)
    r = client.get(f"/api/sessions/{sid}/artifacts/deadbeefdeadbeef")
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_artifact"


def test_attachment_annotation_reaches_extraction(client):
    sid = _create(client, "HYRCAN_PROFILE")
    sidecar = {"annotations": {
        "labeled_dimensions": [{"label": "height", "value": 10.0, "unit": "m"}]}}
    data = base64.b64encode(json.dumps(sidecar).encode()).decode()
    body = _say(client, sid, "See the sketch.", attachments=[
        {"filename": "sketch.annotation.json", "media_type": "application/json",
         "data_base64": data}])
    assert body["session"]["accumulated"]["geometry.height"] == 10.0


def test_upload_over_limit_is_413(tmp_path):
    app = create_app(ServiceConfig(data_dir=str(tmp_path / "d"), upload_limit=64))
    client = TestClient(app, raise_server_exceptions=False)
    sid = _create(client)
    big = base64.b64encode(b"x" * 100).decode()
    r = client.post(f"/api/sessions/{sid}/messages", json={
        "text": "", "attachments": [
            {"filename": "big.txt", "media_type": "text/plain", "data_base64": big}]})
    assert r.status_code == 413
    assert r.json()["code"] == "upload_too_large"


def test_disallowed_media_type_is_rejected_with_field_path(client):
    sid = _create(client)
    r = client.post(f"/api/sessions/{sid}/messages", json={
        "text": "", "attachments": [
            {"filename": "x.zip", "media_type": "application/zip", "data_base64": ""}]})
    assert r.status_code == 400
    assert r.json()["code"] == "unsupported_media_type"
    assert r.json()["field_path"] == "attachments[0].media_type"


def test_bad_base64_is_rejected(client):
    sid = _create(client)
    r = client.post(f"/api/sessions/{sid}/messages", json={
        "text": "", "attachments": [
            {"filename": "x.txt", "media_type": "text/plain", "data_base64": "not base64!"}]})
    assert r.status_code == 400
    assert r.json()["code"] == "bad_attachment"
    assert r.json()["field_path"] == "attachments[0].data_base64"


# -- kb admin ----------------------------------------------------------------------


def test_kb_ingest_search_delete_roundtrip(client):
    doc = {"doc_id": "piezometers", "title": "Piezometer basics",
           "body": "Standpipe piezometers gauge groundwater elevation inside boreholes."}
    r = client.post("/api/kb/documents", json=doc)
    assert r.status_code == 201
    assert r.json()["chunks"] >= 1

    r = client.post("/api/kb/documents", json=doc)
    assert r.status_code == 409
    assert r.json()["code"] == "duplicate_document"

    docs = client.get("/api/kb/documents").json()["documents"]
    assert "piezometers" in {d["doc_id"] for d in docs}

    hits = client.get("/api/kb/search", params={"q": "standpipe boreholes", "k": 3}).json()["hits"]
    assert hits and hits[0]["doc_id"] == "piezometers"
    assert set(hits[0]) == {"chunk_id", "score", "doc_id", "title", "char_span"}

    r = client.delete("/api/kb/documents/piezometers")
    assert r.status_code == 200 and r.json()["removed"] >= 1
    r = client.delete("/api/kb/documents/piezometers")
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_document"


# -- configuration -------------------------------------------------------------------


def test_load_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "svc.json"
    cfg.write_text(json.dumps({"port": 9000, "bogus": 1}))
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.field_path == "bogus"


def test_load_config_remote_needs_endpoint(tmp_path):
    cfg = tmp_path / "svc.json"
    cfg.write_text(json.dumps({"backend": "REMOTE"}))
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.field_path == "remote_endpoint"


def test_load_config_env_and_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SLOPEAGENT_DATA", str(tmp_path / "envdir"))
    config = load_config(None)
    assert config.data_dir == str(tmp_path / "envdir")
    config = load_config(None, overrides={"data_dir": str(tmp_path / "flag"), "port": None})
    assert config.data_dir == str(tmp_path / "flag")
    assert config.port == 8732


def test_load_config_bad_json_and_unwritable_dir(tmp_path):
    cfg = tmp_path / "svc.json"
    cfg.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(cfg)
    with pytest.raises(ConfigError) as exc:
        create_app(ServiceConfig(data_dir="/proc/no-such-dir"))
    assert exc.value.field_path == "data_dir"


def test_static_dir_serves_ui(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<!doctype html><title>ui</title>ok")
    app = create_app(ServiceConfig(data_dir=str(tmp_path / "d"), static_dir=str(ui)))
    client = TestClient(app)
    r = client.get("/")
    assert r.status_code == 200 and "ok" in r.text
    assert client.get("/api/health").status_code == 200


# -- offline guarantee and cross-surface parity ---------------------------------------


def test_mock_backend_full_conversation_with_no_egress(tmp_path, monkeypatch):
    def _no_egress(*args, **kwargs):
        raise AssertionError("outbound connection attempted")

    monkeypatch.setattr(socket.socket, "connect", _no_egress)
    monkeypatch.setattr(socket, "create_connection", _no_egress)

    app = create_app(ServiceConfig(data_dir=str(tmp_path / "data")))
    client = TestClient(app, raise_server_exceptions=False)
    sid = _create(client)
    texts = []
    for text in SCRIPTED:
        texts.append(_say(client, sid, text)["message"]["text"])
    assert "FS = " in texts[-1]

    direct_rt = AgentRuntime(tmp_path / "direct")
    direct = direct_rt.create_session()
    direct_texts = [direct_rt.handle_turn(direct.session_id, text).text
                    for text in SCRIPTED]
    assert texts == direct_texts


def test_api_artifacts_byte_equal_cli_outputs(client, tmp_path, capsys):
    sid = _create(client, "HYRCAN_PROFILE")
    body = _say(client, sid, COMPLETE_TEXT + " Run it.")
    arts = {a["kind"]: a["artifact_id"] for a in body["new_artifacts"]}

    script_api = client.get(f"/api/sessions/{sid}/artifacts/{arts['SCRIPT']}").content
    result_api = client.get(f"/api/sessions/{sid}/artifacts/{arts['RESULT']}").content
    plot_api = client.get(f"/api/sessions/{sid}/artifacts/{arts['PLOT']}").content

    # the result embeds its own problem; the CLI re-solves from exactly that
    problem_dict = json.loads(result_api)["meta"]["problem"]
    pfile = tmp_path / "p.json"
    pfile.write_bytes(canonical_bytes(problem_dict) + b"\n")

    out_script = tmp_path / "out.script.txt"
    assert cli_main(["emit", "--target", "hyrcan", str(pfile), "-o", str(out_script)]) == 0
    assert out_script.read_bytes() == script_api

    out_result = tmp_path / "out.result.json"
    assert cli_main(["solve", str(pfile), "-o", str(out_result)]) == 0
    assert out_result.read_bytes() == result_api

    out_plot = tmp_path / "out.plot.svg"
    assert cli_main(["plot", str(out_result), "-o", str(out_plot)]) == 0
    assert out_plot.read_bytes() == plot_api
    capsys.readouterr()
