"""HTTP/JSON facade over the annotation workflow.

Serves the browser labeling app and scripted clients. All writes funnel
through the workflow's serialized writer; the server itself is a stock
threading HTTP server, which is plenty at desk scale.

Endpoints:
    GET  /next?annotator=ID   -> {sentence_id, text, firm_id, year, remaining} | 204
    POST /label               -> {status, final_label?}
    GET  /disputes            -> [{sentence_id, text, label_a, label_b}]
    POST /adjudicate          -> {status}
    GET  /progress            -> status counts + agreement
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, urlparse

from .annotation import AnnotationError, Workflow
from .corpus import Sentence

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    log_path: str | Path = "events.jsonl"
    token: str | None = None
    adjudicator_token: str | None = None


class AnnotationService:
    def __init__(self, sentences: Sequence[Sentence], config: ServiceConfig):
        self.config = config
        self.workflow = Workflow(sentences, config.log_path)
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((config.host, config.port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[0], self.httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        log.info("annotation service listening on %s", self.base_url)
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    # -- auth -----------------------------------------------------------

    def _bearer_ok(self, header: str | None, required: str | None) -> bool:
        if required is None:
            return True
        return header == f"Bearer {required}"

    def authorize(self, header: str | None, adjudicator: bool = False) -> bool:
        cfg = self.config
        if adjudicator:
            required = cfg.adjudicator_token if cfg.adjudicator_token is not None else cfg.token
            return self._bearer_ok(header, required)
        if cfg.token is None:
            return True
        return self._bearer_ok(header, cfg.token) or (
            cfg.adjudicator_token is not None and self._bearer_ok(header, cfg.adjudicator_token)
        )


def _make_handler(service: AnnotationService):
    workflow = service.workflow

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route access logs through logging
            log.debug("%s - %s", self.address_string(), fmt % args)

        # -- plumbing --------------------------------------------------

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")

        def _send_json(self, code: int, body) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self._cors()
            self.end_headers()
            self.wfile.write(data)

        def _send_empty(self, code: int) -> None:
            self.send_response(code)
            self.send_header("Content-Length", "0")
            self._cors()
            self.end_headers()

        def _read_body(self) -> dict | None:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return None
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                return None
            return body if isinstance(body, dict) else None

        def _auth(self, adjudicator=False) -> bool:
            if service.authorize(self.headers.get("Authorization"), adjudicator):
                return True
            self._send_json(401, {"error": "unauthorized"})
            return False

        def do_OPTIONS(self):
            self._send_empty(204)

        # -- routes ----------------------------------------------------

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/next":
                self.handle_next(parse_qs(url.query))
            elif url.path == "/disputes":
                self.handle_disputes()
            elif url.path == "/progress":
                self.handle_progress()
            else:
                self._send_json(404, {"error": "not found"})

        def do_POST(self):
            url = urlparse(self.path)
            if url.path == "/label":
                self.handle_label()
            elif url.path == "/adjudicate":
                self.handle_adjudicate()
            else:
                self._send_json(404, {"error": "not found"})

        def handle_next(self, query):
            if not self._auth():
                return
            annotator = (query.get("annotator") or [""])[0]
            if not annotator:
                self._send_json(400, {"error": "missing annotator parameter"})
                return
            with workflow._lock:
                eligible = workflow.eligible_for(annotator)
            if not eligible:
                self._send_empty(204)
                return
            sid = eligible[0]
            sentence = workflow.sentences[sid]
            self._send_json(
                200,
                {
                    "sentence_id": sid,
                    "text": sentence.text,
                    "firm_id": sentence.firm_id,
                    "year": sentence.year,
                    "remaining": len(eligible),
                },
            )

        def handle_label(self):
            if not self._auth():
                return
            body = self._read_body()
            if body is None:
                self._send_json(400, {"error": "invalid JSON body"})
                return
            missing = [k for k in ("sentence_id", "annotator", "label") if not body.get(k)]
            if missing:
                self._send_json(400, {"error": f"missing fields: {', '.join(missing)}"})
                return
            if body["sentence_id"] not in workflow.sentences:
                self._send_json(400, {"error": f"unknown sentence {body['sentence_id']}"})
                return
            try:
                state = workflow.submit_label(body["sentence_id"], body["annotator"], body["label"])
            except AnnotationError as exc:
                self._send_json(409, {"error": str(exc)})
                return
            resp = {"status": state.status}
            if state.final_label is not None:
                resp["final_label"] = state.final_label
            self._send_json(200, resp)

        def handle_disputes(self):
            if not self._auth(adjudicator=True):
                return
            self._send_json(200, workflow.disputes())

        def handle_adjudicate(self):
            if not self._auth(adjudicator=True):
                return
            body = self._read_body()
            if body is None or not body.get("sentence_id") or not body.get("resolution"):
                self._send_json(400, {"error": "need sentence_id and resolution"})
                return
            if body["sentence_id"] not in workflow.sentences:
                self._send_json(400, {"error": f"unknown sentence {body['sentence_id']}"})
                return
            try:
                state = workflow.adjudicate(body["sentence_id"], body["resolution"])
            except AnnotationError as exc:
                self._send_json(409, {"error": str(exc)})
                return
            self._send_json(200, {"status": state.status})

        def handle_progress(self):
            if not self._auth():
                return
            self._send_json(200, workflow.progress())

    return Handler
