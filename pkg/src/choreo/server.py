"""HTTP front ends for the controller and for engines (stdlib ``http.server``)."""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional
from urllib.parse import parse_qs, unquote, urlsplit

from .controller import Controller
from .engine import Engine
from .errors import (
    ChoreoError,
    ControllerStopped,
    DuplicateError,
    EngineError,
    NotFoundError,
    TransportError,
    UndeclaredSourceError,
)
from .models import InteractionDescriptor
from .transport import http_json

log = logging.getLogger(__name__)


class _JsonHandler(BaseHTTPRequestHandler):
    routes: list[tuple[str, re.Pattern, str]] = []

    def log_message(self, fmt, *args):  # route through logging instead of stderr
        log.debug("%s %s", self.address_string(), fmt % args)

    def _body(self) -> Any:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return None
        raw = self.rfile.read(length)
        try:
            return json.loads(raw.decode("utf-8"))
        except ValueError as exc:
            raise _HttpError(400, f"malformed JSON: {exc}") from exc

    def _send(self, status: int, payload: Any) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        parts = urlsplit(self.path)
        query = {k: v[-1] for k, v in parse_qs(parts.query).items()}
        try:
            for m, pattern, name in self.routes:
                if m != method:
                    continue
                match = pattern.fullmatch(parts.path)
                if match:
                    args = [unquote(a) for a in match.groups()]
                    status, payload = getattr(self, name)(*args, query=query)
                    self._send(status, payload)
                    return
            self._send(404, {"error": f"no route for {method} {parts.path}"})
        except _HttpError as exc:
            self._send(exc.status, {"error": exc.message})
        except Exception as exc:
            self._send(_status_for(exc), {"error": str(exc), "type": type(exc).__name__})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")


class _HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _status_for(exc: Exception) -> int:
    if isinstance(exc, DuplicateError):
        return 409
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, UndeclaredSourceError):
        return 403
    if isinstance(exc, ControllerStopped):
        return 503
    if isinstance(exc, ChoreoError):
        return 400
    log.exception("unhandled error")
    return 500


def _route(method: str, pattern: str, name: str):
    return (method, re.compile(pattern), name)


class ControllerHandler(_JsonHandler):
    routes = [
        _route("POST", r"/offerings", "post_offering"),
        _route("GET", r"/offerings", "get_offerings"),
        _route("DELETE", r"/offerings/([^/]+)", "delete_offering"),
        _route("GET", r"/offerings/([^/]+)/indes", "get_indes"),
        _route("POST", r"/recipes", "post_recipe"),
        _route("GET", r"/recipes", "get_recipes"),
        _route("POST", r"/rrcs", "post_rrc"),
        _route("GET", r"/rrcs", "get_rrcs"),
        _route("GET", r"/rrcs/([^/]+)", "get_rrc"),
        _route("POST", r"/rrcs/([^/]+)/seed", "seed_rrc"),
        _route("PUT", r"/ircs/([^/]+)/osr", "put_osr"),
        _route("GET", r"/snapshot", "get_snapshot"),
        _route("GET", r"/health", "health"),
    ]

    @property
    def controller(self) -> Controller:
        return self.server.controller

    def post_offering(self, query):
        return 201, self.controller.register_offering(self._body()).to_dict()

    def get_offerings(self, query):
        return 200, [od.to_dict() for od in self.controller.registry.offerings()]

    def delete_offering(self, offering_id, query):
        replace = query.get("replace", "false").lower() in ("1", "true", "yes")
        return 200, self.controller.deregister_offering(offering_id, replace).to_dict()

    def get_indes(self, offering_id, query):
        return 200, [d.to_dict() for d in self.controller.indes_for(offering_id)]

    def post_recipe(self, query):
        return 201, self.controller.put_recipe(self._body()).to_dict()

    def get_recipes(self, query):
        return 200, [r.to_dict() for r in self.controller.registry.recipes()]

    def post_rrc(self, query):
        body = self._body() or {}
        if "recipeId" not in body:
            raise _HttpError(400, "recipeId required")
        rrc = self.controller.create_rrc(body["recipeId"], body.get("ingredients"), body.get("id"))
        return 201, rrc.to_dict()

    def get_rrcs(self, query):
        return 200, [r.to_dict() for r in self.controller.registry.rrcs()]

    def get_rrc(self, rrc_id, query):
        return 200, self.controller.registry.get_rrc(rrc_id).to_dict()

    def seed_rrc(self, rrc_id, query):
        return 200, self.controller.seed_rrc(rrc_id).to_dict()

    def put_osr(self, irc_id, query):
        body = self._body() or {}
        return 200, self.controller.replace_osr(irc_id, body.get("osr", "")).to_dict()

    def get_snapshot(self, query):
        return 200, self.controller.registry.snapshot()

    def health(self, query):
        return 200, {"ok": True}


class EngineHandler(_JsonHandler):
    routes = [
        _route("PUT", r"/indes", "put_indes"),
        _route("GET", r"/indes", "get_indes"),
        _route("GET", r"/health", "health"),
        # envelopes may arrive at /inputs or at whatever path the receive URI names
        _route("POST", r"(/.*)", "post_input"),
    ]

    @property
    def engine(self) -> Engine:
        return self.server.engine

    def put_indes(self, query):
        return 200, self.engine.accept_indes(self._body() or {})

    def get_indes(self, query):
        return 200, self.engine.descriptor_list()

    def health(self, query):
        return 200, {"ok": True, "offering": self.engine.id}

    def post_input(self, path, query):
        env = self._body() or {}
        missing = [k for k in ("rrc", "port", "source") if k not in env]
        if missing or "value" not in env:
            raise _HttpError(400, f"envelope missing {missing or ['value']}")
        return 200, self.engine.receive_input(env["rrc"], env["port"], env["value"], env["source"])


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


def _start(server: _Server) -> threading.Thread:
    t = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
    t.start()
    return t


def start_controller_server(controller: Controller, host: str = "127.0.0.1", port: int = 0) -> _Server:
    server = _Server((host, port), ControllerHandler)
    server.controller = controller
    server.thread = _start(server)
    return server


def bind_engine_server(host: str = "127.0.0.1", port: int = 0) -> _Server:
    """Bind first so the offering's receive URI can name the actual port."""
    return _Server((host, port), EngineHandler)


def start_engine_server(server: _Server, engine: Engine) -> _Server:
    server.engine = engine
    server.thread = _start(server)
    return server


def server_url(server: _Server) -> str:
    host, port = server.server_address[:2]
    return f"http://{host}:{port}"


def stop_server(server: _Server) -> None:
    server.shutdown()
    server.server_close()


def register_engine(engine: Engine, controller_url: str) -> dict:
    """Announce the engine's offering; on a duplicate, re-fetch current descriptors instead."""
    status, body = http_json("POST", controller_url.rstrip("/") + "/offerings", engine.offering.to_dict())
    if status == 201:
        return body
    if status == 409:
        status, descriptors = http_json(
            "GET", f"{controller_url.rstrip('/')}/offerings/{engine.id}/indes"
        )
        if status == 200:
            for d in descriptors:
                engine.accept_indes(InteractionDescriptor.from_dict(d))
            return {"offeringId": engine.id, "resynced": len(descriptors)}
    raise TransportError(f"registration of {engine.id} failed: HTTP {status}: {body}")
