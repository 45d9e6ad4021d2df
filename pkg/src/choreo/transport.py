"""Transports: a deterministic in-process network and plain HTTP."""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import EngineError, TransportError

log = logging.getLogger(__name__)


@dataclass
class InProcessNetwork:
    """Routes envelopes by URI to engines in the same process and records a transcript.

    Doubles as the controller's descriptor pusher. Delivery is synchronous
    and depth-first, which keeps scenario transcripts deterministic.
    """

    engines_by_uri: dict[str, Any] = field(default_factory=dict)
    engines_by_id: dict[str, Any] = field(default_factory=dict)
    devices: dict[str, Callable[[str, str, str], str]] = field(default_factory=dict)
    transcript: list[dict] = field(default_factory=list)
    step: int = 0
    down: set[str] = field(default_factory=set)

    def attach(self, engine) -> None:
        self.engines_by_id[engine.id] = engine
        uri = engine.offering.receive_uri
        if uri:
            self.engines_by_uri[uri] = engine
        engine.transport = self

    def detach(self, engine_id: str) -> None:
        engine = self.engines_by_id.pop(engine_id, None)
        if engine is not None:
            uri = engine.offering.receive_uri
            if self.engines_by_uri.get(uri) is engine:
                del self.engines_by_uri[uri]

    def deliver(self, uri: str, envelope: dict) -> None:
        engine = self.engines_by_uri.get(uri)
        entry = {
            "step": self.step,
            "kind": "delivery",
            "source": envelope.get("source"),
            "target": engine.id if engine else None,
            "uri": uri,
            "port": envelope.get("port"),
            "value": envelope.get("value"),
            "rrc": envelope.get("rrc"),
        }
        if engine is None or uri in self.down:
            entry["kind"] = "delivery-failed"
            self.transcript.append(entry)
            raise TransportError(f"no route to {uri}")
        self.transcript.append(entry)
        try:
            engine.receive_input(envelope["rrc"], envelope["port"], envelope["value"], envelope["source"])
        except EngineError as exc:
            entry["kind"] = "delivery-rejected"
            entry["error"] = str(exc)
            raise

    def call(self, method: str, uri: str, body: str, content_type: str, accept: str) -> str:
        for prefix, device in self.devices.items():
            if uri.startswith(prefix):
                self.transcript.append({"step": self.step, "kind": "call", "method": method, "uri": uri, "body": body})
                return device(method, uri, body)
        raise TransportError(f"no device at {uri}")

    def push_many(self, pushes) -> list[tuple[str, str]]:
        failures = []
        for od, ind in pushes:
            engine = self.engines_by_id.get(od.local_id)
            self.transcript.append(
                {"step": self.step, "kind": "push", "target": od.local_id, "rrc": ind.rrc, "indes": ind.to_dict()}
            )
            if engine is None:
                failures.append((od.local_id, "engine not attached"))
                continue
            try:
                engine.accept_indes(ind)
            except EngineError as exc:
                failures.append((od.local_id, str(exc)))
        return failures

    def deliveries(self, step: Optional[int] = None, target: Optional[str] = None) -> list[dict]:
        return [
            e
            for e in self.transcript
            if e["kind"] == "delivery"
            and (step is None or e["step"] == step)
            and (target is None or e["target"] == target)
        ]


# -- HTTP ------------------------------------------------------------------------


def http_json(method: str, url: str, payload: Any = None, timeout: float = 5.0) -> tuple[int, Any]:
    """Send a JSON request; returns (status, decoded body). Raises TransportError on network failure."""
    data = None if payload is None else json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
            status = resp.status
    except urllib.error.HTTPError as exc:
        raw = exc.read()
        status = exc.code
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"{method} {url}: {exc}") from exc
    try:
        body = json.loads(raw.decode("utf-8")) if raw else None
    except ValueError:
        body = raw.decode("utf-8", "replace")
    return status, body


class HttpTransport:
    """Engine-side transport over HTTP."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout

    def deliver(self, uri: str, envelope: dict) -> None:
        status, body = http_json("POST", uri, envelope, self.timeout)
        if status >= 500:
            raise TransportError(f"POST {uri}: HTTP {status}")
        if status >= 400:
            raise EngineError(f"POST {uri}: HTTP {status}: {body}")

    def call(self, method: str, uri: str, body: str, content_type: str, accept: str) -> str:
        data = body.encode("utf-8") if method != "GET" else None
        req = urllib.request.Request(uri, data=data, method=method)
        if data is not None:
            req.add_header("Content-Type", _media_type(content_type))
        req.add_header("Accept", _media_type(accept))
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"{method} {uri}: {exc}") from exc


def _media_type(value: str) -> str:
    # offering descriptions may use enum-style names such as APPLICATION_XML
    if "/" not in value and "_" in value:
        return value.lower().replace("_", "/", 1)
    return value


class HttpPusher:
    """PUT descriptors to ``{engineBase}/indes``; 3 attempts with exponential backoff."""

    def __init__(self, attempts: int = 3, backoff: float = 0.2, timeout: float = 5.0, workers: int = 8):
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.workers = workers

    def _push_one(self, od, ind) -> Optional[str]:
        if not od.endpoints:
            return "offering has no endpoint"
        url = od.endpoints[0].base + "/indes"
        err = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                status, body = http_json("PUT", url, ind.to_dict(), self.timeout)
            except TransportError as exc:
                err = str(exc)
                continue
            if status < 300:
                return None
            err = f"HTTP {status}: {body}"
            if status < 500:
                break
        log.warning("push to %s failed: %s", url, err)
        return err

    def push_many(self, pushes) -> list[tuple[str, str]]:
        if not pushes:
            return []
        with ThreadPoolExecutor(max_workers=min(self.workers, len(pushes))) as pool:
            errors = list(pool.map(lambda p: self._push_one(*p), pushes))
        return [(od.local_id, e) for (od, _), e in zip(pushes, errors) if e is not None]
