"""Per-device runtime: holds interaction descriptors and routes data between peers."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union
from urllib.parse import quote

from .errors import EngineError, TransportError, UndeclaredSourceError
from .models import PLACEHOLDER_RE, InteractionDescriptor, OfferingDescription

log = logging.getLogger(__name__)


@dataclass
class InputView:
    """What a local handler sees when it fires."""

    rrc: str
    trigger: str
    latest: dict[str, Any]
    by_source: dict[str, dict[str, Any]]


LocalHandler = Callable[[InputView], Optional[dict]]


@dataclass
class RemoteCall:
    """Invoke the offering's own endpoint through its request template and response mapping."""

    endpoint_index: int = -1


@dataclass
class DeliveryReport:
    delivered: list[tuple[str, str]] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"delivered": [list(d) for d in self.delivered], "failed": [list(f) for f in self.failed]}


def render_template(template: str, values: dict[str, Any], quote_values: bool = False) -> str:
    """Substitute every ``@@name@@``; raises KeyError naming the first missing value."""

    def text(v):
        s = v if isinstance(v, str) else json.dumps(v)
        return quote(s, safe="") if quote_values else s

    def sub(m):
        return text(values[m.group(1)])

    return PLACEHOLDER_RE.sub(sub, template)


def extract_path(doc: Any, path: str) -> Any:
    """Follow a dot path through objects and (by integer segment) arrays."""
    node = doc
    if path in ("", "."):
        return node
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node[part]
    return node


class Engine:
    """Runtime for one offering.

    ``implementation`` is a local handler function, a :class:`RemoteCall`,
    or ``None`` for a passive sink. ``transport`` must provide
    ``deliver(uri, envelope)`` and, for remote calls,
    ``call(method, uri, body, content_type, accept)``.
    """

    def __init__(
        self,
        offering: OfferingDescription,
        implementation: Union[LocalHandler, RemoteCall, None] = None,
        transport=None,
    ):
        self.offering = offering
        self.implementation = implementation
        self.transport = transport
        self.descriptors: dict[str, InteractionDescriptor] = {}
        self.buffer: dict[tuple[str, str], Any] = {}
        self.by_source: dict[tuple[str, str], dict[str, Any]] = {}
        self.history: list[tuple[str, str, Any, str]] = []
        self._mailbox = threading.RLock()
        self._inputs = {p.name for p in offering.input_data}
        self._outputs = {p.name for p in offering.output_data}

    @property
    def id(self) -> str:
        return self.offering.local_id

    # -- descriptors ------------------------------------------------------------

    def accept_indes(self, ind: Union[InteractionDescriptor, dict]) -> dict:
        if isinstance(ind, dict):
            ind = InteractionDescriptor.from_dict(ind)
        if ind.offering != self.id:
            raise EngineError(f"descriptor for {ind.offering!r} sent to engine of {self.id!r}")
        bad_out = set(ind.outputs) - self._outputs
        if bad_out:
            raise EngineError(f"unknown output ports {sorted(bad_out)}")
        bad_in = {p for ports in ind.inputs.values() for p in ports} - self._inputs
        if bad_in:
            raise EngineError(f"unknown input ports {sorted(bad_in)}")
        with self._mailbox:
            self.descriptors[ind.rrc] = ind
            expected = {p for ports in ind.inputs.values() for p in ports}
            for key in [k for k in self.buffer if k[0] == ind.rrc and k[1] not in expected]:
                del self.buffer[key]
            for key in [k for k in self.by_source if k[0] == ind.rrc]:
                if key[1] not in expected:
                    del self.by_source[key]
                else:
                    srcs = self.by_source[key]
                    for s in [s for s in srcs if s not in ind.inputs]:
                        del srcs[s]
        return {"accepted": True, "offering": self.id, "rrc": ind.rrc}

    def descriptor_list(self) -> list[dict]:
        with self._mailbox:
            return [d.to_dict() for d in self.descriptors.values()]

    # -- data path ----------------------------------------------------------------

    def receive_input(self, rrc: str, port: str, value: Any, source: str) -> dict:
        with self._mailbox:
            ind = self.descriptors.get(rrc)
            if ind is None:
                raise EngineError(f"unknown RRC {rrc!r}")
            if port not in self._inputs:
                raise EngineError(f"undeclared input port {port!r}")
            if ind.empty:
                return {"accepted": True, "fired": False}
            if source not in ind.inputs:
                raise UndeclaredSourceError(f"source {source!r} is not wired to {self.id!r} in {rrc!r}")
            if port not in ind.inputs[source]:
                raise UndeclaredSourceError(f"source {source!r} does not feed port {port!r}")
            self.buffer[(rrc, port)] = value
            self.by_source.setdefault((rrc, port), {})[source] = value
            self.history.append((rrc, port, value, source))
            values = self.invoke_implementation(rrc, port)
        if values:
            self.forward_outputs(rrc, values, ind)
        return {"accepted": True, "fired": bool(values)}

    def invoke_implementation(self, rrc: str, trigger: str) -> dict:
        impl = self.implementation
        if impl is None:
            return {}
        if isinstance(impl, RemoteCall):
            values = self._remote_call(rrc, impl)
        else:
            view = InputView(
                rrc,
                trigger,
                {p: v for (r, p), v in self.buffer.items() if r == rrc},
                {p: dict(s) for (r, p), s in self.by_source.items() if r == rrc},
            )
            values = impl(view) or {}
        # sinks never emit; undeclared ports are dropped
        return {p: v for p, v in values.items() if p in self._outputs}

    def _remote_call(self, rrc: str, impl: RemoteCall) -> dict:
        od = self.offering
        if not od.endpoints:
            log.error("%s: no endpoint to call", self.id)
            return {}
        ep = od.endpoints[impl.endpoint_index]
        values = {p: v for (r, p), v in self.buffer.items() if r == rrc}
        try:
            body = render_template(od.request_template or "", values)
            uri = render_template(ep.uri, values, quote_values=True)
        except KeyError as exc:
            log.info("%s: no buffered value for placeholder %s, skipping invocation", self.id, exc)
            return {}
        response = None
        for attempt in range(2):
            try:
                response = self.transport.call(ep.method, uri, body, ep.content_type, ep.accept_type)
                break
            except TransportError as exc:
                log.warning("%s: call to %s failed (attempt %d): %s", self.id, uri, attempt + 1, exc)
        if response is None or not od.output_data:
            return {}
        try:
            doc = json.loads(response)
            out = {}
            for port, path in (od.response_mapping or {}).items():
                out[port] = extract_path(doc, path)
            return out
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            log.warning("%s: unparseable response from %s: %s", self.id, uri, exc)
            return {}

    def forward_outputs(self, rrc: str, values: dict, ind: Optional[InteractionDescriptor] = None) -> DeliveryReport:
        """POST each value to every endpoint wired to its port; one retry per endpoint."""
        if ind is None:
            with self._mailbox:
                ind = self.descriptors.get(rrc)
        report = DeliveryReport()
        if ind is None:
            return report
        for port, value in values.items():
            for uri, target_port in ind.outputs.get(port, {}).items():
                envelope = {"port": target_port, "value": value, "source": self.id, "rrc": rrc}
                err = None
                for _ in range(2):
                    try:
                        self.transport.deliver(uri, envelope)
                        err = None
                        break
                    except TransportError as exc:
                        err = str(exc)
                    except EngineError as exc:
                        err = f"rejected: {exc}"
                        break
                if err is None:
                    report.delivered.append((uri, target_port))
                else:
                    log.warning("%s: delivery to %s failed: %s", self.id, uri, err)
                    report.failed.append((uri, err))
        return report

    def emit(self, port: str, value: Any) -> DeliveryReport:
        """Publish a value produced by the device itself on every wired RRC."""
        if port not in self._outputs:
            raise EngineError(f"undeclared output port {port!r}")
        with self._mailbox:
            descriptors = list(self.descriptors.values())
        report = DeliveryReport()
        for ind in descriptors:
            r = self.forward_outputs(ind.rrc, {port: value}, ind)
            report.delivered += r.delivered
            report.failed += r.failed
        return report
