"""Scenario files: wire devices through a controller on an in-process network and replay events."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .controller import Controller
from .engine import Engine, RemoteCall
from .errors import ChoreoError, ValidationError
from .handlers import make_handler
from .models import OfferingDescription
from .ontology import TypeGraph, load_type_graph
from .registry import Registry
from .transport import InProcessNetwork

ACTIONS = {"register", "deregister", "emit", "assert", "seed", "setOsr", "stopController"}


@dataclass
class DeviceSpec:
    id: str
    offering: dict
    handler: Optional[str] = None
    handler_args: dict = field(default_factory=dict)
    register: bool = True
    start_delay: Optional[int] = None

    @property
    def offering_id(self) -> str:
        return self.offering["localId"]


@dataclass
class Scenario:
    name: str
    graph: TypeGraph
    recipes: list[dict]
    rrcs: list[dict]
    devices: list[DeviceSpec]
    events: list[dict]

    def device(self, device_id: str) -> DeviceSpec:
        for d in self.devices:
            if d.id == device_id:
                return d
        raise ValidationError("device", f"unknown device {device_id!r}")

    def validate(self) -> None:
        ids = [d.id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ValidationError("devices", f"duplicate device ids in {ids}")
        last = 0
        for ev in self.events:
            at = ev.get("at")
            if not isinstance(at, int) or at <= last:
                raise ValidationError("events", f"steps must be strictly increasing positive integers, got {at!r}")
            last = at
            action = ev.get("action")
            if action not in ACTIONS:
                raise ValidationError("events", f"unknown action {action!r} at step {at}")
            if "device" in ev:
                self.device(ev["device"])
        for d in self.devices:
            if d.start_delay is not None and d.start_delay < 0:
                raise ValidationError("devices", f"negative startDelay for {d.id}")


def _read_json_ref(ref: Union[str, dict], base: Path) -> dict:
    if isinstance(ref, dict):
        return ref
    return json.loads((base / ref).read_text(encoding="utf-8"))


def scenario_from_dict(doc: dict, base: Union[str, Path] = ".") -> Scenario:
    base = Path(base)
    onto = doc.get("ontology")
    if onto is None:
        graph = TypeGraph()
    elif "\n" in onto or onto.strip().startswith("@") or " subClassOf " in onto:
        graph = load_type_graph(onto)
    else:
        graph = load_type_graph((base / onto).read_text(encoding="utf-8"))
    devices = []
    for d in doc.get("devices", []):
        od = _read_json_ref(d["offering"], base)
        devices.append(
            DeviceSpec(
                d.get("id") or od["localId"],
                od,
                d.get("handler"),
                dict(d.get("handlerArgs") or {}),
                d.get("register", True),
                d.get("startDelay"),
            )
        )
    scen = Scenario(
        doc.get("name", ""),
        graph,
        [_read_json_ref(r, base) for r in doc.get("recipes", [])],
        list(doc.get("rrcs", [])),
        devices,
        list(doc.get("events", [])),
    )
    scen.validate()
    return scen


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    return scenario_from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def shipped(name: str) -> Path:
    """Path of a data file shipped with the package (e.g. ``lighting.json``)."""
    return Path(str(resources.files("choreo") / "data" / name))


@dataclass
class Transcript:
    entries: list[dict]
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures

    def deliveries(self) -> list[dict]:
        return [e for e in self.entries if e["kind"] == "delivery"]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": self.failures, "entries": self.entries}


class ScenarioRun:
    """Live state of a scenario; also usable step by step from tests."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.network = InProcessNetwork()
        self.registry = Registry(scenario.graph)
        self.controller = Controller(self.registry, pusher=self.network)
        self.engines: dict[str, Engine] = {}
        self.failures: list[dict] = []
        self._last_step = 0
        for d in scenario.devices:
            od = OfferingDescription.from_dict(copy.deepcopy(d.offering))
            impl = RemoteCall() if d.handler == "remote" else make_handler(d.handler, **d.handler_args)
            self.engines[d.id] = Engine(od, impl)

    @property
    def transcript(self) -> list[dict]:
        return self.network.transcript

    def _log(self, kind: str, **data) -> dict:
        entry = {"step": self.network.step, "kind": kind, **data}
        self.network.transcript.append(entry)
        return entry

    # -- actions -------------------------------------------------------------------

    def register(self, device_id: str):
        engine = self.engines[device_id]
        self.network.attach(engine)
        outcome = self.controller.register_offering(engine.offering)
        self._log("register", device=device_id, joined=[list(j) for j in outcome.joined], pushedTo=outcome.pushed_to)
        return outcome

    def deregister(self, device_id: str, replace: bool = False):
        engine = self.engines[device_id]
        outcome = self.controller.deregister_offering(engine.id, replace)
        self.network.detach(engine.id)
        engine.descriptors.clear()
        self._log(
            "deregister",
            device=device_id,
            replacements=[list(r) for r in outcome.replacements],
            pushedTo=outcome.pushed_to,
        )
        return outcome

    def emit(self, device_id: str, port: str, value: Any):
        self._log("emit", device=device_id, port=port, value=value)
        return self.engines[device_id].emit(port, value)

    def seed(self, rrc_id: str):
        report = self.controller.seed_rrc(rrc_id)
        self._log("seed", rrc=rrc_id, joined=[list(j) for j in report.joined])
        return report

    def set_osr(self, irc_id: str, osr: str):
        report = self.controller.replace_osr(irc_id, osr)
        self._log("setOsr", irc=irc_id, osr=osr, evicted=[list(e) for e in report.evicted])
        return report

    def stop_controller(self):
        self.controller.stop()
        self._log("stopController")

    def check(self, expect: dict, default_step: int) -> bool:
        ok = True
        actual: dict = {}
        if "deliveries" in expect:
            spec = expect["deliveries"]
            step = spec.get("step", default_step)
            targets = spec["to"]
            counts = spec.get("counts") or [spec["count"]] * len(targets)
            got = [len(self.network.deliveries(step, self._offering_id(t))) for t in targets]
            actual["deliveries"] = {"step": step, "to": targets, "counts": got}
            ok &= got == list(counts)
        if "members" in expect:
            spec = expect["members"]
            _, irc = self.registry.get_irc(spec["irc"])
            actual["members"] = irc.member_ids
            ok &= irc.member_ids == list(spec["equals"])
        if "active" in expect:
            spec = expect["active"]
            active = self.registry.get_rrc(spec["rrc"]).active
            actual["active"] = active
            ok &= active == spec["equals"]
        if "received" in expect:
            spec = expect["received"]
            n = len(self.engines[spec["device"]].history)
            actual["received"] = n
            ok &= n == spec["count"]
        entry = self._log("assert", ok=bool(ok), expected=expect, actual=actual)
        if not ok:
            self.failures.append(entry)
        return bool(ok)

    def _offering_id(self, device_id: str) -> str:
        if device_id in self.engines:
            return self.engines[device_id].id
        return device_id

    # -- schedule ------------------------------------------------------------------------

    def setup(self) -> None:
        self.network.step = 0
        for recipe in self.scenario.recipes:
            self.controller.put_recipe(recipe)
        for d in self.scenario.devices:
            if d.register and not d.start_delay:
                self.register(d.id)
        for spec in self.scenario.rrcs:
            rrc = self.controller.create_rrc(spec["recipeId"], spec.get("ingredients"), spec.get("id"))
            self.seed(rrc.id)

    def apply(self, ev: dict) -> None:
        step = ev["at"]
        self.network.step = step
        for d in self.scenario.devices:
            if d.register and d.start_delay == step:
                self.register(d.id)
        action = ev["action"]
        try:
            if action == "register":
                self.register(ev["device"])
            elif action == "deregister":
                self.deregister(ev["device"], bool(ev.get("replace", False)))
            elif action == "emit":
                self.emit(ev["device"], ev["port"], ev["value"])
            elif action == "seed":
                self.seed(ev["rrc"])
            elif action == "setOsr":
                self.set_osr(ev["irc"], ev["osr"])
            elif action == "stopController":
                self.stop_controller()
            elif action == "assert":
                self.check(ev["expect"], self._last_step)
        except ChoreoError as exc:
            entry = self._log("error", action=action, error=str(exc))
            self.failures.append(entry)
        if action != "assert":
            self._last_step = step

    def run(self) -> Transcript:
        self.setup()
        for ev in self.scenario.events:
            self.apply(ev)
        return Transcript(list(self.network.transcript), list(self.failures))


def run_scenario(scenario: Union[Scenario, str, Path]) -> Transcript:
    """Run every event of a scenario and return the transcript (deterministic)."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return ScenarioRun(scenario).run()
