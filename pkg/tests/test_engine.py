import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choreo.engine import Engine, InputView, RemoteCall, extract_path, render_template
from choreo.errors import EngineError, TransportError, UndeclaredSourceError
from choreo.handlers import available, make_handler
from choreo.models import InteractionDescriptor, OfferingDescription

from conftest import offering, shipped_offerings
from oracles import naive_replace

ODS = shipped_offerings()


class FakeTransport:
    def __init__(self, fail_first=0, reject=False, response="{}"):
        self.fail_first = fail_first
        self.reject = reject
        self.response = response
        self.sent = []
        self.calls = []
        self.attempts = 0

    def deliver(self, uri, envelope):
        self.attempts += 1
        if self.reject:
            raise EngineError("no")
        if self.fail_first:
            self.fail_first -= 1
            raise TransportError("down")
        self.sent.append((uri, envelope))

    def call(self, method, uri, body, content_type, accept):
        self.calls.append((method, uri, body, content_type, accept))
        if self.fail_first:
            self.fail_first -= 1
            raise TransportError("down")
        return self.response


def controller_engine(transport=None):
    od = OfferingDescription.from_dict(ODS["light-control"])
    eng = Engine(od, make_handler("any-motion-and-any-switch"), transport or FakeTransport())
    eng.accept_indes(
        {
            "offering": "bigiot:light-control",
            "recipeRuntimeConfiguration": "rrc1",
            "outputs": {"brightness": {"http://lamp1/input": "on_off", "http://lamp2/input": "on_off"}},
            "inputs": {"bigiot:sensor1": ["sensorin"], "bigiot:switch1": ["switchin"], "bigiot:switch2": ["switchin"]},
        }
    )
    return eng


# -- templates -------------------------------------------------------------------

names = st.sampled_from(["a", "b", "level", "x_1"])
values = st.one_of(st.text(alphabet="abc <>/@", max_size=5), st.integers(-5, 5), st.booleans(), st.floats(0, 10, allow_nan=False))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.one_of(names.map(lambda n: f"@@{n}@@"), st.text(alphabet="xyz <>/", max_size=4)), max_size=6),
       st.fixed_dictionaries({"a": values, "b": values, "level": values, "x_1": values}))
def test_render_matches_naive_scan(parts, vals):
    template = "".join(parts)
    assert render_template(template, vals) == naive_replace(template, vals)


def test_render_missing_value():
    with pytest.raises(KeyError):
        render_template("@@a@@", {})


def test_render_url_quotes():
    assert render_template("http://h/set?v=@@v@@", {"v": "a b/c"}, quote_values=True) == "http://h/set?v=a%20b%2Fc"


def test_extract_path():
    doc = {"a": {"b": [10, {"c": 3}]}}
    assert extract_path(doc, "a.b.1.c") == 3
    assert extract_path(doc, "a.b.0") == 10
    assert extract_path(doc, "") == doc


# -- descriptors -----------------------------------------------------------------


def test_descriptor_for_another_offering_is_rejected():
    eng = controller_engine()
    with pytest.raises(EngineError):
        eng.accept_indes({"offering": "x", "recipeRuntimeConfiguration": "rrc1"})


def test_descriptor_with_unknown_ports_is_rejected():
    eng = controller_engine()
    with pytest.raises(EngineError):
        eng.accept_indes({"offering": eng.id, "recipeRuntimeConfiguration": "r", "inputs": {"s": ["nope"]}})
    with pytest.raises(EngineError):
        eng.accept_indes({"offering": eng.id, "recipeRuntimeConfiguration": "r", "outputs": {"nope": {}}})


def test_replacing_a_descriptor_drops_stale_buffered_sources():
    eng = controller_engine()
    eng.receive_input("rrc1", "switchin", True, "bigiot:switch1")
    eng.accept_indes({"offering": eng.id, "recipeRuntimeConfiguration": "rrc1",
                      "inputs": {"bigiot:sensor1": ["sensorin"], "bigiot:switch2": ["switchin"]}})
    assert eng.by_source.get(("rrc1", "switchin"), {}) == {}


# -- data path -------------------------------------------------------------------


def test_motion_without_switch_does_not_fire():
    eng = controller_engine()
    eng.receive_input("rrc1", "switchin", False, "bigiot:switch1")
    assert eng.receive_input("rrc1", "sensorin", True, "bigiot:sensor1") == {"accepted": True, "fired": False}
    assert eng.transport.sent == []


def test_motion_with_any_switch_fires_to_every_lamp():
    eng = controller_engine()
    eng.receive_input("rrc1", "switchin", False, "bigiot:switch1")
    eng.receive_input("rrc1", "switchin", True, "bigiot:switch2")
    assert eng.receive_input("rrc1", "sensorin", True, "bigiot:sensor1")["fired"]
    assert eng.transport.sent == [
        ("http://lamp1/input", {"port": "on_off", "value": 1.0, "source": "bigiot:light-control", "rrc": "rrc1"}),
        ("http://lamp2/input", {"port": "on_off", "value": 1.0, "source": "bigiot:light-control", "rrc": "rrc1"}),
    ]


def test_switch_event_alone_does_not_fire():
    eng = controller_engine()
    eng.receive_input("rrc1", "sensorin", True, "bigiot:sensor1")
    assert not eng.receive_input("rrc1", "switchin", True, "bigiot:switch1")["fired"]


def test_undeclared_source_and_unknown_rrc():
    eng = controller_engine()
    with pytest.raises(UndeclaredSourceError):
        eng.receive_input("rrc1", "sensorin", True, "bigiot:sensor9")
    with pytest.raises(UndeclaredSourceError):
        eng.receive_input("rrc1", "switchin", True, "bigiot:sensor1")
    with pytest.raises(EngineError):
        eng.receive_input("rrc9", "sensorin", True, "bigiot:sensor1")


def test_torn_down_descriptor_acknowledges_without_firing():
    eng = controller_engine()
    eng.accept_indes({"offering": eng.id, "recipeRuntimeConfiguration": "rrc1"})
    assert eng.receive_input("rrc1", "sensorin", True, "anyone") == {"accepted": True, "fired": False}


def test_transport_error_is_retried_once():
    t = FakeTransport(fail_first=1)
    eng = controller_engine(t)
    report = eng.forward_outputs("rrc1", {"brightness": 0.5})
    assert report.failed == [] and len(report.delivered) == 2
    t2 = FakeTransport(fail_first=4)
    report = controller_engine(t2).forward_outputs("rrc1", {"brightness": 0.5})
    assert len(report.failed) == 2 and t2.attempts == 4


def test_rejection_is_not_retried():
    t = FakeTransport(reject=True)
    report = controller_engine(t).forward_outputs("rrc1", {"brightness": 0.5})
    assert t.attempts == 2  # one per lamp
    assert all(err.startswith("rejected") for _, err in report.failed)


def test_emit_goes_out_on_every_rrc():
    od = OfferingDescription.from_dict(ODS["sensor1"])
    t = FakeTransport()
    eng = Engine(od, None, t)
    for rrc in ("r1", "r2"):
        eng.accept_indes({"offering": od.local_id, "recipeRuntimeConfiguration": rrc,
                          "outputs": {"motion": {f"http://c-{rrc}/input": "sensorin"}}})
    eng.emit("motion", True)
    assert [u for u, _ in t.sent] == ["http://c-r1/input", "http://c-r2/input"]
    with pytest.raises(EngineError):
        eng.emit("nope", 1)


def test_sink_never_emits():
    od = OfferingDescription.from_dict(ODS["lamp1"])
    eng = Engine(od, None, FakeTransport())
    eng.accept_indes({"offering": od.local_id, "recipeRuntimeConfiguration": "r", "inputs": {"c": ["on_off"]}})
    assert eng.receive_input("r", "on_off", 1.0, "c") == {"accepted": True, "fired": False}
    assert eng.history == [("r", "on_off", 1.0, "c")]


def test_remote_call_uses_template_and_mapping(office_light):
    office_light["outputData"] = [{"name": "level", "valueType": "xsd:float"}]
    office_light["responseMapping"] = {"level": "state.dim"}
    od = OfferingDescription.from_dict(office_light)
    t = FakeTransport(fail_first=1, response=json.dumps({"state": {"dim": 0.7}}))
    eng = Engine(od, RemoteCall(), t)
    eng.accept_indes({"offering": od.local_id, "recipeRuntimeConfiguration": "r",
                      "inputs": {"ctl": ["brightness"]}, "outputs": {"level": {"http://mon/input": "x"}}})
    eng.receive_input("r", "brightness", 0.5, "ctl")
    assert t.calls[-1] == ("PUT", "http://127.0.0.1:5683/LuminaireController",
                           "<dimmableValue>0.5</dimmableValue>", "APPLICATION_XML", "APPLICATION_XML")
    assert len(t.calls) == 2
    assert t.sent == [("http://mon/input", {"port": "x", "value": 0.7, "source": od.local_id, "rrc": "r"})]


# -- handlers --------------------------------------------------------------------


def test_handler_registry():
    assert {"any-motion-and-any-switch", "average", "passthrough", "sink"} <= set(available())
    assert make_handler("sink") is None
    with pytest.raises(KeyError):
        make_handler("nope")


def test_average_and_passthrough():
    view = InputView("r", "a", {"a": 2}, {"a": {"s1": 2, "s2": 4}, "b": {"s3": 6}})
    assert make_handler("average", output="m")(view) == {"m": 4}
    assert make_handler("passthrough", mapping={"a": "out"})(view) == {"out": 2}
