import json

import pytest

from choreo.errors import ValidationError
from choreo.scenario import ScenarioRun, load_scenario, run_scenario, scenario_from_dict, shipped


@pytest.mark.parametrize("name", ["lighting.json", "lighting-replacement.json"])
def test_shipped_scenarios_pass(name):
    t = run_scenario(shipped(name))
    assert t.ok, t.failures


def test_transcript_is_deterministic():
    a = run_scenario(shipped("lighting.json")).to_dict()
    b = run_scenario(shipped("lighting.json")).to_dict()
    assert json.dumps(a) == json.dumps(b)


def _doc():
    return json.loads(shipped("lighting.json").read_text())


def test_wrong_expectation_is_reported():
    doc = _doc()
    doc["events"][-1]["expect"]["deliveries"]["counts"] = [1, 1, 1, 1]
    t = run_scenario(scenario_from_dict(doc, shipped("")))
    assert not t.ok
    assert t.failures[0]["actual"]["deliveries"]["counts"] == [0, 0, 0, 0]


def test_stopping_the_controller_keeps_the_wiring():
    doc = _doc()
    doc["events"] = [
        {"at": 1, "action": "stopController"},
        {"at": 2, "action": "emit", "device": "switch1", "port": "state", "value": True},
        {"at": 3, "action": "emit", "device": "sensor1", "port": "motion", "value": True},
        {"at": 4, "action": "assert", "expect": {"deliveries": {"to": ["lamp1", "lamp2"], "count": 1}}},
        {"at": 5, "action": "register", "device": "lamp3"},
    ]
    t = run_scenario(scenario_from_dict(doc, shipped("")))
    assert [f["action"] for f in t.failures] == ["register"]
    assert sum(1 for e in t.entries if e["kind"] == "assert" and e["ok"]) == 1


def test_start_delay_registers_at_the_given_step():
    doc = _doc()
    for d in doc["devices"]:
        if d["id"] == "lamp3":
            d["register"] = True
            d["startDelay"] = 2
    doc["events"] = [
        {"at": 1, "action": "assert", "expect": {"members": {"irc": "rrc1:light", "equals": ["bigiot:lamp1", "bigiot:lamp2"]}}},
        {"at": 2, "action": "assert", "expect": {"members": {"irc": "rrc1:light", "equals": ["bigiot:lamp1", "bigiot:lamp2", "bigiot:lamp3"]}}},
    ]
    assert run_scenario(scenario_from_dict(doc, shipped(""))).ok


def test_set_osr_and_seed_actions():
    doc = _doc()
    doc["events"] = [
        {"at": 1, "action": "setOsr", "irc": "rrc1:light", "osr": 'room = "B"'},
        {"at": 2, "action": "assert", "expect": {"members": {"irc": "rrc1:light", "equals": ["bigiot:lamp9"]}}},
        {"at": 3, "action": "seed", "rrc": "rrc1"},
        {"at": 4, "action": "assert", "expect": {"active": {"rrc": "rrc1", "equals": True}}},
    ]
    assert run_scenario(scenario_from_dict(doc, shipped(""))).ok


@pytest.mark.parametrize(
    "events",
    [
        [{"at": 2, "action": "seed", "rrc": "rrc1"}, {"at": 2, "action": "seed", "rrc": "rrc1"}],
        [{"at": 1, "action": "explode"}],
        [{"at": 1, "action": "emit", "device": "ghost", "port": "x", "value": 1}],
    ],
)
def test_invalid_scenarios(events):
    doc = _doc()
    doc["events"] = events
    with pytest.raises(ValidationError):
        scenario_from_dict(doc, shipped(""))


def test_step_by_step_use():
    run = ScenarioRun(load_scenario(shipped("lighting.json")))
    run.setup()
    run.emit("switch1", "state", True)
    run.emit("sensor1", "motion", True)
    assert len(run.engines["lamp1"].history) == 1
