import copy
import json
import random

import pytest

from choreo.ontology import load_type_graph
from choreo.scenario import shipped

# Office luminaire offering; the device speaks CoAP, this copy uses HTTP.
OFFICE_LIGHT = {
    "localId": "officeLightOffering",
    "category": "schema:lighting",
    "endpoints": [
        {
            "uri": "http://127.0.0.1:5683/LuminaireController",
            "endpointType": "HTTP_PUT",
            "acceptType": "APPLICATION_XML",
            "contentType": "APPLICATION_XML",
        }
    ],
    "requestTemplate": "<dimmableValue>@@brightness@@</dimmableValue>",
    "responseMapping": None,
    "inputData": [{"name": "brightness", "valueType": "xsd:float"}],
    "outputData": [],
    "extent": {"city": "Munich"},
}


@pytest.fixture
def office_light():
    return copy.deepcopy(OFFICE_LIGHT)


@pytest.fixture(scope="session")
def lighting_graph():
    return load_type_graph(shipped("lighting.onto").read_text(encoding="utf-8"))


@pytest.fixture
def lighting_recipe():
    return json.loads(shipped("lighting-recipe.json").read_text(encoding="utf-8"))


@pytest.fixture
def rng():
    return random.Random(20181015)


def offering(local_id, category, inputs=(), outputs=(), uri=None, **props):
    """Compact offering-description builder for tests."""
    return {
        "localId": local_id,
        "category": category,
        "endpoints": [{"uri": uri or f"http://{local_id.replace(':', '-')}/input", "endpointType": "HTTP_POST"}],
        "inputData": [{"name": n, "valueType": t} for n, t in inputs],
        "outputData": [{"name": n, "valueType": t} for n, t in outputs],
        **props,
    }


# -- one line per acceptance criterion in the terminal summary -------------------------

_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = "PASS" if report.passed else "FAIL"
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.failed:
        _acceptance[report.nodeid.split("::")[-1]] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _acceptance.items():
        # test_ac3_lighting_use_case_end_to_end -> "AC3 PASS  lighting use case end to end"
        _, tag, *words = name.split("_")
        terminalreporter.write_line(f"{tag.upper()} {status}  {' '.join(words)}")


def shipped_offerings(name="lighting.json") -> dict:
    """Device id -> offering dict from a shipped scenario."""
    doc = json.loads(shipped(name).read_text(encoding="utf-8"))
    return {d["id"]: d["offering"] for d in doc["devices"]}
