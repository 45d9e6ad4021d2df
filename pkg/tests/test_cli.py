import json
import subprocess
import sys

import pytest

from choreo.cli import main
from choreo.scenario import shipped

from conftest import shipped_offerings


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_scenario_run(capsys, tmp_path):
    transcript = tmp_path / "t.json"
    code, out, _ = run(capsys, "scenario", "run", "lighting.json", "--transcript", str(transcript))
    assert code == 0
    assert "0 failures" in out
    assert json.loads(transcript.read_text())["ok"] is True


def test_scenario_failure_exits_1(capsys, tmp_path):
    doc = json.loads(shipped("lighting.json").read_text())
    doc["ontology"] = shipped("lighting.onto").read_text()
    doc["recipes"] = [json.loads(shipped("lighting-recipe.json").read_text())]
    doc["events"][-1]["expect"]["deliveries"]["counts"] = [9, 9, 9, 9]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "scenario", "run", str(path))
    assert code == 1 and "FAIL step 12" in out


def test_offline_admin_on_a_snapshot(capsys, tmp_path):
    snap = tmp_path / "state.json"
    onto = str(shipped("lighting.onto"))
    admin = ["--snapshot", str(snap), "--ontology", onto]
    assert run(capsys, "recipe", "add", str(shipped("lighting-recipe.json")), *admin)[0] == 0
    code, out, _ = run(capsys, "rrc", "create", "--recipe", "lighting", "--id", "r1",
                       "--set", "light.osr=room = \"A\"", "--set", "light.max=2", *admin)
    assert code == 0 and json.loads(out)["id"] == "r1"
    assert run(capsys, "osr", "set", "r1:light", 'room = "B"', *admin)[0] == 0
    assert run(capsys, "rrc", "seed", "r1", *admin)[0] == 0
    code, out, _ = run(capsys, "registry", "dump", *admin)
    doc = json.loads(out)
    light = [i for i in doc["rrcs"][0]["ircs"] if i["ingredientId"] == "light"][0]
    assert light["osr"] == '(room = "B")' and light["max"] == 2


def test_domain_errors_exit_1(capsys, tmp_path):
    snap = tmp_path / "state.json"
    admin = ["--snapshot", str(snap), "--ontology", str(shipped("lighting.onto"))]
    code, _, err = run(capsys, "rrc", "create", "--recipe", "nope", *admin)
    assert code == 1 and "nope" in err
    run(capsys, "recipe", "add", str(shipped("lighting-recipe.json")), *admin)
    code, _, err = run(capsys, "rrc", "create", "--recipe", "lighting", "--set", "light.min=2", "--set", "light.max=1", *admin)
    assert code == 1 and "min 2 exceeds max 1" in err
    code, _, err = run(capsys, "osr", "set", "rrc1:light", "room = ", *admin)
    assert code == 1 and "position" in err


def test_unreachable_controller_exits_1(capsys):
    code, _, err = run(capsys, "registry", "dump", "--controller", "http://127.0.0.1:9")
    assert code == 1 and "cannot reach" in err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "run", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["registry", "dump"])
    assert exc.value.code == 2


def test_bench_run_writes_csv(capsys, tmp_path):
    out = tmp_path / "b.csv"
    series = tmp_path / "s.json"
    code, stdout, _ = run(capsys, "bench", "run", "--rrcs", "14", "--reps", "2", "--out", str(out), "--series", str(series))
    assert code == 0
    assert out.read_text().splitlines()[0] == "rrcCount,medianMs,p95Ms"
    assert json.loads(series.read_text())["rrcCount"] == [7, 14]


def test_module_entry_point_and_live_controller(tmp_path):
    from httpkit import spawn_controller

    proc, url = spawn_controller()
    try:
        subprocess.run([sys.executable, "-m", "choreo", "recipe", "add", str(shipped("lighting-recipe.json")),
                        "--controller", url], check=True, capture_output=True)
        lamp = dict(shipped_offerings()["lamp1"], endpoints=[])
        od = tmp_path / "lamp.json"
        od.write_text(json.dumps(lamp))
        engine = subprocess.Popen([sys.executable, "-m", "choreo", "engine", "run", "--offering", str(od),
                                   "--controller", url], stdout=subprocess.PIPE, text=True)
        try:
            assert "listening on" in engine.stdout.readline()
            text = ""
            while True:
                line = engine.stdout.readline()
                assert line, f"engine exited early after {text!r}"
                text += line
                try:
                    reply = json.loads(text)
                    break
                except ValueError:
                    continue
            assert reply["offeringId"] == "bigiot:lamp1"
        finally:
            engine.terminate()
            engine.wait(5)
        res = subprocess.run([sys.executable, "-m", "choreo", "registry", "dump", "--controller", url],
                             check=True, capture_output=True, text=True)
        doc = json.loads(res.stdout)
        assert doc["recipes"][0]["id"] == "lighting"
        assert doc["offerings"][0]["endpoints"][0]["uri"].startswith("http://127.0.0.1:")
    finally:
        proc.terminate()
        proc.wait(5)


def test_bench_explicit_counts_with_rounds(capsys):
    code, stdout, _ = run(capsys, "bench", "run", "--counts", "7", "14", "--reps", "2", "--rounds", "2")
    assert code == 0
    assert [line.split(",")[0] for line in stdout.splitlines()[1:]] == ["7", "14"]
