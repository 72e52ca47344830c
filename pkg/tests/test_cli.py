import json
import subprocess
import sys

import pytest

from conftest import RUNNING
from fedcc.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, main
from fedcc.eventlog import parse_log
from fedcc.generator import ORGS
from fedcc.workspace import load_manifest


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_project_private_log(capsys):
    code, out, _ = run(capsys, "project", RUNNING / "m1" / "log.csv")
    assert code == EXIT_OK
    pub = parse_log(out, "public")
    assert len(pub) == 9 and {e.activity for e in pub.events} == {"so", "ir", "pa"}


def test_commcost_row(capsys):
    code, out, _ = run(capsys, "commcost", RUNNING / "m1" / "log.csv", RUNNING / "m1" / "net.json")
    assert code == EXIT_OK
    rows = out.splitlines()
    assert rows[0] == "cid,local_align_cost,io1:potential,io2:potential,io3:potential"
    assert "c3,2,1,1,1" in rows


def test_align_fitting_log(capsys, tmp_path):
    log = tmp_path / "fit.csv"
    text = (RUNNING / "m1" / "log.csv").read_text(encoding="utf-8")
    log.write_text("\n".join(l for l in text.splitlines() if not l.startswith("c3,")) + "\n", encoding="utf-8")
    code, out, _ = run(capsys, "align", log, RUNNING / "m1" / "net.json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert {c: d["total_cost"] for c, d in doc["cases"].items()} == {"c1": 0, "c2": 0}
    assert doc["fitness_definition"].startswith("1 - cost")
    code, out, _ = run(capsys, "align", log, RUNNING / "m1" / "net.json", "--format", "csv")
    assert out.splitlines() == ["cid,cost,fitness", "c1,0,1.000000", "c2,0,1.000000"]


def test_budget_exit_code(capsys):
    code, _, err = run(capsys, "align", RUNNING / "m1" / "log.csv", RUNNING / "m1" / "net.json", "--budget", "2")
    assert code == EXIT_BUDGET
    assert json.loads(err.splitlines()[-1])["level"] == "error"
    assert run(capsys, "--budget", "0", "project", RUNNING / "m1" / "log.csv")[0] == EXIT_INVALID


def test_validate_single_net(capsys):
    code, out, err = run(capsys, "validate", RUNNING / "m1" / "net.json")
    assert code == EXIT_INVALID
    assert json.loads(err.splitlines()[-1])["unmatched"] == ["io1", "io2", "io3"]
    assert json.loads(out)["closed"] is False


def test_compose_and_validate_pair(capsys):
    nets = [RUNNING / "m1" / "net.json", RUNNING / "s1" / "net.json"]
    code, out, _ = run(capsys, "compose", *nets, "--public")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["input_places"] == [] and doc["output_places"] == [] and doc["org"] == "m1+s1"
    assert run(capsys, "validate", *nets)[0] == EXIT_OK


def test_invalid_input_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n", encoding="utf-8")
    code, _, err = run(capsys, "project", bad)
    assert code == EXIT_INVALID
    assert json.loads(err)["kind"] == "LogError"
    assert run(capsys, "project", tmp_path / "missing.csv")[0] == EXIT_INVALID


def test_federate_running_example(capsys, running_dirs, tmp_path):
    assert run(capsys, "share", *running_dirs)[0] == EXIT_OK
    code, out, _ = run(capsys, "federate", *running_dirs)
    assert code == EXIT_OK
    assert '"fac": 6' in out
    doc = json.loads(out)
    c3 = next(c for c in doc["cases"] if c["cid"] == "c3")
    assert c3["fac"] == 6 and c3["lcc"]["m1"] == {"io1": 0, "io2": 0, "io3": 1}
    report = tmp_path / "report.json"
    report.write_text(out, encoding="utf-8")
    code, text, _ = run(capsys, "report", report, "--format", "text")
    assert "c3: FaC=6 (io3/sender_move)" in text
    _, rows, _ = run(capsys, "report", report, "--format", "csv", "--cases")
    assert rows.splitlines()[3] == "c3,6,5,1,1,io3:sender_move"


def test_federate_without_partner(capsys, running_dirs):
    run(capsys, "share", running_dirs[0])
    code, _, err = run(capsys, "federate", running_dirs[0])
    assert code == EXIT_INVALID
    assert json.loads(err)["unmatched"] == ["io1", "io2", "io3"]


def test_federate_needs_shared_dir(capsys, running_dirs):
    assert run(capsys, "federate", *running_dirs)[0] == EXIT_INVALID


def test_collab_log(capsys, running_dirs):
    run(capsys, "share", *running_dirs)
    code, out, _ = run(capsys, "collab-log", *(d / "shared" / "log.csv" for d in running_dirs))
    assert code == EXIT_OK and len(parse_log(out, "collaborative")) == 17


def test_generate_minimal_pipeline(capsys, tmp_path):
    out = tmp_path / "one"
    assert run(capsys, "generate", "--cases", "1", "--seed", "3", "--share", "--out", out)[0] == EXIT_OK
    code, text, _ = run(capsys, "federate", out)
    assert code == EXIT_OK
    doc = json.loads(text)
    assert len(doc["cases"]) == 1 and doc["cases"][0]["fac"] == 0
    assert run(capsys, "generate", "--cases", "1")[0] == EXIT_INVALID


def test_generate_is_byte_identical(capsys, tmp_path):
    # 12 cases cannot host 10 + 19 + 5 injections
    code = run(capsys, "generate", "--cases", "12", "--seed", "5", "--evaluation", "--out", tmp_path / "a")[0]
    assert code == EXIT_INVALID and not (tmp_path / "a").exists()
    for name in ("a", "b"):
        assert run(capsys, "generate", "--cases", "40", "--seed", "5", "--out", tmp_path / name)[0] == EXIT_OK
    for org in ORGS:
        for f in ("log.csv", "net.json"):
            assert (tmp_path / "a" / org / f).read_bytes() == (tmp_path / "b" / org / f).read_bytes()
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_inject_then_federate(capsys, tmp_path):
    ds = tmp_path / "ds"
    run(capsys, "generate", "--cases", "60", "--seed", "2", "--out", ds)
    code, out, _ = run(capsys, "inject", ds, "--scenario", "sender_move", "--activity", "dispatched", "--count", "10")
    assert code == EXIT_OK
    res = json.loads(out)
    assert res["org"] == "manufacturer" and res["channel"] == "order_dispatch" and len(res["cases"]) == 10
    code, out, _ = run(capsys, "inject", ds, "--scenario", "asynchronous", "--activity", "delivery",
                       "--count", "5", "--seed", "1")
    assert code == EXIT_OK
    manifest = load_manifest(ds)
    assert [i["channel"] for i in manifest["injections"]] == ["order_dispatch", "delivery_notice"]
    assert not set(manifest["injections"][0]["cases"]) & set(manifest["injections"][1]["cases"])
    assert run(capsys, "share", ds)[0] == EXIT_OK
    code, out, _ = run(capsys, "federate", ds)
    assert code == EXIT_OK
    doc = json.loads(out)
    for inj in manifest["injections"]:
        hit = {c["cid"] for c in doc["cases"] if any(f["channel"] == inj["channel"] for f in c["findings"])}
        assert hit == set(inj["cases"])
    assert doc["summary"]["by_channel"]["delivery_notice"]["asynchronous"] == 5
    code, _, err = run(capsys, "inject", ds, "--scenario", "sender_move", "--activity", "dispatched", "--count", "999")
    assert code == EXIT_INVALID and "eligible" in err


def test_federate_is_deterministic(capsys, running_dirs):
    run(capsys, "share", *running_dirs)
    first, second = (run(capsys, "federate", *running_dirs, "--format", "text")[1] for _ in range(2))
    assert first == second and "cross-check mismatches: 0" in first


def test_custom_cost_flags(capsys):
    code, out, _ = run(capsys, "commcost", RUNNING / "m1" / "log.csv", RUNNING / "m1" / "net.json",
                       "--cost-log", "2", "--cost-model", "gr=5")
    assert code == EXIT_OK
    assert out.splitlines()[3].startswith("c3,")
    assert run(capsys, "commcost", RUNNING / "m1" / "log.csv", RUNNING / "m1" / "net.json",
               "--cost-log", "x=y")[0] == EXIT_INVALID


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fedcc", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


@pytest.mark.parametrize("argv", [["project"], ["inject", "--activity", "x"], ["nonsense"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
