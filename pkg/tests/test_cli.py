import csv
import io
import json

import pytest

from mqttuma.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_phases(capsys):
    code, out, _ = run(capsys, "phases")
    assert code == 0
    for value in ("1207", "164", "1147", "578", "92"):
        assert value in out


def test_phases_breakdown_csv(tmp_path, capsys):
    path = tmp_path / "p.csv"
    assert run(capsys, "phases", "--out", str(path))[0] == 0
    rows = list(csv.DictReader(path.open()))
    totals = {r["phase"]: int(r["ms"]) for r in rows if r["term"] == "total"}
    assert totals["Publish"] == 578


def test_phases_config_zeroing_links(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    links = ["T_P1xMB1", "T_MB1xRS", "T_RSxAS", "T_ClientxRS", "T_ClientxAS", "T_S2RPxClient"]
    cfg.write_text(json.dumps({k: 0 for k in links}))
    path = tmp_path / "p.csv"
    assert run(capsys, "phases", "--config", str(cfg), "--out", str(path))[0] == 0
    rows = list(csv.DictReader(path.open()))
    totals = {r["phase"]: int(r["ms"]) for r in rows if r["term"] == "total"}
    assert totals["Subscribe"] == 2 * 33 + 2 * 10


def test_phases_missing_config(capsys):
    code, _, err = run(capsys, "phases", "--config", "/nonexistent.json")
    assert code == 2 and "error" in err


def test_phases_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"T_AS": -3}')
    assert run(capsys, "phases", "--config", str(cfg))[0] == 2


def test_sweep_defaults(capsys):
    code, out, _ = run(capsys, "sweep")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 66
    assert float(rows[0]["rho"]) == pytest.approx(0.9982993197278911, rel=1e-12)


def test_sweep_single_point(capsys):
    code, out, _ = run(capsys, "sweep", "--inter-arrival-min", "640",
                       "--inter-arrival-max", "640", "--points", "1")
    assert code == 0
    assert len(out.strip().splitlines()) == 2


def test_sweep_unstable(capsys):
    assert run(capsys, "sweep", "--inter-arrival-min", "587", "--inter-arrival-max", "600")[0] == 3


def test_sweep_inverted(capsys):
    assert run(capsys, "sweep", "--inter-arrival-min", "640", "--inter-arrival-max", "588")[0] == 2


def test_bad_rate(capsys):
    assert run(capsys, "sweep", "--mu", "zero")[0] == 2
    assert run(capsys, "sweep", "--mu", "-1")[0] == 2


def test_simulate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--arrivals", "20000", "--seed", "3"]
    run(capsys, *args, "--out", str(a))
    run(capsys, *args, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0].split(",")
    assert header[-2:] == ["seed", "arrivals"]


def test_simulate_unstable(capsys):
    assert run(capsys, "simulate", "--lambda", "1/587", "--mu", "1/587")[0] == 3


def test_simulate_fail_exit(capsys):
    code, _, err = run(capsys, "simulate", "--arrivals", "1000", "--tolerance", "0")
    assert code == 4 and "FAIL" in err


def test_simulate_bad_arrivals(capsys):
    assert run(capsys, "simulate", "--arrivals", "0")[0] == 2


@pytest.mark.parametrize("phase,ms", [("ProtectionAuthorization", 1207), ("Subscribe", 92),
                                      ("Publish", 578), ("Access", 164),
                                      ("InitialPublish", 1147)])
def test_trace_footer(capsys, phase, ms):
    code, out, _ = run(capsys, "trace", phase)
    assert code == 0
    lines = [json.loads(line) for line in out.splitlines()]
    footer = lines[-1]
    assert footer["footer"] and footer["coefficient_latency_ms"] == ms
    assert footer["messages"] == len(lines) - 1
    assert [r["seq"] for r in lines[:-1]] == list(range(1, len(lines)))


def test_trace_unknown_phase(capsys):
    assert run(capsys, "trace", "BadName")[0] == 2


def test_no_command(capsys):
    assert run(capsys)[0] == 2
