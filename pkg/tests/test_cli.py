import subprocess
import sys
import time
from pathlib import Path

import pytest
import yaml

from packetwash.cli import main, metrics_csv
from packetwash.node import NodeMode
from packetwash.scenarios import PRESETS, load_scenario, resolve, scenario_from_dict
from packetwash.sim import BadScenario

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE = ROOT / "scenarios" / "dumbbell.yaml"


def test_overhead_command(capsys):
    assert main(["overhead", "3", "1280"]) == 0
    out = capsys.readouterr().out
    assert "PAPER_4B  0.94%" in out and "ACTUAL    3.12%" in out
    main(["overhead", "3", "9000"])
    assert "PAPER_4B  0.13%" in capsys.readouterr().out
    main(["overhead", "1", "1280"])
    assert "PAPER_4B  0.31%" in capsys.readouterr().out


def test_overhead_rejects_zero_levels(capsys):
    assert main(["overhead", "0", "1280"]) != 0


def test_fig2_preset_via_cli(tmp_path, capsys):
    assert main(["run", "fig2-coding", "--out", str(tmp_path), "--trace"]) == 0
    out = capsys.readouterr().out
    assert "flow 1: 1/1 units delivered, retransmissions 0, washes 1" in out
    assert (tmp_path / "summary.txt").read_text() == out
    csv = (tmp_path / "metrics.csv").read_text().splitlines()
    assert csv[0].startswith("run,flow,bytes_offered,")
    assert len(csv) == 3
    trace = (tmp_path / "trace.ndjson").read_text().splitlines()
    assert any('"action":"wash"' in line for line in trace)


def test_no_trace_file_without_flag(tmp_path):
    assert main(["run", "fig2-coding", "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "trace.ndjson").exists()


def test_unknown_scenario_exits_nonzero(capsys):
    assert main(["run", "no-such-thing"]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_yaml_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nodes: [{id: A, kind: host, colour: red}]\nlinks: []\nflows: []\n")
    assert main(["run", str(bad)]) == 2
    bad.write_text("nodes: [\n")
    assert main(["run", str(bad)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "packetwash", "overhead", "3", "1280"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.94%" in r.stdout


def test_example_file_loads_two_modes():
    runs = load_scenario(EXAMPLE)
    assert [label for label, _ in runs] == ["qualitative", "legacy"]
    legacy = runs[1][1]
    assert {n.mode for n in legacy.nodes if n.kind == "router"} == {NodeMode.LEGACY_DROPTAIL}
    flow = runs[0][1].flows[0]
    assert flow.app.coded.k == 4 and len(flow.app.chunking) == 4
    assert isinstance(runs[0][1].links[0].bandwidth_bytes_per_s, float)


def test_seed_override_for_files():
    assert all(sc.seed == 99 for _, sc in resolve(str(EXAMPLE), 99))


@pytest.mark.parametrize(
    "doc",
    [
        {"nodes": [], "links": [], "flows": [], "surprise": 1},
        {"nodes": [{"id": "A", "mode": "turbo"}], "links": [], "flows": []},
        {"nodes": [{"id": "A", "capacity_bytes": "lots"}], "links": [], "flows": []},
        {"links": [], "flows": []},
        [1, 2, 3],
    ],
)
def test_schema_errors(doc):
    with pytest.raises(BadScenario):
        scenario_from_dict(doc)


def test_app_schema_errors():
    base = yaml.safe_load(EXAMPLE.read_text())
    base.pop("compare_modes")
    base["flows"][0]["app"] = dict(base["flows"][0]["app"], q_function="FANCY")
    with pytest.raises(BadScenario):
        scenario_from_dict(base)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_quick_and_deterministic(name):
    start = time.perf_counter()
    from packetwash.cli import execute

    first = metrics_csv(execute(PRESETS[name](3)))
    assert time.perf_counter() - start < 10
    assert metrics_csv(execute(PRESETS[name](3))) == first
