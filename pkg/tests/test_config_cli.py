import json
import subprocess
import sys

import pytest

from iqm_lab.cli import main, output_dir
from iqm_lab.config import parse_config
from iqm_lab.errors import MissingSeed, SchemaError


def cfg(**blocks):
    doc = {"seed": 7, "world": {"kind": "classical_die"}}
    doc.update(blocks)
    return doc


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return str(p)


def run_cli(tmp_path, doc, *extra):
    return main(["run", write(tmp_path, doc), "--out", str(tmp_path / "out"), *extra])


# -- configuration -----------------------------------------------------------------------


def test_minimal_config_parses():
    c = parse_config(json.dumps(cfg(statistics={"N": 10})))
    assert c.seed == 7 and c.command == "statistics" and c.world.kind == "classical_die"
    assert c.formats == ("json", "csv")


def test_exactly_one_command_block():
    with pytest.raises(SchemaError):
        parse_config(json.dumps(cfg(statistics={"N": 10}, tree={"N_per_branch": 10})))
    with pytest.raises(SchemaError):
        parse_config(json.dumps(cfg()))


def test_unsorted_grid_names_its_path():
    with pytest.raises(SchemaError) as e:
        parse_config(json.dumps(cfg(world={"kind": "singlet_pair"}, scan={"vi_grid": [1, 5, 2]})))
    assert e.value.path == "scan.vi_grid"


def test_missing_seed():
    doc = cfg(statistics={"N": 10})
    del doc["seed"]
    with pytest.raises(MissingSeed):
        parse_config(json.dumps(doc))


@pytest.mark.parametrize(
    "doc,path",
    [
        (cfg(statistics={"N": 10}, colour="red"), "colour"),
        (cfg(statistics={"N": 10, "speed": 2}), "statistics.speed"),
        (cfg(statistics={"N": 0}), "statistics.N"),
        (cfg(world={"kind": "dragon"}, statistics={"N": 1}), "world.kind"),
        (cfg(bell={"angles_deg": [0, 90, 45]}), "bell.angles_deg"),
    ],
)
def test_schema_errors_carry_paths(doc, path):
    with pytest.raises(SchemaError) as e:
        parse_config(json.dumps(doc))
    assert e.value.path == path


def test_malformed_json_is_a_schema_error():
    with pytest.raises(SchemaError):
        parse_config("{seed: 1")


# -- command line ----------------------------------------------------------------------------


def test_exit_codes(tmp_path):
    assert run_cli(tmp_path, cfg(statistics={"N": 600})) == 0
    assert run_cli(tmp_path, cfg(interference={"N": 10})) == 1
    assert run_cli(tmp_path, cfg(world={"kind": "singlet_pair"}, scan={"vi_grid": [2, 1]})) == 2
    assert run_cli(tmp_path, "not json") == 2
    assert main(["run", str(tmp_path / "absent.json")]) == 2
    assert run_cli(tmp_path, cfg(statistics={"N": 10}), "--threads", "0") == 2


def test_validate_and_worlds(tmp_path, capsys):
    assert main(["validate", write(tmp_path, cfg(statistics={"N": 10}))]) == 0
    assert main(["validate", write(tmp_path, cfg(world={"kind": "qubit", "params": {"nope": 1}}, statistics={"N": 1}))]) == 2
    assert main(["worlds"]) == 0
    out = capsys.readouterr().out
    assert "ok: statistics on classical_die" in out
    for kind in ("classical_die", "qubit", "singlet_pair", "double_slit", "free_particle", "influence_contrast", "coin_pair"):
        assert f"{kind}:" in out


def test_die_statistics_outputs(tmp_path):
    assert run_cli(tmp_path, cfg(statistics={"N": 6000})) == 0
    report = json.loads((tmp_path / "out" / "statistics.json").read_text())
    assert report["command"] == "statistics" and report["seed"] == 7
    rows = report["result"]["table"]["rows"]
    assert len(rows) == 6 and sum(r["count"] for r in rows) == 6000
    raw = (tmp_path / "out" / "statistics.csv").read_bytes()
    assert raw.count(b"\r\n") == 7


def test_bell_summary(tmp_path, capsys):
    doc = {"seed": 3, "world": {"kind": "singlet_pair"}, "bell": {"N": 100_000}}
    assert run_cli(tmp_path, doc) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("CHSH S=2.83 ± ") and line.endswith("VIOLATED")


def test_local_model_from_config(tmp_path, capsys):
    model = {"rho": ["1/2", "1/2"], "A": [[1, -1], [1, 1], [1, 1], [1, -1]], "B": [[1, 1], [-1, 1], [1, -1], [1, 1]]}
    doc = {"seed": 3, "world": {"kind": "singlet_pair"}, "bell": {"lhv_model": model}}
    assert run_cli(tmp_path, doc) == 0
    assert "satisfied" in capsys.readouterr().out


def test_scan_report_verdict(tmp_path):
    doc = {"seed": 4, "world": {"kind": "influence_contrast", "params": {"influence_speed": 5}}, "scan": {"vi_grid": [1, 2, 5, 10, 100]}}
    assert run_cli(tmp_path, doc) == 0
    report = json.loads((tmp_path / "out" / "scan.json").read_text())
    assert report["result"]["verdict"] == {"kind": "influence_detected", "bracket": [5.0, 10.0]}


def test_tree_writes_rendering(tmp_path):
    doc = {"seed": 4, "world": {"kind": "qubit"}, "tree": {"N_per_branch": 2000, "kolmogorov_pairs": 100}}
    assert run_cli(tmp_path, doc) == 0
    lines = (tmp_path / "out" / "tree.txt").read_text().splitlines()
    assert lines[-1].lstrip().startswith("trunk G[prep]")
    assert sum("views:" in line for line in lines) == 3


def test_reruns_are_byte_identical(tmp_path):
    doc = cfg(world={"kind": "qubit"}, statistics={"N": 5000})
    p = write(tmp_path, doc)
    assert main(["run", p, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["run", p, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    for name in ("statistics.json", "statistics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_directory_precedence(tmp_path, monkeypatch):
    c = parse_config(json.dumps(cfg(statistics={"N": 1}, output={"dir": "from_cfg"})))
    monkeypatch.delenv("IQM_LAB_OUT", raising=False)
    assert str(output_dir(c)) == "from_cfg"
    monkeypatch.setenv("IQM_LAB_OUT", str(tmp_path / "env"))
    assert output_dir(c) == tmp_path / "env"
    assert str(output_dir(c, "flag")) == "flag"
    assert main(["run", write(tmp_path, cfg(statistics={"N": 6}))]) == 0
    assert (tmp_path / "env" / "statistics.json").exists()


def test_console_entry_point(tmp_path):
    p = write(tmp_path, cfg(statistics={"N": 60}))
    r = subprocess.run([sys.executable, "-m", "iqm_lab.cli", "run", p, "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("statistics")
