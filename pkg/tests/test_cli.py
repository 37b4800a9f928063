import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vortexburst import fileio
from vortexburst.cli import main

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


def copy_scenario(name, tmp_path):
    dest = tmp_path / name
    shutil.copy(SCENARIO_DIR / name, dest)
    return dest


def parse_checks(text):
    block = text.split("== checks ==")[1].split("== info ==")[0]
    rows = [line.split("\t") for line in block.strip().splitlines() if line]
    return {r[0]: r[1] for r in rows}


def test_selfsimilar_check_passes(capsys, tmp_path):
    code = main(["selfsimilar", "--xi", "1", "--check", "--report", str(tmp_path / "r.json"),
                 "--figures", str(tmp_path / "figs")])
    out = capsys.readouterr().out
    assert code == 0
    checks = parse_checks(out)
    assert checks and set(checks.values()) == {"PASS"}
    assert "discriminant_linear_rel_mismatch" in out
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["passed"]
    assert (tmp_path / "figs" / "selfsimilar.png").stat().st_size > 0


def test_burst_then_verify(capsys, tmp_path):
    scenario = copy_scenario("background_burst.yaml", tmp_path)
    assert main(["burst", str(scenario), "--figures", str(tmp_path / "figs")]) == 0
    out = capsys.readouterr().out
    assert parse_checks(out)["weak_residual"] == "PASS"
    traj = tmp_path / "background_burst.pvtraj"
    assert traj.exists()
    assert (tmp_path / "figs" / "trajectory.png").exists()
    assert main(["verify", str(traj)]) == 0
    assert set(parse_checks(capsys.readouterr().out).values()) == {"PASS"}


def test_verify_flags_corrupted_file(capsys, tmp_path):
    scenario = copy_scenario("four_vortices.yaml", tmp_path)
    out_path = tmp_path / "run.pvtraj"
    assert main(["simulate", str(scenario), "--out", str(out_path)]) == 0
    capsys.readouterr()
    traj, _ = fileio.read_trajectory(out_path)
    seg = traj.segments[0]
    seg.positions[seg.times.size // 2, 0] += 1e-2
    fileio.write_trajectory(traj, out_path)
    code = main(["verify", str(out_path)])
    captured = capsys.readouterr()
    assert code == 1
    assert parse_checks(captured.out)["weak_residual"] == "FAIL"
    assert "weak_residual" in captured.err


def test_collapse_command_merges(capsys, tmp_path):
    scenario = copy_scenario("collapse.yaml", tmp_path)
    assert main(["collapse", str(scenario)]) == 0
    checks = parse_checks(capsys.readouterr().out)
    assert checks["collapse_merged"] == "PASS"
    traj, _ = fileio.read_trajectory(tmp_path / "collapse.pvtraj")
    assert traj.vortex_counts() == [3, 1]


@pytest.mark.parametrize("name", ["free_burst.yaml", "constant_field.yaml", "disk_burst.yaml"])
def test_burst_scenarios_pass(name, capsys, tmp_path):
    scenario = copy_scenario(name, tmp_path)
    assert main(["burst", str(scenario), "--out", str(tmp_path / "o.pvtraj"),
                 "--report", str(tmp_path / "o.json")]) == 0
    report = json.loads((tmp_path / "o.json").read_text())
    assert report["passed"]


def test_markov_command(capsys, tmp_path):
    scenario = copy_scenario("markov.yaml", tmp_path)
    code = main(["markov", str(scenario), "--samples", "4", "--out", str(tmp_path / "m.pvtraj"),
                 "--figures", str(tmp_path / "figs")])
    out = capsys.readouterr().out
    assert code == 0
    assert parse_checks(out)["samples_certified"] == "PASS"
    assert (tmp_path / "figs" / "markov.png").exists()


def test_export_formats(capsys, tmp_path):
    scenario = copy_scenario("free_burst.yaml", tmp_path)
    assert main(["burst", str(scenario)]) == 0
    capsys.readouterr()
    traj_path = tmp_path / "free_burst.pvtraj"
    assert main(["export", str(traj_path), "--format", "table"]) == 0
    table = capsys.readouterr().out
    assert table.startswith("segment,t,index,intensity,x,y")
    assert main(["export", str(traj_path), "--format", "plotdata", "--output",
                 str(tmp_path / "p.json")]) == 0
    data = json.loads((tmp_path / "p.json").read_text())
    assert len(data["segments"]) == 2
    assert np.isclose(sum(data["segments"][1]["intensities"]), 1.0)


def test_input_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("vortices: [{intensity: 1.0, position: [0, 0]}]\nsurprise: 1\n")
    assert main(["burst", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["verify", str(tmp_path / "missing.pvtraj")]) == 2
    (tmp_path / "junk.pvtraj").write_text("not a trajectory\n")
    assert main(["verify", str(tmp_path / "junk.pvtraj")]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vortexburst.cli", "selfsimilar", "--xi", "-2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("== selfsimilar ==")
