import os

import numpy as np
import pytest

from harmonia import bench, cli, train


def test_parser_rejects_unknown_names():
    p = cli.build_parser()
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "nope", "--method", "pinn",
                      "--seed", "0"])
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "robot", "--method", "nope",
                      "--seed", "0"])
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scenario", "robot", "--method", "pinn",
                      "--seed", "0", "--fast", "--paper"])


def test_run_and_table_commands(tmp_path, capsys):
    out = str(tmp_path)
    code = cli.main(["run", "--scenario", "heat_box", "--method",
                     "holomorphic", "--seed", "0", "--fast", "--epochs",
                     "25", "--out", out])
    assert code == 0
    text = capsys.readouterr().out
    assert "heat_box / holomorphic / seed 0" in text
    assert "wall time" in text
    assert os.path.isfile(os.path.join(out, "heat_box_holomorphic_s0",
                                       "metrics.csv"))
    code = cli.main(["table", "--out", out, "--scale100"])
    assert code == 0
    text = capsys.readouterr().out
    assert "holomorphic" in text and "(x100)" in text
    assert os.path.isfile(os.path.join(out, "table.csv"))


def test_table_without_runs_fails(tmp_path, capsys):
    assert cli.main(["table", "--out", str(tmp_path / "empty")]) == 1
    assert "no runs" in capsys.readouterr().err


def test_incompatible_method_exits_2(capsys):
    code = cli.main(["run", "--scenario", "pipe3d", "--method",
                     "holomorphic", "--seed", "0", "--fast"])
    assert code == 2
    assert "incompatible" in capsys.readouterr().err


def test_divergence_exits_3(monkeypatch, capsys):
    def blow_up(*a, **kw):
        raise train.TrainingDiverged(7, None)
    monkeypatch.setattr(bench, "run", blow_up)
    code = cli.main(["run", "--scenario", "heat_box", "--method", "pinn",
                     "--seed", "0", "--fast"])
    assert code == 3
    assert "epoch 7" in capsys.readouterr().err


def test_oracle_command(tmp_path, capsys):
    out = str(tmp_path)
    code = cli.main(["oracle", "--scenario", "heat_box", "--h", "0.125",
                     "--out", out])
    assert code == 0
    text = capsys.readouterr().out
    assert "9x9 nodes" in text
    txt = os.path.join(out, "oracle_heat_box.txt")
    csv = os.path.join(out, "oracle_heat_box.csv")
    assert os.path.isfile(txt) and os.path.isfile(csv)
    head = open(txt).readline().split()
    assert head[:3] == ["9", "9", "0.125"]
    # equipotential symmetry of the box problem across y = 1/2
    vals = np.loadtxt(txt, skiprows=1)
    assert np.allclose(vals, vals[:, ::-1], atol=1e-9)


def test_check_command(capsys):
    assert cli.main(["check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
