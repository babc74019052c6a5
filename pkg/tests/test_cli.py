import json

import numpy as np
import pytest

from srmaps import cli
from srmaps.environments import TransitionMatrix
from srmaps.io import file_digest, read_matrix_csv


def run(tmp_path, *argv):
    return cli.main(list(argv) + ["--out", str(tmp_path)])


class TestOracle:
    def test_room_corner_rows(self, tmp_path):
        assert run(tmp_path, "oracle", "--env", "room10") == 0
        tp = read_matrix_csv(tmp_path / "tp.csv")
        assert tp.shape == (100, 100)
        for corner in (0, 9, 90, 99):
            row = tp[corner]
            assert np.count_nonzero(row) == 3
            np.testing.assert_allclose(row[row > 0], 1 / 3, rtol=0, atol=0)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "oracle"
        assert set(manifest["outputs"]) == {"tp.csv", "sr.csv"}
        assert manifest["outputs"]["tp.csv"] == file_digest(tmp_path / "tp.csv")

    def test_maze_file(self, tmp_path):
        layout = tmp_path / "m.txt"
        layout.write_text("...\n.#.\n..F\n")
        out = tmp_path / "out"
        assert run(out, "oracle", "--maze-file", str(layout)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["inputs"][str(layout)] == file_digest(layout)
        assert read_matrix_csv(out / "tp.csv").shape == (9, 9)

    def test_rectangular_room(self, tmp_path):
        assert run(tmp_path, "oracle", "--env", "room3x4") == 0
        assert read_matrix_csv(tmp_path / "sr.csv").shape == (12, 12)


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert cli.main(["bogus"]) == 2

    def test_unknown_flag(self, capsys):
        assert cli.main(["oracle", "--nope"]) == 2

    def test_unknown_env(self, tmp_path, capsys):
        assert run(tmp_path, "oracle", "--env", "ocean") == 2

    def test_unreadable_input(self, tmp_path, capsys):
        assert run(tmp_path, "oracle", "--maze-file", str(tmp_path / "missing.txt")) == 1

    def test_bad_layout_is_io(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("..x\n")
        assert run(tmp_path / "o", "oracle", "--maze-file", str(bad)) == 1

    def test_invariant_violation(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(cli, "ground_truth_tp", lambda space: TransitionMatrix(np.full((4, 4), 0.3)))
        assert run(tmp_path, "oracle", "--env", "room2") == 3
        assert "invariant" in capsys.readouterr().err

    def test_help(self, capsys):
        assert cli.main(["--help"]) == 0


class TestEigen:
    def test_thirty_maps(self, tmp_path):
        assert run(tmp_path, "eigen", "--env", "room10", "--k", "30", "--scale", "1") == 0
        pgms = sorted(p.name for p in (tmp_path / "maps").glob("eigen_*.pgm"))
        assert pgms == [f"eigen_{i:03d}.pgm" for i in range(1, 31)]
        assert len(list((tmp_path / "maps").glob("eigen_*.svg"))) == 30
        metrics = json.loads((tmp_path / "manifest.json").read_text())["metrics"]
        assert metrics["max_residual"] < 1e-8
        assert len((tmp_path / "eigenvalues.csv").read_text().splitlines()) == 101

    def test_from_sr_file(self, tmp_path):
        assert run(tmp_path / "o", "oracle", "--env", "room4") == 0
        out = tmp_path / "e"
        assert run(out, "eigen", "--env", "room4", "--k", "3", "--sr-file", str(tmp_path / "o" / "sr.csv")) == 0
        assert len(list((out / "maps").glob("*.pgm"))) == 3

    def test_language_rejected(self, tmp_path, capsys):
        assert run(tmp_path, "eigen", "--env", "language") == 2


class TestLanguage:
    ARGS = ("language", "--samples", "600", "--epochs", "3", "--t", "2", "--gamma", "1")

    def test_artifacts_and_edges(self, tmp_path):
        assert run(tmp_path, *self.ARGS) == 0
        for name in ("tp.csv", "sr.csv", "edges.txt", "error_report.json", "manifest.json", "network.npz"):
            assert (tmp_path / name).exists(), name
        probs = [float(line.split()[2]) for line in (tmp_path / "edges.txt").read_text().splitlines()[1:]]
        assert probs and min(probs) >= 1e-4
        config = json.loads((tmp_path / "manifest.json").read_text())["config"]
        assert config["samples"] == 600 and config["epochs"] == 3 and config["gamma"] == 1.0

    def test_reproducible_digests(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a, *self.ARGS) == 0
        assert run(b, *self.ARGS) == 0
        da = json.loads((a / "manifest.json").read_text())["outputs"]
        db = json.loads((b / "manifest.json").read_text())["outputs"]
        csvs = [k for k in da if k.endswith(".csv")]
        assert csvs
        assert {k: da[k] for k in csvs} == {k: db[k] for k in csvs}

    def test_mds(self, tmp_path):
        assert run(tmp_path, "mds", "--samples", "600", "--epochs", "3") == 0
        scores = json.loads((tmp_path / "silhouette.json").read_text())
        assert scores["tp_truth"] > scores["sr_truth"]
        header = (tmp_path / "embedding_tp_truth.csv").read_text().splitlines()[0]
        assert header == "item,label,x,y"


class TestTrainingCommands:
    def test_explore_small(self, tmp_path):
        code = run(tmp_path, "explore", "--env", "room4", "--samples", "500", "--epochs", "2", "--starts", "0,5")
        assert code == 0
        report = json.loads((tmp_path / "error_report.json").read_text())
        assert 0 <= report["tp"]["mean_tv"] <= 1
        assert (tmp_path / "maps" / "sr_start_005.pgm").exists()

    def test_navigate_small(self, tmp_path):
        layout = tmp_path / "m.txt"
        layout.write_text("....\n.##.\n...F\n")
        out = tmp_path / "run"
        assert run(out, "navigate", "--maze-file", str(layout), "--episodes", "300") == 0
        rows = (out / "episodes.csv").read_text().splitlines()
        assert rows[0] == "episode,step,state,action,reward,cause"
        assert (out / "agent.npz").exists()

    def test_paper_budget_flag(self, monkeypatch):
        args = cli.build_parser().parse_args(["explore", "--paper-budget"])
        assert cli._budget(args, "explore")["epochs"] == 10_000
        args = cli.build_parser().parse_args(["explore", "--paper-budget", "--epochs", "7"])
        assert cli._budget(args, "explore")["epochs"] == 7


def test_edge_threshold(tmp_path):
    tp = np.array([[0.5, 0.49995, 5e-5], [0.0, 1.0, 0.0], [1e-4, 0.0, 0.9999]])
    n = cli.write_edges(tmp_path / "e.txt", tp)
    assert n == 5
    assert "5.0000000000000002e-05" not in (tmp_path / "e.txt").read_text()


def test_row_check_tolerance():
    ok = TransitionMatrix(np.array([[0.5, 0.5], [0.0, 0.0]]))
    cli.check_rows(ok, "ok")
    with pytest.raises(cli.InvariantError):
        cli.check_rows(TransitionMatrix(np.array([[0.5, 0.5 + 1e-10], [0.0, 0.0]])), "bad")
