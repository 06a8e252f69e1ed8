import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest

from pitchpos import formats
from pitchpos.cli import main


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--frames", "40", "--seed", "3", "--color-sigma", "0.03",
                 "--edges", "--edge-stride", "20"]) == 0
    return out


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_writes_all_files(dataset):
    names = set(os.listdir(dataset))
    assert {"gt.csv", "homographies.csv", "detections.jsonl", "colors.jsonl", "shots.csv", "poses.csv",
            "config.txt", "edges"} <= names
    assert sorted(os.listdir(dataset / "edges")) == ["000000.pgm", "000020.pgm"]
    assert formats.read_shots(dataset / "shots.csv") == [(0, 39)]


def test_synth_is_deterministic(dataset, tmp_path):
    assert run("synth", "--out", tmp_path, "--frames", 40, "--seed", 3, "--color-sigma", 0.03) == 0
    for name in ("gt.csv", "homographies.csv", "detections.jsonl", "colors.jsonl"):
        assert (tmp_path / name).read_bytes() == (dataset / name).read_bytes()


def test_noiseless_pipeline_end_to_end(dataset, tmp_path):
    d = dataset
    assert run("shots", "--homographies", d / "homographies.csv", "--shots", d / "shots.csv",
               "--out", tmp_path / "classes.csv") == 0
    classes = formats.read_classification(tmp_path / "classes.csv")
    assert classes[0][3] == "main" and classes[0][2] < 0.35
    assert run("extract", "--detections", d / "detections.jsonl", "--homographies", d / "homographies.csv",
               "--shot-classes", tmp_path / "classes.csv", "--out", tmp_path / "pos.jsonl") == 0
    assert run("teams", "--positions", tmp_path / "pos.jsonl", "--detections", d / "detections.jsonl",
               "--out", tmp_path / "teams.jsonl") == 0
    assert run("eval", "--positions", tmp_path / "teams.jsonl", "--gt", d / "gt.csv",
               "--out", tmp_path / "report.csv", "--histogram", tmp_path / "hist.svg") == 0
    rows = formats.read_report(tmp_path / "report.csv")
    assert [(r["filters"], r["team_constrained"]) for r in rows] == [
        ("none", False), ("sv", False), ("sv+pm", False), ("none", True), ("sv", True), ("sv+pm", True)]
    assert rows[0]["acc_2"] == 1.0 and rows[0]["d_mean"] < 0.1 and rows[0]["ratio"] == 1.0
    assert rows[3]["acc_2"] == 1.0
    assert (tmp_path / "hist.svg").read_text().startswith("<svg")


def test_teams_with_separate_color_file(dataset, tmp_path):
    d = dataset
    assert run("extract", "--detections", d / "detections.jsonl", "--homographies", d / "homographies.csv",
               "--out", tmp_path / "pos.jsonl") == 0
    # strip inline colours so only the colour file supplies them
    bare, _ = formats.read_detections(d / "detections.jsonl")
    formats.write_detections(tmp_path / "bare.jsonl", bare)
    assert run("teams", "--positions", tmp_path / "pos.jsonl", "--detections", tmp_path / "bare.jsonl",
               "--out", tmp_path / "a.jsonl") == 2
    assert run("teams", "--positions", tmp_path / "pos.jsonl", "--detections", tmp_path / "bare.jsonl",
               "--colors", d / "colors.jsonl", "--out", tmp_path / "b.jsonl") == 0
    assert run("teams", "--positions", tmp_path / "pos.jsonl", "--detections", d / "detections.jsonl",
               "--out", tmp_path / "c.jsonl") == 0
    assert (tmp_path / "b.jsonl").read_bytes() == (tmp_path / "c.jsonl").read_bytes()


def test_builddb_checksum_stable(tmp_path):
    digests = []
    for name in ("a.db", "b.db"):
        assert run("builddb", "--preset", "wc14-base", "--db-size", 30, "--seed", 5, "--out", tmp_path / name) == 0
        digests.append(hashlib.sha256((tmp_path / name).read_bytes()).hexdigest())
    assert digests[0] == digests[1]
    assert run("builddb", "--db-size", 30, "--seed", 6, "--out", tmp_path / "c.db") == 0
    assert hashlib.sha256((tmp_path / "c.db").read_bytes()).hexdigest() != digests[0]


def test_register_writes_homographies(dataset, tmp_path):
    assert run("builddb", "--db-size", 200, "--seed", 1, "--out", tmp_path / "db.bin") == 0
    assert run("register", "--db", tmp_path / "db.bin", "--frames", dataset / "edges", "--k", 1,
               "--out", tmp_path / "h.csv") == 0
    Hs = formats.read_homographies(tmp_path / "h.csv")
    assert sorted(Hs) == [0, 20]
    assert all(H is None or np.isfinite(H).all() for H in Hs.values())


def test_config_file_and_flag_precedence(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("tau = 0.0\n")
    args = ["shots", "--homographies", dataset / "homographies.csv", "--shots", dataset / "shots.csv"]
    assert run(*args, "--config", cfg, "--out", tmp_path / "a.csv") == 0
    assert formats.read_classification(tmp_path / "a.csv")[0][3] == "other"
    assert run(*args, "--config", cfg, "--tau", 0.35, "--out", tmp_path / "b.csv") == 0
    assert formats.read_classification(tmp_path / "b.csv")[0][3] == "main"


@pytest.mark.parametrize("make, argv", [
    (lambda p: p.write_text("frame,h11\n0,1\n"),
     ["shots", "--homographies", "{f}", "--shots", "{f}", "--out", "{o}"]),
    (lambda p: p.write_text('{"frame": 0, "x1": 1\n'),
     ["extract", "--detections", "{f}", "--homographies", "{f}", "--out", "{o}"]),
    (lambda p: p.write_bytes(b"not a database"),
     ["register", "--db", "{f}", "--frames", "{d}", "--out", "{o}"]),
    (lambda p: p.write_text("frame,player_id,team,x,y\n0,a,A,1,oops\n"),
     ["eval", "--positions", "{f}", "--gt", "{f}", "--out", "{o}"]),
    (lambda p: p.write_text("tau = fast\n"),
     ["shots", "--config", "{f}", "--homographies", "{f}", "--shots", "{f}", "--out", "{o}"]),
])
def test_malformed_input_exits_2(tmp_path, capsys, make, argv):
    f = tmp_path / "bad"
    make(f)
    argv = [a.format(f=f, o=tmp_path / "out", d=tmp_path) for a in argv]
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"pitchpos {argv[0]}:") and len(err.strip().splitlines()) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pitchpos", "eval", "--positions", str(tmp_path / "x"),
                        "--gt", str(tmp_path / "y"), "--out", str(tmp_path / "z")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "pitchpos eval:" in r.stderr
    r = subprocess.run([sys.executable, "-m", "pitchpos", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "builddb" in r.stdout
