import json
import subprocess
import sys

import pytest

from gazeprint.cli import main

SUBCOMMANDS = ["synth", "segment", "extract", "select-features", "train", "identify", "evaluate"]


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--subjects", "5", "--sessions", "2", "--duration", "20", "--seed", "2",
                 "--out", str(root / "data")]) == 0
    return root


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_exits_zero(sub):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0


def test_missing_input_is_user_error(tmp_path, capsys):
    assert main(["extract", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_is_user_error(tmp_path):
    (tmp_path / "c.txt").write_text("lambda = 7\n")
    assert main(["synth", "--subjects", "2", "--out", str(tmp_path / "d"), "--config", str(tmp_path / "c.txt")]) == 1


def test_synth_writes_files_and_config(cohort):
    files = sorted(p.name for p in (cohort / "data").iterdir())
    assert "P001_S1_RAN.csv" in files and "P005_S2_RAN.geom" in files
    assert "config.txt" in files and "profiles.csv" in files


def test_segment(cohort, capsys):
    out = cohort / "seg"
    assert main(["segment", "--input", str(cohort / "data" / "P001_S1_RAN.csv"), "--out", str(out)]) == 0
    assert "# resolved config" in capsys.readouterr().out
    lines = (out / "P001_S1_RAN_segments.csv").read_text().splitlines()
    assert lines[0] == "kind,start_index,end_index,duration_ms"
    assert len(lines) > 5


def test_extract_train_identify_evaluate(cohort, capsys):
    feat = cohort / "feat"
    assert main(["extract", "--input", str(cohort / "data"), "--out", str(feat)]) == 0
    assert (feat / "features.csv").read_text().startswith("subject,session,kind,fix_duration")
    assert json.loads((feat / "mask.json").read_text())["stimulus"] == "RAN"
    model = cohort / "model" / "m.model"
    assert main(["train", "--features", str(feat / "features.csv"), "--out", str(model), "--k", "8"]) == 0
    assert model.read_text().startswith("gazeprint-model 1\n")
    assert (cohort / "model" / "config.txt").exists()
    capsys.readouterr()

    assert main(["identify", "--model", str(model), "--probe", str(cohort / "data" / "P003_S2_RAN.csv")]) == 0
    out = capsys.readouterr().out
    ranking = out.split("probe P003_S2")[1].split()
    assert ranking[:2] == ["1", "P003"]

    ev = cohort / "eval"
    assert main(["evaluate", "--model", str(model), "--probes", str(cohort / "data"), "--one-to-one",
                 "--out", str(ev)]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1].startswith("R1 = ")
    report = json.loads((ev / "report.json").read_text())
    assert report["n_probes"] == 5 and report["probe_sessions"] == ["S2"]
    for name in ("det.csv", "cmc.csv", "matches.csv", "scores.csv", "summary.txt", "config.txt"):
        assert (ev / name).exists()


def test_select_features(cohort):
    feat = cohort / "feat"
    if not (feat / "features.csv").exists():
        main(["extract", "--input", str(cohort / "data"), "--out", str(feat)])
    out = cohort / "sel"
    assert main(["select-features", "--features", str(feat / "features.csv"), "--iterations", "1",
                 "--fraction", "1.0", "--k", "4", "--out", str(out)]) == 0
    mask = json.loads((out / "mask.json").read_text())
    assert any(mask["fixation"]["mask"]) or any(mask["saccade"]["mask"])
    model = cohort / "sel_model.txt"
    assert main(["train", "--features", str(feat / "features.csv"), "--masks", str(out / "mask.json"),
                 "--k", "4", "--out", str(model)]) == 0


def test_one_to_one_needs_square(cohort, tmp_path):
    feat = cohort / "feat"
    if not (feat / "features.csv").exists():
        main(["extract", "--input", str(cohort / "data"), "--out", str(feat)])
    model = tmp_path / "m.txt"
    # enroll 3 of 5 subjects, then ask for a one-to-one matching against 5 probes
    assert main(["train", "--features", str(feat / "features.csv"), "--fraction", "0.6", "--k", "4",
                 "--out", str(model)]) == 0
    assert main(["evaluate", "--model", str(model), "--probes", str(feat / "features.csv"),
                 "--out", str(tmp_path / "e")]) == 0
    assert main(["evaluate", "--model", str(model), "--probes", str(feat / "features.csv"), "--one-to-one",
                 "--out", str(tmp_path / "e2")]) == 1
    assert main(["train", "--features", str(feat / "features.csv"), "--session", "S9",
                 "--out", str(tmp_path / "x")]) == 1


def test_console_script_exit_status(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gazeprint.cli", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1
    proc = subprocess.run([sys.executable, "-m", "gazeprint.cli", "train", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--features" in proc.stdout


def test_internal_error_exits_two(monkeypatch, tmp_path):
    import gazeprint.cli as cli

    def boom(*args, **kwargs):
        raise AssertionError("broken invariant")

    monkeypatch.setattr(cli, "make_profiles", boom)
    assert main(["synth", "--subjects", "2", "--out", str(tmp_path / "d")]) == 2


def test_outputs_are_byte_identical(cohort, tmp_path):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["extract", "--input", str(cohort / "data"), "--out", str(out / "feat")]) == 0
        assert main(["train", "--features", str(out / "feat" / "features.csv"), "--k", "4",
                     "--out", str(out / "m.txt")]) == 0
        assert main(["evaluate", "--model", str(out / "m.txt"), "--probes", str(out / "feat" / "features.csv"),
                     "--out", str(out / "eval")]) == 0
        files = ["feat/features.csv", "feat/mask.json", "m.txt", "eval/scores.csv", "eval/det.csv", "eval/report.json"]
        digests.append([(out / f).read_bytes() for f in files])
    assert digests[0] == digests[1]
