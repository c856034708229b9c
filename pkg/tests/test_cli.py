import pytest

from eedi import __version__, config, presets
from eedi.cli import main


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_presets_list_and_show(capsys):
    assert main(["presets", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert names == presets.names()
    assert main(["presets", "show", "box_single"]) == 0
    assert config.loads(capsys.readouterr().out) == presets.box_single()
    with pytest.raises(SystemExit, match="unknown preset"):
        main(["presets", "show", "nope"])


def test_run_batch_summarize(tmp_path, capsys):
    sc = presets.line_distractor().replace(max_runtime=2.0)
    path = tmp_path / "s.yaml"
    config.save(sc, path)
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "r"), "--controller", "rw"]) == 0
    assert capsys.readouterr().out.startswith("RW: ")
    out = tmp_path / "b"
    assert main(["batch", "--scenario", str(path), "--out", str(out), "--trials", "2",
                 "--controller", "EEDI", "IM", "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "controller,success_pct,slowdown"
    assert (out / "summary.csv").read_text() == text
    assert main(["summarize", str(out / "trials.jsonl")]) == 0
    assert capsys.readouterr().out == text


def test_errors(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--preset", "line_distractor", "--controller", "XYZ"])
    with pytest.raises(SystemExit, match="required"):
        main(["run"])
    with pytest.raises(SystemExit, match="trials"):
        main(["batch", "--preset", "line_distractor", "--trials", "0"])
    bad = tmp_path / "bad.yaml"
    bad.write_text("domain: {lengths: [1.0]}\nhorizon_T: 1.05\ndt: 0.1\nbelief_resolution: [11]\n")
    with pytest.raises(SystemExit, match="horizon_T"):
        main(["run", "--scenario", str(bad)])
