import filecmp
import subprocess
import sys
from pathlib import Path

import pytest

from sskmeans.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def six_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("six")
    assert main(["run", str(CONFIGS / "six_point.cfg"), "-o", str(out)]) == 0
    return out


def test_run_bundled_configs(tmp_path):
    for name in ("six_point.cfg", "mixture.cfg"):
        out = tmp_path / name
        assert main(["run", str(CONFIGS / name), "-o", str(out)]) == 0
        assert (out / "metrics.csv").read_text().startswith("run_id,")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sskmeans", "run", str(CONFIGS / "six_point.cfg"), "-o", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "agreement=True" in proc.stdout


def test_analyze_matches_inline_report(six_run, tmp_path):
    report = tmp_path / "offline.jsonl"
    code = main(["analyze", str(six_run / "transcripts"), "--corrupted", "2,5", "-o", str(report)])
    assert code == 0
    assert report.read_bytes() == (six_run / "leakage.jsonl").read_bytes()


def test_analyze_to_stdout(six_run, capsys):
    assert main(["analyze", str(six_run / "transcripts"), "--corrupted", "2,5"]) == 0
    assert capsys.readouterr().out == (six_run / "leakage.jsonl").read_text()


def test_oracle_centers_identical_to_run(six_run, tmp_path):
    assert main(["oracle", str(CONFIGS / "six_point.cfg"), "-o", str(tmp_path)]) == 0
    for name in ("centers.csv", "center_history.csv", "labels.csv"):
        assert filecmp.cmp(tmp_path / name, six_run / name, shallow=False)


def test_gen_data(tmp_path):
    out = tmp_path / "data.csv"
    assert main(["gen-data", str(CONFIGS / "mixture.cfg"), "-o", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 24 and all(len(r.split(",")) == 2 for r in rows)
    again = tmp_path / "again.csv"
    main(["gen-data", str(CONFIGS / "mixture.cfg"), "-o", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_sweep(tmp_path):
    assert main(["sweep", str(CONFIGS / "six_point.cfg"), "--trials", "2", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "sweep_summary.json").exists()


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["run", "x.cfg", "--bogus"])
    assert exc.value.code != 0
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["analyze", str(tmp_path), "--corrupted", "1"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("kmeans.k = 0\n")
    assert main(["run", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
