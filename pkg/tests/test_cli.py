import pytest

from memd.cli import EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, cmd_bench, cmd_decompose, cmd_stream, cmd_validate, main
from memd.signal_io import write_csv
from memd.storage_sqlite import SQLiteStorage

SMALL = ["--imfs", "2", "--dirs", "4", "--siftings", "2"]


@pytest.fixture
def mixture_csv(tmp_path, mixture):
    return str(write_csv(tmp_path / "mixture.csv", mixture))


def test_argparse_errors_exit_with_usage_code():
    assert main([]) == EXIT_USAGE
    assert main(["transform"]) == EXIT_USAGE
    assert main(["decompose", "--path", "double"]) == EXIT_USAGE


def test_decompose_writes_artifacts(tmp_path, mixture_csv, capsys):
    out_dir = tmp_path / "out"
    assert cmd_decompose(["--input", mixture_csv, *SMALL, "--out-dir", str(out_dir)]) == EXIT_OK
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "config.json", "imf_1.csv", "imf_2.csv", "residue.csv",
    ]
    assert "IMFs extracted: 2 of 2" in capsys.readouterr().out


def test_decompose_persists_run(tmp_path, mixture_csv):
    db = str(tmp_path / "runs.db")
    args = ["--input", mixture_csv, *SMALL, "--out-dir", str(tmp_path / "out"), "--db", db]
    assert cmd_decompose(args) == EXIT_OK
    runs = SQLiteStorage(db).list_runs()
    assert len(runs) == 1
    assert runs[0]["name"] == "mixture.csv"
    assert runs[0]["metadata"]["command"] == "decompose"


@pytest.mark.parametrize("args", [
    [],
    ["--preset", "quadtone", "--input", "x.csv"],
    ["--input", "does-not-exist.csv"],
    ["--preset", "sawtooth"],
    ["--preset", "quadtone", "--dirs", "0"],
])
def test_input_errors(tmp_path, args, capsys):
    assert cmd_decompose([*args, "--out-dir", str(tmp_path / "out")]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_validate_plain_input_passes(mixture_csv, capsys):
    assert cmd_validate(["--input", mixture_csv, *SMALL]) == EXIT_OK
    assert capsys.readouterr().out.rstrip().endswith("PASS")


def test_validate_reports_threshold_failure(capsys):
    # a single IMF cannot fill the four-row correlation table
    code = cmd_validate(["--preset", "quadtone", "--length", "1200", "--imfs", "1", "--dirs", "4", "--siftings", "1"])
    assert code == EXIT_THRESHOLD
    assert "FAIL" in capsys.readouterr().out


def test_stream_matches_batch(mixture_csv, capsys):
    assert cmd_stream(["--input", mixture_csv, *SMALL, "--block", "7"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "interior match: exact" in out
    assert "full-record match: exact" in out


BENCH_ARGS = ["--imfs", "1", "--dirs", "2", "--siftings", "1", "--repetitions", "10"]


def test_bench_prints_both_paths(mixture_csv, capsys, monkeypatch):
    monkeypatch.setattr("memd.cli.BENCH_TARGET", 0.0)
    assert cmd_bench(["--input", mixture_csv, *BENCH_ARGS]) == EXIT_OK
    out = capsys.readouterr().out
    assert "real" in out
    assert "fixed" in out
    assert "met: yes" in out


def test_bench_below_target_exits_with_threshold_code(mixture_csv, capsys, monkeypatch):
    monkeypatch.setattr("memd.cli.BENCH_TARGET", 1e30)
    assert cmd_bench(["--input", mixture_csv, *BENCH_ARGS]) == EXIT_THRESHOLD
    assert "met: no" in capsys.readouterr().out


def test_support_flag_reaches_sift_config(mixture_csv, capsys):
    assert cmd_stream(["--input", mixture_csv, *SMALL, "--support", "2", "--block", "5"]) == EXIT_OK
    assert "full-record match: exact" in capsys.readouterr().out
