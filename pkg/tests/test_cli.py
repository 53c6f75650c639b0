import io
import subprocess
import sys

import pytest

from boat.cli import main
from boat.corpus import MANIFEST, load_corpus
from boat.engine import plan, read_json, render_output, run
from boat.lang import check_source
from boat.storage import open_dataset

A4 = str(MANIFEST.parent / "programs" / "A4.boat")


def cli(*argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def error_line(err):
    lines = [l for l in err.splitlines() if l.startswith("ERR_")]
    assert len(lines) == 1, err
    return lines[0]


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    code, out, _ = cli("gen", "--out", str(root / "raw"), "--seed", "5", "--counties", "3",
                       "--grids", "2", "--speed-grids", "1")
    assert code == 0 and out.count("\n") == 3
    code, out, err = cli("ingest", "--metadata", str(root / "raw" / "grids.csv"),
                         "--weather", str(root / "raw" / "weather.csv"),
                         "--speed", str(root / "raw" / "speed.csv"), "--out", str(root / "ds"))
    assert code == 0, err
    assert "rejected: 0 rows" in out
    return root / "ds"


def test_inspect_reports_ratio(built):
    code, out, _ = cli("inspect", "--data", str(built), "--verify")
    assert code == 0
    fields = dict(line.split("\t", 1) for line in out.splitlines())
    assert fields["counties"] == "3" and fields["verify"] == "ok"
    assert float(fields["ratio"]) > 1
    assert "records=" in fields["weather"]


def test_run_json_matches_library(built):
    code, out, err = cli("run", "--data", str(built), "--program", A4, "--workers", "4",
                         "--format", "json")
    assert code == 0, err
    with open_dataset(built) as ds:
        want = render_output(run(plan(check_source(open(A4).read()), ds, 1)), "json")
    assert out.encode() == want
    assert len(read_json(out)) == 2


def test_run_independent_of_workers_and_env(built, monkeypatch, tmp_path):
    outs = set()
    for w in ("1", "2", "3"):
        outs.add(cli("run", "--data", str(built), "--program", A4, "--workers", w)[1])
    monkeypatch.setenv("BOAT_DATA", str(built))
    outs.add(cli("run", "--program", A4)[1])
    target = tmp_path / "out.txt"
    assert cli("run", "--program", A4, "--output", str(target))[:2] == (0, "")
    outs.add(target.read_text())
    assert len(outs) == 1


def test_run_param_override(built):
    f1 = str(MANIFEST.parent / "programs" / "F1.boat")
    base = cli("run", "--data", str(built), "--program", f1)[1]
    low = cli("run", "--data", str(built), "--program", f1, "--param", "limit=40")[1]
    assert base != low
    code, _, err = cli("run", "--data", str(built), "--program", f1, "--param", "limit=fast")
    assert code == 1 and error_line(err).startswith("ERR_USAGE")


def test_missing_program_flag(built):
    code, out, err = cli("run", "--data", str(built))
    assert code == 1 and out == ""
    assert err.startswith("usage:")
    assert error_line(err).startswith("ERR_USAGE:")


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["run", "--program", A4, "--bogus"],
                                  ["run", "--program", A4, "--workers", "0"],
                                  ["run", "--program", A4, "--format", "xml"]])
def test_usage_errors(argv):
    code, _, err = cli(*argv)
    assert code == 1
    assert error_line(err).startswith("ERR_USAGE")


def test_no_dataset(monkeypatch, tmp_path):
    monkeypatch.delenv("BOAT_DATA", raising=False)
    assert error_line(cli("run", "--program", A4)[2]).startswith("ERR_USAGE")
    code, _, err = cli("run", "--data", str(tmp_path / "none"), "--program", A4)
    assert code == 1 and error_line(err).split(":")[0] in ("ERR_IO", "ERR_STORAGE")


def test_program_errors(built, tmp_path):
    cases = {"ERR_PARSE": "p: County = input\n", "ERR_TYPE": "p: County = input;\nm << 1;\n",
             "ERR_RUNTIME": "p: County = input;\nm: output mean of int;\nm << 1 / 0;\n"}
    for code_name, src in cases.items():
        prog = tmp_path / f"{code_name}.boat"
        prog.write_text(src)
        code, out, err = cli("run", "--data", str(built), "--program", str(prog))
        assert code == 1 and out == ""
        assert error_line(err).startswith(code_name + ":"), err
    code, _, err = cli("run", "--data", str(built), "--program", str(tmp_path / "nope.boat"))
    assert error_line(err).startswith("ERR_IO")


def test_corrupt_dataset_is_storage_error(built, tmp_path):
    import shutil
    broken = tmp_path / "broken"
    shutil.copytree(built, broken)
    (broken / "manifest.btd").write_bytes(b"XXXX" + (broken / "manifest.btd").read_bytes()[4:])
    code, _, err = cli("inspect", "--data", str(broken))
    assert code == 1 and error_line(err).startswith("ERR_STORAGE")


def test_ingest_errors(tmp_path):
    (tmp_path / "g.csv").write_text("grid_id,latitude,longitude,county_code,county_name\n")
    code, _, err = cli("ingest", "--metadata", str(tmp_path / "g.csv"), "--out", str(tmp_path / "d"))
    assert code == 1 and error_line(err).startswith("ERR_INGEST")


def test_corpus_commands(built):
    code, out, _ = cli("corpus", "--check-only")
    assert code == 0 and out.splitlines()[-1] == f"{len(load_corpus())}/26 parse and type-check"
    code, out, err = cli("corpus", "--data", str(built), "--select", "A.4", "--select", "D.*",
                         "--workers", "1,2")
    assert code == 0, out + err
    assert out.splitlines()[-1] == "5/5 passed"
    code, _, err = cli("corpus", "--data", str(built), "--select", "Z.9")
    assert code == 1


def test_bench_csv(built):
    code, out, err = cli("bench", "--data", str(built), "--program", A4, "--workers", "1,2",
                         "--repeats", "1")
    assert code == 0, err
    lines = out.splitlines()
    assert lines[0] == "workers,median_seconds,speedup"
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "2"]
    assert lines[1].endswith(",1.000")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "boat", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("boat ")
    proc = subprocess.run([sys.executable, "-m", "boat", "run"], capture_output=True, text=True)
    assert proc.returncode == 1 and "ERR_USAGE" in proc.stderr
