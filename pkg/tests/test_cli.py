import json
import os

import pytest

from mutualloc.cli import main
from mutualloc.runlog import ERROR_COLUMNS, fmt, loads_runlog, dumps_runlog

SMALL = {"n_robots": 3, "seed": 1, "duration": 2.0}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def test_run_writes_outputs_with_schemas(small_cfg, tmp_path):
    out = str(tmp_path / "o")
    assert main(["run", small_cfg, "--out", out, "--baseline"]) == 0
    for name in ("errors.csv", "estimates.csv", "truth.csv"):
        text = read(os.path.join(out, name))
        assert text.startswith("# schema: ")
        header = text.splitlines()[0][len("# schema: "):]
        assert text.splitlines()[2] == header
    errors = read(os.path.join(out, "errors.csv")).splitlines()
    assert errors[2].split(",") == list(ERROR_COLUMNS)
    assert len(errors) == 3 + 21
    summary = json.loads(read(os.path.join(out, "summary.json")))
    for key in ("final_e_abs", "final_e_rel", "time_to_converge_s", "mean_hypotheses",
                "total_wall_time_s", "config"):
        assert key in summary
    assert summary["total_wall_time_s"] is None
    assert summary["final_e_rel_baseline"] is not None


def test_run_twice_is_byte_identical(small_cfg, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", small_cfg, "--out", a]) == 0
    assert main(["run", small_cfg, "--out", b]) == 0
    for name in ("errors.csv", "estimates.csv", "truth.csv", "summary.json", "runlog.jsonl"):
        assert read(os.path.join(a, name)) == read(os.path.join(b, name))


def test_timing_flag_records_time(small_cfg, tmp_path):
    out = str(tmp_path / "t")
    assert main(["run", small_cfg, "--out", out, "--timing"]) == 0
    assert json.loads(read(os.path.join(out, "summary.json")))["total_wall_time_s"] > 0
    assert main(["replay", os.path.join(out, "runlog.jsonl")]) == 0


def test_replay_ok_and_tampering(small_cfg, tmp_path, capsys):
    out = str(tmp_path / "r")
    main(["run", small_cfg, "--out", out])
    log = os.path.join(out, "runlog.jsonl")
    assert main(["replay", log]) == 0
    text = read(log)
    lines = text.splitlines(keepends=True)
    lines[3] = lines[3].replace('"n_hypotheses": ', '"n_hypotheses": 1')
    with open(log, "w", encoding="utf-8") as fh:
        fh.write("".join(lines))
    assert main(["replay", log]) == 4
    assert "checksum mismatch" in capsys.readouterr().err


def test_replay_detects_edited_summary(small_cfg, tmp_path):
    out = str(tmp_path / "s")
    main(["run", small_cfg, "--out", out])
    path = os.path.join(out, "summary.json")
    s = json.loads(read(path))
    s["final_e_rel"] = 0.0
    with open(path, "w") as fh:
        json.dump(s, fh)
    assert main(["replay", os.path.join(out, "runlog.jsonl")]) == 4


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"robots_count": 3}')
    assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "did you mean 'n_robots'" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["bench", "--robots", "3,x"]) == 2
    assert main(["bench", "--robots", "1"]) == 2


def test_runtime_error_exit_3(tmp_path):
    assert main(["replay", str(tmp_path / "nothing.jsonl")]) == 3


def test_trials_use_derived_seeds(small_cfg, tmp_path):
    out = str(tmp_path / "trials")
    assert main(["run", small_cfg, "--out", out, "--trials", "2", "--jobs", "2"]) == 0
    seeds = [json.loads(read(os.path.join(out, d, "summary.json")))["seed"]
             for d in ("trial_000", "trial_001")]
    assert seeds == [1, 2]


def test_bench_writes_csv(tmp_path):
    out = str(tmp_path / "b")
    assert main(["bench", "--robots", "2,3", "--steps", "3", "--out", out]) == 0
    lines = read(os.path.join(out, "bench.csv")).splitlines()
    assert lines[0].startswith("# schema: n_robots,t_with_us,t_without_us,speedup")
    assert len(lines) == 3 + 2


def test_bench_cap_skips(tmp_path):
    out = str(tmp_path / "c")
    assert main(["bench", "--robots", "3", "--steps", "2", "--cap", "2", "--out", out]) == 0
    row = read(os.path.join(out, "bench.csv")).splitlines()[-1].split(",")
    assert row[2] == "nan" and row[-1] == "1"


def test_fmt_roundtrip():
    for v in (0.1, 1 / 3, 1e-300, 123456789.123):
        assert float(fmt(v)) == v
    assert fmt(float("nan")) == "nan" and fmt(3) == "3"


def test_runlog_roundtrip():
    from mutualloc.config import config_from_dict
    from mutualloc.simulator import run_scenario
    log = run_scenario(config_from_dict(dict(SMALL, duration=0.5)))
    text = dumps_runlog(log)
    back = loads_runlog(text)
    assert dumps_runlog(back) == text
