import json
import subprocess
import sys
from pathlib import Path

import pytest

from ellreg.cli import main, parse_job, run, write_atomic
from ellreg.errors import JobError

P_DIVISOR = {"P": {"1": [[1, {"torus": ["1/5", "0"]}]]}, "twoP": {"1": [[1, {"torus": ["2/5", "0"]}]]}}


def _write(tmp_path: Path, job, name="job.json") -> Path:
    path = tmp_path / name
    path.write_text(job if isinstance(job, str) else json.dumps(job, indent=2))
    return path


def _run(tmp_path, job, *flags):
    out = tmp_path / "report.json"
    code = main([str(_write(tmp_path, job)), "--out", str(out), *flags])
    return code, json.loads(out.read_text())


def test_malformed_point_reports_position(tmp_path, capsys):
    text = ('{\n  "curve": {"label": "11a1"},\n  "divisors": {\n'
            '    "P": {"1": [[1, {"torus": ["1/5", "zz"]}]]}\n  },\n  "task": "dilog", "divisor": "P"\n}\n')
    with pytest.raises(JobError) as err:
        parse_job(text)
    assert err.value.line == 4
    assert err.value.column > 1
    code = main([str(_write(tmp_path, text))])
    assert code == 4
    assert "line 4" in capsys.readouterr().err


def test_json_syntax_error(tmp_path, capsys):
    code = main([str(_write(tmp_path, '{"curve": {"label": "11a1"},\n "task": }'))])
    assert code == 4
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("job, fragment", [
    ({"curve": {"label": "11a1"}, "task": "frobnicate"}, "unknown task"),
    ({"task": "info"}, "curve"),
    ({"curve": {"label": "11a1"}, "task": "dilog", "divisor": "Q", "divisors": P_DIVISOR}, "not defined"),
    ({"curve": {"label": "11a1"}, "task": "dilog", "divisors": P_DIVISOR}, "divisor"),
    ({"curve": {"ainvs": [0, 0, 0, 0, 0], "conductor": 1}, "task": "info"}, ""),
    ({"curve": {"label": "11a1"}, "field": {"m": 10, "H": [5]}, "task": "info"}, "unit"),
])
def test_invalid_jobs(job, fragment):
    with pytest.raises(JobError) as err:
        parse_job(json.dumps(job))
    assert fragment in str(err.value)


def test_missing_file(tmp_path):
    assert main([str(tmp_path / "nope.json")]) == 4


def test_info(tmp_path):
    code, report = _run(tmp_path, {"curve": {"label": "11a1"}, "task": "info"}, "--prec", "128")
    assert code == 0
    assert report["result"]["curve"]["discriminant"] == "-161051"
    q = report["result"]["lattice"]["q"]
    assert float(q["re"]) < 0 and "im" not in q
    assert q["bits"] == 128 and "err" in q
    assert "timings" not in report


def test_timings_flag(tmp_path):
    _, report = _run(tmp_path, {"curve": {"label": "11a1"}, "task": "info"}, "--prec", "128", "--timings")
    assert report["timings"]["total_seconds"] >= 0


def test_prop11(tmp_path):
    job = {"curve": {"label": "11a1"}, "field": {"m": 5, "H": []}, "task": "check-prop11"}
    code, report = _run(tmp_path, job, "--prec", "192")
    assert code == 0 and report["verdict"] == "PASS"
    assert float(report["result"]["max_defect"]) < 1e-30
    assert report["result"]["p_max"] == 200


def test_reports_are_deterministic(tmp_path):
    job = _write(tmp_path, {"curve": {"label": "11a1"}, "divisors": P_DIVISOR, "task": "dilog", "divisor": "P"})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main([str(job), "--prec", "128", "--out", str(a)]) == 0
    assert main([str(job), "--prec", "128", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_write_atomic(tmp_path):
    target = tmp_path / "sub" / "r.json"
    write_atomic(target, {"a": 1})
    write_atomic(target, {"a": 2})
    assert json.loads(target.read_text()) == {"a": 2}
    assert sorted(p.name for p in target.parent.iterdir()) == ["r.json"]


def test_theorem1_exit_codes(tmp_path):
    fail = {"curve": {"label": "11a1"}, "divisors": P_DIVISOR, "task": "check-theorem1", "divisor": "P"}
    code, report = _run(tmp_path, fail, "--prec", "133")
    assert code == 2 and report["verdict"] == "FAIL"
    half = {"H": {"1": [[1, {"torus": ["1/2", "0"]}]]}}
    degenerate = {"curve": {"label": "11a1"}, "divisors": half, "task": "check-theorem1", "divisor": "H"}
    code, report = _run(tmp_path, degenerate, "--prec", "133")
    assert code == 3 and report["verdict"] == "INDETERMINATE"


def test_search_job(tmp_path):
    job = {"curve": {"label": "11a1"}, "divisors": P_DIVISOR, "task": "search", "pool": ["P", "twoP"]}
    code, report = _run(tmp_path, job, "--prec", "160")
    assert code == 0
    result = report["result"]
    assert result["found"] and result["revalidated"]
    assert {k: abs(v) for k, v in result["coefficients"].items()} == {"P": 2, "twoP": 1}
    assert result["characters"][0]["guess"] in ("1/5", "-1/5")


def test_xy_points_go_through_the_elliptic_log(tmp_path):
    # (5, 5) is a 5-torsion point of 11a1; it sits at (3/5, 0) on the torus
    xy = {"Q": {"1": [[1, {"xy": {"x": ["5", "0"], "y": ["5", "0"]}}]]}}
    job = {"curve": {"label": "11a1"}, "divisors": xy, "task": "dilog", "divisor": "Q"}
    code, report = _run(tmp_path, job, "--prec", "128")
    assert code == 0
    value = report["result"]["values"][0]
    assert abs(float(value["D"]["re"]) + 0.418023397307522805) < 1e-15


def test_cache_dir(tmp_path):
    job = {"curve": {"label": "11a1"}, "task": "lvalue"}
    code, _ = _run(tmp_path, job, "--prec", "128", "--cache-dir", str(tmp_path / "cache"))
    assert code == 0
    lines = (tmp_path / "cache" / "11a1.ap").read_text().splitlines()
    assert lines and all(len(line.split("\t")) == 2 for line in lines)


def test_module_entry_point(tmp_path):
    job = _write(tmp_path, {"curve": {"label": "37a1"}, "task": "info"})
    proc = subprocess.run([sys.executable, "-m", "ellreg", str(job), "--prec", "96"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["curve"]["discriminant"] == "37"


def test_run_returns_report_without_writing(tmp_path):
    job = parse_job(json.dumps({"curve": {"label": "11a1"}, "task": "info", "parameters": {"prec": 96}}))
    code, report = run(job)
    assert code == 0 and report["precision"]["bits"] == 96
