import csv
import io
import json
import math
import subprocess
import sys

import pytest

from nilcircle import __version__
from nilcircle.cli import is_prime, main, next_prime, parse_float_list, parse_int_range


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def header(text):
    return {line[2:].split(":", 1)[0]: line.split(":", 1)[1].strip()
            for line in text.splitlines() if line.startswith("# ") and ":" in line}


# --- argument helpers -------------------------------------------------------

def test_range_parsing():
    assert parse_int_range("3..7") == [3, 4, 5, 6, 7]
    assert parse_int_range("2..10:4") == [2, 6, 10]
    assert parse_int_range("2,3,5") == [2, 3, 5]
    assert parse_float_list("1,2.5,inf") == [1.0, 2.5, math.inf]
    assert is_prime(97) and not is_prime(91) and next_prime(90) == 97


# --- subcommands ------------------------------------------------------------

def test_gauss_scan_row_for_three(capsys):
    code, out, _ = run(capsys, "gauss-scan", "--d", "2", "--q", "3..97", "--primes-only")
    assert code == 0
    rows = table(out)
    assert [int(r["q"]) for r in rows][:4] == [3, 5, 7, 11]
    assert float(rows[0]["max_abs"]) == pytest.approx(3**-0.5, abs=1e-5)
    meta = header(out)
    assert meta["command"] == "gauss-scan" and json.loads(meta["params"])["q"] == "3..97"
    assert __version__ in out.splitlines()[0]
    assert "decay_fit" in meta


def test_selfcheck_passes(capsys):
    code, out, _ = run(capsys, "selfcheck", "--d", "2", "--quick")
    assert code == 0
    assert table(out) and all(r["passed"] == "true" for r in table(out))


def test_decompose_json_report(capsys):
    code, out, _ = run(capsys, "decompose", "--d", "2", "--k", "6", "--tau", "2", "--delta", "0.4", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["reconstruction_residual"] < 1e-9
    assert doc["params"]["k"] == 6 and doc["version"] == __version__


def test_other_subcommands(capsys):
    code, out, _ = run(capsys, "nilgauss-scan", "--q", "2..5")
    assert code == 0 and all(float(r["max_abs_all"]) <= 1 + 1e-12 for r in table(out))
    code, out, _ = run(capsys, "weyl-scan", "--P", "64,256")
    assert code == 0 and len(table(out)) == 2
    code, out, _ = run(capsys, "ergodic-run", "--log2N", "14")
    assert code == 0 and float(table(out)[0]["convergence_error"]) < 0.02
    code, out, _ = run(capsys, "variation", "--values", "0,1,0", "--rho", "1,2,inf")
    rows = table(out)
    assert [r["kind"] for r in rows] == ["variation", "variation", "sup_norm"]
    assert float(rows[1]["value"]) == pytest.approx(math.sqrt(2), abs=1e-10)
    code, out, _ = run(capsys, "quasi-geometry", "--r", "2")
    assert code == 0 and table(out)[0]["count"] == "315"


# --- exit codes -------------------------------------------------------------

def test_invalid_parameters_exit_2(capsys):
    for argv in (["gauss-scan", "--q", "0..5"], ["nope"], ["variation", "--rho", "0.5"],
                 ["gauss-scan", "--gnuplot", "x.gp"], []):
        code, out, err = run(capsys, *argv)
        assert code == 2, argv
        record = json.loads(err.strip().splitlines()[-1])
        assert record["exit_code"] == 2 and record["error"] == "invalid_parameters" and record["message"]


def test_infeasible_exit_3(capsys):
    code, _, err = run(capsys, "gauss-scan", "--d", "4", "--q", "200")
    assert code == 3 and json.loads(err)["error"] == "infeasible"


def test_io_failure_exit_4(capsys, tmp_path):
    code, _, err = run(capsys, "variation", "--values", "1,2", "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 4 and json.loads(err)["error"] == "io_error"


# --- config, determinism, artifacts -----------------------------------------

def test_config_overrides_flags(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"q": "5..7", "primes-only": True}))
    code, out, _ = run(capsys, "gauss-scan", "--q", "2..30", "--config", str(cfg))
    assert code == 0 and [r["q"] for r in table(out)] == ["5", "7"]
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "gauss-scan", "--config", str(cfg))[0] == 2
    cfg.write_text("[1, 2]")
    assert run(capsys, "gauss-scan", "--config", str(cfg))[0] == 2


def test_threads_variable_is_validated(capsys, monkeypatch):
    monkeypatch.setenv("NILCIRCLE_THREADS", "zero")
    assert run(capsys, "variation", "--values", "1,2")[0] == 2
    monkeypatch.setenv("NILCIRCLE_THREADS", "3")
    assert run(capsys, "variation", "--values", "1,2")[0] == 0


def test_repeated_runs_are_byte_identical(tmp_path):
    paths = [tmp_path / f"run{i}.csv" for i in range(2)]
    for p in paths:
        assert main(["gauss-scan", "--q", "2..40", "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    for p in paths:
        assert main(["variation", "--length", "64", "--seed", "3", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_timestamp_only_on_request(capsys):
    _, plain, _ = run(capsys, "variation", "--values", "1,2")
    _, stamped, _ = run(capsys, "variation", "--values", "1,2", "--timestamp")
    assert "timestamp" not in plain and "timestamp" in header(stamped)
    assert table(plain) == table(stamped)


def test_gnuplot_script(tmp_path):
    data, script = tmp_path / "v.csv", tmp_path / "v.gp"
    assert main(["variation", "--values", "0,3,1", "--out", str(data), "--gnuplot", str(script)]) == 0
    text = script.read_text()
    assert str(data) in text and "using 1:2" in text and "using 1:3" not in text


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nilcircle.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
