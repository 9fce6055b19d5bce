import csv
import io
import json
import subprocess
import sys

import pytest

from nare.cli import CSV_HEADER, BenchRow, main, parse_grid, read_csv, write_csv


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_csv(capsys):
    code, out, _ = run(["solve", "--alpha", "0.5", "--c", "0.5", "--n", "16"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1][:5] == ["0.5", "0.5", "16", "tsmnm", rows[1][4]]
    assert rows[1][-1] == "true" and "e" in rows[1][5]


def test_solve_json_with_trace(capsys):
    code, out, _ = run(["solve", "--alpha", "0.5", "--c", "0.5", "--n", "16", "--trace", "--format", "json"],
                       capsys)
    rec = json.loads(out)
    assert code == 0 and rec["converged"]
    assert len(rec["res_history"]) == rec["iterations"]
    assert rec["monotone_violations"] == 0


def test_solve_csv_trace_sections(capsys):
    code, out, _ = run(["solve", "--alpha", "0.7", "--c", "0.3", "--n", "8", "--method", "nm", "--trace"], capsys)
    assert code == 0 and "# res_history" in out and "monotone_violations" not in out


def test_solve_not_converged_exit_1(capsys):
    code, out, _ = run(["solve", "--alpha", "0.5", "--c", "0.5", "--n", "8", "--method", "fpi", "--max-iter", "2"],
                       capsys)
    assert code == 1 and out.strip().endswith("false")


def test_solve_numerical_failure_record(capsys, monkeypatch):
    import nare.cli as cli
    from nare.solvers import SingularStepError

    def boom(problem, config):
        raise SingularStepError("singular Schur complement", 3)

    monkeypatch.setattr(cli, "solve", boom)
    code, out, _ = run(["solve", "--alpha", "0.5", "--c", "0.5", "--n", "8"], capsys)
    rec = json.loads(out)
    assert code == 1 and rec["error"] == "singular_step" and rec["iteration"] == 3


@pytest.mark.parametrize("args,msg", [
    (["solve", "--alpha", "0.5", "--c", "0.5", "--n", "1023"], "divisible by 4"),
    (["solve", "--alpha", "1.5", "--c", "0.5", "--n", "8"], "alpha"),
    (["solve", "--alpha", "0.5", "--c", "0.5", "--n", "8", "--method", "bogus"], "unknown method"),
    (["bench", "--methods", ""], "empty"),
    (["bench", "--methods", ",", "--n-list", "8"], "empty"),
])
def test_usage_errors_exit_2(args, msg, capsys):
    code, _, err = run(args, capsys)
    assert code == 2 and msg in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--alpha", "x"])
    assert info.value.code == 2


def test_bench_grid_file(tmp_path, capsys):
    grid = tmp_path / "grid.txt"
    grid.write_text("# alpha, c\n0.9, 0.1\n0.5 0.5\n")
    out = tmp_path / "bench.csv"
    code, _, _ = run(["bench", "--grid", str(grid), "--n-list", "8,16", "--methods", "tsmnm,nsm(3)",
                      "--repeats", "2", "--workers", "2", "--out", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_csv(io.StringIO(text))
    assert len(rows) == 8
    assert [(r.n, r.alpha, r.method) for r in rows[:4]] == [
        (8, 0.9, "tsmnm"), (8, 0.9, "nsm(3)"), (8, 0.5, "tsmnm"), (8, 0.5, "nsm(3)")]
    assert all(r.converged and r.res_final >= 0 and r.elapsed_ms >= 0 for r in rows)


def test_bench_records_failures_in_row(capsys):
    code, out, _ = run(["bench", "--n-list", "8", "--methods", "fpi", "--max-iter", "1"], capsys)
    rows = read_csv(io.StringIO(out))
    assert code == 0 and len(rows) == 8 and not any(r.converged for r in rows)


def test_bad_grid_file(tmp_path, capsys):
    grid = tmp_path / "grid.txt"
    grid.write_text("0.5\n")
    code, _, err = run(["bench", "--grid", str(grid)], capsys)
    assert code == 2 and "grid line 1" in err
    code, _, _ = run(["bench", "--grid", str(tmp_path / "missing")], capsys)
    assert code == 2


def test_parse_grid():
    assert parse_grid("1e-3,0.999\n\n0.1 0.9 # c\n") == [(1e-3, 0.999), (0.1, 0.9)]


def test_csv_round_trip_is_byte_identical():
    rows = [BenchRow(1e-8, 1 - 1e-8, 1024, "nsm(3)", 11, 3.0637487e-16, 123.456789012, True),
            BenchRow(0.3, 0.7, 64, "fpi", 0, float("nan"), 0.0, False)]
    first = io.StringIO()
    write_csv(rows, first)
    again = io.StringIO()
    write_csv(read_csv(io.StringIO(first.getvalue())), again)
    assert first.getvalue() == again.getvalue()
    line = first.getvalue().splitlines()[1].split(",")
    assert float(line[1]) == 1 - 1e-8  # full precision kept


def test_history(capsys):
    code, out, _ = run(["history", "--alpha", "0.5", "--c", "0.5", "--n", "8", "--methods", "nm,nsm(1)"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["method", "k", "res"]
    nm = [r[2] for r in rows[1:] if r[0] == "nm"]
    nsm1 = [r[2] for r in rows[1:] if r[0] == "nsm(1)"]
    assert nm == nsm1 and rows[1][1] == "1"


def test_diagnose_refusal_exit_3(capsys):
    code, out, _ = run(["diagnose", "--alpha", "0.5", "--c", "0.5", "--n", "16"], capsys)
    rec = json.loads(out)
    assert code == 3 and rec["refused"] and rec["sigma_min"] > 1e-2


def test_diagnose_singular(tmp_path, capsys):
    out = tmp_path / "d.json"
    code, _, _ = run(["diagnose", "--alpha", "0", "--c", "1", "--n", "32", "--theta", "0.5", "--out", str(out)],
                     capsys)
    rec = json.loads(out.read_text())
    assert code == 0 and not rec["refused"]
    assert rec["sigma_min"] < 1e-4
    assert rec["fitted_order"] == pytest.approx(1.0, abs=0.3)
    assert all(it["in_W"] for it in rec["iterates"][1:20])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nare", "solve", "--alpha", "0.9", "--c", "0.1", "--n", "8",
                           "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["converged"]
