import json

import pytest

from bmatch.cli import EXIT_DELTA, EXIT_ITER, EXIT_OK, EXIT_PARSE, run

TRIANGLE = "p bm 3 3\nv 1 1\nv 2 1\nv 3 1\ne 1 2 1\ne 2 3 1\ne 1 3 1\n"
CAP_PATH = ("p bm 3 2 cap\nv 1 3\nv 2 4\nv 3 3\n"
            "e 1 2 1 3\ne 2 3 1 2\n")


@pytest.fixture
def triangle_file(tmp_path):
    p = tmp_path / "tri.bm"
    p.write_text(TRIANGLE)
    return str(p)


@pytest.fixture
def cap_file(tmp_path):
    p = tmp_path / "cap.bm"
    p.write_text(CAP_PATH)
    return str(p)


def read_report(path):
    with open(path) as f:
        return json.load(f)


class TestSolve:
    def test_frac_with_verification(self, triangle_file, tmp_path):
        out = tmp_path / "r.json"
        rc = run(["solve", "--input", triangle_file, "--delta", "0.0625",
                  "--verify", "exhaustive", "--report", str(out)])
        assert rc == EXIT_OK
        rep = read_report(out)
        assert rep["converged"] and rep["feasibility_verdict"] == "pass"
        assert rep["ratio"] >= 1 - 14 * 0.0625
        assert rep["wall_time"] is None

    def test_reports_reproducible(self, triangle_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(["solve", "--input", triangle_file, "--delta",
                        "0.0625", "--report", str(out)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_timing_is_optional(self, triangle_file, tmp_path):
        out = tmp_path / "t.json"
        rc = run(["solve", "--input", triangle_file, "--delta", "0.0625",
                  "--timing", "--report", str(out)])
        assert rc == EXIT_OK
        assert read_report(out)["wall_time"] > 0

    def test_int_mode(self, triangle_file, tmp_path):
        out = tmp_path / "i.json"
        rc = run(["solve", "--input", triangle_file, "--delta", "0.0625",
                  "--mode", "int", "--verify", "exhaustive",
                  "--report", str(out)])
        assert rc == EXIT_OK
        rep = read_report(out)
        assert all(v == int(v) for v in rep["assignment"])
        assert rep["feasibility_verdict"] == "pass"
        assert rep["objective"] >= (1 - 16 * 0.0625) * rep["oracle_optimum"]

    def test_capacitated_solve(self, cap_file, tmp_path):
        out = tmp_path / "c.json"
        rc = run(["solve", "--input", cap_file, "--capacitated", "--delta",
                  "0.0625", "--mode", "int", "--verify", "exhaustive",
                  "--report", str(out)])
        assert rc == EXIT_OK
        rep = read_report(out)
        assert rep["feasibility_verdict"] == "pass"
        assert rep["R"] >= 1
        assert rep["support_weight_ledger"] <= 14 * rep["R"] * rep["oracle_optimum"]

    def test_dump_family(self, triangle_file, tmp_path):
        out, fam = tmp_path / "r.json", tmp_path / "fam.json"
        rc = run(["solve", "--input", triangle_file, "--delta", "0.0625",
                  "--report", str(out), "--dump-family", str(fam)])
        assert rc == EXIT_OK
        dumped = read_report(fam)
        assert dumped["lambda"] <= 1 + 8 * 0.0625  # output is feasible

    def test_delta_out_of_range(self, triangle_file, capsys):
        assert run(["solve", "--input", triangle_file,
                    "--delta", "0.2"]) == EXIT_DELTA
        assert "1/16" in capsys.readouterr().err

    def test_iteration_cap(self, tmp_path, capsys):
        # an instance that cannot converge within one iteration
        p = tmp_path / "path.bm"
        p.write_text("p bm 4 3\nv 1 1\nv 2 2\nv 3 2\nv 4 1\n"
                     "e 1 2 3\ne 2 3 4\ne 3 4 5\n")
        assert run(["solve", "--input", str(p), "--delta", "0.0625",
                    "--max-iters", "1"]) == EXIT_ITER

    def test_capacitated_flag_mismatch(self, triangle_file, cap_file):
        assert run(["solve", "--input", triangle_file, "--capacitated",
                    "--delta", "0.0625"]) == EXIT_PARSE
        assert run(["solve", "--input", cap_file,
                    "--delta", "0.0625"]) == EXIT_PARSE

    def test_missing_file(self):
        assert run(["solve", "--input", "/nonexistent.bm",
                    "--delta", "0.0625"]) == EXIT_PARSE

    def test_bad_arguments(self):
        assert run(["solve"]) == EXIT_PARSE
        assert run(["frobnicate"]) == EXIT_PARSE


class TestOracle:
    def test_triangle(self, triangle_file, tmp_path):
        out = tmp_path / "o.json"
        rc = run(["oracle", "--input", triangle_file, "--report", str(out)])
        assert rc == EXIT_OK
        rep = read_report(out)
        assert rep["oracle_optimum"] == 1.0
        assert sum(rep["assignment"]) == 1


class TestRoundOnly:
    def test_rounds_fractional_input(self, triangle_file, tmp_path):
        yfile = tmp_path / "y.json"
        yfile.write_text("[0.5, 0.5, 0.5]")
        out = tmp_path / "r.json"
        rc = run(["round-only", "--input", triangle_file, "--delta", "0.0625",
                  "--assignment", str(yfile), "--verify", "exhaustive",
                  "--report", str(out)])
        assert rc == EXIT_OK
        rep = read_report(out)
        assert rep["feasibility_verdict"] == "pass"
        assert all(v == int(v) for v in rep["assignment"])

    def test_length_mismatch(self, triangle_file, tmp_path):
        yfile = tmp_path / "y.json"
        yfile.write_text("[0.5]")
        assert run(["round-only", "--input", triangle_file, "--delta",
                    "0.0625", "--assignment", str(yfile)]) == EXIT_PARSE
