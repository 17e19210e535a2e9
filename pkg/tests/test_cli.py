import json

import numpy as np
import pytest

from memloop import cli

PAPER_LOOP = '{"loop":{"a":[2,5],"b":[8,1]}}'
COUNTEREXAMPLE = '{"kernel":{"terms":[[3,1,0],[-8,2,0],[6,3,0]]}}'


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestMp2Me:
    def test_kernel_exponents(self, capsys):
        code, out, _ = run(capsys, "mp2me", "--loop", PAPER_LOOP)
        assert code == 0
        payload = json.loads(out)
        rates = sorted(term[1] for term in payload["kernel"]["terms"])
        assert rates == [1.0, 8.0]

    def test_reads_from_file(self, capsys, tmp_path):
        path = tmp_path / "loop.json"
        path.write_text(PAPER_LOOP)
        code, out, _ = run(capsys, "mp2me", "--loop", str(path))
        assert code == 0
        assert "kernel" in json.loads(out)

    def test_writes_figure(self, capsys, tmp_path):
        fig = tmp_path / "kernel.png"
        code, _, _ = run(
            capsys, "mp2me", "--loop", PAPER_LOOP, "--out",
            str(tmp_path / "k.json"), "--plot", str(fig),
        )
        assert code == 0
        assert fig.stat().st_size > 0


class TestMe2Mp:
    def test_feasible_kernel(self, capsys):
        code, out, _ = run(
            capsys, "me2mp", "--a", "1.5",
            "--kernel", '{"kernel":{"terms":[[1,1,0],[1,2,0]]}}',
        )
        assert code == 0
        gen = json.loads(out)["generator"]
        assert gen["n"] == 3

    def test_counterexample_reports_infeasible(self, capsys):
        code, out, err = run(
            capsys, "me2mp", "--a", "1", "--kernel", COUNTEREXAMPLE
        )
        assert code == 1
        report = json.loads(out)
        assert report["infeasible"] is True
        assert len(report["certificates"]) == 6
        assert all(c["min_weight"] < -1e-10 for c in report["certificates"])

    def test_inconsistent_mass_is_domain_error(self, capsys):
        code, _, err = run(
            capsys, "me2mp", "--a", "2",
            "--kernel", '{"kernel":{"terms":[[1,1,0]]}}',
        )
        assert code == 1
        assert "InconsistentMass" in err

    def test_json_errors_flag(self, capsys):
        code, _, err = run(
            capsys, "--json-errors", "me2mp", "--a", "2",
            "--kernel", '{"kernel":{"terms":[[1,1,0]]}}',
        )
        assert code == 1
        payload = json.loads(err)
        assert payload["error"] == "InconsistentMass"


class TestSolve:
    def test_row_count(self, capsys):
        code, out, _ = run(
            capsys, "solve", "--loop", PAPER_LOOP, "--method", "volterra",
            "--h", "0.001", "--t-end", "10",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "t,u"
        assert len(lines) == 10002  # header + 10001 samples

    def test_methods_agree(self, capsys):
        results = {}
        for method in ("volterra", "chain", "closed-form"):
            code, out, err = run(
                capsys, "solve", "--loop", PAPER_LOOP, "--method", method,
                "--h", "0.01", "--t-end", "5",
            )
            assert code == 0
            last = out.strip().splitlines()[-1].split(",")
            results[method] = float(last[1])
        values = list(results.values())
        assert max(values) - min(values) <= 1e-3

    def test_summary_contents(self, capsys, tmp_path):
        summary_path = tmp_path / "summary.json"
        code, out, _ = run(
            capsys, "solve", "--loop", PAPER_LOOP, "--method", "closed-form",
            "--h", "0.01", "--t-end", "2", "--summary", str(summary_path),
        )
        assert code == 0
        payload = json.loads(summary_path.read_text())
        assert payload["u_infinity"] == pytest.approx(8 / 55, rel=1e-10)
        pole_reals = sorted(p[0] for p in payload["poles"])
        assert pole_reals == pytest.approx([-11.0, -5.0, 0.0], abs=1e-8)

    def test_deterministic_output(self, capsys):
        argv = ["solve", "--loop", PAPER_LOOP, "--h", "0.01", "--t-end", "3"]
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_kernel_route(self, capsys):
        code, out, _ = run(
            capsys, "solve", "--a", "1", "--kernel",
            '{"kernel":{"terms":[[1,1,0]]}}', "--h", "0.01", "--t-end", "5",
        )
        assert code == 0
        last = float(out.strip().splitlines()[-1].split(",")[1])
        assert last == pytest.approx(0.5 + 0.5 * np.exp(-10.0), abs=1e-4)


class TestSpectrumCommand:
    def test_paper_fixture(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--loop", PAPER_LOOP)
        assert code == 0
        eigs = json.loads(out)["eigenvalues"]
        reals = sorted(e[0] for e in eigs)
        assert reals == pytest.approx([-11.0, -5.0, 0.0], abs=1e-9)

    def test_generator_input(self, capsys):
        gen = '{"generator":{"n":2,"entries":[[-1.0,1.0],[1.0,-1.0]]}}'
        code, out, _ = run(capsys, "spectrum", "--generator", gen)
        assert code == 0
        eigs = json.loads(out)["eigenvalues"]
        assert sorted(e[0] for e in eigs) == pytest.approx([-2.0, 0.0], abs=1e-9)


class TestStationaryCommand:
    def test_loop_closed_form(self, capsys):
        code, out, _ = run(capsys, "stationary", "--loop", PAPER_LOOP)
        assert code == 0
        payload = json.loads(out)
        assert payload["stationary"] == pytest.approx([8 / 55, 7 / 55, 40 / 55])
        assert payload["Z"] == pytest.approx(55 / 8)


class TestCheckCommand:
    def test_loop_report(self, capsys):
        code, out, _ = run(capsys, "check", "--loop", PAPER_LOOP)
        assert code == 0
        payload = json.loads(out)
        assert payload["positive"] is True
        assert payload["detailed_balance"] is False
        assert payload["mass"] == pytest.approx(7.0, rel=1e-10)
        assert payload["mass_consistent"] is True

    def test_kernel_report(self, capsys):
        code, out, _ = run(
            capsys, "check", "--kernel", COUNTEREXAMPLE, "--a", "1.0"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["positive"] is True
        assert payload["mass"] == pytest.approx(1.0, abs=1e-12)
        assert payload["mass_consistent"] is True


class TestKernelGroup:
    def test_eval_point(self, capsys):
        code, out, _ = run(
            capsys, "kernel", "eval", "--kernel", COUNTEREXAMPLE, "--t", "0"
        )
        assert code == 0
        assert json.loads(out)["value"] == pytest.approx(1.0)

    def test_eval_curve(self, capsys):
        code, out, _ = run(
            capsys, "kernel", "eval", "--kernel", COUNTEREXAMPLE,
            "--t-end", "1", "--h", "0.5",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "t,K"
        assert len(lines) == 4

    def test_laplace(self, capsys):
        code, out, _ = run(
            capsys, "kernel", "laplace", "--kernel",
            '{"kernel":{"terms":[[2,2,0]]}}',
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["num"] == pytest.approx([2.0])
        assert payload["den"] == pytest.approx([2.0, 1.0])

    def test_moments(self, capsys):
        code, out, _ = run(
            capsys, "kernel", "moments", "--kernel", COUNTEREXAMPLE
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["mass"] == pytest.approx(1.0, abs=1e-12)

    def test_check(self, capsys):
        code, out, _ = run(capsys, "kernel", "check", "--kernel", COUNTEREXAMPLE)
        assert code == 0
        payload = json.loads(out)
        assert set(payload) == {"positive", "min_value", "argmin", "mass", "mean_time"}


class TestDdeCommand:
    def test_report_and_files(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "dde", "--a", "1", "--T", "1", "--N-list", "5,10",
            "--h", "0.05", "--t-end", "5", "--out-dir", str(tmp_path),
        )
        assert code == 0
        report = json.loads(out)
        assert report["sup_errors"][0] > report["sup_errors"][1]
        assert report["equilibrium"] == pytest.approx(0.5)
        assert all(
            e == pytest.approx(0.5, abs=1e-12) for e in report["chain_equilibria"]
        )
        assert (tmp_path / "dde.csv").exists()
        assert (tmp_path / "chain_N5.csv").exists()
        assert (tmp_path / "chain_N10.csv").exists()

    def test_emit_kernels_and_plots(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "dde", "--a", "1.6", "--T", "1.8", "--N-list", "4",
            "--h", "0.1", "--t-end", "4", "--out-dir", str(tmp_path),
            "--emit-kernels", "--plot",
        )
        assert code == 0
        assert (tmp_path / "kernel_N4.csv").exists()
        assert (tmp_path / "dde_trajectories.png").stat().st_size > 0
        assert (tmp_path / "dde_spectrum.png").stat().st_size > 0


class TestSimulateCommand:
    def test_deterministic_csv(self, capsys):
        argv = [
            "simulate", "--loop", PAPER_LOOP, "--t-end", "2",
            "--n-paths", "200", "--seed", "11", "--n-times", "9",
        ]
        _, first, err1 = run(capsys, *argv)
        _, second, err2 = run(capsys, *argv)
        assert first == second
        assert err1 == err2
        assert first.splitlines()[0] == "t,state0,state1,state2"


class TestUsageErrors:
    def test_missing_required_flag_exits_two(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["mp2me"])
        assert info.value.code == 2

    def test_parse_error_exits_two(self, capsys):
        code, _, err = run(capsys, "mp2me", "--loop", '{"loop":{"a":[1],"b":[]}}')
        assert code == 2
        assert "ParseError" in err

    def test_solve_without_inputs(self, capsys):
        code, _, err = run(capsys, "solve", "--method", "volterra")
        assert code == 2
