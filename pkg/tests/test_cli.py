"""Command-line interface."""

import numpy as np
import pytest

from hybridfdm.cli import (
    average_order,
    main,
    read_convergence_csv,
    run_convergence,
    solve_once,
    write_convergence_csv,
    write_solution_csv,
)
from hybridfdm.problems import manufacture

LAPLACE_X = """
[problem]
name = laplace-x

[domain]
l1 = -1
l2 = 1
l3 = -1
l4 = 1

[interface]
kind = none

[fields]
a_plus = 1
f_plus = 0

[exact]
u_plus = x

[boundary.gamma1]
kind = dirichlet
g = x

[boundary.gamma2]
kind = dirichlet
g = x

[boundary.gamma3]
kind = dirichlet
g = x

[boundary.gamma4]
kind = dirichlet
g = x
"""

BAD_ALPHA = LAPLACE_X.replace(
    "name = laplace-x", "name = bad-alpha").replace(
    "[boundary.gamma1]\nkind = dirichlet\ng = x",
    "[boundary.gamma1]\nkind = robin\nalpha = -1\ng = 0")


@pytest.fixture()
def laplace_cfg(tmp_path):
    path = tmp_path / "laplace.cfg"
    path.write_text(LAPLACE_X)
    return str(path)


class TestSolveCommand:
    def test_solve_writes_csv(self, laplace_cfg, tmp_path, capsys):
        out = tmp_path / "u.csv"
        rc = main(["--problem", laplace_cfg, "--J", "2", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "i,j,x,y,u_h"
        assert len(lines) == 1 + 5 * 5
        i, j, x, y, u = lines[1].split(",")
        assert (i, j) == ("0", "0")
        assert float(x) == -1.0
        assert float(u) == pytest.approx(-1.0, abs=1e-11)

    def test_csv_roundtrip_is_exact(self, laplace_cfg, tmp_path):
        from hybridfdm.problems import load_config

        out = tmp_path / "u.csv"
        main(["--problem", laplace_cfg, "--J", "2", "--out", str(out)])
        p = load_config(laplace_cfg)
        system, result = solve_once(p, 2)
        vals = {}
        for line in out.read_text().strip().splitlines()[1:]:
            i, j, x, y, u = line.split(",")
            vals[(int(i), int(j))] = float(u)
        for (i, j), v in vals.items():
            assert v == result.u[i, j]

    def test_usage_errors_exit_1(self, laplace_cfg, capsys):
        assert main(["--problem", "nosuch"]) == 1
        assert main(["--problem", laplace_cfg]) == 1
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1


class TestConvergenceCommand:
    def test_exact_mode_rows_and_csv(self, tmp_path):
        case = manufacture(seed=11, degree=3, interface_kind="none")
        rows = run_convergence(case.problem, [2, 3], mode="exact")
        assert [r.J for r in rows] == [2, 3]
        assert np.isnan(rows[0].order)
        path = tmp_path / "conv.csv"
        write_convergence_csv(path, rows)
        back = read_convergence_csv(path)
        for a, b in zip(rows, back):
            assert a.J == b.J
            assert b.error == a.error        # repr-exact round trip
            assert (np.isnan(a.order) and np.isnan(b.order)) or a.order == b.order

    def test_successive_mode(self):
        case = manufacture(seed=12, degree=3, interface_kind="none")
        rows = run_convergence(case.problem, [2, 3, 4], mode="successive")
        assert [r.J for r in rows] == [2, 3]
        assert np.isfinite(rows[1].order)

    def test_successive_requires_consecutive(self):
        from hybridfdm.errors import HybridFdmError

        case = manufacture(seed=12, degree=3, interface_kind="none")
        with pytest.raises(HybridFdmError):
            run_convergence(case.problem, [2, 4], mode="successive")

    def test_exact_mode_requires_exact_solution(self):
        from hybridfdm.errors import HybridFdmError
        from hybridfdm.problems import builtin

        with pytest.raises(HybridFdmError):
            run_convergence(builtin("ex33"), [3, 4], mode="exact")

    def test_cli_convergence_command(self, laplace_cfg, tmp_path, capsys):
        out = tmp_path / "conv.csv"
        rc = main(["--problem", laplace_cfg, "--J-range", "2..3",
                   "--mode", "exact", "--out", str(out)])
        assert rc == 0
        assert "average order" in capsys.readouterr().out
        assert out.exists()


class TestAuditCommand:
    def test_clean_problem_exits_0(self, laplace_cfg, capsys):
        rc = main(["--problem", laplace_cfg, "--J", "3", "--check-mmatrix"])
        assert rc == 0
        assert "pass" in capsys.readouterr().out

    def test_adversarial_alpha_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(BAD_ALPHA)
        rc = main(["--problem", str(path), "--J", "3", "--check-mmatrix"])
        assert rc == 2
        assert "FAIL" in capsys.readouterr().out
