import numpy as np
import pytest

from dngalerkin.cli import main
from dngalerkin.csvio import body_lines

SMALL_HEAT = """
[problem]
domain_lower = 0
domain_upper = 1
horizon = 0.02
alpha = 1.0
p = 2
field = model
u0 = sin(pi*x_1)
g = 0
f = 0

[discretization]
modes_per_dim = 4
dt = 1e-3
scheme = midpoint

[schedule]
epsilons = 1e-1 1e-2

[checks]
energy = true
weak_residual = true
identity = true

[mms]
exact = exp(-pi^2*t)*sin(pi*x_1)
refinements = 2

[output]
directory = out
lattice = 17
time_stride = 5
"""

SMALL_COMPARE = """
[problem_v]
domain_lower = 0
domain_upper = 1
horizon = 0.05
alpha = 1.0
p = 2
field = model
u0 = 0.25*sin(pi*x_1)
g = 0
f = 0

[problem_w]
domain_lower = 0
domain_upper = 1
horizon = 0.05
alpha = 1.0
p = 2
field = model
u0 = 0.2 + 0.5*sin(pi*x_1)
g = 0.2
f = 0.1

[discretization]
modes_per_dim = 4
dt = 1e-3

[schedule]
epsilons = 1e-2

[comparison]
lattice = 33
time_stride = 10
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestSolveCommand:
    def test_small_heat_passes(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT)
        out = str(tmp_path / "run")
        assert main(["solve", "--config", cfg, "--out", out]) == 0
        for name in ("metadata.txt", "energy.csv", "distances.csv",
                     "trajectory_00.csv", "trajectory_01.csv",
                     "weak_residual.csv", "identity.csv"):
            assert (tmp_path / "run" / name).exists()

    def test_zero_data_all_zero_artifacts(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT.replace("u0 = sin(pi*x_1)", "u0 = 0"))
        out = str(tmp_path / "run")
        assert main(["solve", "--config", cfg, "--out", out]) == 0
        lines = body_lines(tmp_path / "run" / "trajectory_00.csv")[1:]
        u_values = [float(line.strip().split(",")[-1]) for line in lines]
        assert max(abs(v) for v in u_values) == 0.0

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["solve", "--config", cfg, "--out", out_a, "--seed", "3"]) == 0
        assert main(["solve", "--config", cfg, "--out", out_b, "--seed", "3"]) == 0
        for name in ("energy.csv", "distances.csv", "trajectory_00.csv",
                     "weak_residual.csv", "identity.csv"):
            assert body_lines(tmp_path / "a" / name) == body_lines(
                tmp_path / "b" / name
            ), name

    def test_invalid_p_rejected(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT.replace("p = 2", "p = 1"))
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_solver_failure_exit_code(self, tmp_path):
        broken = SMALL_HEAT.replace("alpha = 1.0", "alpha = 0.5").replace(
            "p = 2", "p = 3"
        ).replace("f = 0", "f = 50").replace(
            "dt = 1e-3", "dt = 1e-2\nnewton_max_iters = 0\ndt_min = 1e-2"
        )
        cfg = write(tmp_path, broken)
        out = str(tmp_path / "x")
        assert main(["solve", "--config", cfg, "--out", out]) == 3
        assert (tmp_path / "x" / "failure.txt").exists()


class TestCompareCommand:
    def test_ordered_data_passes(self, tmp_path):
        cfg = write(tmp_path, SMALL_COMPARE)
        out = str(tmp_path / "cmp")
        assert main(["compare", "--config", cfg, "--out", out]) == 0
        assert (tmp_path / "cmp" / "comparison.csv").exists()

    def test_swapped_data_fails_audit_with_exit_2(self, tmp_path):
        swapped = SMALL_COMPARE.replace(
            "u0 = 0.25*sin(pi*x_1)", "u0 = 0.2 + 0.7*sin(pi*x_1)"
        )
        cfg = write(tmp_path, swapped)
        assert main(["compare", "--config", cfg,
                     "--out", str(tmp_path / "cmp")]) == 2


class TestLemmasCommand:
    def test_default_sweep_passes(self, tmp_path):
        out = str(tmp_path / "lem")
        assert main(["lemmas", "--out", out, "--samples", "2000",
                     "--seed", "7"]) == 0
        lines = body_lines(tmp_path / "lem" / "lemmas.csv")
        assert lines[0].strip() == "lemma_id,alpha,samples,worst_ratio,pass"
        assert all(line.strip().endswith("true") for line in lines[1:])

    def test_deterministic_bodies(self, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        main(["lemmas", "--out", a, "--samples", "500", "--seed", "1"])
        main(["lemmas", "--out", b, "--samples", "500", "--seed", "1"])
        assert body_lines(tmp_path / "a" / "lemmas.csv") == body_lines(
            tmp_path / "b" / "lemmas.csv"
        )


class TestMmsCommand:
    def test_heat_refinement_passes(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT)
        out = str(tmp_path / "mms")
        assert main(["mms", "--config", cfg, "--out", out]) == 0
        lines = body_lines(tmp_path / "mms" / "mms.csv")
        assert len(lines) == 3  # header + two refinement levels

    def test_missing_exact_is_invalid(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT.replace("[mms]", "[mms_disabled]"))
        assert main(["mms", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


class TestAuditCommand:
    def test_model_field_audit_passes(self, tmp_path):
        cfg = write(tmp_path, SMALL_HEAT)
        out = str(tmp_path / "aud")
        assert main(["audit", "--config", cfg, "--out", out,
                     "--samples", "500"]) == 0

    def test_non_monotone_custom_field_fails(self, tmp_path):
        bad = SMALL_HEAT.replace(
            "field = model",
            "field = custom\nfield_expr_1 = -xi_1\n"
            "time_independent = true\nstrictly_monotone = true",
        )
        cfg = write(tmp_path, bad)
        assert main(["audit", "--config", cfg, "--out", str(tmp_path / "aud"),
                     "--samples", "500"]) == 1
