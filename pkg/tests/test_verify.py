"""Tests for identity checks, mutation testing and reports."""

import json

import pytest

from jetcartan.exprtext import parse_expr
from jetcartan.symexpr import ONE, ZERO, evaluate, sample_points
from jetcartan.verify import (
    ERROR,
    FAIL,
    PASS,
    VACUOUS,
    IdentityCheck,
    Report,
    bump,
    mutate_check,
    run_check,
    simpson_weights,
    write_report,
)


def identity(lhs, rhs, domain=None, **options):
    return IdentityCheck("demo", "a demo identity", tuple(parse_expr(e) for e in lhs),
                         tuple(parse_expr(e) for e in rhs), domain or {"x": (-1.0, 1.0)}, **options)


class TestIdentityCheck:
    def test_component_counts_must_match(self):
        with pytest.raises(ValueError):
            IdentityCheck("demo", "", (ONE,), (), {})

    def test_from_defect(self):
        check = IdentityCheck.from_defect("demo", "", [parse_expr("x - x")], {"x": (0, 1)})
        assert check.rhs == (ZERO,)

    def test_with_options(self):
        check = identity(["x"], ["x"]).with_options(trials=3, tol=1e-3)
        assert check.trials == 3
        assert check.tol == 1e-3


class TestRunCheck:
    """Tests for run_check statuses."""

    def test_pass(self):
        result = run_check(identity(["(x + 1)^2"], ["x^2 + 2*x + 1"]), seed=3)
        assert result.status == PASS
        assert result.passed
        assert result.worst_error < 1e-12

    def test_fail_reports_worst_point(self):
        result = run_check(identity(["x^2"], ["x"], {"x": (2.0, 3.0)}))
        assert result.status == FAIL
        assert 2.0 <= result.worst_point["x"] <= 3.0

    def test_expected_failure_inverts_status(self):
        assert run_check(identity(["x^2"], ["x"], {"x": (2.0, 3.0)}, expect_failure=True)).status == PASS
        assert run_check(identity(["x"], ["x"], expect_failure=True)).status == FAIL

    def test_uncovered_variable_is_an_error(self):
        result = run_check(identity(["x + y"], ["y + x"]))
        assert result.status == ERROR
        assert "'y'" in result.message

    def test_evaluation_error(self):
        result = run_check(identity(["log(x)"], ["log(x)"], {"x": (-2.0, -1.0)}))
        assert result.status == ERROR
        assert "log" in result.message

    def test_deterministic(self):
        check = identity(["sin(x)^2 + cos(x)^2"], ["1"])
        first = run_check(check, seed=11).to_dict()
        second = run_check(check, seed=11).to_dict()
        assert first == second


class TestMutation:
    """Tests for mutation testing."""

    def test_mutation_is_detected(self):
        check = identity(["x^2 + 3*x"], ["x*(x + 3)"], {"x": (1.0, 2.0)})
        assert run_check(check, mutate=True).status == PASS

    def test_vacuous_check(self):
        check = identity(["0"], ["0"])
        assert run_check(check, mutate=True).status == VACUOUS

    def test_mutation_flips_largest_term(self):
        check = identity(["10*x + 1"], ["10*x + 1"], {"x": (1.0, 2.0)})
        points = sample_points(check.domain, 4, seed=0)
        mutated = mutate_check(check, points)
        assert evaluate(mutated.lhs[0], {"x": 1.5}) == pytest.approx(-14)


class TestQuadrature:
    def test_simpson_integrates_cubics(self):
        x, w = simpson_weights(0.0, 2.0, 5)
        assert float((w * x ** 3).sum()) == pytest.approx(4.0)

    def test_simpson_needs_odd_nodes(self):
        with pytest.raises(ValueError):
            simpson_weights(0.0, 1.0, 4)

    def test_bump_vanishes_on_boundary(self):
        b = bump(("x", "y"), ((0.0, 2.0), (-1.0, 1.0)))
        assert evaluate(b, {"x": 0.0, "y": 0.3}) == pytest.approx(0)
        assert evaluate(b, {"x": 1.0, "y": 0.0}) == pytest.approx(1)


class TestReport:
    """Tests for report formatting and writing."""

    @pytest.fixture
    def report(self):
        report = Report("demo.jc", seed=1, trials=5, tol=1e-8)
        report.add(run_check(identity(["x"], ["x"]), seed=1))
        report.add(run_check(identity(["x"], ["2*x"], {"x": (1.0, 2.0)}), seed=1))
        return report

    def test_passed_needs_all(self, report):
        assert not report.passed

    def test_json_schema(self, report):
        data = json.loads(report.to_json())
        assert data["schema"] == 1
        assert data["document"] == "demo.jc"
        assert [c["status"] for c in data["checks"]] == ["pass", "fail"]
        assert "wall_time" not in data["checks"][0]

    def test_timings_are_optional(self, report):
        data = json.loads(report.to_json(timings=True))
        assert "wall_time" in data["checks"][0]

    def test_format(self, report):
        text = report.format(timings=False)
        assert "demo.jc" in text
        assert "1/2 checks passed" in text

    def test_write_keeps_backup(self, report, tmp_path):
        path = tmp_path / "out" / "report.json"
        assert write_report(report, path)
        assert write_report(report, path)
        assert path.exists()
        assert path.with_suffix(".json.bak").exists()
        assert json.loads(path.read_text(encoding="utf-8"))["passed"] is False
