"""Tests for the check registry."""

from dataclasses import replace

import pytest

from jetcartan.checks import (
    ALL,
    REGISTRY,
    SUITES,
    CheckContext,
    UnknownCheckError,
    build_check,
    run_checks,
    select_checks,
)
from jetcartan.dsl import parse_file
from jetcartan.symexpr import ZERO
from jetcartan.verify import ERROR, PASS

UNIVERSAL = [cid for cid, entry in REGISTRY.items() if entry.universal]


class TestRegistry:
    def test_entries_are_described(self):
        for cid, entry in REGISTRY.items():
            assert entry.id == cid
            assert entry.anchor
            assert entry.suite in SUITES

    def test_every_suite_has_checks(self):
        suites = {entry.suite for entry in REGISTRY.values()}
        assert suites == set(SUITES)

    def test_document_checks_are_not_universal(self):
        assert not REGISTRY["einstein-vacuum"].universal
        assert not REGISTRY["einstein-from-currents"].universal


class TestSelection:
    """Tests for select_checks."""

    def test_all_without_document(self):
        selected = select_checks(ALL)
        assert selected == UNIVERSAL
        assert "einstein-vacuum" not in selected

    def test_declared_checks_join_all(self, fixtures_dir):
        document = parse_file(fixtures_dir / "schwarzschild.jc")
        assert "einstein-vacuum" in select_checks(ALL, document)
        assert "einstein-vacuum" in select_checks("gravity", document)

    def test_suite(self):
        selected = select_checks("engineering")
        assert set(selected) == {"finite-difference-diff", "hodge-orientation"}

    def test_single_check(self):
        assert select_checks("involution") == ["involution"]

    def test_unknown_target(self):
        with pytest.raises(UnknownCheckError) as info:
            select_checks("no-such-check")
        assert "no-such-check" in str(info.value)

    def test_unknown_build(self, context):
        with pytest.raises(UnknownCheckError):
            build_check("no-such-check", context)


class TestRunChecks:
    """Running checks from the registry."""

    @pytest.mark.parametrize("check_id", ["finite-difference-diff", "hodge-orientation", "involution"])
    def test_quick_checks_pass(self, check_id, context):
        [result] = run_checks([check_id], context)
        assert result.status == PASS, result.message

    @pytest.mark.parametrize("orientation", [1, -1])
    def test_hodge_orientation_setting(self, orientation, settings):
        ctx = CheckContext(None, 1, replace(settings, orientation=orientation))
        [result] = run_checks(["hodge-orientation"], ctx)
        assert result.status == PASS

    def test_builder_failure_becomes_error(self, context):
        [result] = run_checks(["einstein-from-currents"], context)
        assert result.status == ERROR
        assert "metric" in result.message

    def test_results_do_not_depend_on_order(self, context):
        first = run_checks(["finite-difference-diff", "hodge-orientation"], context)
        second = run_checks(["hodge-orientation", "finite-difference-diff"], context)
        assert first[0].to_dict() == second[1].to_dict()
        assert first[1].to_dict() == second[0].to_dict()

    def test_mutation_is_caught(self, context):
        [result] = run_checks(["hodge-orientation"], context, mutate=True)
        assert result.status == PASS

    @pytest.mark.slow
    @pytest.mark.parametrize("check_id", UNIVERSAL)
    def test_universal_check_passes(self, check_id, context):
        [result] = run_checks([check_id], context)
        assert result.status == PASS, result.message

    @pytest.mark.slow
    @pytest.mark.parametrize("check_id", UNIVERSAL)
    def test_universal_check_catches_mutation(self, check_id, context):
        [result] = run_checks([check_id], context, mutate=True)
        assert result.status == PASS, result.message

    @pytest.mark.slow
    def test_total_conservation_is_not_vacuous(self, context):
        check = build_check("total-conservation", context)
        assert any(component is not ZERO for component in check.lhs)
        [plain] = run_checks(["total-conservation"], context)
        [mutated] = run_checks(["total-conservation"], context, mutate=True)
        assert plain.status == PASS, plain.message
        assert mutated.status == PASS, mutated.message

    def test_prolongation_theorem_passes(self, context):
        assert "prolongation-theorem" in select_checks("connections")
        [result] = run_checks(["prolongation-theorem"], context)
        assert result.status == PASS, result.message

@pytest.mark.slow
class TestDocumentChecks:
    """Document-driven checks on the bundled fixtures."""

    def test_schwarzschild_is_vacuum(self, fixtures_dir, settings):
        document = parse_file(fixtures_dir / "schwarzschild.jc")
        ctx = CheckContext(document, 0, settings)
        [result] = run_checks(["einstein-vacuum"], ctx)
        assert result.status == PASS

    def test_einstein_from_currents_holds(self, fixtures_dir, settings):
        document = parse_file(fixtures_dir / "einstein-from-currents-pass.jc")
        [result] = run_checks(["einstein-from-currents"], CheckContext(document, 0, settings))
        assert result.status == PASS

    def test_einstein_from_currents_fails_as_declared(self, fixtures_dir, settings):
        document = parse_file(fixtures_dir / "einstein-from-currents-fail.jc")
        assert document.checks[0].expect_failure
        [result] = run_checks(["einstein-from-currents"], CheckContext(document, 0, settings))
        assert result.status == PASS
        assert result.worst_error > settings.third_tolerance

    def test_document_metric_feeds_gravity_checks(self, fixtures_dir, settings):
        document = parse_file(fixtures_dir / "sphere.jc")
        ctx = CheckContext(document, 0, settings)
        results = run_checks(["contracted-bianchi", "komar-offshell"], ctx)
        assert [r.status for r in results] == [PASS, PASS]
