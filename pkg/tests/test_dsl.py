"""Tests for the document language."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetcartan.dsl import (
    DimensionMismatchError,
    Document,
    DslError,
    DslSyntaxError,
    UnresolvedNameError,
    compare_documents,
    format_document,
    parse,
    parse_file,
)
from jetcartan.geometry import curvature_data
from jetcartan.symexpr import evaluate

FIXTURES = [
    "minimal.jc",
    "sphere.jc",
    "schwarzschild.jc",
    "random-metric.jc",
    "models.jc",
    "einstein-from-currents-pass.jc",
    "einstein-from-currents-fail.jc",
]

CHART = "chart M dim 2 coords x y\n"
METRIC = CHART + "metric g on M { [1, 0; 0, 1] }\n"

MALFORMED = [
    "chart",
    "chart M",
    "chart M dim",
    "chart M dim 0 coords",
    "chart M dim 9 coords a b c d e f g h k",
    "chart M dim 2.5 coords x y",
    "chart M dim 2 coords x",
    "chart M dim 2 coords x x",
    "chart M dim 2 coords x sin",
    "chart M dim 2 coords x y box [0, 1]",
    "chart M dim 2 coords x y box [0, 1; 2, 1]",
    "chart M dim 2 coords x y box [0, 1; 0, x]",
    "chart M dim 2 coords x y box [0, 1; 0, 1",
    CHART + "chart M dim 1 coords z",
    "chart chart dim 1 coords z",
    "let a = 1\nlet a = 2",
    "let a = x",
    "let a =",
    "let a 1",
    "let = 1",
    "let a = (1",
    "let a = 1 $",
    CHART + "metric g on M { [1, 0; 0, 1; 0, 0] }",
    CHART + "metric g on M { [1, x; 0, 1] }",
    CHART + "metric g on M { [0, 0; 0, 0] }",
    CHART + "metric g on M signature spooky { [1, 0; 0, 1] }",
    CHART + "metric g on M [1, 0; 0, 1]",
    CHART + "metric g on M { [1, 0; 0, 1] ",
    CHART + "metric g on M { [1, 0; 0] }",
    CHART + "metric g on M { [1, 0; 0, z] }",
    METRIC + "connection n = levi-civita(h)",
    METRIC + "connection n = christoffel(g)",
    CHART + "connection n on M { 0 0 2 : 1 }",
    CHART + "connection n on M { 0 0 0 : 1; 0 0 0 : 2 }",
    CHART + "connection n on M { 0 0 0 1 }",
    CHART + "connection n on M symmetric { 0 0 1 : x; 1 0 0 : y }",
    "gauge G frame so5",
    "gauge G frame { }",
    "gauge G",
    "gauge G frame { [1, 0; 0] }",
    METRIC + "lagrangian L on g fiber { u }",
    METRIC + "lagrangian L on g fiber u { w*u }",
    METRIC + "lagrangian L on g fiber u { u_a0^2 }\nsection s of L { [1, 2] }",
    METRIC + "section s of L { [1] }",
    "model tachyon T { }",
    METRIC + "model scalar p { metric g; color red }",
    METRIC + "model scalar p { metric g; metric g }",
    METRIC + "model scalar p { metric g; field [1] }",
    METRIC + "model scalar p { metric g; potential [x, y]; field [1]; conjugate [1] }",
    METRIC + "gauge U frame u1\nmodel scalar p { metric g; gauge U; potential [x]; field [1]; conjugate [1] }",
    CHART + "model dirac d { chart M; tetrad [1, 0; 0, 1]; field [1]; conjugate [1, 2] }",
    CHART + "model dirac d { chart M; tetrad [1, 0, 0; 0, 1, 0] }",
    METRIC + "model yangmills A { metric g; potential [x, y] }",
    METRIC + "model gravity G { }",
    METRIC + "model gravity G { metric g; connection nope }",
    METRIC + "komar K { metric g; vector [1] }",
    METRIC + "komar K { vector [1, 0] }",
    "check no-such-check",
    "check",
    "frobnicate x",
    "1 + 2",
    "{ }",
]


class TestParse:
    """Tests for well-formed documents."""

    def test_minimal(self, minimal_text):
        document = parse(minimal_text, "minimal")
        assert document.charts["M"].coords == ("x", "y")
        assert set(document.metrics) == {"g"}
        assert document.metrics["g"].chart is document.charts["M"]
        assert "1 charts" in str(document)

    def test_minimal_fixture(self, fixtures_dir):
        document = parse_file(fixtures_dir / "minimal.jc")
        assert document.name == "minimal.jc"
        assert document.get_summary()["metrics"] == 1

    def test_schwarzschild(self, fixtures_dir):
        document = parse_file(fixtures_dir / "schwarzschild.jc")
        g = document.metrics["g"]
        assert evaluate(g.components[0, 0], {"r": 4.0}) == pytest.approx(0.5)
        assert g.chart.box[1] == (3.0, 10.0)
        assert "K" in document.komar
        assert [c.id for c in document.checks] == ["einstein-vacuum"]

    def test_sphere_curvature_sign(self, fixtures_dir):
        document = parse_file(fixtures_dir / "sphere.jc")
        data = curvature_data(document.metrics["g"], document.connections["nabla"])
        assert evaluate(data.scalar, {"th": 0.9, "ph": 1.1}) == pytest.approx(-2)

    def test_models(self, fixtures_dir):
        document = parse_file(fixtures_dir / "models.jc")
        kinds = {name: entry.kind for name, entry in document.models.items()}
        assert kinds == {"phi": "scalar", "A": "yangmills", "psi": "dirac", "grav": "gravity"}
        assert document.models["phi"].section is not None

    def test_expected_failure(self, fixtures_dir):
        document = parse_file(fixtures_dir / "einstein-from-currents-fail.jc")
        [declared] = document.checks
        assert declared.id == "einstein-from-currents"
        assert declared.expect_failure

    def test_comments_are_ignored(self):
        document = parse("# header\nchart M dim 1 coords x  # trailing\n# chart N dim 1 coords y\n")
        assert list(document.charts) == ["M"]

    def test_declarations_share_a_line(self):
        document = parse("chart M dim 1 coords x chart N dim 1 coords y")
        assert list(document.charts) == ["M", "N"]

    def test_bindings_fold_into_expressions(self):
        document = parse("let a = 3\n" + CHART + "metric g on M { [a, 0; 0, a*x^2 + 1] }")
        assert evaluate(document.metrics["g"].components[1, 1], {"x": 1.0}) == pytest.approx(4)

    def test_empty_document(self):
        document = parse("")
        assert isinstance(document, Document)
        assert str(document).endswith("(empty)")


class TestErrors:
    """Tests for error kinds and positions."""

    def test_unresolved_chart_position(self):
        with pytest.raises(UnresolvedNameError) as info:
            parse("chart M dim 2 coords x y\nmetric g on Q { [1,0;0,1] }")
        assert info.value.name == "Q"
        assert (info.value.line, info.value.column) == (2, 13)
        assert "line 2, column 13" in str(info.value)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            parse(CHART + "metric g on M { [1, 0, 0; 0, 1, 0; 0, 0, 1] }")

    def test_duplicate_name(self):
        with pytest.raises(DslSyntaxError) as info:
            parse(METRIC + "gauge g frame u1")
        assert "already declared" in str(info.value)

    def test_unknown_check(self):
        with pytest.raises(UnresolvedNameError) as info:
            parse("check einstein-nonsense")
        assert info.value.name == "einstein-nonsense"

    def test_not_a_string(self):
        with pytest.raises(DslSyntaxError):
            parse(b"chart M dim 1 coords x")

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "bad.jc"
        path.write_bytes(b"chart M dim 1 coords \xff\xfe")
        with pytest.raises(DslSyntaxError):
            parse_file(path)

    @pytest.mark.parametrize("text", MALFORMED)
    def test_malformed(self, text):
        with pytest.raises(DslError):
            parse(text)

    @pytest.mark.parametrize("fixture", FIXTURES)
    def test_truncations_are_total(self, fixture, fixtures_dir):
        text = (fixtures_dir / fixture).read_text(encoding="utf-8")
        for k in range(1, 12):
            try:
                parse(text[: len(text) * k // 12])
            except DslError:
                pass

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=80))
    def test_arbitrary_text_is_total(self, text):
        try:
            assert isinstance(parse(text), Document)
        except DslError as e:
            assert e.line >= 1 and e.column >= 1


class TestFormat:
    """Canonical printing reparses to the same objects."""

    @pytest.mark.parametrize("fixture", FIXTURES)
    def test_round_trip(self, fixture, fixtures_dir):
        document = parse_file(fixtures_dir / fixture)
        again = parse(format_document(document), fixture)
        assert compare_documents(document, again) == []
        assert [c.id for c in again.checks] == [c.id for c in document.checks]
        assert [c.expect_failure for c in again.checks] == [c.expect_failure for c in document.checks]

    def test_format_is_stable(self, fixtures_dir):
        text = format_document(parse_file(fixtures_dir / "sphere.jc"))
        assert format_document(parse(text)) == text

    def test_compare_reports_differences(self):
        first = parse(METRIC)
        second = parse(CHART + "metric g on M { [1, 0; 0, 2] }")
        assert compare_documents(first, second) == ["g"]
