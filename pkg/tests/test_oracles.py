"""Tests for the residual-template oracles and the fixture store."""

import json
import shutil
from datetime import date
from fractions import Fraction

import pytest

from jetcartan.oracles import (
    CHECKSUM_FILE,
    COVARIANT,
    INSTANCES,
    PARTIAL,
    OracleChecksumError,
    OracleError,
    OracleResult,
    el_residual_oracle,
    fixture_name,
    load_oracle,
    read_checksums,
    residual_coefficients,
    sha256_of,
    write_oracle,
)

EXPECTED = {
    "free-scalar": {COVARIANT: Fraction(0), PARTIAL: Fraction(1)},
    "scalar": {COVARIANT: Fraction(1), PARTIAL: Fraction(0)},
    "dirac": {COVARIANT: Fraction(1), PARTIAL: Fraction(0)},
    "yang-mills": {COVARIANT: Fraction(1), PARTIAL: Fraction(0)},
    "coupled": {COVARIANT: Fraction(1), PARTIAL: Fraction(0)},
    "gravity": {COVARIANT: Fraction(0)},
}


@pytest.fixture
def store(tmp_path, oracle_dir):
    """A writable copy of the committed fixture directory."""
    target = tmp_path / "oracles"
    shutil.copytree(oracle_dir, target)
    return target


class TestCommittedFixtures:
    """The committed fixtures load and carry the expected coefficients."""

    @pytest.mark.parametrize("kind", sorted(INSTANCES))
    def test_load(self, kind, oracle_dir):
        result = load_oracle(kind, oracle_dir)
        assert result.kind == kind
        assert result.id == f"el-residual/{kind}"
        for term, value in EXPECTED[kind].items():
            assert result.coefficient(term) == value

    def test_every_fixture_has_a_checksum(self, oracle_dir):
        checksums = read_checksums(oracle_dir)
        for kind in INSTANCES:
            assert checksums[fixture_name(kind)] == sha256_of(oracle_dir / fixture_name(kind))

    def test_coefficients_mapping(self, oracle_dir):
        assert residual_coefficients("scalar", oracle_dir)[COVARIANT] == Fraction(1)


class TestFixtureStore:
    """Tests for checksum enforcement and maintenance-mode writes."""

    def test_tampered_fixture(self, store):
        path = store / fixture_name("scalar")
        path.write_text(path.read_text(encoding="utf-8").replace('"1"', '"2"', 1), encoding="utf-8")
        with pytest.raises(OracleChecksumError):
            load_oracle("scalar", store)

    def test_missing_checksum_entry(self, store):
        (store / CHECKSUM_FILE).write_text("", encoding="utf-8")
        with pytest.raises(OracleChecksumError):
            load_oracle("dirac", store)

    def test_missing_fixture(self, tmp_path):
        with pytest.raises(OracleError):
            load_oracle("scalar", tmp_path)

    def test_write_requires_maintenance_mode(self, store):
        result = load_oracle("scalar", store)
        with pytest.raises(OracleError):
            write_oracle(result, store, maintenance_mode=False)

    def test_write_refreshes_checksum(self, store):
        result = OracleResult("el-residual/scalar", "scalar", (COVARIANT, PARTIAL), (Fraction(1), Fraction(0)),
                              "2026-10-17: rewritten in a test", 1e-15)
        path = write_oracle(result, store, maintenance_mode=True)
        assert path.with_suffix(".json.bak").exists()
        assert read_checksums(store)[path.name] == sha256_of(path)
        assert load_oracle("scalar", store).provenance == "2026-10-17: rewritten in a test"
        # the other entries survive the rewrite
        assert fixture_name("dirac") in read_checksums(store)

    def test_round_trip_format(self, store):
        data = json.loads((store / fixture_name("gravity")).read_text(encoding="utf-8"))
        assert OracleResult.from_dict(data).to_dict() == data

    def test_malformed_dict(self):
        with pytest.raises(OracleError):
            OracleResult.from_dict({"id": "x"})


class TestOracleFit:
    """Fitting the templates reproduces the committed coefficients."""

    def test_unknown_kind(self):
        with pytest.raises(OracleError):
            el_residual_oracle("tachyon")

    def test_free_scalar(self):
        result = el_residual_oracle("free-scalar", trials=8, seed=0, today=date(2026, 10, 17))
        assert result.coefficient(PARTIAL) == Fraction(1)
        assert result.provenance.startswith("2026-10-17:")

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", sorted(INSTANCES))
    def test_fit_matches_fixture(self, kind, oracle_dir):
        fitted = el_residual_oracle(kind, trials=10, seed=3)
        stored = load_oracle(kind, oracle_dir)
        for term in stored.terms:
            assert fitted.coefficient(term) == stored.coefficient(term)
