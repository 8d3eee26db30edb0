"""
Unit Tests for Artifact Codecs
Number formatting, canonical JSON, CSV layout, sidecars and residue-pattern text
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import pytest

from services.bigarith import INFINITY, circle_point
from services.cfrac import ExplicitStream, PeriodicStream, alpha_stream, mod_convergents, twos_tower_stream
from services.rrcf import classical_approximants
from services.schur import schur_catalog
from services.serialization import (
    APPROXIMANT_COLUMNS,
    SCHUR_COLUMNS,
    TRACE_REPORT_COLUMNS,
    approximant_rows,
    canonical_json,
    complex_parts,
    config_hash,
    digits_for,
    format_fraction,
    format_real,
    pattern_text,
    schur_rows,
    to_jsonable,
    trace_report_json,
    trace_report_rows,
    write_csv,
    write_sidecar,
)
from services.verify import TraceReport

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "golden"


@dataclass
class _Sample:
    name: str
    value: int
    hidden: list = field(default_factory=list, repr=False)


@pytest.mark.unit
class TestFormatting:
    """Test decimal and exact number formatting"""

    def test_digits_for_default_precision(self):
        assert digits_for(256) == 78
        assert digits_for(64) == 20

    def test_fractions(self):
        assert format_fraction(Fraction(3, 4)) == "3/4"
        assert format_fraction(Fraction(6, 3)) == "2"

    def test_real_values(self, ctx):
        assert format_real(None, 10) == ""
        assert format_real(INFINITY, 10) == "inf"
        assert format_real(True, 10) == "true"
        assert format_real(35315, 10) == "35315"
        assert format_real(ctx.real(Fraction(1, 2)), 10) == "0.5"

    def test_real_values_carry_requested_digits(self, ctx):
        text = format_real(ctx.phi, 40)
        assert text.startswith("1.618033988749894848204586834365638117")
        assert len(format_real(ctx.phi, 12)) == 13

    def test_complex_parts(self, ctx):
        assert complex_parts(INFINITY, 10) == ["inf", "inf"]
        assert complex_parts(None, 10) == ["", ""]
        assert complex_parts(ctx.mp.mpc(1, -2), 10) == ["1.0", "-2.0"]


@pytest.mark.unit
class TestJsonable:
    """Test conversion of results into JSON-safe structures"""

    def test_small_integers_stay_numbers(self):
        assert to_jsonable(2207, 10) == 2207

    def test_large_integers_become_strings(self):
        assert to_jsonable(2 ** 256, 10) == str(2 ** 256)

    def test_dataclass_fields_hidden_from_repr_are_dropped(self):
        assert to_jsonable(_Sample("a", 1, [1, 2]), 10) == {"name": "a", "value": 1}

    def test_nested_containers(self, ctx):
        data = {"t": Fraction(1, 3), "values": (1, INFINITY), 5: {"z": ctx.mp.mpc(0, 1)}}
        assert to_jsonable(data, 10) == {
            "t": "1/3",
            "values": [1, "inf"],
            "5": {"z": {"re": "0.0", "im": "1.0"}},
        }

    def test_sets_are_sorted(self):
        assert to_jsonable({3, 1, 2}, 10) == [1, 2, 3]

    def test_canonical_json_is_key_ordered(self):
        text = canonical_json({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")

    def test_config_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})


@pytest.mark.unit
class TestArtifacts:
    """Test CSV files, sidecars and per-module row layouts"""

    def test_write_csv(self, output_dir):
        path = write_csv(output_dir / "nested" / "rows.csv", ["a", "b"], [[1, 2], [3, 4]])
        assert path.read_text(encoding="utf-8") == "a,b\n1,2\n3,4\n"

    def test_sidecar(self, output_dir):
        path = output_dir / "rows.csv"
        sidecar = write_sidecar(path, {"n": 3}, 256, ["a", "b"], extra={"rows": 2})
        assert sidecar.name == "rows.csv.meta.json"
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        assert data == {
            "schema_version": "rrlab-v1",
            "config_hash": config_hash({"n": 3}),
            "precision_bits": 256,
            "digits": 78,
            "columns": ["a", "b"],
            "rows": 2,
        }

    def test_trace_report_layout(self, ctx):
        report = TraceReport("demo", metadata={"d": 2 ** 80})
        report.check(3, "x", ctx.real(1), ctx, upper=ctx.real(2))
        report.check(4, "y", ctx.real(3), ctx, upper=ctx.real(2))
        rows = trace_report_rows(report, 10)
        assert len(rows[0]) == len(TRACE_REPORT_COLUMNS)
        assert rows[0][:2] == ["3", "x"]
        assert [row[-1] for row in rows] == ["true", "false"]
        summary = trace_report_json(report, 10)
        assert summary["all_pass"] is False
        assert summary["failures"] == [{"index": 4, "quantity": "y"}]
        assert summary["metadata"] == {"d": str(2 ** 80)}

    def test_schur_rows(self, ctx):
        rows = schur_rows(schur_catalog(4, ctx), 20)
        assert all(len(row) == len(SCHUR_COLUMNS) for row in rows)
        assert rows[0][:2] == ["0", "1"]
        assert rows[0][-1] == "10"

    def test_approximant_rows(self, ctx):
        trace = classical_approximants(circle_point(Fraction(1, 4), ctx), 4, ctx)
        rows = approximant_rows(trace, 20)
        assert len(rows) == 5
        assert all(len(row) == len(APPROXIMANT_COLUMNS) for row in rows)
        # Q_2 vanishes at x = i
        assert rows[2][1:3] == ["inf", "inf"]


@pytest.mark.unit
class TestPatternText:
    def test_periodic_pattern(self):
        text = pattern_text(mod_convergents(PeriodicStream([], [1]), 2))
        assert text == "modulus 2\npreperiod\nperiod 0/1,1/1,1/0\n"

    def test_finite_pattern(self):
        text = pattern_text(mod_convergents(ExplicitStream([1, 2, 3]), 5))
        assert text == "modulus 5\nresidues 0/1,1/1,2/3,2/0\nperiod none\n"


@pytest.mark.golden
class TestGoldenPatterns:
    """Test residue patterns against the checked-in golden files"""

    @pytest.mark.parametrize("name, stream", [
        ("alpha_mod5.txt", alpha_stream()),
        ("twos_tower_mod5.txt", twos_tower_stream()),
    ])
    def test_matches_golden_file(self, name, stream):
        expected = (GOLDEN_DIR / name).read_text(encoding="utf-8")
        assert pattern_text(mod_convergents(stream, 5)) == expected
