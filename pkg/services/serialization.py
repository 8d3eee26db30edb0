"""
Artifact codecs
CSV rows, canonical JSON and metadata sidecars for every experiment output

Decimal fields carry ceil(bits * log10(2)) significant digits, so a value read
back at the declared precision reproduces the computed one.
"""

import csv
import hashlib
import json
from dataclasses import fields, is_dataclass
from enum import Enum
from fractions import Fraction
from math import ceil, log10
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import mpmath
import structlog

from config.settings import get_settings
from services.bigarith import INFINITY, PointAtInfinity, PrecisionContext, format_int, is_infinite
from services.cfrac import ModConvergentPattern
from services.rrcf import ApproximantTrace
from services.schur import SchurValue
from services.verify import TraceReport

logger = structlog.get_logger()

INFINITY_TOKEN = "inf"


def digits_for(bits: int) -> int:
    return ceil(bits * log10(2))


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return format_int(value.numerator)
    return f"{format_int(value.numerator)}/{format_int(value.denominator)}"


def format_real(value, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, PointAtInfinity):
        return INFINITY_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return format_int(value)
    if isinstance(value, Fraction):
        return format_fraction(value)
    return mpmath.nstr(value, digits, min_fixed=-4, max_fixed=digits)


def complex_parts(value, digits: int) -> List[str]:
    """[re, im] strings; the point at infinity is written as inf in both columns"""
    if value is None:
        return ["", ""]
    if is_infinite(value):
        return [INFINITY_TOKEN, INFINITY_TOKEN]
    if hasattr(value, "_mpc_"):
        return [format_real(value.real, digits), format_real(value.imag, digits)]
    if isinstance(value, complex):
        return [repr(value.real), repr(value.imag)]
    return [format_real(value, digits), "0"]


def to_jsonable(value: Any, digits: int) -> Any:
    """Recursively convert numbers, dataclasses and containers to JSON-safe values"""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        # exact integers stay exact without tripping JSON parsers on huge values
        return value if value.bit_length() <= 53 else format_int(value)
    if isinstance(value, float):
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, PointAtInfinity):
        return INFINITY_TOKEN
    if isinstance(value, PrecisionContext):
        return {"bits": value.bits, "guard_bits": value.guard_bits}
    # mpf and mpc from any private context
    if hasattr(value, "_mpf_"):
        return format_real(value, digits)
    if hasattr(value, "_mpc_"):
        re, im = complex_parts(value, digits)
        return {"re": re, "im": im}
    if isinstance(value, complex):
        return {"re": repr(value.real), "im": repr(value.imag)}
    if is_dataclass(value):
        return {f.name: to_jsonable(getattr(value, f.name), digits)
                for f in fields(value) if f.repr}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value, key=str) if isinstance(value, (set, frozenset)) else value
        return [to_jsonable(v, digits) for v in items]
    return str(value)


def canonical_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def config_hash(config: Dict[str, Any]) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(data), encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.debug("csv written", path=str(path), rows=count)
    return path


def write_sidecar(path: Path, config: Dict[str, Any], bits: int, columns: Sequence[str],
                  extra: Dict[str, Any] = None) -> Path:
    """<artifact>.meta.json next to a CSV: schema, config hash, precision and columns"""
    sidecar = path.with_name(path.name + ".meta.json")
    data = {
        "schema_version": get_settings().SCHEMA_VERSION,
        "config_hash": config_hash(config),
        "precision_bits": bits,
        "digits": digits_for(bits),
        "columns": list(columns),
    }
    if extra:
        data.update(extra)
    return write_json(sidecar, data)


# ---------------------------------------------------------------------------
# Per-module row layouts
# ---------------------------------------------------------------------------

TRACE_REPORT_COLUMNS = ("index", "quantity", "measured", "lower", "upper", "passed")


def trace_report_rows(report: TraceReport, digits: int) -> List[List[str]]:
    return [
        [str(r.index), r.quantity, format_real(r.measured, digits), format_real(r.lower, digits),
         format_real(r.upper, digits), "true" if r.passed else "false"]
        for r in report.records
    ]


def trace_report_json(report: TraceReport, digits: int) -> Dict[str, Any]:
    worst = report.worst_margin
    return {
        "schema_version": get_settings().SCHEMA_VERSION,
        "experiment": report.experiment,
        "all_pass": report.all_pass,
        "worst_margin": format_real(worst, digits) if worst is not None else None,
        "records": len(report.records),
        "failures": [{"index": r.index, "quantity": r.quantity} for r in report.failures],
        "metadata": to_jsonable(report.metadata, digits),
    }


SCHUR_COLUMNS = ("k", "m", "lambda", "sigma", "exponent", "K_re", "K_im", "R_re", "R_im", "R_index")


def schur_rows(values: Iterable[SchurValue], digits: int) -> List[List[str]]:
    rows = []
    for value in values:
        rows.append(
            [str(value.root.k), str(value.root.m), str(value.lam), str(value.sigma), str(value.exponent)]
            + complex_parts(value.k_value, digits)
            + complex_parts(value.r_value, digits)
            + [str(value.r_index)]
        )
    return rows


APPROXIMANT_COLUMNS = ("n", "K_re", "K_im", "R_re", "R_im", "abs_Q", "h_re", "h_im")


def approximant_rows(trace: ApproximantTrace, digits: int) -> List[List[str]]:
    return [
        [str(record.n)]
        + complex_parts(record.k, digits)
        + complex_parts(record.r, digits)
        + [format_real(record.abs_q, digits)]
        + complex_parts(record.h, digits)
        for record in trace.records
    ]


def pattern_text(pattern: ModConvergentPattern) -> str:
    """Plain-text form of a residue pattern, one field per line"""
    if pattern.period is None:
        head = ",".join(f"{c}/{d}" for c, d in pattern.residues)
        return f"modulus {pattern.modulus}\nresidues {head}\nperiod none\n"
    pre = ",".join(f"{c}/{d}" for c, d in pattern.residues[: pattern.preperiod])
    cycle = ",".join(f"{c}/{d}" for c, d in pattern.cycle())
    lines = [f"modulus {pattern.modulus}", f"preperiod {pre}".rstrip(), f"period {cycle}"]
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def read_csv(path: Path) -> Tuple[List[str], List[List[str]]]:
    """Header and rows of a CSV written by write_csv"""
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, [])
        return header, [row for row in reader]


def parse_real(text: str, ctx: PrecisionContext):
    """Inverse of format_real at the precision of ctx"""
    if text == "":
        return None
    if text == INFINITY_TOKEN:
        return INFINITY
    if text in ("true", "false"):
        return text == "true"
    if "/" in text:
        numerator, denominator = text.split("/")
        return ctx.real(Fraction(int(numerator, 0), int(denominator, 0)))
    if text.lstrip("-").startswith("0x"):
        return ctx.real(int(text, 16))
    return ctx.mp.mpf(text)


def parse_complex(parts: Sequence[str], ctx: PrecisionContext):
    """Inverse of complex_parts; inf in either column is the point at infinity"""
    re, im = parts
    if re == "" and im == "":
        return None
    if INFINITY_TOKEN in (re, im):
        return INFINITY
    return ctx.mp.mpc(parse_real(re, ctx), parse_real(im, ctx))
