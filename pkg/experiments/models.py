"""
Data models for the experiment runner.

ExperimentConfig is the validated form of a merged configuration; its JSON
schema is what `rrlab schema` publishes. RunResult carries what a subcommand
produced back to the CLI.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from services.verify import TraceReport


class Subcommand(str, Enum):
    SCHUR_CATALOG = "schur-catalog"
    TRACE = "trace"
    DIVERGE = "diverge"
    TEN_LIMITS = "ten-limits"
    GENERAL_PROBE = "general-probe"
    LIPSCHITZ = "lipschitz"
    GROWTH = "growth"
    K_RATE = "k-rate"
    PERTURB = "perturb"
    OUTSIDE = "outside"
    MOD_PATTERN = "mod-pattern"
    BUILD_POINT = "build-point"
    SAMPLE_MEASURE = "sample-measure"


class Profile(str, Enum):
    QUICK = "quick"
    FULL = "full"


def parse_fraction(value: str) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational: {value!r}") from exc


class PointSpec(BaseModel):
    """Exactly one of a rational angle, a partial-quotient stream or a disk point"""

    model_config = ConfigDict(extra="forbid")

    angle: Optional[str] = None
    stream: Optional[Dict[str, Any]] = None
    disk: Optional[Tuple[str, str]] = None

    @model_validator(mode="after")
    def exactly_one(self) -> "PointSpec":
        given = [name for name in ("angle", "stream", "disk") if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError(f"point needs exactly one of angle, stream, disk; got {given or 'none'}")
        return self

    @field_validator("angle")
    @classmethod
    def angle_in_unit_interval(cls, v):
        if v is not None and not 0 <= parse_fraction(v) <= 1:
            raise ValueError("angle must lie in [0, 1]")
        return v

    @field_validator("disk")
    @classmethod
    def disk_is_rational(cls, v):
        if v is not None:
            parse_fraction(v[0])
            parse_fraction(v[1])
        return v

    def angle_fraction(self) -> Fraction:
        return parse_fraction(self.angle)

    def gaussian(self) -> Tuple[Fraction, Fraction]:
        return parse_fraction(self.disk[0]), parse_fraction(self.disk[1])


class ExperimentConfig(BaseModel):
    """A fully merged, validated experiment configuration"""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    subcommand: Subcommand
    precision_bits: int = Field(256, ge=64, le=1 << 22)
    guard_bits: int = Field(32, ge=1)
    seed: int = Field(20240101, ge=0)
    output_dir: str = "./rrlab_output"

    point: Optional[PointSpec] = None
    kind: str = "S-minimal"
    kappa: str = "1"
    constant: int = Field(1, ge=1)
    levels: int = Field(3, ge=1)

    m: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=0)
    m_values: List[int] = Field(default_factory=list)
    m_max: int = Field(50, ge=1)
    q_max: int = Field(20, ge=2)
    N: int = Field(200, ge=0)
    n: Optional[int] = Field(None, ge=0)
    pairs: int = Field(1, ge=1)

    perturbation: Optional[str] = None
    epsilon: Optional[str] = None
    candidates: List[Tuple[str, str]] = Field(default_factory=list)
    monotone_from: int = Field(0, ge=0)

    modulus: int = Field(5, ge=2)
    rule: str = "S"
    depth: int = Field(10, ge=1)
    samples: int = Field(1000, ge=100)

    @field_validator("kappa", "perturbation", "epsilon")
    @classmethod
    def exact_rational(cls, v):
        if v is not None:
            parse_fraction(v)
        return v

    @field_validator("candidates")
    @classmethod
    def candidates_are_complex(cls, v):
        for pair in v:
            for item in pair:
                complex(item.replace(" ", ""))
        return v

    @model_validator(mode="after")
    def guard_below_precision(self) -> "ExperimentConfig":
        if self.guard_bits >= self.precision_bits:
            raise ValueError("guard_bits must be smaller than precision_bits")
        if self.k is not None and self.m is not None and not (
            self.k < self.m or (self.k == 1 and self.m == 1)
        ):
            raise ValueError("k must satisfy 0 <= k < m")
        return self


@dataclass
class RunResult:
    """What one subcommand produced"""

    subcommand: Subcommand
    reports: List[TraceReport] = field(default_factory=list)
    artifacts: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(report.all_pass for report in self.reports)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    elapsed: float
    detail: str = ""


@dataclass
class AcceptanceSummary:
    profile: Profile
    criteria: List[CriterionResult] = field(default_factory=list)
    total_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)
