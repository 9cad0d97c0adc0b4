"""
Pydantic models for fan inputs, job specs and check reports.
"""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

from .exceptions import InputError, NotPiecewiseLinear
from .fans import Fan, PiecewiseFunction, SubdivisionMap, build_fan
from .linalg import fmt, qq

Rational = Union[int, str]


class CheckKind(str, Enum):
    HL = "hl"
    HR = "hr"
    RHL = "rhl"
    RHR = "rhr"
    CONVEX = "convex"
    COMPLETE = "complete"
    DEFORM = "deform"


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


# Inputs
class FanSpec(BaseModel):
    dim: int = Field(ge=0)
    rays: List[List[Rational]] = Field(default_factory=list)
    cones: List[List[int]] = Field(default_factory=list)
    lineality: List[List[Rational]] = Field(default_factory=list)

    @field_validator("rays", "lineality")
    @classmethod
    def _rationals(cls, rows):
        for row in rows:
            for x in row:
                try:
                    qq(x)
                except Exception as exc:  # noqa: BLE001 - sympy raises several types
                    raise ValueError(f"not a rational number: {x!r}") from exc
        return rows

    def build(self) -> Fan:
        return build_fan(self.dim, self.rays, self.cones or [[]], self.lineality)

    @classmethod
    def from_fan(cls, fan: Fan) -> "FanSpec":
        def row(p):
            return [_rational_out(x) for x in p]

        return cls(
            dim=fan.dim,
            rays=[row(r) for r in fan.rays],
            cones=[list(fan.cones[s].rays) for s in fan.maximal],
            lineality=[row(b) for b in fan.lineality],
        )


class SubdivisionSpec(BaseModel):
    source: FanSpec
    target: FanSpec
    assignment: Optional[List[int]] = None

    def build(self) -> SubdivisionMap:
        return SubdivisionMap.from_fans(self.source.build(), self.target.build(), self.assignment)

    @classmethod
    def from_subdivision(cls, subdivision: SubdivisionMap) -> "SubdivisionSpec":
        return cls(
            source=FanSpec.from_fan(subdivision.source),
            target=FanSpec.from_fan(subdivision.target),
            assignment=list(subdivision.assignment),
        )


class FunctionSpec(BaseModel):
    """
    A piecewise linear function: one linear form per listed cone of the fan
    spec (same order), ray values on a simplicial fan, or a global form.
    """

    forms: Optional[List[List[Rational]]] = None
    ray_values: Optional[List[Rational]] = None
    linear: Optional[List[Rational]] = None

    def build(self, fan: Fan, spec: Optional[FanSpec] = None) -> PiecewiseFunction:
        given = [x is not None for x in (self.forms, self.ray_values, self.linear)]
        if sum(given) != 1:
            raise NotPiecewiseLinear("give exactly one of forms, ray_values or linear")
        if self.linear is not None:
            return PiecewiseFunction.global_linear(fan, self.linear)
        if self.ray_values is not None:
            if len(self.ray_values) != len(fan.rays):
                raise NotPiecewiseLinear("one value per ray is required")
            return PiecewiseFunction.from_ray_values(fan, self.ray_values)
        listed = spec.cones if spec is not None else [list(fan.cones[s].rays) for s in fan.maximal]
        if len(listed) != len(self.forms):
            raise NotPiecewiseLinear(f"{len(self.forms)} forms given for {len(listed)} cones")
        forms = {}
        for rays, form in zip(listed, self.forms):
            index = fan.cone_by_rays(rays)
            if index is None:
                raise InputError(f"cone {rays} is not a cone of the fan")
            forms[index] = form
        return PiecewiseFunction.from_linear_forms(fan, forms)

    @classmethod
    def from_function(cls, function: PiecewiseFunction) -> "FunctionSpec":
        """Forms in the cone order of ``FanSpec.from_fan(function.fan)``."""
        fan = function.fan
        return cls(forms=[[_rational_out(x) for x in function.linear_form(s)] for s in fan.maximal])


class VerifyInput(BaseModel):
    """Everything a verifier may need; which fields are required depends on the kind."""

    fan: Optional[FanSpec] = None
    subdivision: Optional[SubdivisionSpec] = None
    l: Optional[FunctionSpec] = None
    l_hat: Optional[FunctionSpec] = None
    tau: Optional[List[int]] = None
    eps: Optional[List[Rational]] = None
    cap: Optional[int] = Field(default=None, ge=0)


class JobSpec(BaseModel):
    command: Literal["ih", "local-h", "decompose", "subdivide", "complete-fan", "verify"]
    kind: Optional[str] = None
    inputs: List[str] = Field(default_factory=list)
    cap: Optional[int] = Field(default=None, ge=0)
    eps: Optional[List[str]] = None
    format: Literal["json", "tsv"] = "json"
    refinement: Optional[str] = None
    tau: Optional[List[int]] = None
    output: Optional[str] = None
    record: bool = False


# Reports
class BettiTable(BaseModel):
    dims: Dict[str, int]
    betti: str
    relative: Optional[Dict[str, int]] = None
    pairing: Optional[Dict[str, Any]] = None


class WTable(BaseModel):
    cones: Dict[str, Dict[str, int]]
    rays: Dict[str, List[int]]
    provenance: str = ""


class PerverseTableModel(BaseModel):
    entries: Dict[str, Dict[str, int]]
    graded: Dict[str, Dict[str, int]]
    filtration: Dict[str, int]
    semi_small: Optional[bool] = None


class LocalHReport(BaseModel):
    w: WTable
    perverse: PerverseTableModel


class DegreeRow(BaseModel):
    degree: int
    i: int
    rank: Optional[int] = None
    required: Optional[int] = None
    inertia: Optional[List[int]] = None
    expected: Optional[List[int]] = None
    primitive_inertia: Optional[List[int]] = None
    sign: Optional[int] = None
    passed: bool


class CheckReport(BaseModel):
    name: str
    kind: str = "check"
    hypotheses: Dict[str, Any] = Field(default_factory=dict)
    cone: Optional[List[int]] = None
    table: List[DegreeRow] = Field(default_factory=list)
    passed: bool
    witnesses: List[List[str]] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    children: List["CheckReport"] = Field(default_factory=list)


class LefschetzReport(CheckReport):
    kind: Literal["lefschetz"] = "lefschetz"


class HodgeRiemannReport(CheckReport):
    kind: Literal["hodge_riemann"] = "hodge_riemann"


class RunSummary(BaseModel):
    run_id: str
    command: str
    status: RunStatus
    exit_code: Optional[int] = None
    created_at: datetime
    completed_at: Optional[datetime] = None


class RunDetail(RunSummary):
    request: Optional[Dict[str, Any]] = None
    report: Optional[Dict[str, Any]] = None


class AuditEventModel(BaseModel):
    event_id: str
    run_id: str
    action: str
    details: Optional[Dict[str, Any]] = None
    created_at: datetime


def _rational_out(x) -> Rational:
    text = fmt(x)
    return int(text) if "/" not in text else text
