from typing import Any

from pydantic import BaseModel

from mex.qcurvature.types import Count, Scale


class IdentityReport(BaseModel):
    """Residuals of an identity checked at a set of points."""

    identity: str
    points: Count
    max_abs_residual: float
    max_rel_residual: float
    scale: Scale
    tolerance: float
    passed: bool


class InequalityReport(BaseModel):
    """Smallest slack of an inequality over the points where it applies."""

    inequality: str
    points: Count
    applicable: Count
    min_slack: float | None
    scale: Scale
    tolerance: float
    passed: bool


class RunReport(BaseModel):
    """Envelope of one command-line run."""

    schema_version: int
    tool_version: str
    input_digest: str
    subcommand: str
    parameters: dict[str, Any]
    results: dict[str, Any]
    passed: bool
    timing: dict[str, float]
