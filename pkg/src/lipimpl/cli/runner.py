"""Batch runner: expand the sweep, run each point, write results and the summary."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .. import config
from ..errors import CertificateError, NumericalError, SpecError
from .base import ResultWriter
from .pipelines import run_pipeline
from .spec import RunSpec, expand_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CERTIFICATE = 1
EXIT_SPEC = 2
EXIT_NUMERICAL = 3

Status = Literal["passed", "certificate_failed", "certificate_error", "numerical_error", "spec_error"]

STATUS_EXIT = {
    "passed": EXIT_OK,
    "certificate_failed": EXIT_CERTIFICATE,
    "certificate_error": EXIT_CERTIFICATE,
    "numerical_error": EXIT_NUMERICAL,
    "spec_error": EXIT_SPEC,
}


class PointOutcome(BaseModel):
    """What happened at one sweep point."""
    index: int
    assignments: Dict[str, Any] = Field(default_factory=dict)
    status: Status
    certificates: Dict[str, bool] = Field(default_factory=dict)
    failed: List[str] = Field(default_factory=list, description="Certificates that did not hold")
    notices: List[str] = Field(default_factory=list)
    message: Optional[str] = None
    file: Optional[str] = None


class RunSummary(BaseModel):
    """Per-point outcomes and the overall exit status; written last."""
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=config.RUN_SPEC_SCHEMA, alias="schema")
    command: str
    seed: int
    format: str
    exit_code: int
    points: List[PointOutcome]


def exit_code(outcomes: List[PointOutcome]) -> int:
    """Spec errors take precedence over numerical errors, which take precedence over failed certificates."""
    codes = {STATUS_EXIT[outcome.status] for outcome in outcomes}
    for code in (EXIT_SPEC, EXIT_NUMERICAL, EXIT_CERTIFICATE):
        if code in codes:
            return code
    return EXIT_OK


def _run_point(index: int, assignments: Dict[str, Any], spec: RunSpec, writer: ResultWriter) -> PointOutcome:
    outcome = dict(index=index, assignments=assignments)
    try:
        result = run_pipeline(spec)
    except NumericalError as e:
        logger.info("Point %d: %s", index, e)
        return PointOutcome(status="numerical_error", message=f"{type(e).__name__}: {e}", **outcome)
    except CertificateError as e:
        logger.info("Point %d: %s", index, e)
        return PointOutcome(status="certificate_error", message=f"{type(e).__name__}: {e}", **outcome)
    except (SpecError, ValidationError, ValueError) as e:
        return PointOutcome(status="spec_error", message=f"{type(e).__name__}: {e}", **outcome)

    name = f"point_{index:04d}.{spec.output.format}"
    if spec.output.format == "csv":
        writer.write_csv(name, result.rows)
    else:
        writer.write_json(name, {
            "point": index,
            "assignments": assignments,
            "rows": result.rows,
            "record": result.record,
            "certificates": result.certificates,
            "notices": result.notices,
        })
    failed = [key for key, ok in result.certificates.items() if not ok]
    return PointOutcome(
        status="certificate_failed" if failed else "passed",
        certificates=result.certificates,
        failed=failed,
        notices=result.notices,
        file=name,
        **outcome,
    )


def run(
    spec: RunSpec,
    out_dir: Path,
    fmt: Optional[str] = None,
    workers: Optional[int] = None,
    seed: Optional[int] = None,
) -> RunSummary:
    """Run every sweep point and write one result file per point, then summary.json.

    Args:
        spec: Validated run file
        out_dir: Output directory, created if missing
        fmt: Overrides output.format
        workers: Overrides the number of points run concurrently
        seed: Overrides the run seed

    Returns:
        RunSummary whose exit_code is the CLI exit status

    Raises:
        InvalidRunSpec: If a sweep point does not validate
    """
    overrides: Dict[str, Any] = {}
    if fmt is not None:
        overrides["output"] = spec.output.model_copy(update={"format": fmt})
    if workers is not None:
        overrides["workers"] = workers
    if seed is not None:
        overrides["seed"] = seed
    spec = spec.model_copy(update=overrides)

    # Sweep points are expanded from the overridden spec, so swept keys win
    points = [(index, assignments, point) for index, (assignments, point) in enumerate(expand_sweep(spec))]
    writer = ResultWriter(out_dir)
    logger.info("Running %d point(s) of '%s' with %d worker(s)", len(points), spec.command, spec.workers)

    with ThreadPoolExecutor(max_workers=spec.workers) as executor:
        outcomes = list(executor.map(lambda item: _run_point(*item, writer), points))

    summary = RunSummary(
        command=spec.command,
        seed=spec.seed,
        format=spec.output.format,
        exit_code=exit_code(outcomes),
        points=outcomes,
    )
    writer.write_json(config.SUMMARY_FILENAME, summary.model_dump(mode="json", by_alias=True))
    return summary
