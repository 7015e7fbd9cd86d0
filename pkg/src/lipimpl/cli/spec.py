"""Run file schema: one command, one problem, optional sweep axes."""

import copy
import itertools
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .. import config as settings
from ..errors import InvalidRunSpec, SweepPathError
from ..models import SampleSpec

FREE_FORM = {("config",), ("problem", "params")}

Command = Literal["solve", "theta", "lipschitz", "assumptions", "oscillator", "proposition"]


class BuiltinProblemSpec(BaseModel):
    """A registered problem with build parameters."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["builtin"]
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class OscillatorProblemSpec(BaseModel):
    """An inline dry-friction oscillator; unset fields take the library defaults."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["oscillator"]
    eps: float = 0.0
    forcing: str = "zero"
    horizon: float = settings.DEFAULT_HORIZON
    a: Optional[float] = None
    b: Optional[float] = None
    v0: Tuple[float, float] = (1.0, 0.0)
    t_grid: int = settings.DEFAULT_T_GRID
    rtol: float = settings.DEFAULT_RTOL
    atol: float = settings.DEFAULT_ATOL
    max_step: float = settings.DEFAULT_MAX_STEP
    stick_tol: float = settings.DEFAULT_STICK_TOL
    max_events: int = settings.DEFAULT_MAX_EVENTS

    def oscillator_params(self) -> Dict[str, Any]:
        return self.model_dump(exclude={"kind"})


ProblemSpec = Union[
    str,
    Annotated[Union[BuiltinProblemSpec, OscillatorProblemSpec], Field(discriminator="kind")],
]


class PipelineParams(BaseModel):
    """Command parameters. Each command reads the ones it needs."""
    model_config = ConfigDict(extra="forbid")

    x: Optional[List[float]] = Field(default=None, description="solve: parameter x, default x0")
    alpha_search: bool = Field(default=False, description="solve: also halve alpha from r")
    v: Optional[List[float]] = Field(default=None, description="theta/oscillator: v, default v0")
    eps: Optional[Union[float, List[float]]] = Field(default=None, description="Perturbation parameter")
    delta: Optional[float] = Field(default=None, gt=0, description="lipschitz: single delta instead of the ladder")
    delta_ladder: List[float] = Field(default_factory=lambda: list(settings.DEFAULT_DELTA_LADDER), min_length=1)
    n_pairs: int = Field(default=settings.DEFAULT_N_PAIRS, gt=0)
    margin: float = Field(default=settings.DEFAULT_MARGIN, gt=0)
    v1: Optional[List[float]] = None
    v2: Optional[List[float]] = None
    grid: Tuple[int, int] = settings.DEFAULT_NV_GRID
    eps_ladder: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    v_samples: Optional[List[List[float]]] = None
    samples: SampleSpec = Field(default_factory=SampleSpec)

    @field_validator("delta_ladder")
    @classmethod
    def _positive_ladder(cls, value: List[float]) -> List[float]:
        if any(delta <= 0 for delta in value):
            raise ValueError("delta ladder entries must be positive")
        return value


class SweepAxis(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str = Field(description="Dotted path into the run file, e.g. params.eps")
    values: List[Any] = Field(min_length=1)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["csv", "json"] = "csv"


class RunSpec(BaseModel):
    """A batch run: the command, its problem, parameters and sweep."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(alias="schema")
    command: Command
    problem: ProblemSpec
    config: Dict[str, Any] = Field(default_factory=dict, description="SolverConfig overrides")
    params: PipelineParams = Field(default_factory=PipelineParams)
    sweep: List[SweepAxis] = Field(default_factory=list)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = 0
    workers: int = Field(default=settings.DEFAULT_WORKERS, ge=1)

    @model_validator(mode="after")
    def _check_sweep_paths(self) -> "RunSpec":
        document = self.document()
        for axis in self.sweep:
            _resolve(document, axis.path)
        return self

    def document(self) -> Dict[str, Any]:
        """The run file as plain data, defaults filled in."""
        return self.model_dump(mode="json", by_alias=True)


def _resolve(document: Dict[str, Any], path: str) -> Tuple[Dict[str, Any], str]:
    """Parent mapping and key addressed by a dotted path."""
    keys = path.split(".")
    if keys[0] in ("schema", "sweep", "command"):
        raise SweepPathError(f"Sweep path '{path}' may not change '{keys[0]}'")
    node: Any = document
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise SweepPathError(f"Sweep path '{path}' does not resolve at '{key}'")
        node = node[key]
    # config overrides and builtin params are free-form; everything else must already exist
    if not isinstance(node, dict) or (keys[-1] not in node and tuple(keys[:-1]) not in FREE_FORM):
        raise SweepPathError(f"Sweep path '{path}' does not resolve at '{keys[-1]}'")
    return node, keys[-1]


def expand_sweep(spec: RunSpec) -> List[Tuple[Dict[str, Any], RunSpec]]:
    """Cartesian product of the sweep axes, in axis order.

    Returns:
        List of (assignments, point spec) pairs; a single point without sweep
    """
    if not spec.sweep:
        return [({}, spec)]
    points = []
    paths = [axis.path for axis in spec.sweep]
    for values in itertools.product(*(axis.values for axis in spec.sweep)):
        document = copy.deepcopy(spec.document())
        document["sweep"] = []
        for path, value in zip(paths, values):
            parent, key = _resolve(document, path)
            parent[key] = value
        try:
            point = RunSpec.model_validate(document)
        except ValidationError as e:
            raise InvalidRunSpec(f"Sweep point {dict(zip(paths, values))} is invalid: {_describe(e)}") from e
        points.append((dict(zip(paths, values)), point))
    return points


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}" for item in error.errors()
    )


def load_run_spec(path: Union[str, Path]) -> RunSpec:
    """Parse and validate a run file.

    Raises:
        InvalidRunSpec: With the line and column of a JSON error or the
            field path of a validation error
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidRunSpec(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    try:
        return RunSpec.model_validate(data)
    except ValidationError as e:
        raise InvalidRunSpec(f"{path}: {_describe(e)}") from e
