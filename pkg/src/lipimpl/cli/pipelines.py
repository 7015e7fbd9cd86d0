"""One pipeline per command: resolve the problem, compute, report certificates."""

import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..dryfriction import (
    FAMILY_RADIUS,
    TrajectoryCache,
    base_switching_time,
    family_F,
    integrate_system,
    proposition_one_check,
    unrotate,
    verify_assumption_F,
)
from ..errors import SpecError
from ..implicit import search_alpha, solve_implicit
from ..models import ImplicitProblem, OscillatorSpec, PerturbedFamily, SolverConfig
from ..perturbation import (
    ThetaTracker,
    empirical_lipschitz_quotient,
    estimate_assumption_constants,
    scan_delta_ladder,
)
from ..problems import get_problem
from .spec import BuiltinProblemSpec, OscillatorProblemSpec, RunSpec

logger = logging.getLogger(__name__)

FD_NOTICE = (
    "{name}: F'_t or F'_v is only available by finite differences; "
    "continuity of the derivatives at the base point is assumed, not checked"
)


class PipelineResult(BaseModel):
    """Rows for the result file plus the certificate verdicts of one point."""
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    record: Dict[str, Any] = Field(default_factory=dict)
    certificates: Dict[str, bool] = Field(default_factory=dict)
    notices: List[str] = Field(default_factory=list)


class ResolvedProblem(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: str
    built: Any
    config: SolverConfig


def resolve_problem(spec: RunSpec) -> ResolvedProblem:
    """Build the named or inline problem and merge config overrides onto its defaults."""
    problem = spec.problem
    if isinstance(problem, str):
        problem = BuiltinProblemSpec(kind="builtin", name=problem)
    if isinstance(problem, OscillatorProblemSpec):
        kind, defaults = "oscillator", {}
        built = OscillatorSpec(**problem.oscillator_params())
    else:
        entry = get_problem(problem.name)()
        kind, defaults = entry.kind, entry.default_config
        built = entry.build(**problem.params)
    return ResolvedProblem(kind=kind, built=built, config=SolverConfig(**{**defaults, **spec.config}))


def _flatten(prefix: str, values) -> Dict[str, float]:
    return {f"{prefix}_{i}": float(value) for i, value in enumerate(np.atleast_1d(values))}


def _require(resolved: ResolvedProblem, *kinds: str, command: str) -> None:
    if resolved.kind not in kinds:
        raise SpecError(f"Command '{command}' needs a problem of kind {' or '.join(kinds)}, got {resolved.kind}")


def _family(resolved: ResolvedProblem) -> PerturbedFamily:
    if resolved.kind == "oscillator":
        return family_F(resolved.built)
    return resolved.built


def _oscillator_cache(spec: OscillatorSpec) -> TrajectoryCache:
    return TrajectoryCache(spec, max(spec.b, base_switching_time(spec) + FAMILY_RADIUS))


def _eps(resolved: ResolvedProblem, family: PerturbedFamily, value) -> np.ndarray:
    if value is None:
        return np.array([resolved.built.eps]) if resolved.kind == "oscillator" else family.eps0
    return np.atleast_1d(np.asarray(value, dtype=float))


def _notices(family: PerturbedFamily) -> List[str]:
    return [] if family.has_analytic_jacobians else [FD_NOTICE.format(name=family.name)]


def run_solve(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "implicit", command="solve")
    problem: ImplicitProblem = resolved.built
    x = problem.x0 if spec.params.x is None else spec.params.x
    y, certificate = solve_implicit(problem, resolved.config, x)
    row = {
        **_flatten("x", x),
        **_flatten("y", y),
        "iterations": certificate.iterations,
        "q_measured": certificate.q_measured,
        "residual": certificate.residual,
        "ball_ok": certificate.ball_ok,
    }
    result = PipelineResult(
        rows=[row],
        record={"y": y.tolist(), "certificate": certificate.model_dump()},
        certificates={"ball_ok": certificate.ball_ok},
    )
    if spec.params.alpha_search:
        search = search_alpha(problem, resolved.config, seed=spec.seed)
        result.record["alpha_search"] = search.model_dump()
        result.certificates["alpha_certified"] = search.certified
    return result


def run_theta(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "family", "oscillator", command="theta")
    family = _family(resolved)
    tracker = ThetaTracker(family, resolved.config)
    v = family.v0 if spec.params.v is None else spec.params.v
    eps = _eps(resolved, family, spec.params.eps)
    theta, certificate = solve_implicit(tracker.problem, tracker.config, tracker.parameter(v, eps), tracker.jacobian)
    row = {
        **_flatten("v", v),
        **_flatten("eps", eps),
        **_flatten("theta", theta),
        "iterations": certificate.iterations,
        "q_measured": certificate.q_measured,
        "residual": certificate.residual,
        "ball_ok": certificate.ball_ok,
    }
    return PipelineResult(
        rows=[row],
        record={"theta": theta.tolist(), "certificate": certificate.model_dump()},
        certificates={"ball_ok": certificate.ball_ok},
        notices=_notices(family),
    )


def _theta_row(result) -> Dict[str, Any]:
    return {
        "delta": result.delta_used,
        **_flatten("eps", result.eps),
        **_flatten("theta", result.theta),
        "R": result.R,
        "quotient_sup": result.quotient_sup,
        "deviation_sup": result.deviation_sup,
        "margin": result.margin,
        "n_pairs": result.n_pairs_used,
        "ine_ok": result.ine_ok,
    }


def run_lipschitz(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "family", "oscillator", command="lipschitz")
    family = _family(resolved)
    params = spec.params
    eps = _eps(resolved, family, params.eps)
    if params.delta is not None:
        result = empirical_lipschitz_quotient(
            family, eps, params.delta, params.n_pairs, spec.seed, resolved.config, params.margin, spec.workers
        )
        return PipelineResult(
            rows=[_theta_row(result)],
            record=result.model_dump(),
            certificates={"ine_ok": result.ine_ok},
            notices=_notices(family),
        )
    scan = scan_delta_ladder(
        family, eps, params.delta_ladder, params.n_pairs, spec.seed, resolved.config, params.margin, spec.workers
    )
    return PipelineResult(
        rows=[_theta_row(result) for result in scan.results],
        record=scan.model_dump(),
        certificates={"ine_ok": scan.delta is not None},
        notices=_notices(family),
    )


def run_assumptions(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "family", "oscillator", command="assumptions")
    family = _family(resolved)
    estimates = estimate_assumption_constants(family, spec.params.samples, spec.seed)
    rows = [
        {**_flatten("eps", sample.eps), **_flatten("v", sample.v), "L_eps_v": sample.value}
        for sample in estimates.L_eps_v
    ]
    result = PipelineResult(
        rows=rows,
        record={"estimates": estimates.model_dump()},
        certificates={"shrinking_ok": estimates.shrinking_ok},
        notices=_notices(family),
    )
    if resolved.kind == "oscillator":
        oscillator: OscillatorSpec = resolved.built
        v_samples = spec.params.v_samples or [list(oscillator.v0)]
        t_samples = np.linspace(0.0, oscillator.horizon, oscillator.t_grid + 1)
        report = verify_assumption_F(oscillator, spec.params.eps_ladder, v_samples, t_samples)
        result.record["assumption_F"] = report.model_dump()
        result.certificates["assumption_F"] = report.passed
    return result


def run_oscillator(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "oscillator", command="oscillator")
    oscillator: OscillatorSpec = resolved.built
    if spec.params.eps is not None:
        oscillator = oscillator.model_copy(update={"eps": float(np.atleast_1d(spec.params.eps)[0])})
    v = list(oscillator.v0) if spec.params.v is None else spec.params.v
    trajectory = integrate_system(oscillator, v)
    ts = np.linspace(0.0, oscillator.horizon, oscillator.t_grid + 1)
    states = trajectory.state_at(ts)
    u, u_dot = unrotate(ts, states[:, 0], states[:, 1])
    rows = [
        {"t": t, "x1": x1, "x2": x2, "u": ui, "u_dot": udi}
        for t, x1, x2, ui, udi in zip(ts, states[:, 0], states[:, 1], u, u_dot)
    ]
    return PipelineResult(
        rows=rows,
        record={"eps": oscillator.eps, "v": list(map(float, v)), "events": trajectory.events},
    )


def run_proposition(spec: RunSpec, resolved: ResolvedProblem) -> PipelineResult:
    _require(resolved, "oscillator", command="proposition")
    oscillator: OscillatorSpec = resolved.built
    params = spec.params
    eps = oscillator.eps if params.eps is None else float(np.atleast_1d(params.eps)[0])
    v1 = list(oscillator.v0) if params.v1 is None else params.v1
    v2 = v1 if params.v2 is None else params.v2

    cache = _oscillator_cache(oscillator)
    family = family_F(oscillator, cache)
    scan = scan_delta_ladder(
        family, [eps], params.delta_ladder, params.n_pairs, spec.seed, resolved.config, params.margin, spec.workers
    )
    result = PipelineResult(
        rows=[_theta_row(item) for item in scan.results],
        record={"delta_scan": scan.model_dump()},
        certificates={"ine_ok": scan.delta is not None},
        notices=_notices(family),
    )
    if scan.delta is None:
        return result

    report = proposition_one_check(
        oscillator, v1, v2, eps, params.margin, tuple(params.grid), scan, resolved.config, cache
    )
    result.record["switch_report"] = report.model_dump(mode="json")
    result.certificates["nv_ok"] = report.nv_ok
    low, high = report.exclusion_interval
    for zero, s in zip(report.zeros, np.linspace(0.0, 1.0, len(report.zeros))):
        v = np.asarray(report.v1) + s * (np.asarray(report.v2) - np.asarray(report.v1))
        result.rows.append({
            **_flatten("v", v),
            "zero": float("nan") if zero is None else zero,
            "low": low,
            "high": high,
            "min_abs_F": report.min_abs_F,
            "nv_ok": report.nv_ok,
        })
    return result


PIPELINES: Dict[str, Callable[[RunSpec, ResolvedProblem], PipelineResult]] = {
    "solve": run_solve,
    "theta": run_theta,
    "lipschitz": run_lipschitz,
    "assumptions": run_assumptions,
    "oscillator": run_oscillator,
    "proposition": run_proposition,
}


def run_pipeline(spec: RunSpec, resolved: Optional[ResolvedProblem] = None) -> PipelineResult:
    resolved = resolved or resolve_problem(spec)
    logger.info("Running %s on %s", spec.command, resolved.built.__class__.__name__)
    return PIPELINES[spec.command](spec, resolved)
