"""Models for problem definitions, solver settings and certified results."""
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import config


def as_vector(value: Any) -> np.ndarray:
    """Convert a scalar or sequence into a read-only float64 vector."""
    vector = np.array(value, dtype=float).reshape(-1) if np.ndim(value) <= 1 else None
    if vector is None:
        raise ValueError(f"Expected a vector, got an array of shape {np.shape(value)}")
    vector.flags.writeable = False
    return vector


# =============================================================================
# Problem definitions
# =============================================================================

class ImplicitProblem(BaseModel):
    """An equation F(x, y) = 0 with base point (x0, y0) and ball radius r.

    ``F`` must be reentrant: solvers may call it from several threads.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    F: Callable[..., Any] = Field(description="Map (x in R^n, y in R^m) -> R^m")
    x0: np.ndarray = Field(description="Base parameter point")
    y0: np.ndarray = Field(description="Base solution point")
    r: float = Field(gt=0, description="Common ball radius of the x- and y-domains")
    jac_y: Optional[Callable[..., Any]] = Field(default=None, description="Analytic F'_y(x, y), m x m")
    jac_x: Optional[Callable[..., Any]] = Field(default=None, description="Analytic F'_x(x, y), m x n")
    residual_tol: float = Field(default=config.DEFAULT_RESIDUAL_TOL, gt=0)
    name: str = Field(default="custom")

    @field_validator("x0", "y0", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return as_vector(value)

    @model_validator(mode="after")
    def _check_base_point(self) -> "ImplicitProblem":
        if self.x0.size == 0 or self.y0.size == 0:
            raise ValueError("Empty x or y slot: both dimensions must be at least 1")
        value = self.evaluate(self.x0, self.y0)
        if value.size != self.y0.size:
            raise ValueError(
                f"F returns {value.size} components but y has dimension {self.y0.size}"
            )
        residual = float(np.linalg.norm(value))
        if not residual <= self.residual_tol:
            raise ValueError(
                f"Base point is not a solution: |F(x0, y0)| = {residual:.3e} > {self.residual_tol:.3e}"
            )
        jac = self.derivative_y(self.x0, self.y0, config.DEFAULT_FD_STEP)
        if jac.shape != (self.m, self.m) or not np.all(np.isfinite(jac)):
            raise ValueError(f"F'_y at the base point must be a finite {self.m} x {self.m} matrix")
        condition = np.linalg.cond(jac)
        if not np.isfinite(condition) or condition > config.SINGULAR_CONDITION:
            raise ValueError(f"F'_y at the base point is not invertible (condition {condition:.3e})")
        return self

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def m(self) -> int:
        return self.y0.size

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.F(x, y), dtype=float))

    def derivative_y(self, x, y, fd_step: float) -> np.ndarray:
        """F'_y at (x, y), analytic when available."""
        if self.jac_y is not None:
            return np.atleast_2d(np.asarray(self.jac_y(x, y), dtype=float))
        from .implicit import finite_difference_jacobian
        step = fd_step * max(1.0, float(np.linalg.norm(np.concatenate([x, y]))))
        return finite_difference_jacobian(lambda w: self.evaluate(x, w), y, step)


class SolverConfig(BaseModel):
    """Tolerances, iteration cap, ball radii and contraction target."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    residual_tol: float = Field(default=config.DEFAULT_RESIDUAL_TOL, gt=0)
    step_tol: float = Field(default=config.DEFAULT_STEP_TOL, gt=0)
    max_iter: int = Field(default=config.DEFAULT_MAX_ITER, gt=0)
    alpha: float = Field(default=config.DEFAULT_ALPHA, gt=0, description="x-ball radius")
    beta: float = Field(default=config.DEFAULT_BETA, gt=0, description="y-ball radius")
    q_target: float = Field(default=config.DEFAULT_Q_TARGET, gt=0, lt=1)
    fd_step: float = Field(default=config.DEFAULT_FD_STEP, gt=0)


class ContractionCertificate(BaseModel):
    """What a chord solve observed about its own contraction."""
    q_measured: float = Field(ge=0, description="Largest step ratio |y_k+1 - y_k| / |y_k - y_k-1|")
    initial_displacement: float = Field(ge=0, description="|A_x(y0) - y0|")
    ball_ok: bool = Field(description="initial_displacement <= beta * (1 - q_measured)")
    iterations: int = Field(ge=0)
    residual: float = Field(ge=0)
    step_norms: List[float] = Field(default_factory=list)


class AlphaSearchResult(BaseModel):
    alpha: float
    q_hat: float
    max_displacement: float
    halvings: int
    certified: bool


class PerturbedFamily(BaseModel):
    """A family F(t, v, eps) with F(t0, v0, eps0) = 0, solved for t."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    F: Callable[..., Any] = Field(description="Map (t in R^p, v in R^k, eps in R^e) -> R^p")
    t0: np.ndarray
    v0: np.ndarray
    eps0: np.ndarray
    r: float = Field(gt=0)
    jac_t: Optional[Callable[..., Any]] = Field(default=None, description="Analytic F'_t(t, v, eps), p x p")
    jac_v: Optional[Callable[..., Any]] = Field(default=None, description="Analytic F'_v(t, v, eps), p x k")
    residual_tol: float = Field(default=config.DEFAULT_RESIDUAL_TOL, gt=0)
    name: str = Field(default="custom")

    @field_validator("t0", "v0", "eps0", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        return as_vector(value)

    @model_validator(mode="after")
    def _check_base_point(self) -> "PerturbedFamily":
        if min(self.t0.size, self.v0.size, self.eps0.size) == 0:
            raise ValueError("t, v and eps must all have dimension at least 1")
        value = self.evaluate(self.t0, self.v0, self.eps0)
        if value.size != self.t0.size:
            raise ValueError(f"F returns {value.size} components but t has dimension {self.t0.size}")
        residual = float(np.linalg.norm(value))
        if not residual <= self.residual_tol:
            raise ValueError(
                f"Base point is not a solution: |F(t0, v0, eps0)| = {residual:.3e} > {self.residual_tol:.3e}"
            )
        jac = self.derivative_t(self.t0, self.v0, self.eps0, config.DEFAULT_FD_STEP)
        condition = np.linalg.cond(jac)
        if not np.isfinite(condition) or condition > config.SINGULAR_CONDITION:
            raise ValueError(f"F'_t at the base point is not invertible (condition {condition:.3e})")
        return self

    @property
    def has_analytic_jacobians(self) -> bool:
        return self.jac_t is not None and self.jac_v is not None

    def evaluate(self, t: np.ndarray, v: np.ndarray, eps: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.F(t, v, eps), dtype=float))

    def derivative_t(self, t, v, eps, fd_step: float) -> np.ndarray:
        """F'_t at (t, v, eps), analytic when available."""
        if self.jac_t is not None:
            return np.atleast_2d(np.asarray(self.jac_t(t, v, eps), dtype=float))
        from .implicit import finite_difference_jacobian
        step = fd_step * max(1.0, float(np.linalg.norm(t)))
        return finite_difference_jacobian(lambda s: self.evaluate(s, v, eps), t, step)

    def derivative_v(self, t, v, eps, fd_step: float) -> np.ndarray:
        """F'_v at (t, v, eps), analytic when available."""
        if self.jac_v is not None:
            return np.atleast_2d(np.asarray(self.jac_v(t, v, eps), dtype=float))
        from .implicit import finite_difference_jacobian
        step = fd_step * max(1.0, float(np.linalg.norm(v)))
        return finite_difference_jacobian(lambda w: self.evaluate(t, w, eps), v, step)


# =============================================================================
# Perturbation results
# =============================================================================

class ThetaResult(BaseModel):
    """Empirical check of |theta(v1, eps) - theta(v2, eps)| <= (R + Delta) |v1 - v2|."""
    theta: List[float] = Field(description="theta(v0, eps)")
    eps: List[float]
    R: float = Field(ge=0, description="|[F'_t]^-1 F'_v| at the base point")
    quotient_sup: float = Field(ge=0)
    deviation_sup: float = Field(ge=0, description="Sup of the eps-induced part of the quotient")
    delta_used: float = Field(gt=0)
    margin: float = Field(gt=0, description="Delta")
    n_pairs_used: int = Field(ge=1)
    ine_ok: bool

    @model_validator(mode="after")
    def _check_verdict(self) -> "ThetaResult":
        if self.ine_ok != (self.quotient_sup <= self.R + self.margin):
            raise ValueError("ine_ok must equal quotient_sup <= R + margin")
        return self


class DeltaScan(BaseModel):
    """Quotient checks over a decreasing ladder of delta values."""
    eps: List[float]
    margin: float
    results: List[ThetaResult]
    delta: Optional[float] = Field(default=None, description="Largest delta with ine_ok, if any")


class SampleSpec(BaseModel):
    """How densely the hypothesis constants are sampled."""
    model_config = ConfigDict(extra="forbid")

    n_t_pairs: int = Field(default=config.DEFAULT_T_PAIRS, ge=0)
    n_points: int = Field(default=config.DEFAULT_EPS_V_POINTS, ge=0)
    t_radius: float = Field(default=0.25, gt=0)
    v_radius: float = Field(default=0.1, ge=0)
    eps_radius: float = Field(default=0.1, ge=0)
    pair_radius: float = Field(default=0.1, gt=0, description="Radius of the v-pairs in the mixed-difference fit")
    shrink: float = Field(default=0.5, gt=0, lt=1)
    eps_values: Optional[List[List[float]]] = Field(default=None, description="Explicit eps samples")


class ConstantSample(BaseModel):
    eps: List[float]
    v: List[float]
    value: float = Field(ge=0)


class EpsConstant(BaseModel):
    eps: List[float]
    value: float = Field(ge=0)


class AssumptionEstimates(BaseModel):
    L_eps_v: List[ConstantSample]
    L_eps: List[EpsConstant]
    K: float = Field(ge=0)
    lipschitz_F: float = Field(ge=0)
    shrinking_ok: bool


# =============================================================================
# Oscillator definitions and results
# =============================================================================

class OscillatorSpec(BaseModel):
    """Parameters of u'' + u = -eps sign(u) + eps g(t, u, u')."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eps: float = Field(default=0.0, ge=0)
    forcing: str = Field(default="zero", description="Registered name of the smooth forcing g")
    g: Optional[Callable[..., Any]] = Field(default=None, exclude=True, description="Overrides forcing")
    horizon: float = Field(default=config.DEFAULT_HORIZON, gt=0)
    a: float
    b: float
    v0: Tuple[float, float] = (1.0, 0.0)
    t_grid: int = Field(default=config.DEFAULT_T_GRID, gt=0)
    rtol: float = Field(default=config.DEFAULT_RTOL, gt=0)
    atol: float = Field(default=config.DEFAULT_ATOL, gt=0)
    max_step: float = Field(default=config.DEFAULT_MAX_STEP, gt=0)
    stick_tol: float = Field(default=config.DEFAULT_STICK_TOL, ge=0)
    max_events: int = Field(default=config.DEFAULT_MAX_EVENTS, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_bracket(cls, data: Any) -> Any:
        if not isinstance(data, dict) or (data.get("a") is not None and data.get("b") is not None):
            return data
        data = dict(data)
        v0 = data.get("v0")
        if v0 is None:
            v0 = (1.0, 0.0)
        center = first_zero_of_cosine_form(v0)
        data.setdefault("a", None)
        data.setdefault("b", None)
        if data["a"] is None:
            data["a"] = max(center - config.BRACKET_MARGIN, 1e-3)
        if data["b"] is None:
            data["b"] = min(center + config.BRACKET_MARGIN, config.TWO_PI - 1e-3)
        return data

    @field_validator("forcing")
    @classmethod
    def _known_forcing(cls, value: str) -> str:
        from .problems import get_forcing
        get_forcing(value)
        return value

    @model_validator(mode="after")
    def _check_bracket(self) -> "OscillatorSpec":
        if not 0.0 < self.a < self.b < config.TWO_PI:
            raise ValueError(f"Need 0 < a < b < 2*pi, got a={self.a}, b={self.b}")
        if self.horizon < self.b:
            raise ValueError(f"horizon {self.horizon} must be at least b={self.b}")
        return self

    @property
    def forcing_function(self) -> Callable[[float, float, float], float]:
        if self.g is not None:
            return self.g
        from .problems import get_forcing
        return get_forcing(self.forcing)


def first_zero_of_cosine_form(v: Any) -> float:
    """First zero in (0, 2*pi) of t -> v1 cos t + v2 sin t."""
    v1, v2 = float(v[0]), float(v[1])
    if v1 == 0.0 and v2 == 0.0:
        raise ValueError("v = 0 has no isolated switching time")
    phase = math.atan2(v1, v2)
    # v1 cos t + v2 sin t = |v| sin(t + phase), zero at k*pi - phase
    k = math.floor(phase / math.pi) + 1
    return k * math.pi - phase


class AssumptionFRung(BaseModel):
    eps: float
    sup_y: float
    lipschitz_y: float


class AssumptionFReport(BaseModel):
    rungs: List[AssumptionFRung]
    bound: float = Field(description="A priori bound on sup |y|")
    sup_spread: float
    lipschitz_spread: float
    passed: bool


class SwitchReport(BaseModel):
    """Switching time, modulus and the verdict on the exclusion region."""
    theta: float
    R: float = Field(ge=0)
    margin: float = Field(gt=0)
    delta: float = Field(gt=0)
    eps: float
    v1: List[float]
    v2: List[float]
    exclusion_interval: Tuple[float, float]
    min_abs_F: float = Field(ge=0)
    zeros: List[Optional[float]] = Field(description="Bracket zero of each F(., v, eps) slice")
    nv_ok: bool

    def to_record(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
