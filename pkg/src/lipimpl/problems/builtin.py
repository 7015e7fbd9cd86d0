"""Built-in problems: closed-form equations, families and the oscillator."""

from typing import Any, Sequence

import numpy as np

from ..models import ImplicitProblem, OscillatorSpec, PerturbedFamily, first_zero_of_cosine_form
from .base import BaseProblem


class AffineProblem(BaseProblem):
    description = "F(x, y) = y - x around (0, 0)"

    def build(self, r: float = 1.0, **params: Any) -> ImplicitProblem:
        return ImplicitProblem(
            F=lambda x, y: y - x,
            x0=[0.0],
            y0=[0.0],
            r=r,
            jac_y=lambda x, y: np.eye(1),
            jac_x=lambda x, y: -np.eye(1),
            name="affine",
            **params,
        )


class CubicProblem(BaseProblem):
    description = "F(x, y) = y^3 + y - x around (0, 0)"
    default_config = {"alpha": 1.0, "beta": 2.0}

    def build(self, r: float = 2.0, **params: Any) -> ImplicitProblem:
        return ImplicitProblem(
            F=lambda x, y: y ** 3 + y - x,
            x0=[0.0],
            y0=[0.0],
            r=r,
            jac_y=lambda x, y: np.array([[3.0 * y[0] ** 2 + 1.0]]),
            jac_x=lambda x, y: -np.eye(1),
            name="cubic",
            **params,
        )


def _cosine_form(v, t):
    return np.array([v[0] * np.cos(t[0]) + v[1] * np.sin(t[0])])


def _cosine_form_dt(v, t):
    return np.array([[-v[0] * np.sin(t[0]) + v[1] * np.cos(t[0])]])


def _cosine_form_dv(t):
    return np.array([[np.cos(t[0]), np.sin(t[0])]])


class TrigProblem(BaseProblem):
    """v1 cos t + v2 sin t = 0 solved for t, with v playing the parameter x."""
    description = "F(v, t) = v1 cos t + v2 sin t around (v0, first zero)"

    def build(self, v0: Sequence[float] = (1.0, 0.0), t0: float = None, r: float = 1.0, **params: Any) -> ImplicitProblem:
        return ImplicitProblem(
            F=lambda x, y: _cosine_form(x, y),
            x0=list(v0),
            y0=[first_zero_of_cosine_form(v0) if t0 is None else t0],
            r=r,
            jac_y=lambda x, y: _cosine_form_dt(x, y),
            jac_x=lambda x, y: _cosine_form_dv(y),
            name="trig",
            **params,
        )


class IdentityFamily(BaseProblem):
    kind = "family"
    description = "F(t, v, eps) = t - v around (0, 0, 0)"

    def build(self, r: float = 1.0, **params: Any) -> PerturbedFamily:
        return PerturbedFamily(
            F=lambda t, v, eps: t - v,
            t0=[0.0],
            v0=[0.0],
            eps0=[0.0],
            r=r,
            jac_t=lambda t, v, eps: np.eye(1),
            jac_v=lambda t, v, eps: -np.eye(1),
            name="identity_family",
            **params,
        )


class TrigFamily(BaseProblem):
    kind = "family"
    description = "F(t, v, eps) = v1 cos t + v2 sin t around (first zero, v0, 0)"

    def build(self, v0: Sequence[float] = (1.0, 0.0), t0: float = None, r: float = 1.0, **params: Any) -> PerturbedFamily:
        return PerturbedFamily(
            F=lambda t, v, eps: _cosine_form(v, t),
            t0=[first_zero_of_cosine_form(v0) if t0 is None else t0],
            v0=list(v0),
            eps0=[0.0],
            r=r,
            jac_t=lambda t, v, eps: _cosine_form_dt(v, t),
            jac_v=lambda t, v, eps: _cosine_form_dv(t),
            name="trig_family",
            **params,
        )


class DryFrictionProblem(BaseProblem):
    kind = "oscillator"
    description = "u'' + u = -eps sign(u) + eps g(t, u, u')"

    def build(self, **params: Any) -> OscillatorSpec:
        return OscillatorSpec(**params)


def zero_forcing(t, u, u_dot):
    return 0.0


def cos_forcing(t, u, u_dot):
    return np.cos(t)
