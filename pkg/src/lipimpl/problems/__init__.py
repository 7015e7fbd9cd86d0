"""Problem registry and the registry of smooth forcings g(t, u, u')."""

from typing import Callable, Dict, List, Type

from ..errors import UnknownProblem
from .base import BaseProblem

# Registry of available problems
_problems: Dict[str, Type[BaseProblem]] = {}

# Registry of forcing terms for the oscillator
_forcings: Dict[str, Callable[[float, float, float], float]] = {}


def register_problem(name: str, problem_class: Type[BaseProblem]) -> None:
    """Register a new problem.

    Args:
        name: Name to register the problem under
        problem_class: Problem class to register
    """
    if not issubclass(problem_class, BaseProblem):
        raise ValueError("Problem class must inherit from BaseProblem")
    _problems[name] = problem_class


def get_problem(name: str) -> Type[BaseProblem]:
    """Get a registered problem by name.

    Raises:
        UnknownProblem: If no problem is registered with that name
    """
    try:
        return _problems[name]
    except KeyError:
        raise UnknownProblem(f"No problem registered with name '{name}'")


def list_problems() -> List[str]:
    """Get list of registered problem names."""
    return list(_problems.keys())


def register_forcing(name: str, forcing: Callable[[float, float, float], float]) -> None:
    """Register g(t, u, u') under a name usable in oscillator specs."""
    _forcings[name] = forcing


def get_forcing(name: str) -> Callable[[float, float, float], float]:
    try:
        return _forcings[name]
    except KeyError:
        raise UnknownProblem(f"No forcing registered with name '{name}'")


def list_forcings() -> List[str]:
    return list(_forcings.keys())


# Register built-in problems
from .builtin import (  # noqa: E402
    AffineProblem,
    CubicProblem,
    DryFrictionProblem,
    IdentityFamily,
    TrigFamily,
    TrigProblem,
    cos_forcing,
    zero_forcing,
)

register_problem("affine", AffineProblem)
register_problem("cubic", CubicProblem)
register_problem("trig", TrigProblem)
register_problem("identity_family", IdentityFamily)
register_problem("trig_family", TrigFamily)
register_problem("dryfriction", DryFrictionProblem)

register_forcing("zero", zero_forcing)
register_forcing("cos", cos_forcing)
