"""Base class for named built-in problems."""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Union

from ..models import ImplicitProblem, OscillatorSpec, PerturbedFamily

logger = logging.getLogger(__name__)

Built = Union[ImplicitProblem, PerturbedFamily, OscillatorSpec]


class BaseProblem(ABC):
    """A problem the CLI can build by name.

    ``kind`` tells the pipelines what ``build`` returns: ``implicit`` for an
    ImplicitProblem, ``family`` for a PerturbedFamily and ``oscillator``
    for an OscillatorSpec.
    """

    kind: str = "implicit"
    description: str = ""
    default_config: Dict[str, Any] = {}

    @abstractmethod
    def build(self, **params: Any) -> Built:
        """Construct the problem from keyword parameters.

        Raises:
            ValueError: If the parameters do not describe a valid problem
        """
        pass
