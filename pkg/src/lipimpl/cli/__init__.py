"""CLI module for the lipimpl package."""

from .base import ResultWriter
from .pipelines import PIPELINES, PipelineResult, run_pipeline
from .runner import RunSummary, run
from .spec import RunSpec, expand_sweep, load_run_spec

__all__ = [
    'ResultWriter',
    'PIPELINES',
    'PipelineResult',
    'run_pipeline',
    'RunSummary',
    'run',
    'RunSpec',
    'expand_sweep',
    'load_run_spec',
]
