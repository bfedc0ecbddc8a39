"""Goal-reaching maze policies distilled from backward world-model rollouts."""

from ._core import (
    ACTION_COUNT,
    ConfigError,
    EvalReport,
    Maze,
    PipelineConfig,
    PipelineMode,
    __version__,
    collect_random_data,
    run_pipeline,
    spe_on_edges,
)

__all__ = [
    "ACTION_COUNT",
    "ConfigError",
    "EvalReport",
    "Maze",
    "PipelineConfig",
    "PipelineMode",
    "__version__",
    "collect_random_data",
    "run_pipeline",
    "spe_on_edges",
]
