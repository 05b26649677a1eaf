"""Dynamic flexible job-shop scheduling with hierarchical reflection."""

from ._core import (
    FormatError,
    GenerationExhausted,
    Instance,
    PolicyError,
    gantt,
    generate,
    generate_pdr,
    rpd,
    rule_makespan,
    rules,
    run,
    run_callback,
    validate,
    wilcoxon,
    win_rate,
)

__all__ = [
    "FormatError",
    "GenerationExhausted",
    "Instance",
    "PolicyError",
    "gantt",
    "generate",
    "generate_pdr",
    "rpd",
    "rule_makespan",
    "rules",
    "run",
    "run_callback",
    "validate",
    "wilcoxon",
    "win_rate",
]
