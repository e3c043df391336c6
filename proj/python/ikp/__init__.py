"""Tiered factual-probe evaluation toolkit (python surface).

The heavy lifting lives in the compiled ``_core`` module; this package
re-exports its functions under stable names.
"""

from ._core import (
    IkpError,
    assign_tier,
    densing_test,
    estimate_size,
    fit_scaling,
    judge_exact,
    loo_cv,
    normalize_answer,
    normalize_text,
    pair_metrics,
    simulate,
    summarize,
)

__all__ = [
    "IkpError",
    "assign_tier",
    "densing_test",
    "estimate_size",
    "fit_scaling",
    "judge_exact",
    "loo_cv",
    "normalize_answer",
    "normalize_text",
    "pair_metrics",
    "simulate",
    "summarize",
]
