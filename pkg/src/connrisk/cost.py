"""Operational cost model comparing model-driven prevention with pure reaction.

With no prevention, every missed connection triggers a reactive action
(TP + FN of them). With model-based prevention, flagged connections
(TP + FP) receive a preventive action and only the missed-but-unflagged
ones (FN) remain reactive. Unsuccessful preventions are out of scope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .metrics import ConfusionCounts


@dataclass(frozen=True)
class CostParameters:
    """Average prevention cost and the reaction/prevention cost ratio r.

    The reactive cost is r * c_prev, which keeps the analysis dimensionless
    in c_prev.
    """

    c_prev: float = 1.0
    r: float = 2.0

    def __post_init__(self):
        if self.c_prev <= 0:
            raise ValueError("c_prev must be > 0")
        if self.r <= 0:
            raise ValueError("r must be > 0")

    @property
    def c_reac(self) -> float:
        return self.r * self.c_prev


def delta_cost(counts: ConfusionCounts, params: CostParameters) -> float:
    """Cost difference: (prevention regime) minus (no-prevention regime).

    Negative values mean the model saves money.
    """
    with_model = params.c_reac * counts.fn + params.c_prev * (counts.tp + counts.fp)
    without_model = params.c_reac * (counts.tp + counts.fn)
    return with_model - without_model


def r_min(counts: ConfusionCounts) -> float:
    """Smallest reaction/prevention cost ratio at which prevention pays.

    Equals 1/precision. Returns +inf when the model never prevents a true
    miss (TP = 0), in which case no finite ratio makes prevention pay.
    """
    if counts.tp + counts.fp <= 0:
        raise ValueError("r_min undefined without positive predictions (TP+FP = 0)")
    if counts.tp == 0:
        return math.inf
    return (counts.tp + counts.fp) / counts.tp


@dataclass(frozen=True)
class CostAnalysis:
    """Cost verdict for one stage evaluation.

    ``applicable`` is False for the post-operations stage, which analyses
    events after the fact and admits no preventive action.
    """

    applicable: bool
    counts: ConfusionCounts
    params: Optional[CostParameters]
    delta_c: Optional[float]
    r_min: Optional[float]
    prevention_count: int
    reaction_count_with_model: int
    reaction_count_without_model: int

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "counts": self.counts.to_dict(),
            "c_prev": None if self.params is None else self.params.c_prev,
            "r": None if self.params is None else self.params.r,
            "delta_c": self.delta_c,
            "r_min": self.r_min,
            "prevention_count": self.prevention_count,
            "reaction_count_with_model": self.reaction_count_with_model,
            "reaction_count_without_model": self.reaction_count_without_model,
        }


def cost_report(counts: ConfusionCounts, params: CostParameters,
                preventable: bool = True) -> CostAnalysis:
    """Assemble the full cost analysis for one confusion matrix."""
    prevention_count = counts.tp + counts.fp
    reaction_with = counts.fn
    reaction_without = counts.tp + counts.fn
    if not preventable:
        return CostAnalysis(
            applicable=False, counts=counts, params=None, delta_c=None, r_min=None,
            prevention_count=prevention_count,
            reaction_count_with_model=reaction_with,
            reaction_count_without_model=reaction_without,
        )
    ratio = r_min(counts) if prevention_count > 0 else None
    return CostAnalysis(
        applicable=True, counts=counts, params=params,
        delta_c=delta_cost(counts, params), r_min=ratio,
        prevention_count=prevention_count,
        reaction_count_with_model=reaction_with,
        reaction_count_without_model=reaction_without,
    )
