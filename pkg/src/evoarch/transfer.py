"""Cross-generation transfer bookkeeping.

Each generation's best-by-reward individual becomes the teacher: its saved
expert data handle plus a decayed hyperparameter map are wrapped into one
TransferContext that the orchestrator attaches to every request of the next
generation, survivors included, so the imitation warm start is uniform
across the population.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

from .arch_metrics import ArchStats
from .evaluation import EvaluationResult, TransferContext

logger = logging.getLogger(__name__)

DEFAULT_HYPERPARAMS = {"lr": 3e-4, "ppo_clip": 0.2, "entropy": 0.01}
DEFAULT_DECAY_FACTORS = {"lr": 0.95, "ppo_clip": 0.98, "entropy": 0.95}


@dataclass(frozen=True)
class HyperparamRecord:
    """Training hyperparameters in force for one generation.

    ``base_values`` are the generation-0 values; the current values are
    always base * factor**generation so repeated decay is exact, not a
    chain of rounded multiplications.  When omitted, ``values`` are taken
    as the base.
    """

    generation: int
    values: dict[str, float]
    decay_factors: dict[str, float]
    base_values: dict[str, float] | None = None

    def __post_init__(self) -> None:
        for k, v in self.values.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"hyperparameter {k} must be positive, got {v}")

    def base(self) -> dict[str, float]:
        return self.base_values if self.base_values is not None else self.values


def select_champion(evaluated: Sequence[tuple[EvaluationResult, ArchStats]]) -> str:
    """Best-by-raw-reward id; ties prefer fewer parameters, then lower id."""
    if not evaluated:
        raise ValueError("cannot select a champion from an empty generation")
    for result, _ in evaluated:
        if not math.isfinite(result.reward):
            raise ValueError(f"non-finite reward for {result.id}")
    best, _ = min(evaluated, key=lambda pair: (-pair[0].reward, pair[1].params_m, pair[0].id))
    return best.id


def decay_hyperparams(h: HyperparamRecord) -> HyperparamRecord:
    """One decay step: values[k] becomes base[k] * factor[k]**(generation+1)."""
    base = h.base()
    g = h.generation + 1
    decayed = {k: v * h.decay_factors.get(k, 1.0) ** g for k, v in base.items()}
    for k, v in decayed.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"decayed hyperparameter {k} is non-positive: {v}")
    return HyperparamRecord(g, decayed, dict(h.decay_factors), dict(base))


def make_transfer_context(champion: EvaluationResult, h: HyperparamRecord,
                          expert_pairs: int = 12000) -> TransferContext | None:
    """Context for the next generation, or None when the champion saved no
    expert data (that boundary then runs without transfer)."""
    if champion.expert_handle is None:
        logger.warning(
            "champion %s carries no expert data handle; skipping transfer "
            "for this generation boundary", champion.id)
        return None
    return TransferContext(teacher=champion.id,
                           expert_handle=champion.expert_handle,
                           expert_pairs=expert_pairs,
                           hyperparams=dict(h.values))
