from __future__ import annotations
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DomainError
from ..fl.data import LabeledDataset, TrainConfig
from ..fl.model import ModelLayout, ParamVector, evaluate
from ..fl.training import train_local

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelGroup:
    members: tuple[int, ...]
    aggregate: ParamVector
    choice: bytes = b""          # digest of the aggregate, what miners vote on
    score: float | None = None


def aggregate_group(
    models: Mapping[int, ParamVector],
    weights_inputs: Mapping[int, tuple[float, int]],
) -> ParamVector:
    """Σ R·|D|·w / Σ R·|D| over the group's members."""
    if not models:
        raise DomainError("cannot aggregate an empty group")
    ids = sorted(models)
    weights = np.array([weights_inputs[i][0] * weights_inputs[i][1] for i in ids], dtype=np.float64)
    if np.any(weights < 0) or not weights.sum() > 0:
        raise DomainError("group aggregation needs positive total weight")
    stack = np.stack([np.asarray(models[i], dtype=np.float64) for i in ids])
    return weights @ stack / weights.sum()


def finetune_score(
    layout: ModelLayout,
    w: ParamVector,
    data: LabeledDataset,
    cfg: TrainConfig,
    holdout_fraction: float = 0.2,
) -> float:
    """Accuracy of `w` after ⌊τ/2⌋ epochs on the head of `data`, measured on its held-out tail."""
    data.require_nonempty()
    fit, held = data.split_tail(holdout_fraction)
    if fit.size == 0:
        fit = data
    if held.size == 0:
        held = data
    tuned = train_local(layout, w, fit, replace(cfg, epochs=cfg.epochs // 2))
    return evaluate(layout, tuned, held)[0]


def score_groups(
    groups: Sequence[ModelGroup],
    layout: ModelLayout,
    miner_data: LabeledDataset,
    cfg: TrainConfig,
    holdout_fraction: float = 0.2,
) -> tuple[list[ModelGroup], int]:
    """Fine-tune each aggregate ⌊τ/2⌋ epochs on the miner's data, score on its held-out tail.

    Returns the scored groups and the index of the chosen one (accuracy, then group size,
    then lowest member id). The chosen group's aggregate stays the un-fine-tuned vector.
    """
    if not groups:
        raise DomainError("no groups to score")
    scored = [
        replace(g, score=finetune_score(layout, g.aggregate, miner_data, cfg, holdout_fraction))
        for g in groups
    ]
    best = min(
        range(len(scored)),
        key=lambda i: (-scored[i].score, -len(scored[i].members), min(scored[i].members, default=-1)),
    )
    return scored, best


def learner_scores(groups: Sequence[ModelGroup], singles: Mapping[int, float] | None = None) -> dict[int, float]:
    """Each learner's score: its group's, or its own model's when it sits in no group."""
    out = dict(singles or {})
    for g in groups:
        if g.score is not None:
            out.update({i: g.score for i in g.members})
    return out


def suspects_from_choice(
    submitters: Iterable[int],
    chosen: Iterable[int],
    noise: Iterable[int] = (),
    scores: Mapping[int, float] | None = None,
    floor: float | None = None,
) -> list[int]:
    """Everyone who submitted but is not in the chosen group, noise included.

    Given `scores` and a `floor`, learners scoring at least `floor` are cleared. A learner
    with no score stays a suspect.
    """
    out = (set(submitters) | set(noise)) - set(chosen)
    if scores is not None and floor is not None:
        out = {i for i in out if not scores.get(i, float("-inf")) >= floor}
    return sorted(out)
