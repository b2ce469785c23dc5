from __future__ import annotations
import logging

import numpy as np

from ..errors import TrainingError
from .data import LabeledDataset, TrainConfig
from .model import ModelLayout, ParamVector, local_loss, loss_and_grad

log = logging.getLogger(__name__)


def train_local(
    layout: ModelLayout,
    start: ParamVector,
    data: LabeledDataset,
    cfg: TrainConfig,
    e_cmp: float = 0.0,
) -> ParamVector:
    """Mini-batch SGD for `cfg.epochs` epochs on cross-entropy + λ·e_cmp.

    Each epoch reshuffles with a generator seeded from `cfg.seed`, so equal inputs give a
    bit-identical result. e_cmp does not depend on w, so λ never reaches the gradient.
    """
    data.require_nonempty()
    w = np.array(start, dtype=np.float64, copy=True)
    if cfg.epochs == 0 or cfg.learning_rate == 0.0:
        return w
    rng = np.random.default_rng(cfg.seed)
    x, y = data.features, data.labels
    n = data.size
    batch_index = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for at in range(0, n, cfg.batch_size):
            rows = order[at:at + cfg.batch_size]
            _, grad = loss_and_grad(layout, w, x[rows], y[rows])
            if not np.all(np.isfinite(grad)):
                raise TrainingError("non-finite gradient", batch_index)
            w -= cfg.learning_rate * grad
            batch_index += 1
    if not np.all(np.isfinite(w)):
        raise TrainingError("parameters diverged", batch_index - 1)
    if log.isEnabledFor(logging.DEBUG):
        log.debug("local objective %.4f after %d batches", local_loss(layout, w, data, e_cmp, cfg.energy_penalty), batch_index)
    return w
