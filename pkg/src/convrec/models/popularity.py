"""Frequency-counting recommender baseline."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ..data.batching import RecInstance, TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, RankOutput


class Popularity(BaseModel):
    """Ranks the catalog by training-set target frequency.

    The dialog context is ignored; unseen items sort after seen ones and
    ties resolve to the lower item id.
    """

    NAME = "popularity"
    TASKS = ("rec",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        if config.catalog_size < 1:
            raise ModelError("popularity model needs a nonempty catalog")
        self.register_buffer("item_counts", torch.zeros(config.catalog_size))
        self.finalize()

    def fit_counts(self, instances: Sequence[RecInstance]) -> None:
        counts = np.zeros(self.config.catalog_size, dtype=np.float64)
        for inst in instances:
            counts[inst.target_item] += 1.0
        self.item_counts.copy_(torch.as_tensor(counts, dtype=self.item_counts.dtype))

    def rank(self, batch: TaskBatch) -> np.ndarray:
        counts = self.item_counts.detach().cpu().numpy()
        return np.tile(counts, (batch.size, 1))

    def rank_single(self) -> RankOutput:
        return RankOutput.from_scores(self.item_counts.detach().cpu().numpy())

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return torch.zeros((), dtype=torch.float32)
