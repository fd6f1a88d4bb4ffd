"""Convolutional text classifier ranking catalog items from the dialog context."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from .base import BaseModel, ModelConfig

KERNEL_WIDTHS = (3, 4, 5)


class TextCNN(BaseModel):
    """Parallel width-{3,4,5} convolutions over token embeddings with
    max-over-time pooling and a linear layer to catalog size."""

    NAME = "textcnn"
    TASKS = ("rec",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embedding_dim, config.hidden_dim
        self.token_emb = nn.Embedding(config.vocab_size, d)
        self.convs = nn.ModuleList(
            nn.Conv1d(d, h, kernel_size=k) for k in KERNEL_WIDTHS
        )
        self.dropout = nn.Dropout(config.dropout)
        self.out = nn.Linear(h * len(KERNEL_WIDTHS), config.catalog_size)
        self.finalize()

    def scores(self, batch: TaskBatch) -> torch.Tensor:
        ids = self.long_tensor(batch.arrays["context_tokens"])
        b, t = ids.shape
        if t < max(KERNEL_WIDTHS):  # short rows are right-padded to the widest kernel
            pad = torch.zeros(b, max(KERNEL_WIDTHS) - t, dtype=torch.long)
            ids = torch.cat([ids, pad], dim=1)
        x = self.token_emb(ids).transpose(1, 2)          # (B, d, T)
        pooled = [torch.relu(conv(x)).max(dim=2).values for conv in self.convs]
        features = self.dropout(torch.cat(pooled, dim=1))
        return self.out(features)

    def rank(self, batch: TaskBatch) -> np.ndarray:
        with torch.no_grad():
            return self.scores(batch).cpu().numpy()

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return nn.functional.cross_entropy(
            self.scores(batch), self.long_tensor(batch.targets["target_item"])
        )
