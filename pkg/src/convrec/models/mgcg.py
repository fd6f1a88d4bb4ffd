"""Recurrent next-goal classifier over dialog context and user profile."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, run_gru


class MGCG(BaseModel):
    """GRU context encoder + GRU profile encoder -> softmax over policy labels."""

    NAME = "mgcg"
    TASKS = ("policy",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        if config.label_count < 1:
            raise ModelError("mgcg needs a policy label set")
        d, h = config.embedding_dim, config.hidden_dim
        self.token_emb = nn.Embedding(config.vocab_size, d)
        self.context_gru = nn.GRU(d, h, num_layers=config.num_layers, batch_first=True)
        self.profile_gru = nn.GRU(d, h, batch_first=True)
        self.empty_context = nn.Parameter(torch.empty(h))
        self.empty_profile = nn.Parameter(torch.empty(h))
        self.dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(2 * h, config.label_count)
        self.finalize()

    def logits(self, batch: TaskBatch) -> torch.Tensor:
        ctx_ids = self.long_tensor(batch.arrays["context_tokens"])
        prof_ids = self.long_tensor(batch.arrays["profile_tokens"])
        ctx = run_gru(self.context_gru, self.token_emb(ctx_ids),
                      batch.lengths["context_tokens"], self.empty_context)
        prof = run_gru(self.profile_gru, self.token_emb(prof_ids),
                       batch.lengths["profile_tokens"], self.empty_profile)
        return self.classifier(self.dropout(torch.cat([ctx, prof], dim=1)))

    def policy_probs(self, batch: TaskBatch) -> np.ndarray:
        with torch.no_grad():
            return torch.softmax(self.logits(batch), dim=-1).cpu().numpy()

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return nn.functional.cross_entropy(
            self.logits(batch), self.long_tensor(batch.targets["target_label"])
        )
