"""Sequential recommenders scoring the next item from an item-id sequence."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from .base import BaseModel, ModelConfig, run_gru
from .layers import SelfAttentionBlock, causal_mask


class GRU4Rec(BaseModel):
    """Recurrent encoder over the mentioned/interacted item sequence; the
    final hidden state is scored against the item embedding table."""

    NAME = "gru4rec"
    TASKS = ("rec",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embedding_dim, config.hidden_dim
        self.item_emb = nn.Embedding(config.catalog_size, d)
        self.gru = nn.GRU(d, h, num_layers=config.num_layers, batch_first=True)
        self.dropout = nn.Dropout(config.dropout)
        self.out_proj = nn.Linear(h, d)
        self.empty_state = nn.Parameter(torch.empty(h))
        self.finalize()

    def _final_rep(self, batch: TaskBatch) -> torch.Tensor:
        ids = self.long_tensor(batch.arrays["context_items"])
        embedded = self.dropout(self.item_emb(ids)) if ids.shape[1] else \
            torch.zeros(batch.size, 0, self.config.embedding_dim, dtype=self.dtype)
        state = run_gru(self.gru, embedded, batch.lengths["context_items"], self.empty_state)
        return self.out_proj(state)

    def scores(self, batch: TaskBatch) -> torch.Tensor:
        return self._final_rep(batch) @ self.item_emb.weight.T

    def rank(self, batch: TaskBatch) -> np.ndarray:
        with torch.no_grad():
            return self.scores(batch).cpu().numpy()

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return nn.functional.cross_entropy(
            self.scores(batch), self.long_tensor(batch.targets["target_item"])
        )


class SASRec(BaseModel):
    """Self-attentive sequence encoder with a causal mask: the state at the
    last real position is scored against the item embedding table. Scores at
    position t cannot depend on later items."""

    NAME = "sasrec"
    TASKS = ("rec",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embedding_dim, config.hidden_dim
        self.item_emb = nn.Embedding(config.catalog_size, d)
        self.pos_emb = nn.Embedding(config.max_positions, h)
        self.in_proj = nn.Linear(d, h)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(h, config.num_heads, config.dropout)
            for _ in range(config.num_layers)
        )
        self.final_norm = nn.LayerNorm(h)
        self.out_proj = nn.Linear(h, d)
        self.empty_state = nn.Parameter(torch.empty(d))
        self.finalize()

    def _final_rep(self, batch: TaskBatch) -> torch.Tensor:
        ids = self.long_tensor(batch.arrays["context_items"])
        lengths = batch.lengths["context_items"]
        b, t = ids.shape
        if t == 0:
            return self.empty_state.unsqueeze(0).expand(b, -1)
        x = self.in_proj(self.item_emb(ids)) + self.pos_emb.weight[:t].unsqueeze(0)
        mask = causal_mask(t, x.dtype)
        for block in self.blocks:
            x = block(x, mask)
        x = self.final_norm(x)
        idx = torch.as_tensor([max(n - 1, 0) for n in lengths], dtype=torch.long)
        state = self.out_proj(x[torch.arange(b), idx])
        empty = torch.as_tensor([n == 0 for n in lengths])
        if bool(empty.any()):
            state = torch.where(empty.unsqueeze(1), self.empty_state.unsqueeze(0), state)
        return state

    def scores(self, batch: TaskBatch) -> torch.Tensor:
        return self._final_rep(batch) @ self.item_emb.weight.T

    def rank(self, batch: TaskBatch) -> np.ndarray:
        with torch.no_grad():
            return self.scores(batch).cpu().numpy()

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return nn.functional.cross_entropy(
            self.scores(batch), self.long_tensor(batch.targets["target_item"])
        )
