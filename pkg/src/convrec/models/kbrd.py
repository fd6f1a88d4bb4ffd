"""Joint recommender-dialog model with a knowledge-grounded vocabulary bias.

Couples the graph recommender with the transformer decoder: the pooled
context-entity representation is projected (without bias, so a zero user
vector yields a zero offset) to a per-token logit offset that is added at
every decoding step of one response. Training alternates recommendation
and conversation batches, which the training system schedules.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, SideData
from .conversation import StepDecoder, TransformerSeq2Seq
from .rgcn import RGCNRec


class KBRD(BaseModel):
    NAME = "kbrd"
    TASKS = ("rec", "conv")

    def __init__(self, config: ModelConfig, side: SideData):
        super().__init__(config)
        self.rec = RGCNRec(config, side)
        self.conv = TransformerSeq2Seq(config)
        self.bias_proj = nn.Linear(config.embedding_dim, config.vocab_size, bias=False)
        self.finalize()

    def vocab_bias(self, user_rep: torch.Tensor) -> torch.Tensor:
        """Per-token logit offset; linear in the user representation."""
        if user_rep.shape[-1] != self.config.embedding_dim:
            raise ModelError(
                f"user representation width {user_rep.shape[-1]} does not match "
                f"embedding_dim {self.config.embedding_dim}"
            )
        return self.bias_proj(user_rep)

    def _conv_bias(self, batch: TaskBatch) -> torch.Tensor:
        states = self.rec.graph.node_states()
        return self.vocab_bias(self.rec.user_rep(batch, states))

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        if batch.task == "rec":
            return self.rec.loss(batch)
        if batch.task == "conv":
            if "context_entities" in batch.arrays:
                return self.conv.loss(batch, logits_bias=self._conv_bias(batch))
            return self.conv.loss(batch)
        raise ModelError(f"kbrd cannot train on task '{batch.task}'")

    def rank(self, batch: TaskBatch) -> np.ndarray:
        return self.rec.rank(batch)

    def token_nlls(self, batch: TaskBatch) -> list[float]:
        if "context_entities" in batch.arrays:
            return self.conv.token_nlls(batch, logits_bias=self._conv_bias(batch))
        return self.conv.token_nlls(batch)

    def user_rep_from_entities(self, entity_ids: list[int]) -> torch.Tensor:
        """Pooled state of an explicit entity list; empty list -> zeros."""
        with torch.no_grad():
            states = self.rec.graph.node_states()
            if not entity_ids:
                return torch.zeros(self.config.embedding_dim, dtype=states.dtype)
            ids = torch.as_tensor(entity_ids, dtype=torch.long)
            return states[ids].mean(dim=0)

    def make_decoder(self, context_ids: list[int],
                     entity_ids: list[int] | None = None) -> StepDecoder:
        bias = None
        if entity_ids is not None:
            with torch.no_grad():
                bias = self.vocab_bias(self.user_rep_from_entities(entity_ids))
        return self.conv.make_decoder(context_ids, logits_bias=bias)
