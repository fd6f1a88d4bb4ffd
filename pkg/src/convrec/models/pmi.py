"""Pointwise-mutual-information policy baseline.

Scores a candidate next label by summing its PMI with every label observed
earlier in the dialog. PMI is estimated from adjacent-label co-occurrence
in the training sequences with add-one smoothing:

    PMI(a, b) = log[ (C(a,b) + 1) * N / ((C(a) + 1) * (C(b) + 1)) ]

where C(a,b) counts ordered adjacent pairs, C(x) counts label occurrences
and N is the total number of adjacent pairs plus one.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ..data.batching import TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, PolicyOutput


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


class PMI(BaseModel):
    NAME = "pmi"
    TASKS = ("policy",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        if config.label_count < 1:
            raise ModelError("pmi model needs a policy label set")
        n = config.label_count
        self.register_buffer("pair_counts", torch.zeros(n, n))
        self.register_buffer("label_counts", torch.zeros(n))
        self.register_buffer("total_pairs", torch.zeros(1))
        self.finalize()

    def fit_sequences(self, sequences: Sequence[Sequence[int]]) -> None:
        """Estimate counts directly from whole label sequences."""
        if not sequences:
            raise ModelError("pmi needs at least one labeled sequence")
        pairs = np.zeros((self.config.label_count,) * 2, dtype=np.float64)
        unigrams = np.zeros(self.config.label_count, dtype=np.float64)
        for seq in sequences:
            for label in seq:
                unigrams[label] += 1.0
            for a, b in zip(seq, seq[1:]):
                pairs[a, b] += 1.0
        self.pair_counts.copy_(torch.as_tensor(pairs, dtype=self.pair_counts.dtype))
        self.label_counts.copy_(torch.as_tensor(unigrams, dtype=self.label_counts.dtype))
        self.total_pairs.fill_(float(pairs.sum()))

    def pmi_table(self) -> np.ndarray:
        pairs = self.pair_counts.detach().cpu().numpy().astype(np.float64)
        uni = self.label_counts.detach().cpu().numpy().astype(np.float64)
        n_total = float(self.total_pairs.item()) + 1.0
        return np.log((pairs + 1.0) * n_total / np.outer(uni + 1.0, uni + 1.0))

    def predict(self, context_labels: Sequence[int], candidates: Sequence[int]) -> PolicyOutput:
        """Distribution over an explicit candidate label set."""
        if not len(candidates):
            raise ModelError("pmi prediction needs a nonempty candidate set")
        table = self.pmi_table()
        scores = np.zeros(len(candidates), dtype=np.float64)
        for i, cand in enumerate(candidates):
            scores[i] = sum(table[ctx, cand] for ctx in context_labels)
        return PolicyOutput(probs=_softmax(scores))

    def policy_probs(self, batch: TaskBatch) -> np.ndarray:
        table = self.pmi_table()
        labels = batch.arrays["context_labels"]
        mask = batch.masks["context_labels"]
        out = np.zeros((batch.size, self.config.label_count), dtype=np.float64)
        for i in range(batch.size):
            ctx = labels[i][mask[i] == 1]
            scores = table[ctx].sum(axis=0) if len(ctx) else np.zeros(self.config.label_count)
            out[i] = _softmax(scores)
        return out

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        return torch.zeros((), dtype=torch.float32)
