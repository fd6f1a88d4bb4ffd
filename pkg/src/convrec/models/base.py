"""Shared model contract: config, outputs, seeded initialization.

Every model builds from a ModelConfig (plus knowledge-graph side data where
needed), computes a scalar loss on a TaskBatch, and produces task outputs:
an item ranking, a generated response, or a policy distribution. Builds are
deterministic functions of (config, side data); forward passes are
deterministic functions of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from ..errors import ModelError


@dataclass
class ModelConfig:
    name: str
    vocab_size: int = 8
    catalog_size: int = 1
    label_count: int = 0
    n_entities: int = 0
    n_relations: int = 0
    embedding_dim: int = 32
    hidden_dim: int = 32
    num_layers: int = 1
    num_heads: int = 2
    dropout: float = 0.0
    max_gen_len: int = 30
    max_positions: int = 512
    sep_id: int = -1          # -1 resolves to vocab_size - 1 (the reserved separator slot)
    seed: int = 0

    def __post_init__(self):
        for attr in ("vocab_size", "catalog_size", "embedding_dim", "hidden_dim",
                     "num_layers", "num_heads"):
            if getattr(self, attr) < 1:
                raise ModelError(f"{attr} must be >= 1, got {getattr(self, attr)}")
        if self.hidden_dim % self.num_heads != 0:
            raise ModelError(
                f"num_heads={self.num_heads} must divide hidden_dim={self.hidden_dim}"
            )
        if self.sep_id == -1:
            self.sep_id = self.vocab_size - 1


@dataclass
class SideData:
    """Knowledge-graph side inputs for graph-aware models."""
    entity_triples: list[tuple[int, int, int]] = field(default_factory=list)
    item2entity: dict[int, int] = field(default_factory=dict)


@dataclass
class RankOutput:
    scores: np.ndarray           # (catalog_size,)
    ranking: list[int]           # item ids, best first

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "RankOutput":
        scores = np.asarray(scores, dtype=np.float64)
        # Explicit tie rule: equal scores order by ascending item id.
        order = np.lexsort((np.arange(scores.shape[0]), -scores))
        return cls(scores=scores, ranking=[int(i) for i in order])


@dataclass
class GenOutput:
    token_ids: list[int]         # no start id, terminator excluded
    step_log_probs: list[float]  # one per emitted token
    ended: bool                  # stopped at the end token (vs. length cap)
    norm_score: float            # length-normalized log-probability


@dataclass
class PolicyOutput:
    probs: np.ndarray            # (label_count,) nonnegative, sums to 1

    def __post_init__(self):
        total = float(np.sum(self.probs))
        if not np.isfinite(total) or abs(total - 1.0) > 1e-6 or np.any(self.probs < 0):
            raise ModelError(f"policy distribution not normalized (sum={total})")


class BaseModel(nn.Module):
    """Common build/seed/loss plumbing for all zoo models."""

    NAME = "base"
    TASKS: tuple[str, ...] = ()

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config

    def finalize(self) -> None:
        """Apply the seeded initialization; call at the end of __init__."""
        seeded_init(self, self.config.seed)

    @property
    def trainable(self) -> bool:
        return any(p.requires_grad for p in self.parameters())

    @property
    def dtype(self) -> torch.dtype:
        for p in self.parameters():
            return p.dtype
        for b in self.buffers():
            if b.is_floating_point():
                return b.dtype
        return torch.float32

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        raise ModelError(f"{self.NAME} defines no loss")

    def fit_counts(self, instances: Sequence) -> None:
        """Hook for count-based models; trainable models ignore it."""

    def long_tensor(self, array: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(array, dtype=torch.long)

    def float_mask(self, array: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(array, dtype=self.dtype)


def seeded_init(model: nn.Module, seed: int) -> None:
    """Deterministic parameter initialization.

    Embedding tables (and bare Parameters) draw from uniform(-0.1, 0.1);
    linear/conv/recurrent weights from a fan-in-scaled normal; biases and
    normalization offsets are zeroed. Parameters are visited in registration
    order with one seeded generator, so a fixed seed fixes every value.
    """
    gen = torch.Generator().manual_seed(seed)
    owner: dict[int, nn.Module] = {}
    for module in model.modules():
        for param in module.parameters(recurse=False):
            owner.setdefault(id(param), module)
    with torch.no_grad():
        for name, param in model.named_parameters():
            mod = owner[id(param)]
            leaf = name.rsplit(".", 1)[-1]
            if isinstance(mod, nn.Embedding):
                _draw(param, gen, "uniform")
            elif isinstance(mod, (nn.Linear, nn.Conv1d)):
                if leaf.startswith("weight"):
                    fan_in = param.shape[1] * (param.shape[2] if param.dim() == 3 else 1)
                    _draw(param, gen, "normal", fan_in)
                else:
                    param.zero_()
            elif isinstance(mod, (nn.GRU, nn.GRUCell)):
                if leaf.startswith("weight"):
                    _draw(param, gen, "normal", param.shape[1])
                else:
                    param.zero_()
            elif isinstance(mod, nn.LayerNorm):
                param.fill_(1.0 if leaf.startswith("weight") else 0.0)
            else:
                _draw(param, gen, "uniform")


def _draw(param: torch.Tensor, gen: torch.Generator, kind: str, fan_in: int = 1) -> None:
    # Draw in float32 for a seed-stable stream, then cast into place.
    sample = torch.empty(param.shape, dtype=torch.float32)
    if kind == "uniform":
        sample.uniform_(-0.1, 0.1, generator=gen)
    else:
        sample.normal_(0.0, fan_in ** -0.5, generator=gen)
    param.copy_(sample.to(param.dtype))


def run_gru(gru: nn.GRU, embedded: torch.Tensor, lengths: Sequence[int],
            empty_state: torch.Tensor) -> torch.Tensor:
    """Final real-position GRU state per row; zero-length rows get empty_state."""
    batch = embedded.shape[0]
    hidden = empty_state.shape[-1]
    if embedded.shape[1] == 0:
        return empty_state.unsqueeze(0).expand(batch, hidden)
    outputs, _ = gru(embedded)
    idx = torch.as_tensor([max(length - 1, 0) for length in lengths], dtype=torch.long)
    gathered = outputs[torch.arange(batch), idx]
    empty = torch.as_tensor([length == 0 for length in lengths])
    if bool(empty.any()):
        gathered = torch.where(empty.unsqueeze(1), empty_state.unsqueeze(0), gathered)
    return gathered


def masked_mean_rows(states: torch.Tensor, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean of states[ids] over mask==1 positions; all-masked rows give zeros."""
    gathered = states[ids] * mask.unsqueeze(-1)
    counts = mask.sum(dim=1, keepdim=True)
    safe = torch.clamp(counts, min=1.0)
    mean = gathered.sum(dim=1) / safe
    return mean * (counts > 0)
