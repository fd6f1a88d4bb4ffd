"""Relational graph convolution over the entity knowledge graph.

Layer rule, for node i with per-relation in-neighborhoods N_i^r:

    h_i' = act( sum_r sum_{j in N_i^r} (1 / c_{i,r}) W_r h_j  +  W_0 h_i )

with c_{i,r} = |N_i^r|. Aggregation accumulates messages in edge-list
order and processes relations in id order, so relabeling the nodes of the
input graph permutes the output rows bit-exactly.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, RankOutput, SideData, masked_mean_rows


def rgcn_layer(
    node_states: torch.Tensor,
    triples: torch.Tensor,
    relation_weights: list[torch.Tensor],
    self_weight: torch.Tensor,
    activation=None,
) -> torch.Tensor:
    """One relational graph convolution step.

    node_states: (N, d); triples: (E, 3) long rows (head, relation, tail),
    messages flow head -> tail; relation_weights: one (d, d) matrix per
    relation; self_weight: (d, d). Nodes without in-edges reduce to
    act(W_0 h_i).
    """
    n, d = node_states.shape
    for w in list(relation_weights) + [self_weight]:
        if w.shape != (d, d):
            raise ModelError(f"weight shape {tuple(w.shape)} does not match state width {d}")
    if triples.numel() and int(triples[:, 1].max()) >= len(relation_weights):
        raise ModelError("triple references an unknown relation")

    out = node_states @ self_weight.T
    for r, w_r in enumerate(relation_weights):
        edges = triples[triples[:, 1] == r]
        if edges.shape[0] == 0:
            continue
        heads, tails = edges[:, 0], edges[:, 2]
        messages = node_states[heads] @ w_r.T
        agg = torch.zeros_like(node_states)
        agg.index_add_(0, tails, messages)
        counts = torch.zeros(n, dtype=node_states.dtype, device=node_states.device)
        counts.index_add_(0, tails, torch.ones(len(tails), dtype=node_states.dtype))
        out = out + agg / torch.clamp(counts, min=1.0).unsqueeze(1)
    return activation(out) if activation is not None else out


class RGCNStack(nn.Module):
    """Entity embeddings refined by a stack of relational layers."""

    def __init__(self, config: ModelConfig, side: SideData):
        super().__init__()
        if config.n_entities < 1:
            raise ModelError("graph models need a nonempty entity graph")
        d = config.embedding_dim
        self.entity_emb = nn.Embedding(config.n_entities, d)
        n_rel = max(config.n_relations, 1)
        self.relation_weights = nn.ParameterList(
            nn.Parameter(torch.empty(d, d)) for _ in range(config.num_layers * n_rel)
        )
        self.self_weights = nn.ParameterList(
            nn.Parameter(torch.empty(d, d)) for _ in range(config.num_layers)
        )
        self.n_relations = n_rel
        self.num_layers = config.num_layers
        triples = torch.as_tensor(
            sorted(side.entity_triples) if side.entity_triples else [], dtype=torch.long
        ).reshape(-1, 3)
        self.register_buffer("triples", triples, persistent=False)

    def node_states(self) -> torch.Tensor:
        h = self.entity_emb.weight
        for layer in range(self.num_layers):
            rel_ws = [
                self.relation_weights[layer * self.n_relations + r]
                for r in range(self.n_relations)
            ]
            h = rgcn_layer(h, self.triples, rel_ws, self.self_weights[layer],
                           activation=torch.relu)
        return h


class RGCNRec(BaseModel):
    """Graph recommender: pooled context-entity state dotted with item states."""

    NAME = "rgcn"
    TASKS = ("rec",)

    def __init__(self, config: ModelConfig, side: SideData):
        super().__init__(config)
        self.graph = RGCNStack(config, side)
        self.fallback_item = nn.Parameter(torch.empty(config.embedding_dim))
        index = torch.full((config.catalog_size,), -1, dtype=torch.long)
        for item, entity in side.item2entity.items():
            index[item] = entity
        self.register_buffer("item_entity_index", index, persistent=False)
        self.finalize()

    def user_rep(self, batch: TaskBatch, states: torch.Tensor) -> torch.Tensor:
        """Masked mean of the context entities' states; empty context -> zeros."""
        ids = self.long_tensor(batch.arrays["context_entities"])
        mask = self.float_mask(batch.masks["context_entities"])
        if ids.shape[1] == 0:
            return torch.zeros(batch.size, states.shape[1], dtype=states.dtype)
        return masked_mean_rows(states, ids, mask)

    def item_matrix(self, states: torch.Tensor) -> torch.Tensor:
        mapped = self.item_entity_index >= 0
        safe = torch.clamp(self.item_entity_index, min=0)
        rows = states[safe]
        return torch.where(mapped.unsqueeze(1), rows, self.fallback_item.unsqueeze(0))

    def scores(self, batch: TaskBatch) -> torch.Tensor:
        states = self.graph.node_states()
        return self.user_rep(batch, states) @ self.item_matrix(states).T

    def rank(self, batch: TaskBatch) -> np.ndarray:
        with torch.no_grad():
            return self.scores(batch).cpu().numpy()

    def loss(self, batch: TaskBatch) -> torch.Tensor:
        logits = self.scores(batch)
        targets = self.long_tensor(batch.targets["target_item"])
        return nn.functional.cross_entropy(logits, targets)


def rank_items(user_rep: np.ndarray, item_states: np.ndarray) -> RankOutput:
    """Inner-product ranking of catalog items against one user vector."""
    return RankOutput.from_scores(np.asarray(item_states) @ np.asarray(user_rep))
