"""Response generation models.

Both models share the loss contract: teacher-forced cross-entropy averaged
over non-pad response tokens, with all-pad rows contributing nothing. Both
expose `make_decoder(context_ids, logits_bias=None)` returning a step
handle for the decoding strategies; a bias vector, when given, is added to
the logits of every step.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..data.batching import TaskBatch
from ..errors import ModelError
from .base import BaseModel, ModelConfig, run_gru
from .layers import CrossAttentionBlock, SelfAttentionBlock, causal_mask, padding_mask


def masked_token_loss(logits: torch.Tensor, targets: torch.Tensor,
                      target_mask: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over positions with target_mask == 1."""
    count = int(target_mask.sum())
    if count == 0:
        raise ModelError("conversation batch has no real target tokens")
    flat_nll = nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), reduction="none"
    )
    return (flat_nll * target_mask.reshape(-1)).sum() / count


class StepDecoder:
    """Per-step generation view over a conversation model."""

    def __init__(self, model, state, logits_bias: torch.Tensor | None = None):
        self._model = model
        self._state = state
        self._bias = logits_bias

    def next_logits(self, prefix_ids: list[int]) -> torch.Tensor:
        logits = self._model._step_logits(self._state, prefix_ids)
        if self._bias is not None:
            logits = logits + self._bias
        return logits


class TransformerSeq2Seq(BaseModel):
    """Encoder-decoder with multi-head attention.

    A learned null-memory vector is always prepended to the encoded context
    so cross-attention has at least one key, which also covers empty
    contexts at the first dialog turn.
    """

    NAME = "transformer"
    TASKS = ("conv",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embedding_dim, config.hidden_dim
        self.token_emb = nn.Embedding(config.vocab_size, d)
        self.pos_emb = nn.Embedding(config.max_positions, h)
        self.in_proj = nn.Linear(d, h)
        self.null_memory = nn.Parameter(torch.empty(h))
        self.encoder = nn.ModuleList(
            SelfAttentionBlock(h, config.num_heads, config.dropout)
            for _ in range(config.num_layers)
        )
        self.decoder = nn.ModuleList(
            CrossAttentionBlock(h, config.num_heads, config.dropout)
            for _ in range(config.num_layers)
        )
        self.enc_norm = nn.LayerNorm(h)
        self.dec_norm = nn.LayerNorm(h)
        self.out = nn.Linear(h, config.vocab_size)
        self.finalize()

    def encode(self, ctx_ids: torch.Tensor, ctx_mask: torch.Tensor):
        b, t = ctx_ids.shape
        null = self.null_memory.view(1, 1, -1).expand(b, 1, -1)
        if t > 0:
            x = self.in_proj(self.token_emb(ctx_ids)) + self.pos_emb.weight[:t].unsqueeze(0)
            x = torch.cat([null, x], dim=1)
            key_mask = torch.cat([torch.ones(b, 1, dtype=ctx_mask.dtype), ctx_mask], dim=1)
        else:
            x = null
            key_mask = torch.ones(b, 1, dtype=self.dtype)
        attn_mask = padding_mask(key_mask, x.dtype)
        for block in self.encoder:
            x = block(x, attn_mask)
        return self.enc_norm(x), attn_mask

    def _decode_hidden(self, memory, memory_mask, dec_in: torch.Tensor) -> torch.Tensor:
        b, t = dec_in.shape
        x = self.in_proj(self.token_emb(dec_in)) + self.pos_emb.weight[:t].unsqueeze(0)
        self_mask = causal_mask(t, x.dtype)
        for block in self.decoder:
            x = block(x, memory, self_mask, memory_mask)
        return self.dec_norm(x)

    def sequence_logits(self, batch: TaskBatch, dec_in: torch.Tensor) -> torch.Tensor:
        ctx = self.long_tensor(batch.arrays["context_tokens"])
        ctx_mask = self.float_mask(batch.masks["context_tokens"])
        memory, memory_mask = self.encode(ctx, ctx_mask)
        return self.out(self._decode_hidden(memory, memory_mask, dec_in))

    def loss(self, batch: TaskBatch, logits_bias: torch.Tensor | None = None) -> torch.Tensor:
        resp = self.long_tensor(batch.arrays["response"])
        resp_mask = self.float_mask(batch.masks["response"])
        logits = self.sequence_logits(batch, resp[:, :-1])
        if logits_bias is not None:
            logits = logits + logits_bias.unsqueeze(1)
        return masked_token_loss(logits, resp[:, 1:], resp_mask[:, 1:])

    def token_nlls(self, batch: TaskBatch, logits_bias: torch.Tensor | None = None) -> list[float]:
        """Per-token negative log-likelihoods of the non-pad targets."""
        with torch.no_grad():
            resp = self.long_tensor(batch.arrays["response"])
            resp_mask = batch.masks["response"]
            logits = self.sequence_logits(batch, resp[:, :-1])
            if logits_bias is not None:
                logits = logits + logits_bias.unsqueeze(1)
            logprobs = torch.log_softmax(logits, dim=-1)
            nll = -logprobs.gather(-1, resp[:, 1:].unsqueeze(-1)).squeeze(-1)
        out = []
        mask = resp_mask[:, 1:]
        for i in range(nll.shape[0]):
            out.extend(float(v) for v in nll[i][mask[i] == 1])
        return out

    def make_decoder(self, context_ids: list[int],
                     logits_bias: torch.Tensor | None = None) -> StepDecoder:
        ctx = torch.as_tensor([context_ids], dtype=torch.long)
        ctx_mask = torch.ones(1, len(context_ids), dtype=self.dtype)
        with torch.no_grad():
            memory, memory_mask = self.encode(ctx, ctx_mask)
        return StepDecoder(self, (memory, memory_mask), logits_bias)

    def _step_logits(self, state, prefix_ids: list[int]) -> torch.Tensor:
        memory, memory_mask = state
        dec_in = torch.as_tensor([prefix_ids], dtype=torch.long)
        with torch.no_grad():
            hidden = self._decode_hidden(memory, memory_mask, dec_in)
            return self.out(hidden[0, -1])


class HRED(BaseModel):
    """Hierarchical recurrent encoder-decoder.

    The flattened context is split back into utterances at the reserved
    separator id; a token-level GRU encodes each utterance, a dialog-level
    GRU runs over the utterance states, and its final state initializes the
    response decoder.
    """

    NAME = "hred"
    TASKS = ("conv",)

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embedding_dim, config.hidden_dim
        self.token_emb = nn.Embedding(config.vocab_size, d)
        self.utt_gru = nn.GRU(d, h, num_layers=config.num_layers, batch_first=True)
        self.dialog_gru = nn.GRU(h, h, batch_first=True)
        self.empty_utt = nn.Parameter(torch.empty(h))
        self.empty_dialog = nn.Parameter(torch.empty(h))
        self.bridge = nn.Linear(h, h)
        self.dec_gru = nn.GRU(d, h, batch_first=True)
        self.out = nn.Linear(h, config.vocab_size)
        self.finalize()

    def _split_context(self, row: list[int]) -> list[list[int]]:
        utterances: list[list[int]] = []
        current: list[int] = []
        for tok in row:
            if tok == self.config.sep_id:
                if current:
                    utterances.append(current)
                current = []
            else:
                current.append(tok)
        if current:
            utterances.append(current)
        return utterances

    def encode_context(self, rows: list[list[int]]) -> torch.Tensor:
        """Context-state vector per dialog row; returns (B, h)."""
        states = []
        for row in rows:
            utterances = self._split_context(row)
            if not utterances:
                states.append(self.empty_dialog)
                continue
            utt_states = []
            for utt in utterances:
                ids = torch.as_tensor([utt], dtype=torch.long)
                final = run_gru(self.utt_gru, self.token_emb(ids), [len(utt)], self.empty_utt)
                utt_states.append(final[0])
            stacked = torch.stack(utt_states).unsqueeze(0)      # (1, U, h)
            _, last = self.dialog_gru(stacked)
            states.append(last[0, 0])
        return torch.stack(states)

    def _context_rows(self, batch: TaskBatch) -> list[list[int]]:
        ids = batch.arrays["context_tokens"]
        lens = batch.lengths["context_tokens"]
        return [[int(v) for v in ids[i, : lens[i]]] for i in range(len(lens))]

    def sequence_logits(self, batch: TaskBatch, dec_in: torch.Tensor) -> torch.Tensor:
        context = self.encode_context(self._context_rows(batch))
        h0 = torch.tanh(self.bridge(context)).unsqueeze(0)      # (1, B, h)
        outputs, _ = self.dec_gru(self.token_emb(dec_in), h0)
        return self.out(outputs)

    def loss(self, batch: TaskBatch, logits_bias: torch.Tensor | None = None) -> torch.Tensor:
        resp = self.long_tensor(batch.arrays["response"])
        resp_mask = self.float_mask(batch.masks["response"])
        logits = self.sequence_logits(batch, resp[:, :-1])
        if logits_bias is not None:
            logits = logits + logits_bias.unsqueeze(1)
        return masked_token_loss(logits, resp[:, 1:], resp_mask[:, 1:])

    def token_nlls(self, batch: TaskBatch, logits_bias: torch.Tensor | None = None) -> list[float]:
        with torch.no_grad():
            resp = self.long_tensor(batch.arrays["response"])
            logits = self.sequence_logits(batch, resp[:, :-1])
            if logits_bias is not None:
                logits = logits + logits_bias.unsqueeze(1)
            logprobs = torch.log_softmax(logits, dim=-1)
            nll = -logprobs.gather(-1, resp[:, 1:].unsqueeze(-1)).squeeze(-1)
        out = []
        mask = batch.masks["response"][:, 1:]
        for i in range(nll.shape[0]):
            out.extend(float(v) for v in nll[i][mask[i] == 1])
        return out

    def make_decoder(self, context_ids: list[int],
                     logits_bias: torch.Tensor | None = None) -> StepDecoder:
        with torch.no_grad():
            context = self.encode_context([list(context_ids)])
            h0 = torch.tanh(self.bridge(context)).unsqueeze(0)
        return StepDecoder(self, h0, logits_bias)

    def _step_logits(self, state, prefix_ids: list[int]) -> torch.Tensor:
        dec_in = torch.as_tensor([prefix_ids], dtype=torch.long)
        with torch.no_grad():
            outputs, _ = self.dec_gru(self.token_emb(dec_in), state)
            return self.out(outputs[0, -1])


def hred_encode(model: HRED, context_rows: list[list[int]]) -> np.ndarray:
    """Context-state vectors for flattened rows (numpy view of encode_context)."""
    with torch.no_grad():
        return model.encode_context(context_rows).cpu().numpy()
