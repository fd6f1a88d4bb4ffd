"""Attention building blocks shared by the sequence models."""

from __future__ import annotations

import math

import torch
from torch import nn

NEG_INF = -1e9  # additive mask value; finite to keep softmax NaN-free


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.o_proj = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, query: torch.Tensor, key: torch.Tensor, value: torch.Tensor,
                mask: torch.Tensor | None = None) -> torch.Tensor:
        """mask: additive (B, 1, Tq, Tk) or (1, 1, Tq, Tk); blocked = NEG_INF."""
        b, tq, d = query.shape
        tk = key.shape[1]
        h, hd = self.heads, self.head_dim

        q = self.q_proj(query).view(b, tq, h, hd).transpose(1, 2)
        k = self.k_proj(key).view(b, tk, h, hd).transpose(1, 2)
        v = self.v_proj(value).view(b, tk, h, hd).transpose(1, 2)

        scores = q @ k.transpose(-1, -2) / math.sqrt(hd)
        if mask is not None:
            scores = scores + mask
        attn = torch.softmax(scores, dim=-1)
        attn = self.dropout(attn)
        out = (attn @ v).transpose(1, 2).reshape(b, tq, d)
        return self.o_proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, dropout: float = 0.0):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, 2 * dim),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(2 * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class SelfAttentionBlock(nn.Module):
    """Pre-norm residual block: self-attention then feed-forward."""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = FeedForward(dim, dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, mask)
        return x + self.ff(self.norm2(x))


class CrossAttentionBlock(nn.Module):
    """Decoder block: causal self-attention, cross-attention, feed-forward."""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, dropout)
        self.norm3 = nn.LayerNorm(dim)
        self.ff = FeedForward(dim, dropout)

    def forward(self, x: torch.Tensor, memory: torch.Tensor,
                self_mask: torch.Tensor | None, memory_mask: torch.Tensor | None) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.self_attn(h, h, h, self_mask)
        h = self.norm2(x)
        x = x + self.cross_attn(h, memory, memory, memory_mask)
        return x + self.ff(self.norm3(x))


def causal_mask(t: int, dtype: torch.dtype) -> torch.Tensor:
    """(1, 1, t, t) additive mask: position i attends to positions <= i."""
    mask = torch.full((t, t), NEG_INF, dtype=dtype).triu(diagonal=1)
    return mask.view(1, 1, t, t)


def padding_mask(mask_2d: torch.Tensor, dtype: torch.dtype) -> torch.Tensor:
    """(B, 1, 1, Tk) additive mask from a 1=real/0=pad matrix."""
    blocked = (1.0 - mask_2d.to(dtype)) * NEG_INF
    return blocked.view(mask_2d.shape[0], 1, 1, mask_2d.shape[1])
