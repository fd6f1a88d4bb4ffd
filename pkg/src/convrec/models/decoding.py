"""Generation strategies over a per-step decoder handle.

Scoring convention shared by every strategy (and by the exhaustive-search
tests): a hypothesis emits content tokens and optionally terminates with
the end id; its score is the sum of the log-probabilities of all emissions
(including the terminating end) divided by the number of emission steps.
A hypothesis cut off at max_len has no end term and normalizes by max_len.
The pad id is never emitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ModelError
from .base import GenOutput


@dataclass
class _Hyp:
    tokens: tuple[int, ...]
    log_probs: tuple[float, ...]
    sum_lp: float


def _log_probs(handle, prefix_ids: list[int], pad_id: int,
               end_id: int | None = None) -> torch.Tensor:
    """Next-step log-probabilities; pad (and optionally end) masked out."""
    logits = handle.next_logits(prefix_ids).detach().to(torch.float64)
    logits[pad_id] = float("-inf")
    if end_id is not None:
        logits[end_id] = float("-inf")
    return torch.log_softmax(logits, dim=-1)


def greedy_decode(handle, start_id: int, end_id: int, pad_id: int, max_len: int,
                  min_len: int = 0) -> GenOutput:
    """Argmax decoding until the end id or the length cap.

    min_len forbids termination before that many content tokens exist.
    """
    if max_len < 1:
        raise ModelError("max_len must be >= 1")
    tokens: list[int] = []
    lps: list[float] = []
    sum_lp = 0.0
    for step in range(1, max_len + 1):
        blocked_end = end_id if step <= min_len else None
        lp = _log_probs(handle, [start_id] + tokens, pad_id, blocked_end).tolist()
        # Highest probability, ties to the lowest token id (same rule as beam).
        token = min(range(len(lp)), key=lambda v: (-lp[v], v))
        sum_lp += float(lp[token])
        if token == end_id:
            return GenOutput(tokens, lps, ended=True, norm_score=sum_lp / step)
        tokens.append(token)
        lps.append(float(lp[token]))
    return GenOutput(tokens, lps, ended=False, norm_score=sum_lp / max_len)


def beam_decode(handle, beam_size: int, start_id: int, end_id: int,
                pad_id: int, max_len: int, min_len: int = 0) -> GenOutput:
    """Beam search returning the best finished hypothesis.

    Runs every width from 1 to beam_size and keeps the overall best
    length-normalized hypothesis, so widening the beam never returns a
    worse sequence. Width 1 reduces exactly to greedy decoding.
    """
    if beam_size < 1:
        raise ModelError("beam size must be >= 1")
    if max_len < 1:
        raise ModelError("max_len must be >= 1")
    finished: list[GenOutput] = []
    for width in range(1, beam_size + 1):
        finished.extend(
            _beam_once(handle, width, start_id, end_id, pad_id, max_len, min_len)
        )
    return min(finished, key=lambda g: (-g.norm_score, tuple(g.token_ids)))


def _beam_once(handle, width: int, start_id: int, end_id: int,
               pad_id: int, max_len: int, min_len: int = 0) -> list[GenOutput]:
    frontier = [_Hyp(tokens=(), log_probs=(), sum_lp=0.0)]
    pool: list[GenOutput] = []
    for step in range(1, max_len + 1):
        blocked_end = end_id if step <= min_len else None
        candidates: list[tuple[float, tuple[int, ...], _Hyp, int, float]] = []
        for hyp in frontier:
            lp = _log_probs(handle, [start_id, *hyp.tokens], pad_id, blocked_end)
            for token, token_lp in enumerate(lp.tolist()):
                if token == pad_id or (blocked_end is not None and token == end_id):
                    continue
                candidates.append(
                    (hyp.sum_lp + token_lp, (*hyp.tokens, token), hyp, token, token_lp)
                )
        candidates.sort(key=lambda c: (-c[0], c[1]))
        frontier = []
        for sum_lp, _, hyp, token, token_lp in candidates[:width]:
            if token == end_id:
                pool.append(
                    GenOutput(list(hyp.tokens), list(hyp.log_probs),
                              ended=True, norm_score=sum_lp / step)
                )
            else:
                frontier.append(
                    _Hyp((*hyp.tokens, token), (*hyp.log_probs, token_lp), sum_lp)
                )
        if not frontier:
            break
    for hyp in frontier:  # length-capped hypotheses compete unterminated
        pool.append(
            GenOutput(list(hyp.tokens), list(hyp.log_probs),
                      ended=False, norm_score=hyp.sum_lp / max_len)
        )
    return pool
