"""Conversation metrics: perplexity, BLEU-n, Distinct-n, embedding similarity."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from ..errors import EvalError


def _ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def bleu_n(hypotheses: list[list[str]], references: list[list[str]], n: int) -> float:
    """Cumulative sentence BLEU up to order n, averaged over the corpus.

    Per sentence: modified precisions p_m (hypothesis m-gram counts clipped
    by the reference) for m = 1..n, combined as BP * exp(mean log p_m) with
    BP = 1 when the hypothesis is longer than the reference and
    exp(1 - |ref|/|hyp|) otherwise. Any zero precision zeroes the sentence
    (no smoothing). Empty hypotheses score 0.
    """
    if not 1 <= n <= 4:
        raise EvalError("BLEU order must be in 1..4")
    if len(hypotheses) != len(references):
        raise EvalError("hypotheses and references must align")
    if not hypotheses:
        raise EvalError("no sentences to score")

    total = 0.0
    for hyp, ref in zip(hypotheses, references):
        total += _sentence_bleu(hyp, ref, n)
    return total / len(hypotheses)


def _sentence_bleu(hyp: list[str], ref: list[str], n: int) -> float:
    if not hyp:
        return 0.0
    log_sum = 0.0
    for m in range(1, n + 1):
        hyp_grams = Counter(_ngrams(hyp, m))
        if not hyp_grams:
            return 0.0
        ref_grams = Counter(_ngrams(ref, m))
        clipped = sum(min(c, ref_grams[g]) for g, c in hyp_grams.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / sum(hyp_grams.values()))
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum / n)


def distinct_n(responses: list[list[str]], n: int) -> float:
    """Distinct n-grams across the whole response set divided by the total
    n-gram count; responses shorter than n contribute nothing."""
    if not 1 <= n <= 4:
        raise EvalError("Distinct order must be in 1..4")
    seen: set[tuple[str, ...]] = set()
    total = 0
    for resp in responses:
        grams = _ngrams(resp, n)
        seen.update(grams)
        total += len(grams)
    if total == 0:
        raise EvalError(f"no {n}-grams in the response set")
    return len(seen) / total


def perplexity(token_nlls: list[float]) -> float:
    """exp of the mean per-token negative log-likelihood (natural log)."""
    if not len(token_nlls):
        raise EvalError("no target tokens to score")
    return float(math.exp(sum(token_nlls) / len(token_nlls)))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _extreme_vector(vectors: np.ndarray) -> np.ndarray:
    # Per dimension keep the value of largest magnitude, sign preserved;
    # exact ties go to the positive side.
    vmax = vectors.max(axis=0)
    vmin = vectors.min(axis=0)
    return np.where(np.abs(vmax) >= np.abs(vmin), vmax, vmin)


def embedding_metrics(
    hypotheses: list[list[str]],
    references: list[list[str]],
    word_vectors: dict[str, np.ndarray],
) -> dict[str, float]:
    """Embedding Average / Extreme / Greedy over scored sentence pairs.

    Tokens without a vector are skipped; a pair is skipped entirely (and
    counted) when either side has no in-vector tokens.
    """
    if len(hypotheses) != len(references):
        raise EvalError("hypotheses and references must align")
    sums = {"average": 0.0, "extreme": 0.0, "greedy": 0.0}
    scored = 0
    skipped = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_vecs = [word_vectors[t] for t in hyp if t in word_vectors]
        ref_vecs = [word_vectors[t] for t in ref if t in word_vectors]
        if not hyp_vecs or not ref_vecs:
            skipped += 1
            continue
        h = np.stack(hyp_vecs)
        r = np.stack(ref_vecs)
        sums["average"] += _cosine(h.mean(axis=0), r.mean(axis=0))
        sums["extreme"] += _cosine(_extreme_vector(h), _extreme_vector(r))
        g_hr = float(np.mean([max(_cosine(w, v) for v in r) for w in h]))
        g_rh = float(np.mean([max(_cosine(w, v) for v in h) for w in r]))
        sums["greedy"] += 0.5 * (g_hr + g_rh)
        scored += 1
    if scored == 0:
        raise EvalError(f"all {skipped} sentence pairs lacked embedding coverage")
    return {name: value / scored for name, value in sums.items()}
