"""Ranking metrics for the recommendation sub-task."""

from __future__ import annotations

from ..errors import EvalError


def rank_metrics(
    rankings: list[list[int]],
    truths: list[int],
    ks: tuple[int, ...] = (1, 10, 50),
) -> dict[str, float]:
    """Hit@k, MRR@k and NDCG@k for single-truth rankings.

    With the truth at 1-based rank r: Hit@k = [r <= k], MRR@k = 1/r when
    r <= k else 0, NDCG@k = 1/log2(r + 1) when r <= k else 0; values are
    averaged over instances.
    """
    if len(rankings) != len(truths):
        raise EvalError("rankings and truths must align")
    if not rankings:
        raise EvalError("no ranking instances to score")
    from math import log2

    totals = {f"{name}@{k}": 0.0 for k in ks for name in ("hit", "mrr", "ndcg")}
    for ranking, truth in zip(rankings, truths):
        try:
            r = ranking.index(truth) + 1
        except ValueError:
            raise EvalError(f"ground-truth item {truth} missing from ranking") from None
        for k in ks:
            if r <= k:
                totals[f"hit@{k}"] += 1.0
                totals[f"mrr@{k}"] += 1.0 / r
                totals[f"ndcg@{k}"] += 1.0 / log2(r + 1)
    n = len(rankings)
    return {name: value / n for name, value in totals.items()}
