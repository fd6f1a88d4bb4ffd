"""Policy metrics: Accuracy and Hit@k over predicted label distributions."""

from __future__ import annotations

import numpy as np

from ..errors import EvalError


def policy_metrics(
    distributions: list[np.ndarray],
    truths: list[int],
    ks: tuple[int, ...] = (1, 3, 5),
) -> dict[str, float]:
    """Accuracy and Hit@k; ties in probability break toward the lower label id.

    Hit@1 equals Accuracy by construction.
    """
    if len(distributions) != len(truths):
        raise EvalError("distributions and truths must align")
    if not distributions:
        raise EvalError("no policy instances to score")

    totals = {f"hit@{k}": 0.0 for k in ks}
    totals["accuracy"] = 0.0
    for dist, truth in zip(distributions, truths):
        probs = np.asarray(dist, dtype=np.float64)
        if not 0 <= truth < probs.shape[0]:
            raise EvalError(f"truth label {truth} outside the {probs.shape[0]}-label set")
        order = np.lexsort((np.arange(probs.shape[0]), -probs))
        rank = int(np.nonzero(order == truth)[0][0]) + 1
        if rank == 1:
            totals["accuracy"] += 1.0
        for k in ks:
            if rank <= k:
                totals[f"hit@{k}"] += 1.0
    n = len(distributions)
    return {name: value / n for name, value in totals.items()}
