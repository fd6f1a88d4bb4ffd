"""Learning-rate schedule and early stopping."""

from __future__ import annotations

import math

from ..errors import ConvRecError

CONTINUE, STOP = "continue", "stop"


def lr_schedule(step: int, base: float, warmup_steps: int, decay: float = 1.0) -> float:
    """Linear warmup then per-step exponential decay.

    lr = base * (step + 1) / warmup_steps          for step < warmup_steps
    lr = base * decay ** (step - warmup_steps + 1) afterwards

    decay 1.0 keeps the rate constant after warmup; the boundary is
    continuous up to one decay factor: lr(warmup_steps) == base * decay.
    """
    if warmup_steps < 0:
        raise ConvRecError("warmup_steps must be >= 0")
    if not 0.0 < decay <= 1.0:
        raise ConvRecError("decay must be in (0, 1]")
    if step < warmup_steps:
        return base * (step + 1) / warmup_steps
    return base * decay ** (step - warmup_steps + 1)


class EarlyStopper:
    """Strict-improvement early stopping with configurable margin.

    An improvement (beyond the margin) resets the patience counter and
    records the best value; `update` returns STOP once the counter reaches
    patience.
    """

    def __init__(self, mode: str = "min", patience: int = 3, margin: float = 0.0):
        if mode not in ("min", "max"):
            raise ConvRecError(f"early-stop mode must be min or max, got {mode!r}")
        if patience < 1:
            raise ConvRecError("patience must be >= 1")
        self.mode = mode
        self.patience = patience
        self.margin = margin
        self.best = math.inf if mode == "min" else -math.inf
        self.best_epoch = 0
        self.counter = 0
        self.epoch = 0

    def update(self, metric: float) -> str:
        self.epoch += 1
        if self.mode == "min":
            improved = metric < self.best - self.margin
        else:
            improved = metric > self.best + self.margin
        if improved:
            self.best = metric
            self.best_epoch = self.epoch
            self.counter = 0
            return CONTINUE
        self.counter += 1
        return STOP if self.counter >= self.patience else CONTINUE
