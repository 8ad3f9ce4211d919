"""Plateau LR decay and early stopping with exact epoch-count semantics.

The multiplier fires as soon as the monitored value has failed to improve
for `patience` consecutive epochs (torch's built-in scheduler waits one
epoch longer, which breaks the documented arithmetic).
"""
from __future__ import annotations

import math


class PlateauScheduler:
    def __init__(self, optimizer, factor: float = 0.65, patience: int = 3, min_delta: float = 0.0):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.bad_epochs = 0

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def step(self, metric: float) -> bool:
        """Record one epoch's validation metric; returns True when lr decayed."""
        if metric < self.best - self.min_delta:
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            for group in self.optimizer.param_groups:
                group["lr"] *= self.factor
            self.bad_epochs = 0
            return True
        return False


class EarlyStopper:
    def __init__(self, patience: int = 10, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> bool:
        """Returns True once `patience` consecutive epochs failed to improve."""
        if metric < self.best - self.min_delta:
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience
