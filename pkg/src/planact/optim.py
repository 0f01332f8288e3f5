"""AdamW with decoupled weight decay and the warmup-plus-cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class AdamWConfig:
    beta1: float = 0.9
    beta2: float = 0.98
    weight_decay: float = 0.05
    eps: float = 1e-8


@dataclass
class LrSchedule:
    """Linear ramp from zero to ``peak_lr`` over the warmup span, cosine decay to zero after."""

    peak_lr: float
    total_steps: int
    warmup_ratio: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ContractError(f"warmup_ratio must lie in [0, 1), got {self.warmup_ratio}")
        if self.total_steps <= 0:
            raise ContractError("total_steps must be positive")

    @property
    def warmup_steps(self) -> int:
        return int(self.warmup_ratio * self.total_steps)

    def lr_at(self, step: int) -> float:
        if step < 0 or step > self.total_steps:
            raise ContractError(
                f"step {step} outside schedule range [0, {self.total_steps}]"
            )
        warmup = self.warmup_steps
        if step < warmup:
            return self.peak_lr * step / warmup
        if self.total_steps == warmup:
            return self.peak_lr
        progress = (step - warmup) / (self.total_steps - warmup)
        return self.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class AdamW:
    """Decoupled-weight-decay Adam over an explicit list of parameter tensors."""

    def __init__(self, params: list[Tensor], config: AdamWConfig | None = None):
        self.params = list(params)
        self.config = config or AdamWConfig()
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float) -> None:
        if lr < 0.0:
            raise ContractError(f"learning rate must be non-negative, got {lr}")
        c = self.config
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise DimensionError(
                    f"gradient shape {grad.shape} does not match parameter {p.data.shape}"
                )
            if c.weight_decay:
                p.data -= lr * c.weight_decay * p.data
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad * grad
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= lr * m_hat / (np.sqrt(v_hat) + c.eps)
