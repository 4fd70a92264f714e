"""Adam optimiser and the training configuration shared by both models."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


@dataclass
class TrainConfig:
    epochs: int = 300
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: Optional[int] = 32  # None means full batch
    seed: int = 0
    clip_norm: Optional[float] = None

    def to_dict(self):
        return asdict(self)


class Adam:
    """Adam over a list of numpy arrays, updated in place."""

    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    @classmethod
    def from_config(cls, params, config):
        return cls(params, config.lr, config.beta1, config.beta2, config.eps)

    def step(self, grads):
        self.t += 1
        bc1 = 1 - self.beta1**self.t
        bc2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def clip_by_global_norm(grads, max_norm):
    if max_norm is None:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm or total == 0:
        return grads
    return [g * (max_norm / total) for g in grads]


def batch_indices(n, batch_size, rng):
    """Yield index arrays for one epoch; a full batch keeps the natural order."""
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
