"""Mini-batch gradient descent with optional momentum.

Deliberately plain: a fixed learning rate, a seeded Fisher-Yates shuffle
per epoch, and sum-then-divide batch reductions in index order, so a
(seed, data, hyperparameters) triple fully determines the trained
parameters. Loss divergence raises immediately with the epoch number.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonFiniteLossError


@dataclass
class HyperParams:
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.0
    bce_weights: tuple = (0.1, 0.9)
    aam_margin: float = 0.2
    aam_scale: float = 30.0
    orth_lambda: float = 0.0
    prob_epsilon: float = 1e-7


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    seed: int = 0
    wall_time: float = 0.0

    def to_dict(self):
        return {
            "epoch_losses": [float(x) for x in self.epoch_losses],
            "seed": int(self.seed),
            "wall_time": float(self.wall_time),
        }


def run_sgd(params, batch_fn, n_samples, hp, rng):
    """Drive the descent loop over a dict of named parameter arrays.

    ``batch_fn(params, idx)`` returns (mean loss over idx, grads dict with
    the same keys). Parameters are updated in sorted key order. Returns a
    TrainReport whose epoch losses are the shuffled-batch means.
    """
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    report = TrainReport(seed=hp.seed)
    start = time.perf_counter()
    batch = max(1, int(hp.batch_size))
    full_batch = batch >= n_samples
    for epoch in range(int(hp.epochs)):
        # one full-size batch sees every sample regardless of order, so the
        # shuffle is skipped there (keeps the reduction order fixed too)
        order = np.arange(n_samples) if full_batch else rng.shuffle_index(n_samples)
        total = 0.0
        for lo in range(0, n_samples, batch):
            idx = order[lo : lo + batch]
            loss, grads = batch_fn(params, idx)
            if not np.isfinite(loss):
                raise NonFiniteLossError(epoch, loss)
            total += loss * len(idx)
            for key in sorted(grads):
                velocity[key] = hp.momentum * velocity[key] + grads[key]
                params[key] = params[key] - hp.lr * velocity[key]
        report.epoch_losses.append(total / n_samples)
    report.wall_time = time.perf_counter() - start
    return report
