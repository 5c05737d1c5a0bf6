"""Deterministic full-batch training: Adam steps, run reports, divergence.

All trainable parts of an objective live in one flat vector (both halves of
a curl pair, every subnet of a piecewise net, both region nets in the
two-dielectric setup), so a single optimizer state advances them jointly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import jets, tape


class TrainingDiverged(RuntimeError):
    """Loss or gradient left the finite range.

    Carries the epoch index and the partial report accumulated so far so
    callers can persist what happened before the blow-up.
    """

    def __init__(self, epoch, report):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.report = report


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 16000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


@dataclass
class TrainReport:
    """What a fit produced: final params, decimated loss trace, timings.

    trace is a list of (epoch, loss) pairs with at most 1000 entries; the
    last entry is always (epochs_run, final_loss). Wall time is informative
    only and excluded from any determinism claim.
    """

    params: np.ndarray
    trace: list
    final_loss: float
    epochs_run: int
    wall_time: float
    seed: int
    config: TrainConfig


def adam_init(n):
    return {"m": np.zeros(n), "v": np.zeros(n)}


def adam_step(params, grad, state, t, cfg):
    """One Adam update with bias correction; t is the 1-based step index."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    m = cfg.beta1 * state["m"] + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state["v"] + (1.0 - cfg.beta2) * grad * grad
    mhat = m / (1.0 - cfg.beta1 ** t)
    vhat = v / (1.0 - cfg.beta2 ** t)
    new = params - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
    return new, {"m": m, "v": v}


def _trace_stride(epochs):
    # <= 999 in-loop entries plus the final evaluation
    return -(-epochs // 999)


def train(objective, cfg, params=None, grad_fn=None):
    """Full-batch Adam on the objective's flat parameter vector.

    params defaults to objective.init(cfg.seed). grad_fn(params) must
    return (loss value, gradient); the default differentiates the recorded
    forward pass, and the quantum net substitutes finite differences on
    its angles. Fixed seed and inputs give a bitwise identical parameter
    trajectory.
    """
    if params is None:
        params = objective.init(cfg.seed)
    params = np.asarray(params, dtype=np.float64).copy()
    if grad_fn is None:
        def grad_fn(p):
            return jets.value_and_grad(objective.loss, p)
    stride = _trace_stride(cfg.epochs)
    state = adam_init(params.size)
    trace = []
    t0 = time.perf_counter()
    for e in range(cfg.epochs):
        value, grad = grad_fn(params)
        recorded = e % stride == 0
        if recorded:
            trace.append((e, value))
        if not (np.isfinite(value) and np.isfinite(grad).all()):
            if not recorded:
                trace.append((e, value))
            partial = TrainReport(params, trace, value, e,
                                  time.perf_counter() - t0, cfg.seed, cfg)
            raise TrainingDiverged(e, partial)
        params, state = adam_step(params, grad, state, e + 1, cfg)
    final = float(tape.value_of(objective.loss(params)))
    trace.append((cfg.epochs, final))
    return TrainReport(params, trace, final, cfg.epochs,
                       time.perf_counter() - t0, cfg.seed, cfg)
