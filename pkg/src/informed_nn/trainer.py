"""Gradient descent and Adam training loops for informed objectives."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .nn_core import Network

log = logging.getLogger(__name__)

HISTORY_HEADER = ("step", "objective", "grad_norm", "gap")


class TrainingDivergedError(FloatingPointError):
    """Objective or gradient became NaN/Inf."""

    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    """Optimizer settings.

    For ``adam`` the learning rate is ``lr_rates[0]`` for steps
    ``1..lr_breakpoints[0]``, ``lr_rates[1]`` up to ``lr_breakpoints[1]`` and so
    on; ``len(lr_rates) == len(lr_breakpoints) + 1``. ``batch_size=None`` means
    full batch. ``eta=None`` for ``gd`` selects :func:`default_step_size`.

    ``plateau_window``/``plateau_tol`` optionally stop training once the
    recorded objective improved by less than ``plateau_tol`` (relative) over
    the last ``plateau_window`` steps.
    """

    optimizer: str = "gd"
    steps: int = 1000
    eta: float | None = None
    lr_rates: list[float] = field(default_factory=lambda: [1e-3])
    lr_breakpoints: list[int] = field(default_factory=list)
    batch_size: int | None = None
    seed: int = 0
    record_every: int = 1
    plateau_window: int | None = None
    plateau_tol: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("gd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("steps must be a nonnegative integer")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")
        bp = list(self.lr_breakpoints)
        if len(self.lr_rates) != len(bp) + 1:
            raise ValueError("need exactly one more learning rate than breakpoints")
        if any(r <= 0 for r in self.lr_rates):
            raise ValueError("learning rates must be positive")
        if any(a > b for a, b in zip(bp, bp[1:])) or any(p > self.steps or p < 0 for p in bp):
            raise ValueError("breakpoints must be nondecreasing and within [0, steps]")
        if self.plateau_window is not None and self.plateau_window < 1:
            raise ValueError("plateau_window must be positive")

    def learning_rate(self, step: int) -> float:
        """Adam rate for 1-based ``step``."""
        for rate, bp in zip(self.lr_rates, self.lr_breakpoints):
            if step <= bp:
                return rate
        return self.lr_rates[-1]

    @classmethod
    def bohachevsky_full(cls, seed: int = 0) -> "TrainConfig":
        """Adam, 3000 steps, batch 100: 1e-6 / 5e-5 / 1e-5 switching at 2000 and 2500."""
        return cls(optimizer="adam", steps=3000, lr_rates=[1e-6, 5e-5, 1e-5],
                   lr_breakpoints=[2000, 2500], batch_size=100, seed=seed, record_every=100)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    step: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    gap: list[float | None] = field(default_factory=list)
    stopped_early: bool = False

    def record(self, step, objective, grad_norm, gap=None):
        self.step.append(int(step))
        self.objective.append(float(objective))
        self.grad_norm.append(float(grad_norm))
        self.gap.append(None if gap is None else float(gap))

    def rows(self):
        for row in zip(self.step, self.objective, self.grad_norm, self.gap):
            yield row

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_HEADER)
            for s, o, g, gap in self.rows():
                w.writerow([s, repr(o), repr(g), "" if gap is None else repr(gap)])


def default_step_size(net: Network) -> float:
    """Gradient-descent step ``d / (L^2 m)``."""
    return net.d / (net.L ** 2 * net.m)


def _check(step, value, grad: Network):
    if not np.isfinite(value):
        raise TrainingDivergedError(step, "objective")
    if not grad.is_finite():
        raise TrainingDivergedError(step, "gradient")


def _plateaued(history: TrainHistory, window: int, tol: float) -> bool:
    if len(history.step) < 2:
        return False
    now = history.step[-1]
    past = [i for i, s in enumerate(history.step) if s <= now - window]
    if not past:
        return False
    old = history.objective[past[-1]]
    new = history.objective[-1]
    return (old - new) <= tol * max(abs(old), np.finfo(float).tiny)


def train(net: Network, objective: Callable, config: TrainConfig,
          gap_fn: Callable[[Network], float] | None = None) -> tuple[Network, TrainHistory]:
    """Minimize ``objective`` starting from a copy of ``net``.

    ``objective(net, rows)`` must return ``(value, gradient)``; ``rows=None``
    is the full objective and ``objective.n`` the number of rows. Plain
    gradient descent uses the full batch and the update ``W <- W - eta grad``.
    Adam draws mini-batches without replacement, reshuffling every epoch.
    """
    net = net.copy()
    history = TrainHistory()
    params = net.parameters()

    if config.optimizer == "gd":
        eta = config.eta if config.eta is not None else default_step_size(net)
        for t in range(config.steps + 1):
            value, grad = objective(net, None)
            _check(t, value, grad)
            last = t == config.steps
            if t % config.record_every == 0 or last:
                history.record(t, value, grad.norm(), gap_fn(net) if gap_fn else None)
                if (config.plateau_window and not last
                        and _plateaued(history, config.plateau_window, config.plateau_tol)):
                    history.stopped_early = True
                    break
            if last:
                break
            for p, g in zip(params, grad.parameters()):
                p -= eta * g
        return net, history

    rng = np.random.default_rng(config.seed)
    n = objective.n
    bs = n if config.batch_size is None else min(config.batch_size, n)
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, eps = config.beta1, config.beta2, config.adam_eps
    order = np.empty(0, dtype=np.int64)
    pos = 0
    for t in range(config.steps + 1):
        last = t == config.steps
        if t % config.record_every == 0 or last:
            value, grad = objective(net, None)
            _check(t, value, grad)
            history.record(t, value, grad.norm(), gap_fn(net) if gap_fn else None)
            if (config.plateau_window and not last
                    and _plateaued(history, config.plateau_window, config.plateau_tol)):
                history.stopped_early = True
                break
        if last:
            break
        if pos >= order.size:
            order = rng.permutation(n)
            pos = 0
        rows = order[pos:pos + bs]
        pos += bs
        value, grad = objective(net, rows)
        _check(t, value, grad)
        step = t + 1
        lr = config.learning_rate(step)
        c1 = 1.0 - b1 ** step
        c2 = 1.0 - b2 ** step
        for p, g, a, v in zip(params, grad.parameters(), m1, m2):
            a *= b1
            a += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (a / c1) / (np.sqrt(v / c2) + eps)
    return net, history
