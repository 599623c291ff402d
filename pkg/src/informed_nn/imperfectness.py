"""Empirical knowledge imperfectness and knowledge-regularized label imperfectness.

The "optimal hypotheses" are approximated by training a fresh network until the
objective plateaus (relative improvement below ``plateau_tol`` over
``plateau_window`` steps) or the step budget runs out.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .nn_core import Network, init_network, predict
from .risks import RiskSpec, WeightedObjective, eq1_weights, label_risk
from .trainer import TrainConfig, TrainHistory, train


@dataclass
class FitConfig:
    """Network shape and optimizer used to approximate an optimal hypothesis."""

    width: int = 256
    hidden_layers: int = 1
    init_seed: int = 0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        optimizer="adam", steps=2000, lr_rates=[1e-3], batch_size=100, record_every=50,
        plateau_window=200, plateau_tol=1e-6))

    def to_dict(self) -> dict:
        return {"width": self.width, "hidden_layers": self.hidden_layers,
                "init_seed": self.init_seed, "train": self.train.to_dict()}


def _fresh_net(x, d, cfg: FitConfig) -> Network:
    return init_network(np.shape(x)[1], cfg.width, cfg.hidden_layers, d, seed=cfg.init_seed)


def fit_knowledge_hypothesis(spec: RiskSpec, x_g, g, d: int, cfg: FitConfig,
                             net: Network | None = None) -> tuple[Network, TrainHistory]:
    """Train on ``1/n_g'' sum r_K`` over the knowledge-only samples."""
    x_g = np.asarray(x_g, dtype=np.float64)
    if x_g.shape[0] == 0:
        raise ValueError("S_g'' is empty")
    net = _fresh_net(x_g, d, cfg) if net is None else net
    obj = WeightedObjective(spec, None, None, x_g, g, eq1_weights(0, x_g.shape[0], 1.0))
    return train(net, obj, cfg.train)


def knowledge_imperfectness(spec: RiskSpec, net: Network, x, y_true) -> float:
    """Mean label risk of the knowledge hypothesis against true labels."""
    vals, _ = label_risk(spec, predict(net, np.asarray(x, dtype=np.float64)), y_true)
    return float(np.mean(vals))


def regularized_objective(spec: RiskSpec, x_z, z, x_gp, g_p, beta: float) -> WeightedObjective:
    """``(1-beta)/n_z sum_{S_z} r + beta/n_g' sum_{S_g'} r_K``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    n_z = 0 if x_z is None else len(x_z)
    n_gp = 0 if x_gp is None else len(x_gp)
    if n_z == 0 and beta < 1:
        raise ValueError("S_z is empty but beta < 1")
    if n_gp == 0 and beta > 0:
        raise ValueError("S_g' is empty but beta > 0")
    if n_gp == 0:
        x_gp, g_p = None, None
    if n_z == 0:
        x_z, z = None, None
    return WeightedObjective(spec, x_z, z, x_gp, g_p, eq1_weights(n_z, n_gp, beta))


def fit_regularized_hypothesis(spec: RiskSpec, x_z, z, x_gp, g_p, beta: float, d: int,
                               cfg: FitConfig, net: Network | None = None):
    obj = regularized_objective(spec, x_z, z, x_gp, g_p, beta)
    net = _fresh_net(obj.x, d, cfg) if net is None else net
    return train(net, obj, cfg.train)


regularized_imperfectness = knowledge_imperfectness


@dataclass
class ImperfectnessReport:
    beta_grid: list[float]
    Q_R_hat: list[float]
    beta_star: float
    Q_K_hat: float | None = None
    Q_K_heldout: float | None = None
    Q_R_heldout: list[float] | None = None
    fit: dict = field(default_factory=dict)

    @property
    def regularization_gain(self) -> float | None:
        """``Q_R(0) - Q_R(beta*)`` when 0 is on the grid."""
        if 0.0 not in self.beta_grid:
            return None
        return self.Q_R_hat[self.beta_grid.index(0.0)] - self.Q_R_hat[
            self.beta_grid.index(self.beta_star)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regularization_gain"] = self.regularization_gain
        return d


def _dedupe(grid):
    out = []
    for b in grid:
        b = float(b)
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"beta {b} outside [0, 1]")
        if b not in out:
            out.append(b)
    if not out:
        raise ValueError("empty beta grid")
    return out


def beta_sweep(spec: RiskSpec, x_z, z, y_z, x_gp, g_p, grid, d: int, cfg: FitConfig,
               heldout=None) -> ImperfectnessReport:
    """Train one hypothesis per beta (same initial network) and evaluate Q_R(beta).

    ``y_z`` are the true labels of S_z. ``heldout=(x, y)`` additionally
    evaluates each hypothesis on a disjoint set. Ties resolve to the lowest beta.
    """
    grid = _dedupe(grid)
    q, q_held = [], []
    for beta in grid:
        try:
            net, _ = fit_regularized_hypothesis(spec, x_z, z, x_gp, g_p, beta, d, cfg)
        except (ValueError, FloatingPointError) as exc:
            raise ValueError(f"beta={beta}: {exc}") from exc
        q.append(regularized_imperfectness(spec, net, x_z, y_z))
        if heldout is not None:
            q_held.append(knowledge_imperfectness(spec, net, *heldout))
    q_arr = np.asarray(q)
    best = q_arr.min()
    beta_star = min(b for b, v in zip(grid, q) if v == best)
    return ImperfectnessReport(
        beta_grid=grid, Q_R_hat=q, beta_star=beta_star,
        Q_R_heldout=q_held if heldout is not None else None,
        fit=cfg.to_dict(),
    )


def imperfectness_report(spec: RiskSpec, x_z, z, y_z, x_g, g, y_g, partition, d: int,
                         cfg: FitConfig, grid=None, heldout=None) -> ImperfectnessReport:
    """Both imperfectness estimates from one partitioned dataset.

    ``partition`` supplies the S_g' / S_g'' split (indices into S_g).
    """
    grid = [round(0.1 * i, 10) for i in range(11)] if grid is None else grid
    x_g = np.asarray(x_g, dtype=np.float64)
    gp, gpp = partition.g_prime, partition.g_double_prime
    payload = g[gp] if len(gp) else None
    report = beta_sweep(spec, x_z, z, y_z, x_g[gp], payload, grid, d, cfg, heldout)
    if len(gpp):
        net, _ = fit_knowledge_hypothesis(spec, x_g[gpp], g[gpp], d, cfg)
        report.Q_K_hat = knowledge_imperfectness(spec, net, x_g[gpp], np.asarray(y_g)[gpp])
        if heldout is not None:
            report.Q_K_heldout = knowledge_imperfectness(spec, net, *heldout)
    return report
