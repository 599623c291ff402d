"""Learning a multi-dimensional Bohachevsky function under bound knowledge.

    y(x)    = x A A^T x^T - c cos(a^T x) + c
    g_ub(x) = x A A^T x^T + ub,   g_lb(x) = x A A^T x^T + lb

with ``ub >= 2c`` and ``lb <= 0`` so that ``g_lb <= y <= g_ub`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ortho_group

from ..nn_core import Network, predict
from ..risks import RiskSpec


@dataclass
class BohachevskyInstance:
    A: np.ndarray
    a: np.ndarray
    c: float = 0.3
    lb: float = 0.0
    ub: float = 0.6
    sigma_z_sq: float = 0.0
    n_z: int = 200
    n_g: int = 1000
    n_t: int = 1000
    seed: int = 0
    input_low: float = -1.0
    input_high: float = 1.0
    constant_feature: bool = False

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        b = self.a.size
        if self.A.shape != (b, b):
            raise ValueError(f"A must be {b}x{b}, got {self.A.shape}")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.ub < 2 * self.c:
            raise ValueError(f"ub={self.ub} violates ub >= 2c = {2 * self.c}")
        if self.lb > 0:
            raise ValueError(f"lb={self.lb} violates lb <= 0")
        if self.sigma_z_sq < 0:
            raise ValueError("sigma_z_sq must be nonnegative")
        if min(self.n_z, self.n_g, self.n_t) < 0:
            raise ValueError("sample sizes must be nonnegative")

    @property
    def b(self) -> int:
        return self.a.size

    @property
    def input_dim(self) -> int:
        """Network input width: b, plus one if a constant feature is appended."""
        return self.b + int(self.constant_feature)

    @classmethod
    def default(cls, b: int = 2, seed: int = 0, **kw) -> "BohachevskyInstance":
        """A = 0.5 * random orthogonal matrix, a = ones, c = 0.3."""
        rng = np.random.default_rng([seed, 0xB0C4])
        A = 0.5 * (ortho_group.rvs(b, random_state=rng) if b > 1 else np.ones((1, 1)))
        return cls(A=A, a=np.ones(b), seed=seed, **kw)

    def metadata(self) -> dict:
        return {
            "benchmark": "bohachevsky",
            "b": self.b,
            "A": self.A.tolist(),
            "a": self.a.tolist(),
            "c": self.c,
            "lb": self.lb,
            "ub": self.ub,
            "sigma_z_sq": self.sigma_z_sq,
            "n_z": self.n_z,
            "n_g": self.n_g,
            "n_t": self.n_t,
            "seed": self.seed,
            "input_distribution": f"uniform[{self.input_low}, {self.input_high}]^b",
            "constant_feature": self.constant_feature,
        }


def quadratic_part(inst: BohachevskyInstance, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xa = x @ inst.A
    return np.sum(xa * xa, axis=1)


def bohachevsky_y(inst: BohachevskyInstance, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return quadratic_part(inst, x) - inst.c * np.cos(x @ inst.a) + inst.c


def bohachevsky_knowledge(inst: BohachevskyInstance, x) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bound models ``(g_lb(x), g_ub(x))``."""
    q = quadratic_part(inst, x)
    return q + inst.lb, q + inst.ub


def features(inst: BohachevskyInstance, x) -> np.ndarray:
    """Network inputs for raw points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not inst.constant_feature:
        return x
    return np.hstack([x, np.ones((x.shape[0], 1))])


@dataclass
class BohachevskyData:
    x_z: np.ndarray
    z: np.ndarray
    y_z: np.ndarray
    x_g: np.ndarray
    bounds_g: np.ndarray
    y_g: np.ndarray
    x_t: np.ndarray
    y_t: np.ndarray
    metadata: dict = field(default_factory=dict)


def bohachevsky_generate(inst: BohachevskyInstance) -> BohachevskyData:
    """Noisy labeled set, knowledge set with bounds, exact-label test set.

    Raw inputs are returned (not features); outputs are column vectors (n, 1).
    """
    rng = np.random.default_rng([inst.seed, 0xDA7A])

    def draw(n):
        return rng.uniform(inst.input_low, inst.input_high, size=(n, inst.b))

    x_z, x_g, x_t = draw(inst.n_z), draw(inst.n_g), draw(inst.n_t)
    y_z = bohachevsky_y(inst, x_z)
    noise = rng.normal(0.0, np.sqrt(inst.sigma_z_sq), size=inst.n_z) if inst.sigma_z_sq else 0.0
    z = y_z + noise
    lb, ub = bohachevsky_knowledge(inst, x_g)
    bounds = np.stack([lb[:, None], ub[:, None]], axis=1)
    return BohachevskyData(
        x_z=x_z, z=z[:, None], y_z=y_z[:, None],
        x_g=x_g, bounds_g=bounds, y_g=bohachevsky_y(inst, x_g)[:, None],
        x_t=x_t, y_t=bohachevsky_y(inst, x_t)[:, None],
        metadata=inst.metadata(),
    )


def bohachevsky_risk_spec() -> RiskSpec:
    return RiskSpec(label_risk="half-squared-error", knowledge_risk="constraint-relu")


def test_mse(net: Network, x_t, y_t) -> float:
    """``1/(2|S_t|) sum (h(x_i) - y_i)^2`` on network-ready inputs."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[0] == 0:
        raise ValueError("empty test set")
    diff = predict(net, x_t) - np.asarray(y_t, dtype=np.float64).reshape(x_t.shape[0], -1)
    return float(np.sum(diff * diff) / (2 * x_t.shape[0]))


test_mse.__test__ = False  # keep pytest from collecting it
