"""All-quadratic synthetic benchmark with closed-form effective labels.

Inputs lie on the unit sphere in R^b. The labeled set carries noisy labels of a
smooth target; the knowledge set carries a biased teacher and consists of
exact copies of the first ``n_shared`` labeled inputs (sharing their smooth
sets) followed by ``n_fresh`` new inputs (sets of their own).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..risks import RiskSpec


@dataclass
class SyntheticQuadraticInstance:
    b: int = 8
    d: int = 1
    n_z: int = 100
    n_shared: int = 50
    n_fresh: int = 50
    n_t: int = 500
    sigma_z_sq: float = 0.01
    teacher_bias: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.b < 1 or self.d < 1:
            raise ValueError("b and d must be positive")
        if not 0 <= self.n_shared <= self.n_z:
            raise ValueError("n_shared must lie in [0, n_z]")
        if min(self.n_z, self.n_fresh, self.n_t) < 0 or self.sigma_z_sq < 0:
            raise ValueError("sizes and noise variance must be nonnegative")

    @property
    def n_g(self) -> int:
        return self.n_shared + self.n_fresh

    def metadata(self) -> dict:
        return {"benchmark": "synthetic-quadratic", **{k: getattr(self, k) for k in (
            "b", "d", "n_z", "n_shared", "n_fresh", "n_t", "sigma_z_sq", "teacher_bias", "seed")}}


@dataclass
class SyntheticData:
    x_z: np.ndarray
    z: np.ndarray
    y_z: np.ndarray
    x_g: np.ndarray
    teacher_g: np.ndarray
    y_g: np.ndarray
    x_t: np.ndarray
    y_t: np.ndarray
    metadata: dict = field(default_factory=dict)


def _sphere(rng, n, b):
    x = rng.normal(size=(n, b))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def synthetic_generate(inst: SyntheticQuadraticInstance) -> SyntheticData:
    rng = np.random.default_rng([inst.seed, 0x5917])
    P = rng.normal(size=(inst.d, inst.b)) / np.sqrt(inst.b)

    def target(x):
        return np.sin(2.0 * x @ P.T)

    x_z = _sphere(rng, inst.n_z, inst.b)
    x_g = np.vstack([x_z[:inst.n_shared], _sphere(rng, inst.n_fresh, inst.b)])
    x_t = _sphere(rng, inst.n_t, inst.b)
    y_z = target(x_z)
    z = y_z + rng.normal(0.0, np.sqrt(inst.sigma_z_sq), size=y_z.shape)
    y_g = target(x_g)
    return SyntheticData(
        x_z=x_z, z=z, y_z=y_z,
        x_g=x_g, teacher_g=y_g + inst.teacher_bias, y_g=y_g,
        x_t=x_t, y_t=target(x_t),
        metadata=inst.metadata(),
    )


def synthetic_risk_spec() -> RiskSpec:
    return RiskSpec(label_risk="half-squared-error", knowledge_risk="half-squared-to-teacher")
