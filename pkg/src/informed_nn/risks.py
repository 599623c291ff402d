"""Label risks, knowledge risks and the informed training objectives.

Every risk function accepts either a single output vector ``h`` of length d
or a batch of shape (n, d), and returns ``(value, grad)`` with the value
per sample (scalar for a single vector) and ``grad = d value / d h``.

Knowledge payloads are plain arrays:

* ``constraint-relu`` -- bounds of shape (..., 2, d), ``[..., 0, :]`` the lower
  and ``[..., 1, :]`` the upper bound (a ``(lb, ub)`` tuple is also accepted);
* ``half-squared-to-teacher`` -- teacher outputs, shape (..., d);
* ``softmax-cross-entropy-soft`` -- rate (score) vectors, shape (..., d), turned
  into soft labels ``softmax(T * c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from .nn_core import Network, backward, forward, predict

LABEL_RISKS = ("half-squared-error", "softmax-cross-entropy-onehot")
KNOWLEDGE_RISKS = ("constraint-relu", "half-squared-to-teacher", "softmax-cross-entropy-soft")
PAYLOAD_KINDS = {
    "constraint-relu": "bounds",
    "half-squared-to-teacher": "teacher",
    "softmax-cross-entropy-soft": "rates",
}


@dataclass(frozen=True)
class RiskSpec:
    label_risk: str = "half-squared-error"
    knowledge_risk: str = "constraint-relu"
    temperature: float = 1.0

    def __post_init__(self):
        if self.label_risk not in LABEL_RISKS:
            raise ValueError(f"unknown label risk {self.label_risk!r}; expected one of {LABEL_RISKS}")
        if self.knowledge_risk not in KNOWLEDGE_RISKS:
            raise ValueError(f"unknown knowledge risk {self.knowledge_risk!r}; "
                             f"expected one of {KNOWLEDGE_RISKS}")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def payload_kind(self) -> str:
        return PAYLOAD_KINDS[self.knowledge_risk]

    @property
    def quadratic(self) -> bool:
        """Both risks are half-squared errors."""
        return (self.label_risk == "half-squared-error"
                and self.knowledge_risk == "half-squared-to-teacher")


def _batch(h):
    h = np.asarray(h, dtype=np.float64)
    single = h.ndim == 1
    return (h[None, :] if single else h), single


def _unbatch(value, grad, single):
    if single:
        return float(value[0]), grad[0]
    return value, grad


def as_bounds(payload) -> np.ndarray:
    """Normalize a bounds payload to an array of shape (..., 2, d)."""
    if isinstance(payload, tuple):
        lb, ub = (np.asarray(p, dtype=np.float64) for p in payload)
        return np.stack(np.broadcast_arrays(lb, ub), axis=-2)
    arr = np.asarray(payload, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-2] != 2:
        raise ValueError(f"bounds payload must have shape (..., 2, d), got {arr.shape}")
    return arr


def label_risk(spec: RiskSpec, h, z):
    """Label risk ``r(h, z)`` and its gradient in h.

    For the one-hot cross-entropy, ``z`` holds integer class indices.
    """
    H, single = _batch(h)
    n, d = H.shape
    if spec.label_risk == "half-squared-error":
        Z = np.asarray(z, dtype=np.float64).reshape(n, d)
        diff = H - Z
        return _unbatch(0.5 * np.sum(diff * diff, axis=1), diff, single)

    idx = np.asarray(z).reshape(n)
    if not np.issubdtype(idx.dtype, np.integer):
        if not np.all(idx == np.round(idx)):
            raise ValueError("cross-entropy labels must be integer class indices")
        idx = idx.astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= d):
        raise ValueError(f"class index out of range [0, {d})")
    logp = log_softmax(H, axis=1)
    rows = np.arange(n)
    value = -logp[rows, idx]
    grad = np.exp(logp)
    grad[rows, idx] -= 1.0
    return _unbatch(value, grad, single)


def soft_labels(rates, temperature: float) -> np.ndarray:
    """Soft decision encoding ``softmax(T * c)`` along the last axis."""
    return softmax(temperature * np.asarray(rates, dtype=np.float64), axis=-1)


def knowledge_risk(spec: RiskSpec, h, g):
    """Knowledge risk ``r_K(h, g)`` and its gradient in h."""
    H, single = _batch(h)
    n, d = H.shape
    kind = spec.knowledge_risk
    if kind == "constraint-relu":
        B = as_bounds(g)
        B = np.broadcast_to(B, (n, 2, d)) if B.ndim == 2 else B.reshape(n, 2, d)
        lb, ub = B[:, 0, :], B[:, 1, :]
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        above = H - ub
        below = lb - H
        value = np.sum(np.maximum(above, 0.0) + np.maximum(below, 0.0), axis=1)
        grad = (above > 0).astype(np.float64) - (below > 0).astype(np.float64)
        return _unbatch(value, grad, single)

    G = np.asarray(g, dtype=np.float64)
    if isinstance(g, tuple) or G.shape[-1] != d:
        raise ValueError(f"{kind} payload must be a length-{d} vector per sample")
    G = G.reshape(n, d)
    if kind == "half-squared-to-teacher":
        diff = H - G
        return _unbatch(0.5 * np.sum(diff * diff, axis=1), diff, single)

    # Positive cross-entropy against softmax(T c); minimizing pulls toward the soft label.
    q = soft_labels(G, spec.temperature)
    logp = log_softmax(H, axis=1)
    value = -np.sum(q * logp, axis=1)
    grad = np.exp(logp) - q
    return _unbatch(value, grad, single)


def _mean(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(np.sum(values) / values.size)


def informed_risk(spec: RiskSpec, h_z, z, h_g, g, lam: float) -> float:
    """Single-weight informed risk: (1-lam) mean label risk + lam mean knowledge risk."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    n_z = 0 if h_z is None else len(h_z)
    n_g = 0 if h_g is None else len(h_g)
    if n_z == 0 and lam < 1:
        raise ValueError("empty labeled set with lambda < 1")
    if n_g == 0 and lam > 0:
        raise ValueError("empty knowledge set with lambda > 0")
    total = 0.0
    if n_z:
        total = (1.0 - lam) * _mean(label_risk(spec, h_z, z)[0])
    if n_g:
        total = total + lam * _mean(knowledge_risk(spec, h_g, g)[0])
    return float(total)


def generalized_informed_risk(spec: RiskSpec, h_z, z, h_g, g, lam: float, beta: float,
                              g_prime, g_double_prime) -> float:
    """Two-weight informed risk.

    ``(1-lam)(1-beta)/n_z sum_{S_z} r + (1-lam) beta/n_g' sum_{S_g'} r_K
    + lam/n_g'' sum_{S_g''} r_K``, where ``g_prime`` / ``g_double_prime`` index
    rows of the knowledge set. An empty part is allowed only when its
    coefficient is zero.
    """
    for name, v in (("lambda", lam), ("beta", beta)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    g_prime = np.asarray(g_prime, dtype=np.int64)
    g_double_prime = np.asarray(g_double_prime, dtype=np.int64)
    n_z = 0 if h_z is None else len(h_z)
    coefs = ((1.0 - lam) * (1.0 - beta), (1.0 - lam) * beta, lam)
    sizes = (n_z, g_prime.size, g_double_prime.size)
    for name, c, n in zip(("S_z", "S_g'", "S_g''"), coefs, sizes):
        if n == 0 and c != 0:
            raise ValueError(f"{name} is empty but its coefficient is {c}")
    total = 0.0
    if n_z:
        total = coefs[0] * _mean(label_risk(spec, h_z, z)[0])
    if g_prime.size or g_double_prime.size:
        h_g = np.asarray(h_g, dtype=np.float64)
        payload = as_bounds(g) if spec.payload_kind == "bounds" else np.asarray(g, np.float64)
        if g_prime.size:
            total = total + coefs[1] * _mean(
                knowledge_risk(spec, h_g[g_prime], payload[g_prime])[0])
        if g_double_prime.size:
            total = total + coefs[2] * _mean(
                knowledge_risk(spec, h_g[g_double_prime], payload[g_double_prime])[0])
    return float(total)


@dataclass
class ObjectiveWeights:
    """Per-sample weights over the stacked rows ``S_z`` then ``S_g``.

    ``mu`` multiplies the label risk and may be nonzero only on labeled rows;
    ``lam`` multiplies the knowledge risk and may be nonzero only on
    knowledge rows. The weights sum to one.
    """

    mu: np.ndarray
    lam: np.ndarray
    n_z: int

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.mu.shape != self.lam.shape or self.mu.ndim != 1:
            raise ValueError("mu and lam must be 1-D arrays of equal length")
        if np.any(self.mu < 0) or np.any(self.lam < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(self.mu[self.n_z:] != 0) or np.any(self.lam[:self.n_z] != 0):
            raise ValueError("mu must vanish on knowledge rows and lam on labeled rows")
        total = float(np.sum(self.mu) + np.sum(self.lam))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1")

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def total(self) -> np.ndarray:
        """``mu_i + lam_i`` per row."""
        return self.mu + self.lam


def eq1_weights(n_z: int, n_g: int, lam: float) -> ObjectiveWeights:
    """Weights reproducing the single-weight informed risk."""
    mu = np.zeros(n_z + n_g)
    lw = np.zeros(n_z + n_g)
    if n_z:
        mu[:n_z] = (1.0 - lam) / n_z
    if n_g:
        lw[n_z:] = lam / n_g
    return ObjectiveWeights(mu, lw, n_z)


def eq3_weights(n_z: int, n_g: int, lam: float, beta: float, g_prime) -> ObjectiveWeights:
    """Weights reproducing the two-weight informed risk.

    ``g_prime`` indexes the knowledge rows (0..n_g-1) that share a smooth set
    with some labeled sample; the rest form ``S_g''``.
    """
    in_prime = np.zeros(n_g, dtype=bool)
    in_prime[np.asarray(g_prime, dtype=np.int64)] = True
    n_gp = int(in_prime.sum())
    n_gpp = n_g - n_gp
    mu = np.zeros(n_z + n_g)
    lw = np.zeros(n_z + n_g)
    if n_z:
        mu[:n_z] = (1.0 - lam) * (1.0 - beta) / n_z
    if n_gp:
        lw[n_z:][in_prime] = (1.0 - lam) * beta / n_gp
    if n_gpp:
        lw[n_z:][~in_prime] = lam / n_gpp
    return ObjectiveWeights(mu, lw, n_z)


def _split_payload(spec, g):
    return as_bounds(g) if spec.payload_kind == "bounds" else np.asarray(g, dtype=np.float64)


def weighted_form(spec: RiskSpec, h_z, z, h_g, g, weights: ObjectiveWeights) -> float:
    """``sum_i mu_i r(h_i, z_i) + lam_i r_K(h_i, g_i)`` over stacked rows."""
    n_z = 0 if h_z is None else len(h_z)
    n_g = 0 if h_g is None else len(h_g)
    if weights.n != n_z + n_g or weights.n_z != n_z:
        raise ValueError("weights do not match the sample counts")
    total = 0.0
    if n_z:
        total += float(np.dot(weights.mu[:n_z], label_risk(spec, h_z, z)[0]))
    if n_g:
        total += float(np.dot(weights.lam[n_z:], knowledge_risk(spec, h_g, g)[0]))
    return total


class WeightedObjective:
    """Informed objective bound to data, evaluable on any network.

    Rows are ``S_z`` (indices ``0..n_z-1``) followed by ``S_g``. Calling the
    objective with a network and a subset of rows returns an unbiased
    estimate ``(n / |rows|) * sum_{i in rows} w_i r_i`` together with its
    weight gradient; with ``rows=None`` it is the exact full objective.
    """

    def __init__(self, spec: RiskSpec, x_z, z, x_g, g, weights: ObjectiveWeights):
        self.spec = spec
        x_z = np.zeros((0, np.shape(x_g)[1])) if x_z is None else np.asarray(x_z, np.float64)
        x_g = np.zeros((0, x_z.shape[1])) if x_g is None else np.asarray(x_g, np.float64)
        self.n_z = x_z.shape[0]
        self.x = np.vstack([x_z, x_g])
        self.z = z if self.n_z == 0 else np.asarray(z)
        self.g = None if x_g.shape[0] == 0 else _split_payload(spec, g)
        if weights.n != self.x.shape[0] or weights.n_z != self.n_z:
            raise ValueError("weights do not match the sample counts")
        self.weights = weights

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def risks_and_seeds(self, outputs, rows=None):
        """Weighted per-row risks and output-gradient seeds."""
        rows = np.arange(self.n) if rows is None else np.asarray(rows, dtype=np.int64)
        H = np.asarray(outputs, dtype=np.float64)
        vals = np.zeros(rows.size)
        seeds = np.zeros_like(H)
        lab = rows < self.n_z
        if np.any(lab):
            r = rows[lab]
            v, gr = label_risk(self.spec, H[lab], self.z[r])
            w = self.weights.mu[r]
            vals[lab] = w * v
            seeds[lab] = w[:, None] * gr
        kn = ~lab
        if np.any(kn):
            r = rows[kn]
            v, gr = knowledge_risk(self.spec, H[kn], self.g[r - self.n_z])
            w = self.weights.lam[r]
            vals[kn] = w * v
            seeds[kn] = w[:, None] * gr
        return vals, seeds

    def value(self, net: Network) -> float:
        vals, _ = self.risks_and_seeds(predict(net, self.x))
        return float(np.sum(vals))

    def __call__(self, net: Network, rows=None):
        X = self.x if rows is None else self.x[rows]
        cache = forward(net, X)
        vals, seeds = self.risks_and_seeds(cache.output, rows)
        scale = 1.0 if rows is None else self.n / len(rows)
        if scale != 1.0:
            seeds = seeds * scale
        return scale * float(np.sum(vals)), backward(net, cache, seeds)
