"""Link scheduling in Rayleigh-fading interference channels.

CSI is an N x N array of amplitude gains ``g[u, v]`` from transmitter u to
receiver v, flattened row-major into the network input. Decisions are the
``2^N - 1`` nonzero binary vectors; decision index ``j`` schedules link
``u`` iff bit ``u`` of ``j + 1`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ENUM_LINKS = 20

# Expected power gains (linear, relative to sigma_n^2 = 1) per calibration.
# "linear" reads the stated 100 / 10 as linear power ratios (20 dB / 10 dB);
# "literal-db" reads them as 100 dB / 10 dB.
CALIBRATIONS = {
    "linear": (100.0, 10.0),
    "literal-db": (1e10, 10.0),
}
STATED_DIRECT_GAIN_DB = 100.0
STATED_CROSS_GAIN_DB = 10.0


def decision_table(n_links: int) -> np.ndarray:
    """All nonzero schedules, shape (2^N - 1, N)."""
    if n_links < 1:
        raise ValueError("need at least one link")
    j = np.arange(1, 2 ** n_links)
    return ((j[:, None] >> np.arange(n_links)) & 1).astype(np.float64)


def decision_index(y) -> int:
    y = np.asarray(y).astype(np.int64)
    idx = int(np.sum(y << np.arange(y.size))) - 1
    if idx < 0:
        raise ValueError("the all-zero decision is not a schedule")
    return idx


@dataclass
class WirelessInstance:
    n_links: int = 4
    direct_power: float = CALIBRATIONS["linear"][0]
    cross_power: float = CALIBRATIONS["linear"][1]
    sigma_n_sq: float = 1.0
    mu_K: float = 1.0
    mu_R: float = 0.5
    temperature: float = 1.0
    n_y: int = 100
    n_g: int = 2000
    n_t: int = 10000
    seed: int = 0
    calibration: str = "linear"

    def __post_init__(self):
        if not 1 <= self.n_links <= MAX_ENUM_LINKS:
            raise ValueError(f"n_links must lie in [1, {MAX_ENUM_LINKS}]")
        if not (0 < self.mu_K <= 1 and 0 < self.mu_R <= 1):
            raise ValueError("mu_K and mu_R must lie in (0, 1]")
        if not self.sigma_n_sq > 0:
            raise ValueError("sigma_n_sq must be positive")
        if self.direct_power < 0 or self.cross_power < 0:
            raise ValueError("expected power gains must be nonnegative")

    @classmethod
    def calibrated(cls, calibration: str = "linear", **kw) -> "WirelessInstance":
        try:
            direct, cross = CALIBRATIONS[calibration]
        except KeyError:
            raise ValueError(f"unknown calibration {calibration!r}; "
                             f"expected one of {sorted(CALIBRATIONS)}") from None
        return cls(direct_power=direct, cross_power=cross, calibration=calibration, **kw)

    @property
    def i_max(self) -> int:
        return 2 ** self.n_links - 1

    def metadata(self) -> dict:
        return {
            "benchmark": "wireless",
            "n_links": self.n_links,
            "i_max": self.i_max,
            "stated_direct_gain_db": STATED_DIRECT_GAIN_DB,
            "stated_cross_gain_db": STATED_CROSS_GAIN_DB,
            "calibration": self.calibration,
            "direct_power": self.direct_power,
            "cross_power": self.cross_power,
            "sigma_n_sq": self.sigma_n_sq,
            "mu_K": self.mu_K,
            "mu_R": self.mu_R,
            "temperature": self.temperature,
            "n_y": self.n_y,
            "n_g": self.n_g,
            "n_t": self.n_t,
            "seed": self.seed,
        }


def rayleigh_csi(rng, n: int, n_links: int, direct_power: float, cross_power: float):
    """Amplitude gains with ``E|g_uu|^2 = direct_power``, ``E|g_uv|^2 = cross_power``."""
    scale = np.full((n_links, n_links), cross_power)
    np.fill_diagonal(scale, direct_power)
    # Rayleigh with sigma^2 = P/2 has E[g^2] = P.
    return rng.rayleigh(scale=np.sqrt(scale / 2.0), size=(n, n_links, n_links))


def shannon_rate(csi, y, mu: float, sigma_n_sq: float):
    """Per-link rates ``ln(1 + mu y_u |g_uu|^2 / (s2 + sum_{v!=u} y_v |g_vu|^2))``.

    Returns ``(rates, sum_rate)``.
    """
    G2 = np.abs(np.asarray(csi, dtype=np.float64)) ** 2
    y = np.asarray(y, dtype=np.float64)
    N = y.size
    if G2.shape != (N, N):
        raise ValueError(f"csi must be {N}x{N}")
    if not np.any(y):
        raise ValueError("the all-zero decision is not a schedule")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("decision entries must be 0 or 1")
    off = G2 * (1.0 - np.eye(N))
    interference = y @ off
    rates = np.log1p(mu * y * np.diag(G2) / (sigma_n_sq + interference))
    return rates, float(np.sum(rates))


def sum_rates(csi, mu: float, sigma_n_sq: float, decisions=None) -> np.ndarray:
    """Sum rate of every decision for a batch of CSI, shape (n, n_decisions).

    This is the knowledge vector ``c(x)`` when evaluated at ``mu_K``.
    """
    C = np.asarray(csi, dtype=np.float64)
    single = C.ndim == 2
    if single:
        C = C[None]
    N = C.shape[-1]
    Y = decision_table(N) if decisions is None else np.asarray(decisions, dtype=np.float64)
    G2 = C * C
    direct = np.einsum("nuu->nu", G2)
    off = G2 * (1.0 - np.eye(N))
    out = np.empty((C.shape[0], Y.shape[0]))
    chunk = max(1, 2 ** 22 // (Y.shape[0] * N))
    for s in range(0, C.shape[0], chunk):
        interference = np.einsum("jv,nvu->nju", Y, off[s:s + chunk])
        sinr = mu * Y[None] * direct[s:s + chunk, None, :] / (sigma_n_sq + interference)
        out[s:s + chunk] = np.log1p(sinr).sum(axis=-1)
    return out[0] if single else out


def oracle_schedule(csi, mu: float, sigma_n_sq: float) -> tuple[int, float]:
    """Exhaustive search over all nonzero decisions; lowest index wins ties."""
    N = np.shape(csi)[-1]
    if N > MAX_ENUM_LINKS:
        raise ValueError(f"exhaustive search limited to N <= {MAX_ENUM_LINKS}")
    rates = sum_rates(csi, mu, sigma_n_sq)
    j = int(np.argmax(rates))
    return j, float(rates[j])


def oracle_labels(csi_batch, mu: float, sigma_n_sq: float) -> np.ndarray:
    """Vectorized :func:`oracle_schedule` indices for a CSI batch."""
    return np.argmax(sum_rates(csi_batch, mu, sigma_n_sq), axis=1)


def csi_features(csi_batch) -> np.ndarray:
    """Row-major CSI vectors ``[g_11, g_12, ..., g_NN]``."""
    C = np.asarray(csi_batch, dtype=np.float64)
    return C.reshape(C.shape[0], -1)


@dataclass
class WirelessData:
    csi_y: np.ndarray
    labels_y: np.ndarray
    csi_g: np.ndarray
    rates_g: np.ndarray
    csi_t: np.ndarray
    labels_t: np.ndarray
    metadata: dict = field(default_factory=dict)


def wireless_generate(inst: WirelessInstance) -> WirelessData:
    """Labeled set (oracle at mu_R), knowledge set with rate vectors at mu_K, test set."""
    rng = np.random.default_rng([inst.seed, 0x5C4ED])

    def draw(n):
        return rayleigh_csi(rng, n, inst.n_links, inst.direct_power, inst.cross_power)

    csi_y, csi_g, csi_t = draw(inst.n_y), draw(inst.n_g), draw(inst.n_t)
    return WirelessData(
        csi_y=csi_y,
        labels_y=oracle_labels(csi_y, inst.mu_R, inst.sigma_n_sq),
        csi_g=csi_g,
        rates_g=sum_rates(csi_g, inst.mu_K, inst.sigma_n_sq),
        csi_t=csi_t,
        labels_t=oracle_labels(csi_t, inst.mu_R, inst.sigma_n_sq),
        metadata=inst.metadata(),
    )


def test_accuracy_and_sumrate(pred, csi_t, labels_t, mu_R: float, sigma_n_sq: float):
    """Exact-match accuracy and mean pseudo-real sum rate at the predicted decisions."""
    pred = np.asarray(pred, dtype=np.int64)
    labels_t = np.asarray(labels_t, dtype=np.int64)
    if pred.shape != labels_t.shape or pred.shape[0] != len(csi_t):
        raise ValueError("predictions, labels and CSI must have equal length")
    rates = sum_rates(csi_t, mu_R, sigma_n_sq)
    acc = float(np.mean(pred == labels_t))
    return acc, float(np.mean(rates[np.arange(pred.size), pred]))


def knowledge_accuracy(csi_t, labels_t, mu_K: float, sigma_n_sq: float) -> float:
    """Accuracy of deciding by the Shannon-rate knowledge alone at ``mu_K``."""
    pred = oracle_labels(csi_t, mu_K, sigma_n_sq)
    return float(np.mean(pred == np.asarray(labels_t)))


test_accuracy_and_sumrate.__test__ = False
