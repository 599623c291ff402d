"""Bias-free fully connected ReLU network with exact backpropagation.

Layout (rows are samples throughout)::

    pre[0]  = x @ W0.T            post[0] = relu(pre[0])
    pre[l]  = post[l-1] @ W[l].T  post[l] = relu(pre[l])     l = 1..L
    output  = post[L] @ V.T

``W0`` is stored with shape ``(m, b)`` so that ``W0 @ x`` is m-dimensional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NETWORK_FORMAT = "informed_nn.network/1"


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class Network:
    """Weights of an L-hidden-layer ReLU MLP without bias terms.

    Attributes
    ----------
    W0 : ndarray, shape (m, b)
        Input map.
    W : list of ndarray, each shape (m, m)
        Hidden maps ``W[0] .. W[L-1]`` (W_1 .. W_L in one-based notation).
    V : ndarray, shape (d, m)
        Output map.
    seed : int or None
        Seed the weights were drawn with, if any.
    """

    W0: np.ndarray
    W: list[np.ndarray]
    V: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.W0 = np.asarray(self.W0, dtype=np.float64)
        self.W = [np.asarray(w, dtype=np.float64) for w in self.W]
        self.V = np.asarray(self.V, dtype=np.float64)
        m, b = self.W0.shape
        if not self.W:
            raise ValueError("network needs at least one hidden map W[l]")
        for l, w in enumerate(self.W, start=1):
            if w.shape != (m, m):
                raise ValueError(f"W[{l}] has shape {w.shape}, expected {(m, m)}")
        if self.V.ndim != 2 or self.V.shape[1] != m:
            raise ValueError(f"V has shape {self.V.shape}, expected (d, {m})")

    @property
    def b(self) -> int:
        return self.W0.shape[1]

    @property
    def m(self) -> int:
        return self.W0.shape[0]

    @property
    def L(self) -> int:
        return len(self.W)

    @property
    def d(self) -> int:
        return self.V.shape[0]

    def parameters(self) -> list[np.ndarray]:
        """Weight arrays in canonical order ``W0, W[1..L], V``."""
        return [self.W0, *self.W, self.V]

    def copy(self) -> "Network":
        return Network(self.W0.copy(), [w.copy() for w in self.W], self.V.copy(), self.seed)

    def zeros_like(self) -> "Network":
        return Network(np.zeros_like(self.W0), [np.zeros_like(w) for w in self.W],
                       np.zeros_like(self.V), None)

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p * p) for p in self.parameters())))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def equals(self, other: "Network") -> bool:
        """Bitwise equality of all weight arrays."""
        if [p.shape for p in self.parameters()] != [p.shape for p in other.parameters()]:
            return False
        return all(np.array_equal(p, q) for p, q in zip(self.parameters(), other.parameters()))

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        """JSON document: dims, seed, then row-major flattened W0, W (list), V."""
        return {
            "format": NETWORK_FORMAT,
            "b": self.b,
            "m": self.m,
            "L": self.L,
            "d": self.d,
            "seed": self.seed,
            "W0": self.W0.ravel(order="C").tolist(),
            "W": [w.ravel(order="C").tolist() for w in self.W],
            "V": self.V.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        if doc.get("format") != NETWORK_FORMAT:
            raise ValueError(f"unknown network format {doc.get('format')!r}")
        b, m, L, d = (int(doc[k]) for k in ("b", "m", "L", "d"))
        if len(doc["W"]) != L:
            raise ValueError(f"expected {L} hidden maps, found {len(doc['W'])}")
        W0 = np.asarray(doc["W0"], dtype=np.float64).reshape(m, b)
        W = [np.asarray(w, dtype=np.float64).reshape(m, m) for w in doc["W"]]
        V = np.asarray(doc["V"], dtype=np.float64).reshape(d, m)
        return cls(W0, W, V, doc.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ActivationCache:
    """Per-layer activations of a (batched) forward pass.

    ``pre`` and ``post`` hold L+1 arrays each, shape (n, m). ``x`` is the
    input batch (n, b) and ``output`` is (n, d). When the forward pass was
    called with a single vector, ``single`` is True and the convenience
    accessors strip the batch axis.
    """

    x: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    output: np.ndarray
    single: bool = field(default=False)

    @property
    def out(self) -> np.ndarray:
        return self.output[0] if self.single else self.output


def init_network(b: int, m: int, L: int, d: int, seed=None) -> Network:
    """Draw a network as in the informed gradient-descent algorithm.

    Hidden weights ``W0, W[l]`` are i.i.d. N(0, 2/m); output weights ``V``
    are i.i.d. N(0, 1/d). The same seed yields bit-identical weights.
    """
    for name, v in (("b", b), ("m", m), ("L", L), ("d", d)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    rng = np.random.default_rng(seed)
    hidden_std = np.sqrt(2.0 / m)
    W0 = rng.normal(0.0, hidden_std, size=(m, b))
    W = [rng.normal(0.0, hidden_std, size=(m, m)) for _ in range(L)]
    V = rng.normal(0.0, np.sqrt(1.0 / d), size=(d, m))
    return Network(W0, W, V, seed if isinstance(seed, (int, np.integer)) else None)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.b:
        raise ValueError(f"input has shape {x.shape}, network expects length-{net.b} rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite values")
    return X, single


def forward(net: Network, x) -> ActivationCache:
    """Evaluate ``V relu(W_L relu(... relu(W0 x)))`` and keep every activation.

    ``x`` is either a single length-b vector or an (n, b) batch.
    """
    X, single = _as_batch(net, x)
    pre = [X @ net.W0.T]
    post = [relu(pre[0])]
    for w in net.W:
        pre.append(post[-1] @ w.T)
        post.append(relu(pre[-1]))
    output = post[-1] @ net.V.T
    return ActivationCache(X, pre, post, output, single)


def predict(net: Network, x) -> np.ndarray:
    """Network outputs only; (n, d) for a batch, (d,) for one vector."""
    X, single = _as_batch(net, x)
    h = relu(X @ net.W0.T)
    for w in net.W:
        h = relu(h @ w.T)
    out = h @ net.V.T
    return out[0] if single else out


def backward(net: Network, cache: ActivationCache, seeds) -> Network:
    """Backpropagate output-gradient seeds through a cached forward pass.

    Returns the batch-summed gradient as a :class:`Network` of the same shapes.
    ReLU's derivative at exactly 0 is taken as 0.
    """
    G = np.asarray(seeds, dtype=np.float64)
    if G.ndim == 1:
        G = G[None, :]
    if G.shape != cache.output.shape:
        raise ValueError(f"seed shape {np.shape(seeds)} does not match output shape "
                         f"{cache.output.shape}")
    dV = G.T @ cache.post[-1]
    delta = (G @ net.V) * (cache.pre[-1] > 0)
    dW = [None] * net.L
    for l in range(net.L, 0, -1):
        dW[l - 1] = delta.T @ cache.post[l - 1]
        delta = (delta @ net.W[l - 1]) * (cache.pre[l - 1] > 0)
    dW0 = delta.T @ cache.x
    return Network(dW0, dW, dV, None)


def risk_gradient(net: Network, x, seeds) -> Network:
    """Exact gradient of a scalar risk w.r.t. all weights.

    Parameters
    ----------
    x : array_like, shape (n, b) or (b,)
        Batch inputs.
    seeds : array_like, shape (n, d) or (d,)
        ``d(risk)/d(output)`` at each sample.
    """
    return backward(net, forward(net, x), seeds)


def last_hidden_state(net: Network, x) -> tuple[np.ndarray, np.ndarray]:
    """Pre-activation of the last hidden layer and its sign pattern.

    The sign bit is 1 where the pre-activation is >= 0 (so 0 counts as positive).
    """
    cache = forward(net, x)
    f = cache.pre[-1][0] if cache.single else cache.pre[-1]
    return f, (f >= 0).astype(np.int8)
