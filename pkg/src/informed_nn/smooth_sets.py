"""phi-net construction, smooth-set partition and separability diagnostics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .nn_core import Network, forward, last_hidden_state


class InconsistentNetError(ValueError):
    """A sample lies farther than phi from every representative."""


def _dist_to(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = points - x
    return np.sqrt(np.sum(diff * diff, axis=1))


def pairwise_distances(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def build_phi_net(samples, phi: float) -> np.ndarray:
    """Greedy phi-net in input order.

    A sample becomes a representative iff no current representative lies
    within ``phi`` of it. The result is pairwise more than ``phi`` apart and
    covers every sample within ``phi``. Returns indices into ``samples``.
    """
    if not phi > 0:
        raise ValueError("phi must be positive")
    X = np.asarray(samples, dtype=np.float64)
    if X.size == 0:
        return np.zeros(0, dtype=np.int64)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValueError("samples must be a finite (n, b) array")
    reps = np.empty_like(X)
    idx = []
    for i, x in enumerate(X):
        if not idx or np.min(_dist_to(reps[:len(idx)], x)) > phi:
            reps[len(idx)] = x
            idx.append(i)
    return np.asarray(idx, dtype=np.int64)


def assign_sets(reps, samples, phi: float | None = None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Nearest-representative assignment, lowest index on ties.

    Returns ``(assignment, index_sets)`` where ``index_sets[k]`` lists the
    samples of set k. With ``phi`` given, a sample farther than phi from every
    representative raises :class:`InconsistentNetError`.
    """
    R = np.asarray(reps, dtype=np.float64)
    X = np.asarray(samples, dtype=np.float64)
    if R.shape[0] == 0:
        raise ValueError("no representatives")
    assignment = np.empty(X.shape[0], dtype=np.int64)
    for i, x in enumerate(X):
        dist = _dist_to(R, x)
        k = int(np.argmin(dist))
        if phi is not None and dist[k] > phi:
            raise InconsistentNetError(f"sample {i} is {dist[k]:.6g} > phi={phi} from the net")
        assignment[i] = k
    index_sets = [np.flatnonzero(assignment == k) for k in range(R.shape[0])]
    return assignment, index_sets


def partition_knowledge(assignment, labeled, knowledge):
    """Split knowledge samples by whether their set holds a labeled sample.

    Returns ``(labeled_cover, g_prime, g_double_prime)``: the sorted set ids
    containing a labeled sample, and the members of ``knowledge`` inside /
    outside those sets (in the numbering used by ``knowledge``).
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    labeled = np.asarray(labeled, dtype=np.int64)
    knowledge = np.asarray(knowledge, dtype=np.int64)
    cover = np.unique(assignment[labeled])
    inside = np.isin(assignment[knowledge], cover)
    return cover, knowledge[inside], knowledge[~inside]


@dataclass
class SmoothSetPartition:
    """Smooth sets over the stacked samples ``S_z`` (first ``n_z``) then ``S_g``.

    ``g_prime`` / ``g_double_prime`` index rows of ``S_g`` (0-based within S_g).
    """

    phi: float
    representatives: np.ndarray
    rep_indices: np.ndarray
    assignment: np.ndarray
    index_sets: list[np.ndarray]
    n_z: int
    labeled_cover: np.ndarray
    g_prime: np.ndarray
    g_double_prime: np.ndarray
    set_mass: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.representatives.shape[0]

    @property
    def n_g(self) -> int:
        return self.assignment.size - self.n_z

    def set_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.index_sets], dtype=np.int64)

    def with_mass(self, weights) -> "SmoothSetPartition":
        """Attach per-set weight mass ``M_k = sum_{i in set k} (mu_i + lam_i)``."""
        self.set_mass = set_mass(self, weights)
        return self

    def to_dict(self) -> dict:
        return {
            "phi": self.phi,
            "N": self.N,
            "n_z": self.n_z,
            "n_g": self.n_g,
            "representatives": self.representatives.tolist(),
            "rep_indices": self.rep_indices.tolist(),
            "assignment": self.assignment.tolist(),
            "labeled_cover": self.labeled_cover.tolist(),
            "g_prime": self.g_prime.tolist(),
            "g_double_prime": self.g_double_prime.tolist(),
            "set_mass": None if self.set_mass is None else self.set_mass.tolist(),
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def build_partition(x_z, x_g, phi: float, weights=None) -> SmoothSetPartition:
    """phi-net over ``S_z`` then ``S_g`` with assignment and knowledge split."""
    x_z = np.asarray(x_z, dtype=np.float64)
    x_g = np.asarray(x_g, dtype=np.float64)
    if x_z.size == 0:
        x_z = x_z.reshape(0, x_g.shape[1])
    if x_g.size == 0:
        x_g = x_g.reshape(0, x_z.shape[1])
    X = np.vstack([x_z, x_g])
    n_z = x_z.shape[0]
    rep_idx = build_phi_net(X, phi)
    reps = X[rep_idx]
    assignment, index_sets = assign_sets(reps, X, phi)
    cover, gp, gpp = partition_knowledge(
        assignment, np.arange(n_z), np.arange(n_z, X.shape[0]))
    part = SmoothSetPartition(
        phi=float(phi), representatives=reps, rep_indices=rep_idx, assignment=assignment,
        index_sets=index_sets, n_z=n_z, labeled_cover=cover,
        g_prime=gp - n_z, g_double_prime=gpp - n_z,
    )
    if weights is not None:
        part.with_mass(weights)
    return part


def set_mass(partition: SmoothSetPartition, weights) -> np.ndarray:
    total = weights.total
    if total.size != partition.assignment.size:
        raise ValueError("weights do not match the partitioned samples")
    return np.bincount(partition.assignment, weights=total, minlength=partition.N)


def separability_threshold(phi: float, b: int, m: int) -> float:
    """``3 sqrt(2 pi) phi^(b+1) / (16 sqrt(m))``."""
    return 3.0 * math.sqrt(2.0 * math.pi) * phi ** (b + 1) / (16.0 * math.sqrt(m))


@dataclass
class SeparabilityReport:
    alpha: np.ndarray
    violations: np.ndarray
    threshold: float
    agreeing: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def global_alpha(self) -> float:
        return float(np.min(self.alpha)) if self.alpha.size else 1.0

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "global_alpha": self.global_alpha,
            "alpha": self.alpha.tolist(),
            "violations": self.violations.tolist(),
        }


def separability_report(net: Network, partition: SmoothSetPartition, samples,
                        b: int | None = None) -> SeparabilityReport:
    """Sign-agreement check of the last hidden layer at initialization.

    For set k, the agreeing neurons are those whose sign bit matches the
    representative's for every member; ``alpha_k`` is their fraction of m.
    Every (member, non-agreeing neuron) pair with ``|f_L| < threshold`` is a
    violation. ``b`` defaults to the network input width.
    """
    X = np.asarray(samples, dtype=np.float64)
    f, signs = last_hidden_state(net, X)
    f_rep, s_rep = last_hidden_state(net, partition.representatives)
    thr = separability_threshold(partition.phi, net.b if b is None else b, net.m)
    alpha = np.ones(partition.N)
    violations = np.zeros(partition.N, dtype=np.int64)
    agreeing = []
    for k, members in enumerate(partition.index_sets):
        if members.size == 0:
            agreeing.append(np.arange(net.m))
            continue
        agree = np.all(signs[members] == s_rep[k], axis=0)
        alpha[k] = agree.sum() / net.m
        violations[k] = int(np.sum(np.abs(f[members][:, ~agree]) < thr))
        agreeing.append(np.flatnonzero(agree))
    return SeparabilityReport(alpha, violations, thr, agreeing)


def forward_perturbation_diagnostic(net: Network, partition: SmoothSetPartition, samples,
                                    layer: int) -> np.ndarray:
    """Per set, ``max_i ||h_l(x_i) - h_l(x'_k)||`` over its members, ``l`` in [1, L]."""
    if not 1 <= layer <= net.L:
        raise ValueError(f"layer must lie in [1, {net.L}]")
    h = forward(net, np.asarray(samples, dtype=np.float64)).post[layer]
    h_rep = forward(net, partition.representatives).post[layer]
    out = np.zeros(partition.N)
    for k, members in enumerate(partition.index_sets):
        if members.size:
            out[k] = np.max(np.linalg.norm(h[members] - h_rep[k], axis=1))
    return out
