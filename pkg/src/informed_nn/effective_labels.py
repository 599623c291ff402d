"""Per-set effective labels, the effective-risk table and the convergence gap.

For smooth set k the effective label minimizes

    J_k(h) = sum_{i in set k} mu_i r(h, z_i) + lam_i r_K(h, g_i)

over all h in R^d. Three solvers are used:

* closed form (weighted mean of targets) when every weighted member risk is a
  half-squared error;
* an exact breakpoint scan, coordinate by coordinate, when the label risk is
  half-squared and the knowledge risk is half-squared or constraint-relu
  (J is then separable and piecewise quadratic in each coordinate);
* diminishing-step subgradient descent otherwise (cross-entropy risks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .nn_core import Network, predict
from .risks import ObjectiveWeights, RiskSpec, as_bounds, knowledge_risk, label_risk

SUBGRAD_TOL = 1e-10
SUBGRAD_WINDOW = 100
SUBGRAD_MAX_ITER = 100_000


class EffectiveLabelError(ValueError):
    def __init__(self, k: int, msg: str):
        super().__init__(f"smooth set {k}: {msg}")
        self.set_index = k


@dataclass
class SetMembers:
    """Targets and weights of one smooth set, split into labeled / knowledge members."""

    z: np.ndarray
    mu: np.ndarray
    g: np.ndarray
    lam: np.ndarray
    d: int

    @property
    def mass(self) -> float:
        return float(np.sum(self.mu) + np.sum(self.lam))


def set_objective(spec: RiskSpec, members: SetMembers, h) -> tuple[float, np.ndarray]:
    """``J(h)`` and a (sub)gradient."""
    h = np.asarray(h, dtype=np.float64)
    value, grad = 0.0, np.zeros_like(h)
    if members.mu.size:
        H = np.broadcast_to(h, (members.mu.size, h.size))
        v, g = label_risk(spec, H, members.z)
        value += float(members.mu @ v)
        grad += members.mu @ g
    if members.lam.size:
        H = np.broadcast_to(h, (members.lam.size, h.size))
        v, g = knowledge_risk(spec, H, members.g)
        value += float(members.lam @ v)
        grad += members.lam @ g
    return value, grad


def _initial_point(spec, members) -> np.ndarray:
    if spec.label_risk == "half-squared-error" and np.sum(members.mu) > 0:
        Z = np.asarray(members.z, dtype=np.float64).reshape(-1, members.d)
        return members.mu @ Z / np.sum(members.mu)
    return np.zeros(members.d)


def _closed_form(spec, members) -> np.ndarray:
    num = np.zeros(members.d)
    if members.mu.size:
        num += members.mu @ np.asarray(members.z, dtype=np.float64).reshape(-1, members.d)
    if members.lam.size:
        num += members.lam @ np.asarray(members.g, dtype=np.float64).reshape(-1, members.d)
    return num / members.mass


def _scan_1d(quad_w, quad_t, lin_w, lb, ub, init) -> float:
    """Exact minimizer of ``sum a_i/2 (h-t_i)^2 + sum c_j (relu(h-ub_j) + relu(lb_j-h))``.

    J is convex piecewise quadratic with kinks at the bounds; on each piece the
    stationary point is clipped into the piece and all candidates compared.
    Among equal minima the point closest to ``init`` is returned.
    """
    A = float(np.sum(quad_w))
    At = float(quad_w @ quad_t) if quad_w.size else 0.0
    kinks = np.unique(np.concatenate([lb, ub])) if lin_w.size else np.zeros(0)

    def J(h):
        v = 0.5 * float(quad_w @ (h - quad_t) ** 2) if quad_w.size else 0.0
        if lin_w.size:
            v += float(lin_w @ (np.maximum(h - ub, 0.0) + np.maximum(lb - h, 0.0)))
        return v

    edges = np.concatenate([[-np.inf], kinks, [np.inf]])
    cands = list(kinks)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi) if np.isfinite(lo) and np.isfinite(hi) else (
            hi - 1.0 if np.isfinite(hi) else (lo + 1.0 if np.isfinite(lo) else 0.0))
        # slope of the linear part on this piece
        s = float(lin_w @ ((mid > ub).astype(float) - (mid < lb).astype(float))) if lin_w.size else 0.0
        if A > 0:
            cands.append(float(np.clip((At - s) / A, lo, hi)))
    if not cands:
        return float(init)
    vals = np.array([J(c) for c in cands])
    best = vals.min()
    tied = np.asarray(cands)[vals <= best + 1e-15 * max(1.0, abs(best))]
    return float(np.clip(init, tied.min(), tied.max()))


def _breakpoint(spec, members) -> np.ndarray:
    init = _initial_point(spec, members)
    Z = np.asarray(members.z, dtype=np.float64).reshape(-1, members.d)
    y = np.empty(members.d)
    if spec.knowledge_risk == "half-squared-to-teacher":
        return _closed_form(spec, members)
    B = as_bounds(members.g).reshape(-1, 2, members.d) if members.lam.size else np.zeros((0, 2, members.d))
    for c in range(members.d):
        y[c] = _scan_1d(members.mu, Z[:, c], members.lam, B[:, 0, c], B[:, 1, c], init[c])
    return y


def _subgradient(spec, members, init=None):
    """Diminishing steps ``1/(M sqrt(t))``; keeps the best iterate.

    Stops once the best objective improved by less than ``SUBGRAD_TOL`` over
    ``SUBGRAD_WINDOW`` steps or after ``SUBGRAD_MAX_ITER`` iterations; the
    residual is that last windowed improvement.
    """
    c = 1.0 / members.mass
    h = _initial_point(spec, members) if init is None else np.array(init, dtype=np.float64)
    best_h = h.copy()
    best, grad = set_objective(spec, members, h)
    window_start = best
    residual = np.inf
    for t in range(1, SUBGRAD_MAX_ITER + 1):
        h = h - (c / np.sqrt(t)) * grad
        v, grad = set_objective(spec, members, h)
        if v < best:
            best, best_h = v, h.copy()
        if t % SUBGRAD_WINDOW == 0:
            residual = window_start - best
            if residual < SUBGRAD_TOL:
                break
            window_start = best
    return best_h, float(residual)


def solve_effective_label(spec: RiskSpec, members: SetMembers, method: str = "auto"):
    """Minimize the set objective. Returns ``(y_eff, r_eff, residual, method)``."""
    if members.mass <= 0:
        raise ValueError("zero total weight in set")
    # members with zero weight do not change J
    members = SetMembers(members.z[members.mu > 0] if members.mu.size else members.z,
                         members.mu[members.mu > 0],
                         members.g[members.lam > 0] if members.lam.size else members.g,
                         members.lam[members.lam > 0], members.d)
    label_sq = spec.label_risk == "half-squared-error" or members.mu.size == 0
    know_sq = spec.knowledge_risk == "half-squared-to-teacher" or members.lam.size == 0
    if method == "auto":
        if label_sq and know_sq:
            method = "closed-form"
        elif label_sq and spec.knowledge_risk == "constraint-relu":
            method = "breakpoint"
        else:
            method = "subgradient"
    residual = 0.0
    if method == "closed-form":
        if not (label_sq and know_sq):
            raise ValueError("closed form needs half-squared risks only")
        y = _closed_form(spec, members)
    elif method == "breakpoint":
        if not label_sq or spec.knowledge_risk == "softmax-cross-entropy-soft" and members.lam.size:
            raise ValueError("breakpoint scan needs half-squared label risk and "
                             "half-squared or constraint-relu knowledge risk")
        y = _breakpoint(spec, members)
    elif method == "subgradient":
        y, residual = _subgradient(spec, members)
    else:
        raise ValueError(f"unknown method {method!r}")
    r, _ = set_objective(spec, members, y)
    return y, r, residual, method


def gather_members(spec: RiskSpec, indices, n_z: int, z, g, weights: ObjectiveWeights,
                   d: int) -> SetMembers:
    """Collect the labeled and knowledge members among stacked-row ``indices``."""
    idx = np.asarray(indices, dtype=np.int64)
    lab = idx[idx < n_z]
    kn = idx[idx >= n_z] - n_z
    if spec.label_risk == "half-squared-error":
        zz = np.asarray(z, dtype=np.float64).reshape(-1, d)[lab] if lab.size else np.zeros((0, d))
    else:
        zz = np.asarray(z).reshape(-1)[lab] if lab.size else np.zeros(0, dtype=np.int64)
    if kn.size:
        gg = as_bounds(g)[kn] if spec.payload_kind == "bounds" else np.asarray(g, np.float64)[kn]
    else:
        gg = np.zeros((0, 2, d)) if spec.payload_kind == "bounds" else np.zeros((0, d))
    return SetMembers(zz, weights.mu[lab], gg, weights.lam[kn + n_z], d)


@dataclass
class EffectiveLabelTable:
    y_eff: np.ndarray
    r_eff: np.ndarray
    residual: np.ndarray
    methods: list[str] = field(default_factory=list)

    @property
    def R_eff_total(self) -> float:
        return float(np.sum(self.r_eff))

    def to_dict(self) -> dict:
        return {
            "R_eff_total": self.R_eff_total,
            "sets": {
                str(k): {"y_eff": self.y_eff[k].tolist(), "r_eff": float(self.r_eff[k]),
                         "residual": float(self.residual[k]), "method": self.methods[k]}
                for k in range(self.r_eff.size)
            },
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def effective_risk_table(partition, spec: RiskSpec, z, g, weights: ObjectiveWeights, d: int,
                         method: str = "auto") -> EffectiveLabelTable:
    """Solve every smooth set.

    Sets with zero weight mass have no effective label; they get the zero
    vector, zero risk and method ``"zero-mass"`` (their members carry zero
    weight in every weighted sum).
    """
    if weights.n != partition.assignment.size or weights.n_z != partition.n_z:
        raise ValueError("weights do not match the partition")
    N = partition.N
    y = np.zeros((N, d))
    r = np.zeros(N)
    res = np.zeros(N)
    methods = []
    for k, members_idx in enumerate(partition.index_sets):
        members = gather_members(spec, members_idx, partition.n_z, z, g, weights, d)
        if members.mass <= 0:
            methods.append("zero-mass")
            continue
        try:
            y[k], r[k], res[k], how = solve_effective_label(spec, members, method)
        except (ValueError, FloatingPointError) as exc:
            raise EffectiveLabelError(k, str(exc)) from exc
        methods.append(how)
    return EffectiveLabelTable(y, r, res, methods)


def convergence_gap(net: Network, partition, table: EffectiveLabelTable, weights: ObjectiveWeights,
                    x) -> float:
    """``sum_i (mu_i + lam_i) ||h(x_i) - y_eff,k(i)||^2`` over the stacked rows ``x``."""
    H = predict(net, np.asarray(x, dtype=np.float64))
    diff = H - table.y_eff[partition.assignment]
    return float(weights.total @ np.sum(diff * diff, axis=1))
