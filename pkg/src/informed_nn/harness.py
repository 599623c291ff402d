"""Config-driven lambda/beta/seed sweeps with deterministic CSV output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .benchmarks import bohachevsky as boh
from .benchmarks import synthetic as syn
from .benchmarks import wireless as wl
from .advisor import beta_lambda
from .effective_labels import convergence_gap, effective_risk_table
from .imperfectness import FitConfig, imperfectness_report
from .nn_core import Network, init_network, predict
from .risks import RiskSpec, WeightedObjective, eq1_weights, eq3_weights
from .smooth_sets import build_partition
from .trainer import TrainConfig, TrainHistory, train

log = logging.getLogger(__name__)

BENCHMARKS = ("bohachevsky", "wireless", "synthetic-quadratic")
OBJECTIVES = ("eq1", "eq3")

RESULT_COLUMNS = (
    "benchmark", "seed", "run_seed", "lambda", "beta",
    "n_sets", "n_g_prime", "n_g_double_prime",
    "final_objective", "test_mse", "test_accuracy", "test_sum_rate",
    "convergence_gap", "r_eff_total", "q_k_hat", "q_r_hat",
    "status", "error",
)
SUMMARY_METRICS = ("final_objective", "test_mse", "test_accuracy", "test_sum_rate",
                   "convergence_gap")

INSTANCE_KEYS = {
    "bohachevsky": {"b", "c", "lb", "ub", "sigma_z_sq", "n_z", "n_g", "n_t",
                    "constant_feature", "input_low", "input_high"},
    "wireless": {"n_links", "calibration", "direct_power", "cross_power", "sigma_n_sq",
                 "mu_K", "mu_R", "n_y", "n_g", "n_t"},
    "synthetic-quadratic": {"b", "d", "n_z", "n_shared", "n_fresh", "n_t", "sigma_z_sq",
                            "teacher_bias"},
}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class ExperimentConfig:
    benchmark: str
    seeds: list[int]
    lambda_grid: list[float]
    objective: str = "eq1"
    beta_grid: list[float] = field(default_factory=list)
    phi: float = 0.05
    network: dict = field(default_factory=lambda: {"width": 256, "hidden_layers": 1})
    train: dict = field(default_factory=dict)
    instance: dict = field(default_factory=dict)
    risk: dict = field(default_factory=dict)
    output: str | None = None
    workers: int = 1
    compute_gap: bool = False
    compute_imperfectness: bool = False
    save_artifacts: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def betas(self) -> list[float]:
        """Beta values swept; the single-weight objective ignores beta (0)."""
        if self.objective == "eq1" or not self.beta_grid:
            return [0.0]
        return list(self.beta_grid)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **self.train)

    def risk_spec(self) -> RiskSpec:
        temperature = float(self.risk.get("temperature", 1.0))
        if self.benchmark == "bohachevsky":
            return RiskSpec("half-squared-error", "constraint-relu", temperature)
        if self.benchmark == "wireless":
            return RiskSpec("softmax-cross-entropy-onehot", "softmax-cross-entropy-soft",
                            temperature)
        return RiskSpec("half-squared-error", "half-squared-to-teacher", temperature)


def _grid(value, path, allow_empty=False) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(path, "must be a list of numbers")
    if not value and not allow_empty:
        raise ConfigError(path, "must not be empty")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}[{i}]", "must be a number")
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"{path}[{i}]", f"{v} outside [0, 1]")
        out.append(float(v))
    return out


def _check_keys(doc: dict, allowed: set, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(path, "must be an object")
    for k in doc:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a config document strictly (unknown keys are errors)."""
    top = {f.name for f in fields(ExperimentConfig)}
    _check_keys(doc, top, "")
    for req in ("benchmark", "seeds", "lambda_grid"):
        if req not in doc:
            raise ConfigError(req, "missing required key")
    bench = doc["benchmark"]
    if bench not in BENCHMARKS:
        raise ConfigError("benchmark", f"expected one of {BENCHMARKS}")
    objective = doc.get("objective", "eq1")
    if objective not in OBJECTIVES:
        raise ConfigError("objective", f"expected one of {OBJECTIVES}")
    seeds = doc["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds", "must be a nonempty list of integers")
    for i, s in enumerate(seeds):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"seeds[{i}]", "must be a nonnegative integer")
    lam = _grid(doc["lambda_grid"], "lambda_grid")
    beta = _grid(doc.get("beta_grid", []), "beta_grid", allow_empty=True)
    phi = doc.get("phi", 0.05)
    if isinstance(phi, bool) or not isinstance(phi, (int, float)) or not phi > 0:
        raise ConfigError("phi", "must be a positive number")
    network = {"width": 256, "hidden_layers": 1, **doc.get("network", {})}
    _check_keys(network, {"width", "hidden_layers"}, "network")
    for k, v in network.items():
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"network.{k}", "must be a positive integer")
    train_doc = doc.get("train", {})
    _check_keys(train_doc, TRAIN_KEYS, "train")
    try:
        TrainConfig(**train_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError("train", str(exc)) from None
    inst_doc = doc.get("instance", {})
    _check_keys(inst_doc, INSTANCE_KEYS[bench], "instance")
    risk_doc = doc.get("risk", {})
    _check_keys(risk_doc, {"temperature"}, "risk")
    if "temperature" in risk_doc and not risk_doc["temperature"] > 0:
        raise ConfigError("risk.temperature", "must be positive")
    workers = doc.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers", "must be a positive integer")
    cfg = ExperimentConfig(
        benchmark=bench, seeds=list(seeds), lambda_grid=lam, objective=objective,
        beta_grid=beta, phi=float(phi), network=network, train=dict(train_doc),
        instance=dict(inst_doc), risk=dict(risk_doc), output=doc.get("output"),
        workers=workers, compute_gap=bool(doc.get("compute_gap", False)),
        compute_imperfectness=bool(doc.get("compute_imperfectness", False)),
        save_artifacts=bool(doc.get("save_artifacts", False)),
    )
    try:
        make_instance(cfg, cfg.seeds[0])
    except (TypeError, ValueError) as exc:
        raise ConfigError("instance", str(exc)) from None
    return cfg


def parse_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"malformed JSON: {exc}") from None
    return config_from_dict(doc)


def run_seed(seed: int, *indices: int) -> int:
    """64-bit per-run seed derived from the config seed and grid indices."""
    payload = ",".join(str(int(v)) for v in (seed, *indices)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


# data ------------------------------------------------------------------------

@dataclass
class PreparedData:
    """Network-ready arrays for one benchmark draw."""

    x_z: np.ndarray
    z: np.ndarray
    y_z: np.ndarray
    x_g: np.ndarray
    g: np.ndarray
    y_g: np.ndarray | None
    x_t: np.ndarray
    y_t: np.ndarray
    d: int
    raw: object
    metadata: dict


def make_instance(cfg: ExperimentConfig, seed: int):
    p = dict(cfg.instance)
    if cfg.benchmark == "bohachevsky":
        return boh.BohachevskyInstance.default(b=p.pop("b", 2), seed=seed, **p)
    if cfg.benchmark == "wireless":
        calibration = p.pop("calibration", "linear")
        inst = wl.WirelessInstance.calibrated(
            calibration, seed=seed, temperature=cfg.risk_spec().temperature,
            **{k: v for k, v in p.items() if k not in ("direct_power", "cross_power")})
        if "direct_power" in p or "cross_power" in p:
            inst.direct_power = float(p.get("direct_power", inst.direct_power))
            inst.cross_power = float(p.get("cross_power", inst.cross_power))
            inst.calibration = "custom"
        return inst
    return syn.SyntheticQuadraticInstance(seed=seed, **p)


def prepare_data(cfg: ExperimentConfig, seed: int) -> PreparedData:
    inst = make_instance(cfg, seed)
    if cfg.benchmark == "bohachevsky":
        D = boh.bohachevsky_generate(inst)
        f = lambda x: boh.features(inst, x)  # noqa: E731
        return PreparedData(f(D.x_z), D.z, D.y_z, f(D.x_g), D.bounds_g, D.y_g,
                            f(D.x_t), D.y_t, 1, D, D.metadata)
    if cfg.benchmark == "wireless":
        D = wl.wireless_generate(inst)
        f = wl.csi_features
        y_g = wl.oracle_labels(D.csi_g, inst.mu_R, inst.sigma_n_sq)
        return PreparedData(f(D.csi_y), D.labels_y, D.labels_y, f(D.csi_g), D.rates_g,
                            y_g, f(D.csi_t), D.labels_t, inst.i_max, D, D.metadata)
    D = syn.synthetic_generate(inst)
    return PreparedData(D.x_z, D.z, D.y_z, D.x_g, D.teacher_g, D.y_g, D.x_t, D.y_t,
                        inst.d, D, D.metadata)


def dataset_table(cfg: ExperimentConfig, data: PreparedData) -> tuple[list[str], list[list]]:
    """One row per sample: split, network inputs, label / payload columns."""
    b = data.x_z.shape[1] if data.x_z.size else data.x_g.shape[1]
    d = data.d
    xs = [f"x{j}" for j in range(b)]
    if cfg.benchmark == "wireless":
        header = ["split", *xs, "label", *[f"rate{j}" for j in range(d)]]
        blank = [""] * d
        rows = [["z", *x, int(lab), *blank] for x, lab in zip(data.x_z, data.z)]
        rows += [["g", *x, int(lab), *r] for x, lab, r in zip(data.x_g, data.y_g, data.g)]
        rows += [["t", *x, int(lab), *blank] for x, lab in zip(data.x_t, data.y_t)]
        return header, rows
    ys = [f"y{j}" for j in range(d)]
    zs = [f"z{j}" for j in range(d)]
    if cfg.benchmark == "bohachevsky":
        pay = [f"lb{j}" for j in range(d)] + [f"ub{j}" for j in range(d)]
        gpay = [np.concatenate([p[0], p[1]]) for p in data.g]
    else:
        pay = [f"teacher{j}" for j in range(d)]
        gpay = list(data.g)
    header = ["split", *xs, *zs, *ys, *pay]
    blank_z, blank_p = [""] * d, [""] * len(pay)
    rows = [["z", *x, *z, *y, *blank_p] for x, z, y in zip(data.x_z, data.z, data.y_z)]
    rows += [["g", *x, *blank_z, *y, *p] for x, y, p in zip(data.x_g, data.y_g, gpay)]
    rows += [["t", *x, *blank_z, *y, *blank_p] for x, y in zip(data.x_t, data.y_t)]
    return header, rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_dataset(cfg: ExperimentConfig, data: PreparedData, stem) -> None:
    """``<stem>.csv`` with the samples and ``<stem>.json`` with instance metadata."""
    header, rows = dataset_table(cfg, data)
    with open(f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    Path(f"{stem}.json").write_text(json.dumps(data.metadata, indent=2, sort_keys=True))


def read_dataset(stem) -> dict[str, dict[str, np.ndarray]]:
    """Load a dataset CSV back into per-split column arrays."""
    with open(f"{stem}.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for split in ("z", "g", "t"):
        sel = [r for r in rows if r[0] == split]
        cols = {}
        for j, name in enumerate(header[1:], start=1):
            vals = [r[j] for r in sel]
            cols[name] = np.array([float(v) if v != "" else np.nan for v in vals])
        out[split] = cols
    return out


# runs -------------------------------------------------------------------------

@dataclass
class ResultRow:
    benchmark: str
    seed: int
    run_seed: int
    lam: float
    beta: float
    n_sets: int | None = None
    n_g_prime: int | None = None
    n_g_double_prime: int | None = None
    final_objective: float | None = None
    test_mse: float | None = None
    test_accuracy: float | None = None
    test_sum_rate: float | None = None
    convergence_gap: float | None = None
    r_eff_total: float | None = None
    q_k_hat: float | None = None
    q_r_hat: float | None = None
    status: str = "ok"
    error: str = ""
    wall_time: float = 0.0

    def csv_values(self) -> list[str]:
        vals = asdict(self)
        vals["lambda"] = vals.pop("lam")
        return [_fmt(vals[c]) for c in RESULT_COLUMNS]


@dataclass
class RunOutput:
    row: ResultRow
    net: Network | None = None
    history: TrainHistory | None = None


def build_objective(cfg: ExperimentConfig, data: PreparedData, lam: float, beta: float):
    spec = cfg.risk_spec()
    n_z, n_g = len(data.x_z), len(data.x_g)
    part = build_partition(data.x_z, data.x_g, cfg.phi)
    if cfg.objective == "eq1":
        weights = eq1_weights(n_z, n_g, lam)
    else:
        weights = eq3_weights(n_z, n_g, lam, beta, part.g_prime)
    part.with_mass(weights)
    obj = WeightedObjective(spec, data.x_z, data.z, data.x_g, data.g, weights)
    return spec, part, weights, obj


def evaluate(cfg: ExperimentConfig, net: Network, data: PreparedData) -> dict:
    if cfg.benchmark == "wireless":
        inst = data.raw.metadata
        pred = np.argmax(predict(net, data.x_t), axis=1)
        acc, rate = wl.test_accuracy_and_sumrate(pred, data.raw.csi_t, data.y_t,
                                                 inst["mu_R"], inst["sigma_n_sq"])
        return {"test_accuracy": acc, "test_sum_rate": rate}
    return {"test_mse": boh.test_mse(net, data.x_t, data.y_t)}


def run_point(cfg: ExperimentConfig, lam_idx: int, beta_idx: int, seed: int,
              data: PreparedData | None = None) -> RunOutput:
    """Train and evaluate one (lambda, beta, seed) point; failures are recorded."""
    lam = cfg.lambda_grid[lam_idx]
    beta = cfg.betas[beta_idx]
    rs = run_seed(seed, lam_idx, beta_idx)
    row = ResultRow(cfg.benchmark, seed, rs, lam, beta)
    t0 = time.perf_counter()
    try:
        data = prepare_data(cfg, seed) if data is None else data
        spec, part, weights, obj = build_objective(cfg, data, lam, beta)
        row.n_sets = part.N
        row.n_g_prime = int(part.g_prime.size)
        row.n_g_double_prime = int(part.g_double_prime.size)
        net = init_network(obj.x.shape[1], cfg.network["width"], cfg.network["hidden_layers"],
                           data.d, seed=rs)
        gap_fn = None
        if cfg.compute_gap:
            table = effective_risk_table(part, spec, data.z, data.g, weights, data.d)
            row.r_eff_total = table.R_eff_total
            gap_fn = lambda n: convergence_gap(n, part, table, weights, obj.x)  # noqa: E731
        net, history = train(net, obj, cfg.train_config(rs))
        row.final_objective = obj.value(net)
        if gap_fn is not None:
            row.convergence_gap = gap_fn(net)
        for k, v in evaluate(cfg, net, data).items():
            setattr(row, k, v)
        if cfg.compute_imperfectness:
            row.q_k_hat, row.q_r_hat = _imperfectness(cfg, spec, part, data, lam, beta, rs)
    except Exception as exc:  # a failed point must not abort the sweep
        log.warning("run (lambda=%s, beta=%s, seed=%s) failed: %s", lam, beta, seed, exc)
        row.status = "failed"
        row.error = f"{type(exc).__name__}: {exc}"
        net, history = None, None
    row.wall_time = time.perf_counter() - t0
    return RunOutput(row, net, history)


def fit_config(cfg: ExperimentConfig, seed: int) -> FitConfig:
    """Hypothesis-fitting setup mirroring the sweep's network and optimizer."""
    return FitConfig(width=cfg.network["width"], hidden_layers=cfg.network["hidden_layers"],
                     init_seed=seed, train=cfg.train_config(seed))


def _imperfectness(cfg, spec, part, data, lam, beta, seed):
    """``(Q_K, Q_R(beta))``; the single-weight objective uses ``beta_lambda``."""
    if part.g_prime.size == 0:
        beta = 0.0
    elif cfg.objective == "eq1":
        beta = beta_lambda(lam, part.n_g, int(part.g_prime.size))
    rep = imperfectness_report(spec, data.x_z, data.z, data.y_z, data.x_g, data.g, data.y_g,
                               part, data.d, fit_config(cfg, seed), grid=[beta])
    return rep.Q_K_hat, rep.Q_R_hat[0]


def _jobs(cfg: ExperimentConfig):
    for li in range(len(cfg.lambda_grid)):
        for bi in range(len(cfg.betas)):
            for seed in cfg.seeds:
                yield li, bi, seed


def _run_job(args):
    cfg, li, bi, seed = args
    return run_point(cfg, li, bi, seed)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None,
                   artifacts_dir=None) -> list[ResultRow]:
    """All (lambda, beta, seed) points, rows ordered by grid then seed."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, li, bi, seed) for li, bi, seed in _jobs(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        cache = {}
        outputs = []
        for _, li, bi, seed in jobs:
            if seed not in cache:
                try:
                    cache[seed] = prepare_data(cfg, seed)
                except Exception:  # recorded per row by run_point
                    cache[seed] = None
            outputs.append(run_point(cfg, li, bi, seed, cache[seed]))
    if artifacts_dir is not None and cfg.save_artifacts:
        save_artifacts(cfg, outputs, artifacts_dir)
    return [o.row for o in outputs]


def save_artifacts(cfg: ExperimentConfig, outputs: list[RunOutput], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        write_dataset(cfg, prepare_data(cfg, seed), directory / f"data_seed{seed}")
    for i, out in enumerate(outputs):
        if out.net is not None:
            out.net.save(directory / f"run{i:04d}_network.json")
        if out.history is not None:
            out.history.write_csv(directory / f"run{i:04d}_history.csv")


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Per (lambda, beta): mean and sample standard deviation over seeds."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.lam, r.beta), []).append(r)
    out = []
    for (lam, beta), rs in groups.items():
        entry = {"lambda": lam, "beta": beta, "n_seeds": len(rs),
                 "n_failed": sum(r.status != "ok" for r in rs)}
        for metric in SUMMARY_METRICS:
            vals = [getattr(r, metric) for r in rs
                    if r.status == "ok" and getattr(r, metric) is not None]
            if not vals:
                continue
            arr = np.asarray(vals, dtype=np.float64)
            entry[metric] = {
                "mean": float(np.mean(arr)),
                "std": float(np.std(arr, ddof=1)) if arr.size > 1 else None,
            }
        out.append(entry)
    return out


def emit_results(rows: list[ResultRow], out_dir) -> tuple[Path, Path]:
    """Write ``results.csv`` (fixed header) and ``summary.json``; returns their paths."""
    if not rows:
        raise ValueError("no result rows")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "results.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for r in rows:
                w.writerow(r.csv_values())
        summary_path = out_dir / "summary.json"
        summary = {"groups": summarize(rows),
                   "wall_time": [r.wall_time for r in rows]}
        summary_path.write_text(json.dumps(summary, indent=2, allow_nan=False,
                                           default=_json_default))
    except OSError as exc:
        raise OSError(f"cannot write results to {out_dir}: {exc}") from exc
    return csv_path, summary_path


def _json_default(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    raise TypeError(f"not JSON serializable: {v!r}")


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
