"""Command line entry point: ``informed-nn <subcommand> ...``.

Exit codes: 0 on success, 2 when some sweep rows failed, 1 on config errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .advisor import choose_lambda
from .benchmarks import wireless as wl
from .imperfectness import imperfectness_report
from .nn_core import init_network
from .smooth_sets import build_partition, separability_report

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _write_json(doc, out):
    text = json.dumps(doc, indent=2)
    if out is None:
        print(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _out_dir(args, cfg):
    return Path(args.out or cfg.output or "results")


def cmd_sweep(args, cfg) -> int:
    out = _out_dir(args, cfg)
    rows = harness.run_experiment(cfg, workers=args.workers, artifacts_dir=out / "artifacts")
    csv_path, _ = harness.emit_results(rows, out)
    n_failed = sum(r.status != "ok" for r in rows)
    print(f"{len(rows)} rows -> {csv_path} ({n_failed} failed)")
    return EXIT_PARTIAL if n_failed else EXIT_OK


def cmd_train(args, cfg) -> int:
    """Single run at the first grid point and first seed; saves network and history."""
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    res = harness.run_point(cfg, 0, 0, cfg.seeds[0])
    if res.net is not None:
        res.net.save(out / "network.json")
        res.history.write_csv(out / "history.csv")
        harness.write_dataset(cfg, harness.prepare_data(cfg, cfg.seeds[0]), out / "data")
    harness.emit_results([res.row], out)
    print(json.dumps({k: v for k, v in res.row.__dict__.items()}, default=float))
    return EXIT_OK if res.row.status == "ok" else EXIT_PARTIAL


def cmd_phi_net(args, cfg) -> int:
    data = harness.prepare_data(cfg, cfg.seeds[0])
    part = build_partition(data.x_z, data.x_g, cfg.phi)
    X = np.vstack([data.x_z, data.x_g])
    net = init_network(X.shape[1], cfg.network["width"], cfg.network["hidden_layers"],
                       data.d, seed=harness.run_seed(cfg.seeds[0], 0, 0))
    sep = separability_report(net, part, X)
    sizes, counts = np.unique(part.set_sizes(), return_counts=True)
    _write_json({
        "phi": cfg.phi,
        "N": part.N,
        "n_z": part.n_z,
        "n_g": part.n_g,
        "n_g_prime": int(part.g_prime.size),
        "n_g_double_prime": int(part.g_double_prime.size),
        "set_size_histogram": {str(int(s)): int(c) for s, c in zip(sizes, counts)},
        "separability": sep.to_dict(),
    }, args.out)
    return EXIT_OK


def cmd_imperfectness(args, cfg) -> int:
    seed = cfg.seeds[0]
    data = harness.prepare_data(cfg, seed)
    part = build_partition(data.x_z, data.x_g, cfg.phi)
    grid = cfg.beta_grid or None
    rep = imperfectness_report(cfg.risk_spec(), data.x_z, data.z, data.y_z, data.x_g, data.g,
                               data.y_g, part, data.d, harness.fit_config(cfg, seed), grid=grid,
                               heldout=(data.x_t, data.y_t))
    _write_json(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_advise(args) -> int:
    try:
        decision = choose_lambda(args.epsilon, args.qk, args.qr)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_json(decision.to_dict(), args.out)
    return EXIT_OK


def cmd_wireless_oracle(args) -> int:
    try:
        inst = wl.WirelessInstance.calibrated(args.calibration, n_links=args.links,
                                              mu_R=args.mu_r, n_y=0, n_g=0, n_t=args.n_test,
                                              seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    data = wl.wireless_generate(inst)
    acc = {str(mu): wl.knowledge_accuracy(data.csi_t, data.labels_t, mu, inst.sigma_n_sq)
           for mu in args.mu_k}
    _write_json({"calibration": inst.metadata(), "knowledge_accuracy": acc}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="informed-nn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--out", help="output directory or file")
        sp.add_argument("--workers", type=int, default=None, help="parallel runs")
        return sp

    with_config("sweep", "run the lambda/beta/seed grid and write results.csv")
    with_config("train", "train at the first grid point and save the network")
    with_config("phi-net", "phi-net partition and separability statistics")
    with_config("imperfectness", "estimate Q_K and Q_R(beta) for the configured data")

    sp = sub.add_parser("advise", help="choose lambda from imperfectness estimates")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--qk", type=float, required=True, help="knowledge imperfectness")
    sp.add_argument("--qr", type=float, required=True, help="optimal regularized imperfectness")
    sp.add_argument("--out")

    sp = sub.add_parser("wireless-oracle", help="knowledge-only scheduling accuracy")
    sp.add_argument("--mu-k", type=float, nargs="+", default=[0.1, 0.4, 1.0])
    sp.add_argument("--mu-r", type=float, default=0.5)
    sp.add_argument("--links", type=int, default=4)
    sp.add_argument("--n-test", type=int, default=10000)
    sp.add_argument("--calibration", default="linear", choices=sorted(wl.CALIBRATIONS))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "advise":
        return cmd_advise(args)
    if args.command == "wireless-oracle":
        return cmd_wireless_oracle(args)
    try:
        cfg = harness.parse_config(args.config)
    except (OSError, harness.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is not None and args.workers < 1:
        print("config error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"sweep": cmd_sweep, "train": cmd_train, "phi-net": cmd_phi_net,
               "imperfectness": cmd_imperfectness}[args.command]
    try:
        return handler(args, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
