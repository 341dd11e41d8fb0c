"""Command-line entry point: ``napgnn run|sweep|audit|gen``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from napgnn import audit, experiment, graph


def _synthetic(text):
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("expected n,attach,d,M,homophily")
    try:
        n, attach, d, m = (int(p) for p in parts[:4])
        homophily = float(parts[4])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad synthetic spec {text!r}") from None
    return n, attach, d, m, homophily


def _seed_list(text):
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return tuple(range(int(lo), int(hi)))
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _data_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="directory with edges.csv, features.csv, labels.csv")
    src.add_argument("--synthetic", type=_synthetic, metavar="n,attach,d,M,homophily",
                     help="generate a power-law graph instead of loading one")
    p.add_argument("--graph-seed", type=int, default=0, help="seed for --synthetic")


def _experiment_args(p):
    _data_args(p)
    d = experiment.ExperimentConfig()
    p.add_argument("--eps-total", type=float, default=d.eps_total)
    p.add_argument("--split", default=d.split,
                   help="even, 2-1-1, edge-heavy, or weights a,b,c for (eps_A, eps_B, eps_C)")
    p.add_argument("--dmax", type=int, default=d.max_degree)
    p.add_argument("--tnie-depth", type=int, default=d.tnie_depth, metavar="T")
    p.add_argument("--hops", type=int, default=d.hops, metavar="K")
    p.add_argument("--tau", type=float, default=d.tau)
    p.add_argument("--importance", choices=["tnie", "degree", "file"], default=d.importance)
    p.add_argument("--budget-mode", choices=["adaptive", "equal"], default=d.budget_mode)
    p.add_argument("--no-edge-sample", action="store_true")
    p.add_argument("--mode", choices=["nap", "mlp"], default=d.mode,
                   help="mlp: head on Laplace-noised features, no graph")
    p.add_argument("--noise-off", action="store_true",
                   help="debug only: disable every mechanism (run is not private)")
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int)
    seeds.add_argument("--seeds", type=_seed_list, help="comma list or lo:hi range")
    p.add_argument("--out", type=Path, required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="napgnn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate once per seed")
    _experiment_args(run)
    run.add_argument("--emit-intermediates", action="store_true",
                     help="also write importance_out.csv and budget_out.csv")

    sweep = sub.add_parser("sweep", help="repeat runs over one parameter")
    _experiment_args(sweep)
    sweep.add_argument("--axis", choices=sorted(experiment.SWEEP_AXES), required=True)
    sweep.add_argument("--values", required=True, help="comma-separated axis values")

    aud = sub.add_parser("audit", help="empirical checks of the privacy claims")
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--quick", action="store_true", help="10x fewer trials")
    aud.add_argument("--out", type=Path, required=True)

    gen = sub.add_parser("gen", help="write a synthetic dataset in the CSV layout")
    gen.add_argument("--synthetic", type=_synthetic, metavar="n,attach,d,M,homophily",
                     default="1000,3,128,5,0.8")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)
    return parser


def config_from_args(args):
    synth = experiment.SyntheticSpec(seed=args.graph_seed)
    if args.synthetic:
        n, attach, d, m, homophily = args.synthetic
        synth = experiment.SyntheticSpec(n=n, attach=attach, d=d, num_classes=m,
                                         homophily=homophily, seed=args.graph_seed)
    if args.seeds is not None:
        seeds = args.seeds
    else:
        seeds = (args.seed if args.seed is not None else 0,)
    return experiment.ExperimentConfig(
        dataset=args.dataset, synthetic=synth, eps_total=args.eps_total, split=args.split,
        max_degree=args.dmax, tnie_depth=args.tnie_depth, hops=args.hops, tau=args.tau,
        importance=args.importance, budget_mode=args.budget_mode,
        edge_sample=not args.no_edge_sample, mode=args.mode, noise=not args.noise_off,
        seeds=seeds)


def _axis_values(text, axis):
    cast = float if axis == "epsilon" else int
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"bad --values {text!r} for axis {axis}") from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            n, attach, d, m, homophily = args.synthetic
            g = graph.generate_power_law(n, attach, d, m, homophily, args.seed)
            graph.save_graph(g, args.out)
            print(f"wrote {g.n} nodes, {len(g.edges)} edges to {args.out}")
        elif args.command == "audit":
            args.out.mkdir(parents=True, exist_ok=True)
            reports = audit.run_all(args.seed, quick=args.quick)
            payload = audit.write_reports(args.out / "audit_report.json", reports)
            for r in reports:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.claim}: "
                      f"{r.estimate:.4g} vs {r.bound:.4g}")
            return 0 if payload["passed"] else 1
        else:
            cfg = config_from_args(args)
            if not cfg.noise:
                logging.getLogger("napgnn").warning("--noise-off: results are not private")
            if args.command == "run":
                record = experiment.run_experiment(cfg, args.out, args.emit_intermediates)
                print(json.dumps({k: record[k] for k in
                                  ("accuracy", "ci95", "eps_A", "eps_B", "eps_C")}))
            else:
                values = _axis_values(args.values, args.axis)
                rows = experiment.sweep(cfg, args.axis, values, args.out)
                for v, acc in zip(*experiment.median_by_value(rows)):
                    print(f"{args.axis}={v}\tmedian accuracy {acc:.4f}")
    except (experiment.StageError, ValueError, FileNotFoundError) as exc:
        print(f"napgnn: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
