"""Command line interface.

Verbs map onto the experiment harness:

    rstre sample    write sampled trees as edge-id lists, one per line
    rstre overlap   edge overlap sweep            (overlap-sweep)
    rstre length    tree length sweep             (length-sweep)
    rstre diameter  diameter scaling              (diameter-scaling)
    rstre local     local tree-map census         (local-census)
    rstre kernel    2-core/kernel pipeline        (kernel-pipeline)
    rstre lattice   lattice free energy sweep     (free-energy-sweep)
    rstre diagnose  random walk diagnostics       (diagnostics)
    rstre mst-prob  tree == MST frequency         (mst-equality)

Common flags: --graph --law --beta --beta-grid --replicas --seed --workers
--out --exact, plus --config FILE with flat key=value lines (flags override
file values).  RSTRE_SEED provides the default master seed.  Exit codes:
0 ok, 1 usage, 2 check failed, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .environment import WeightedGraphView, parse_law, sample_environment
from .harness import (EXPERIMENTS, ExperimentConfig, UsageError,
                      config_from_mapping, parse_config_file, parse_graph_spec,
                      replica_seed, run_experiment)
from .rng import RngStream
from .sampler import TreeSampler

_VERB_TO_EXPERIMENT = {
    "overlap": "overlap-sweep",
    "length": "length-sweep",
    "diameter": "diameter-scaling",
    "local": "local-census",
    "kernel": "kernel-pipeline",
    "lattice": "free-energy-sweep",
    "diagnose": "diagnostics",
    "mst-prob": "mst-equality",
}


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--graph", help="graph spec, e.g. complete:16 or box:L=2,d=2")
    sub.add_argument("--law", help="disorder law, e.g. uniform01 or "
                     "'power_tail alpha=2 c_mu=1 rho=1'")
    sub.add_argument("--beta", type=float, help="single disorder strength")
    sub.add_argument("--beta-grid", help="comma separated disorder strengths")
    sub.add_argument("--sizes", help="comma separated sizes for scaling runs")
    sub.add_argument("--replicas", type=int)
    sub.add_argument("--pairs", type=int, help="tree pairs per overlap replica")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--out", help="output CSV path")
    sub.add_argument("--exact", action="store_true", default=None,
                     help="use the exact route where available")
    sub.add_argument("--dimension", type=int, help="lattice dimension")


def build_parser():
    parser = argparse.ArgumentParser(prog="rstre", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="verb", required=True)
    for verb in ("sample", *sorted(_VERB_TO_EXPERIMENT)):
        sp = subs.add_parser(verb)
        _add_common(sp)
        if verb == "sample":
            sp.add_argument("--count", type=int, default=1,
                            help="number of trees to sample")
    return parser


def _collect_config(args, experiment) -> ExperimentConfig:
    mapping = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in ("graph", "law", "replicas", "seed", "workers", "out",
                "pairs", "sizes", "dimension"):
        val = getattr(args, key, None)
        if val is not None:
            mapping[key] = val
    if args.beta_grid is not None:
        mapping["beta_grid"] = args.beta_grid
    elif args.beta is not None:
        mapping["beta"] = str(args.beta)
    if args.exact is not None:
        mapping["exact"] = "1"
    mapping["experiment"] = mapping.get("experiment", experiment)
    if "seed" not in mapping and os.environ.get("RSTRE_SEED"):
        mapping["seed"] = os.environ["RSTRE_SEED"]
    return config_from_mapping(mapping)


def _cmd_sample(args) -> int:
    cfg = _collect_config(args, "mst-equality")  # placeholder experiment slot
    law = parse_law(cfg.law)
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    lines = []
    for i in range(args.count):
        seed = replica_seed(cfg.seed, i)
        if fixed is None:
            env = sample_environment(law, g, seed)
        else:
            from .environment import Environment
            env = Environment(g, fixed)
        wg = WeightedGraphView(g, env.omega, cfg.betas[0])
        edges = TreeSampler(wg).wilson_edges(RngStream(seed, "sample"))
        lines.append(" ".join(str(e) for e in edges))
    text = "\n".join(lines) + "\n"
    if cfg.out and cfg.out != "rstre.csv":
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.verb == "sample":
            return _cmd_sample(args)
        cfg = _collect_config(args, _VERB_TO_EXPERIMENT[args.verb])
        rows, failures = run_experiment(cfg)
        checks = [r for r in rows if r.observable.startswith("error:")]
        bad_value = any(
            r.observable in ("max_coupling_gap",) and not (r.value <= 1e-9)
            for r in rows if not math.isnan(r.value))
        sys.stderr.write(f"wrote {cfg.out} ({len(rows)} rows)\n")
        if failures:
            for task, exc in failures:
                sys.stderr.write(f"replica failure at {task}: {exc}\n")
            return 3
        if checks or bad_value:
            return 2
        return 0
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except Exception as exc:  # runtime failure
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
