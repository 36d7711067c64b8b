"""Seeded experiment orchestration and CSV persistence.

Every replica derives its randomness from (master seed, replica index), so
results do not depend on scheduling or worker count.  Rows follow the fixed
schema ``experiment,n,beta,replica,observable,value,stderr,wall_ms,seed``;
the header echoes the full configuration as comment lines.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from .environment import (WeightedGraphView, law_to_string, parse_law,
                          sample_environment)
from .graph import (build_box, build_complete, build_from_edge_list,
                    build_random_regular, tree_diameter)
from .lattice import (FREE, LatticeEnvironment, build_boundary_box,
                      free_energy, overlap_density)
from .observables import (count_tree_maps, edge_overlap_exact,
                          edge_overlap_mc, expected_length_exact,
                          pattern_path, pattern_star, tree_length,
                          walk_diagnostics)
from .reduction import kernel_coupling_check, kernel_decompose, two_core
from .rng import RngStream, stream_key
from .sampler import (TreeSampler, complete_mst, complete_wilson, kruskal_mst,
                      mst_mass_exact, pair_list_diameter)

EXPERIMENTS = ("overlap-sweep", "length-sweep", "diameter-scaling",
               "local-census", "kernel-pipeline", "free-energy-sweep",
               "mst-equality", "diagnostics")

CSV_COLUMNS = ("experiment", "n", "beta", "replica", "observable", "value",
               "stderr", "wall_ms", "seed")

# the RSTRE switches to the coupled minimum tree once the weight gaps freeze
# the walk; see the gap lemma regime
GAP_SAMPLER_FACTOR = 1.0


class UsageError(ValueError):
    pass


class CheckFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    graph: str = "complete:8"
    law: str = "uniform01"
    betas: tuple = (1.0,)
    sizes: tuple = ()
    replicas: int = 4
    seed: int = 0
    workers: int = 1
    out: str = "rstre.csv"
    exact: bool = False
    pairs: int = 200
    radius: int = 2
    dimension: int = 2

    def echo_items(self):
        return [
            ("experiment", self.experiment), ("graph", self.graph),
            ("law", self.law),
            ("betas", ",".join(f"{b:g}" for b in self.betas)),
            ("sizes", ",".join(str(s) for s in self.sizes)),
            ("replicas", self.replicas), ("seed", self.seed),
            ("workers", self.workers), ("out", self.out),
            ("exact", int(self.exact)), ("pairs", self.pairs),
            ("radius", self.radius), ("dimension", self.dimension),
        ]


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    beta: float
    replica: int
    observable: str
    value: float
    stderr: float
    wall_ms: float
    seed: int

    def astuple(self):
        return (self.experiment, self.n, f"{self.beta:g}", self.replica,
                self.observable, repr(self.value), repr(self.stderr),
                f"{self.wall_ms:.3f}", self.seed)


def parse_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment; later keys win."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def config_from_mapping(mapping) -> ExperimentConfig:
    def split_nums(text, conv):
        items = [t for t in str(text).replace(",", " ").split() if t]
        return tuple(conv(t) for t in items)

    known = {f for f, _ in ExperimentConfig(experiment="x").echo_items()}
    kw = {}
    for key, val in mapping.items():
        norm = key.replace("-", "_")
        if key == "beta":
            kw["betas"] = split_nums(val, float)
        elif key in ("betas", "beta_grid", "beta-grid"):
            kw["betas"] = split_nums(val, float)
        elif key == "sizes":
            kw["sizes"] = split_nums(val, int)
        elif norm in ("replicas", "seed", "workers", "pairs", "radius", "dimension"):
            kw[norm] = int(val)
        elif norm == "exact":
            kw["exact"] = str(val).lower() in ("1", "true", "yes", "on")
        elif norm in ("experiment", "graph", "law", "out"):
            kw[norm] = str(val)
        elif key not in known:
            raise UsageError(f"unknown config key {key!r}")
    if "experiment" not in kw:
        raise UsageError("config must name an experiment")
    if kw["experiment"] not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {kw['experiment']!r}; "
                         f"choose from {', '.join(EXPERIMENTS)}")
    return ExperimentConfig(**kw)


def parse_csv_header(path) -> dict:
    """Reparse the config echo from a result file (round-trip support)."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                out[k.strip()] = v.strip()
    out.pop("rstre_version", None)
    return out


def write_csv(rows, path, config: ExperimentConfig | None = None):
    """Atomic CSV write (temp file + rename) with RFC-4180 quoting."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            if config is not None:
                for key, val in config.echo_items():
                    fh.write(f"# {key}={val}\n")
                fh.write(f"# rstre_version={__version__}\n")
            writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(row.astuple() if isinstance(row, ResultRow) else row)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# graph specs
# --------------------------------------------------------------------------

_GRAPH_KINDS = ("complete", "box", "regular", "file")


def validate_graph_spec(spec: str):
    """Cheap format check of a graph spec (no graph is built)."""
    if ":" not in spec:
        raise UsageError(f"graph spec {spec!r} needs a 'kind:params' form")
    kind = spec.split(":", 1)[0].strip().lower()
    if kind not in _GRAPH_KINDS:
        raise UsageError(f"unknown graph kind {kind!r}")


def parse_graph_spec(spec: str, seed: int):
    """Build the graph named by a spec like 'complete:16', 'box:L=2,d=2',
    'regular:n=30,d=3' or 'file:PATH'.  Returns (graph, omega-or-None)."""
    if ":" not in spec:
        raise UsageError(f"graph spec {spec!r} needs a 'kind:params' form")
    kind, rest = spec.split(":", 1)
    kind = kind.strip().lower()
    if kind == "complete":
        return build_complete(int(rest)), None
    if kind == "box":
        kv = dict(item.split("=") for item in rest.split(",") if "=" in item)
        torus = "torus" in rest
        return build_box(int(kv.get("L", 1)), int(kv.get("d", 2)), torus), None
    if kind == "regular":
        kv = dict(item.split("=") for item in rest.split(",") if "=" in item)
        return build_random_regular(int(kv["n"]), int(kv["d"]),
                                    RngStream(seed, "regular-graph")), None
    if kind == "file":
        return build_from_edge_list(rest)
    raise UsageError(f"unknown graph kind {kind!r}")


def replica_seed(master: int, replica: int, extra=None) -> int:
    label = ("replica", replica) if extra is None else ("replica", replica, extra)
    return int(stream_key(master, label))


def gap_sampler_threshold(n: int) -> float:
    """Disorder strength beyond which the tree is sampled as the coupled
    minimum spanning tree (the weight-gap regime)."""
    return GAP_SAMPLER_FACTOR * n * math.log(max(n, 2)) ** 2


# --------------------------------------------------------------------------
# per-replica computations
# --------------------------------------------------------------------------

def _rows_overlap(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else \
        _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    rows = []
    if cfg.exact:
        rows.append(("edge_overlap", edge_overlap_exact(wg), 0.0))
    else:
        mean, se = edge_overlap_mc(wg, cfg.pairs, RngStream(seed, "overlap"))
        rows.append(("edge_overlap", mean, se))
    return g.n, rows


def _fixed_env(g, omega):
    from .environment import Environment
    return Environment(g, omega)


def _rows_length(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    rows = []
    if cfg.exact:
        rows.append(("expected_length", expected_length_exact(wg), 0.0))
    else:
        if beta >= gap_sampler_threshold(g.n):
            tree = kruskal_mst(g, env).edges
            rows.append(("used_gap_sampler", 1.0, 0.0))
        else:
            tree = TreeSampler(wg).wilson_edges(RngStream(seed, "length"))
            rows.append(("used_gap_sampler", 0.0, 0.0))
        rows.append(("tree_length", tree_length(tree, env.omega), 0.0))
    return g.n, rows


def _rows_diameter(cfg, law, beta, replica, n):
    seed = replica_seed(cfg.seed, replica, n)
    if n is not None:   # implicit complete graph of the requested size
        if beta >= gap_sampler_threshold(n):
            pairs = complete_mst(n, seed, law)
            mode = 1.0
        else:
            pairs = complete_wilson(n, beta, seed, RngStream(seed, "diameter"), law)
            mode = 0.0
        return n, [("diameter", float(pair_list_diameter(n, pairs)), 0.0),
                   ("used_gap_sampler", mode, 0.0)]
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    tree = TreeSampler(wg).wilson(RngStream(seed, "diameter"))
    return g.n, [("diameter", float(tree_diameter(tree)), 0.0),
                 ("used_gap_sampler", 0.0, 0.0)]


_PATTERNS = (("path1", pattern_path(1)), ("path2", pattern_path(2)),
             ("star3", pattern_star(3)))


def _rows_local(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    tree = TreeSampler(wg).wilson(RngStream(seed, "local"))
    rows = []
    for name, pat in _PATTERNS:
        rows.append((f"tree_maps_{name}", float(count_tree_maps(tree, 0, pat)), 0.0))
    return g.n, rows


def _rows_kernel(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    core, core_v, _ = two_core(g)
    dec = kernel_decompose(g, env, beta)
    rows = [("two_core_vertices", float(core.n), 0.0),
            ("kernel_vertices", float(dec.kernel.n), 0.0),
            ("kernel_edges", float(dec.kernel.m), 0.0),
            ("kernel_excess", float(dec.kernel.m - dec.kernel.n), 0.0)]
    if cfg.exact and g.is_connected() and g.n <= 24:
        rep = kernel_coupling_check(g, env, beta)
        rows.append(("max_coupling_gap", rep.max_marginal_gap, 0.0))
    return g.n, rows


def _rows_lattice(cfg, law, beta, replica):
    seed = replica_seed(cfg.seed, replica)
    lat = LatticeEnvironment(cfg.dimension, law, seed)
    rows = []
    sizes = cfg.sizes or (1, 2, 3)
    vol = 0
    for L in sizes:
        bg = build_boundary_box(L, cfg.dimension, FREE)
        vol = bg.volume
        rows.append((f"free_energy_L{L}", free_energy(bg, lat, beta), 0.0))
        rows.append((f"overlap_density_L{L}", overlap_density(bg, lat, beta), 0.0))
    return vol, rows


def _rows_mst_equality(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    if cfg.exact:
        return g.n, [("mst_mass", mst_mass_exact(wg), 0.0)]
    tree = TreeSampler(wg).wilson_edges(RngStream(seed, "mst-prob"))
    mf = kruskal_mst(g, env)
    return g.n, [("tree_equals_mst", float(tuple(sorted(mf.edges)) == tree), 0.0)]


def _rows_diagnostics(cfg, law, beta, replica):
    g, fixed = parse_graph_spec(cfg.graph, cfg.seed)
    seed = replica_seed(cfg.seed, replica)
    env = sample_environment(law, g, seed) if fixed is None else _fixed_env(g, fixed)
    wg = WeightedGraphView(g, env.omega, beta)
    d = walk_diagnostics(wg)
    return g.n, [("balance_ratio", d.balance_ratio, 0.0),
                 ("mixing_time", float(d.mixing_time), 0.0),
                 ("escaping_sum", d.escaping_sum, 0.0),
                 ("bottleneck", d.bottleneck, 0.0),
                 ("bottleneck_exact", float(d.bottleneck_exact), 0.0)]


_DISPATCH = {
    "overlap-sweep": _rows_overlap,
    "length-sweep": _rows_length,
    "local-census": _rows_local,
    "kernel-pipeline": _rows_kernel,
    "free-energy-sweep": _rows_lattice,
    "mst-equality": _rows_mst_equality,
    "diagnostics": _rows_diagnostics,
}


def _one_task(cfg, law, task):
    beta, replica, n = task
    extra = n if cfg.experiment == "diameter-scaling" else None
    seed = replica_seed(cfg.seed, replica, extra)
    start = time.perf_counter()
    try:
        if cfg.experiment == "diameter-scaling":
            size, pairs = _rows_diameter(cfg, law, beta, replica, n)
        else:
            size, pairs = _DISPATCH[cfg.experiment](cfg, law, beta, replica)
        wall = (time.perf_counter() - start) * 1000.0
        return [ResultRow(cfg.experiment, size, beta, replica, obs, val, se,
                          wall, seed) for obs, val, se in pairs], None
    except Exception as exc:  # failed replica: error row, keep going
        wall = (time.perf_counter() - start) * 1000.0
        row = ResultRow(cfg.experiment, n or 0, beta, replica,
                        f"error:{type(exc).__name__}", math.nan, math.nan,
                        wall, seed)
        return [row], exc


def run_experiment(cfg: ExperimentConfig):
    """Run all replicas of an experiment and write the CSV.

    Returns (rows, failures); rows are ordered by (beta, replica) regardless
    of the worker count.
    """
    if cfg.experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {cfg.experiment!r}")
    try:
        law = parse_law(cfg.law)
    except ValueError as exc:
        raise UsageError(str(exc))
    if cfg.experiment != "free-energy-sweep":
        validate_graph_spec(cfg.graph)
    tasks = []
    if cfg.experiment == "diameter-scaling":
        sizes = cfg.sizes
        if not sizes:
            sizes = ((int(cfg.graph.split(":", 1)[1]),)
                     if cfg.graph.startswith("complete:") else (None,))
        for beta in cfg.betas:
            for n in sizes:
                for r in range(cfg.replicas):
                    tasks.append((beta, r, n))
    else:
        for beta in cfg.betas:
            for r in range(cfg.replicas):
                tasks.append((beta, r, None))

    results = {}
    failures = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for task, (rows, exc) in zip(tasks, pool.map(
                    lambda t: _one_task(cfg, law, t), tasks)):
                results[task] = rows
                if exc is not None:
                    failures.append((task, exc))
    else:
        for task in tasks:
            rows, exc = _one_task(cfg, law, task)
            results[task] = rows
            if exc is not None:
                failures.append((task, exc))
    ordered = []
    for task in tasks:
        ordered.extend(results[task])
    write_csv(ordered, cfg.out, cfg)
    return ordered, failures
