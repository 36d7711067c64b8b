"""Finite boxes of the hypercubic lattice with free or wired boundary,
free energy, overlap density, and the monotonicity checks that approximate
the infinite-volume picture.

Disorder is keyed by the lattice edge itself (canonical coordinate pair), so
the same environment is seen consistently by boxes of every size; this is
what makes the monotone-in-size cylinder probabilities checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .electric import joint_edge_probability, edge_inclusion_probabilities
from .environment import Uniform01, WeightedGraphView
from .graph import GraphError, MultiGraph
from .rng import keyed_uniforms
from .sampler import matrix_tree_partition_function

LATTICE_STREAM = "lattice-environment"

FREE = "free"
WIRED = "wired"


def _lattice_edge_key(a, b):
    """Canonical identity of a lattice edge given endpoint coordinates."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class LatticeEnvironment:
    """Disorder indexed by lattice edges of Z^d; boxes of any size read the
    same values for the same edge."""

    d: int
    law: object
    seed: int

    def omega_of(self, edge_keys):
        ids = np.array([hash_lattice_edge(self.d, k) for k in edge_keys],
                       dtype=np.uint64)
        u = keyed_uniforms(self.seed, LATTICE_STREAM, ids)
        return np.asarray(self.law.inverse_cdf(u), dtype=float)


def hash_lattice_edge(d, key) -> int:
    """Stable 64-bit id of a lattice edge from its canonical coordinates."""
    import hashlib

    a, b = key
    raw = ",".join(str(c) for c in a) + "|" + ",".join(str(c) for c in b)
    digest = hashlib.blake2b(raw.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class BoundaryGraph:
    """Box of Z^d under free or wired boundary conditions.

    Wired boxes gain one extra vertex (the contraction of the outside)
    adjacent to every boundary vertex; each such edge carries the disorder of
    its lexicographically smallest outgoing lattice edge.
    """

    graph: MultiGraph
    L: int
    d: int
    condition: str
    dagger: int | None
    coordinates: tuple          # vertex id -> lattice coordinates (box part)
    edge_keys: tuple            # edge id -> canonical lattice edge key

    @property
    def volume(self) -> int:
        """Number of lattice vertices (the dagger does not count)."""
        return len(self.coordinates)

    def internal_edges(self):
        if self.condition == FREE:
            return range(self.graph.m)
        return [e for e, (u, v) in enumerate(self.graph.endpoints)
                if u != self.dagger and v != self.dagger]


def build_boundary_box(L: int, d: int, condition: str) -> BoundaryGraph:
    """Box [-L, L]^d with free or wired boundary."""
    if L < 0 or d < 1 or d > 3:
        raise GraphError("need L >= 0 and 1 <= d <= 3")
    if condition not in (FREE, WIRED):
        raise GraphError(f"unknown boundary condition {condition!r}")
    side = 2 * L + 1
    n = side ** d
    if n > 10 ** 7:
        raise GraphError("box too large")
    strides = [side ** k for k in range(d)]

    def coords_of(v):
        cs = []
        for k in range(d):
            cs.append(v % side - L)
            v //= side
        return tuple(cs)

    coords = tuple(coords_of(v) for v in range(n))
    edges, keys = [], []
    for v in range(n):
        c = coords[v]
        for k in range(d):
            if c[k] + 1 <= L:
                w = v + strides[k]
                edges.append((v, w))
                keys.append(_lattice_edge_key(c, coords[w]))
    dagger = None
    if condition == WIRED:
        dagger = n
        for v in range(n):
            c = coords[v]
            if max(abs(x) for x in c) == L:
                outside = []
                for k in range(d):
                    for sgn in (-1, 1):
                        nb = list(c)
                        nb[k] += sgn
                        if max(abs(x) for x in nb) > L:
                            outside.append(tuple(nb))
                outside.sort()
                edges.append((v, dagger))
                keys.append(_lattice_edge_key(c, outside[0]))
        g = MultiGraph(n + 1, edges)
    else:
        g = MultiGraph(n, edges)
    return BoundaryGraph(g, L, d, condition, dagger, coords, tuple(keys))


def boundary_view(bg: BoundaryGraph, lattice_env: LatticeEnvironment,
                  beta: float) -> WeightedGraphView:
    omega = lattice_env.omega_of(bg.edge_keys)
    return WeightedGraphView(bg.graph, omega, beta)


def free_energy(bg: BoundaryGraph, lattice_env: LatticeEnvironment,
                beta: float) -> float:
    """log of the partition function divided by the box volume (the wired
    contraction vertex is excluded from the normalizer)."""
    wg = boundary_view(bg, lattice_env, beta)
    return matrix_tree_partition_function(wg) / bg.volume


def overlap_density(bg: BoundaryGraph, lattice_env: LatticeEnvironment,
                    beta: float) -> float:
    """Sum over internal edges of P(e in tree)^2, normalized by volume - 1."""
    wg = boundary_view(bg, lattice_env, beta)
    p = edge_inclusion_probabilities(wg)
    internal = list(bg.internal_edges())
    return float((p[internal] ** 2).sum()) / (bg.volume - 1)


def edge_ids_for_lattice_edges(bg: BoundaryGraph, lattice_keys):
    """Graph edge ids of the given canonical lattice edges; errors when an
    edge is not inside the box."""
    lookup = {}
    for eid, key in enumerate(bg.edge_keys):
        lookup.setdefault(key, eid)    # dagger edges may alias: first wins
    out = []
    for key in lattice_keys:
        key = _lattice_edge_key(*key)
        if key not in lookup:
            raise GraphError(f"lattice edge {key} not inside the box")
        out.append(lookup[key])
    return out


def cylinder_probability(bg: BoundaryGraph, lattice_env: LatticeEnvironment,
                         beta: float, lattice_keys) -> float:
    """P(all given lattice edges are in the tree), via transfer-impedance
    determinants."""
    if not lattice_keys:
        return 1.0
    wg = boundary_view(bg, lattice_env, beta)
    ids = edge_ids_for_lattice_edges(bg, lattice_keys)
    return joint_edge_probability(wg, ids)


@dataclass(frozen=True)
class MonotonicityReport:
    L_values: tuple
    free_probs: tuple
    wired_probs: tuple


def cylinder_monotonicity_check(lattice_keys, L_values, lattice_env,
                                beta: float, slack: float = 1e-9) -> MonotonicityReport:
    """Free-boundary cylinder probabilities must not increase with the box,
    wired ones must not decrease, and wired <= free at every size."""
    L_values = sorted(L_values)
    d = lattice_env.d
    free_ps, wired_ps = [], []
    for L in L_values:
        pf = cylinder_probability(build_boundary_box(L, d, FREE), lattice_env,
                                  beta, lattice_keys)
        pw = cylinder_probability(build_boundary_box(L, d, WIRED), lattice_env,
                                  beta, lattice_keys)
        free_ps.append(pf)
        wired_ps.append(pw)
        if pw > pf + slack:
            raise GraphError(f"wired {pw} above free {pf} at L={L}")
    for a, b in zip(free_ps, free_ps[1:]):
        if b > a + slack:
            raise GraphError(f"free cylinder probability increased: {a} -> {b}")
    for a, b in zip(wired_ps, wired_ps[1:]):
        if b < a - slack:
            raise GraphError(f"wired cylinder probability decreased: {a} -> {b}")
    return MonotonicityReport(tuple(L_values), tuple(free_ps), tuple(wired_ps))


def tree_count_growth(d: int, L_max: int):
    """log(number of spanning trees) / volume for free boxes L = 1..L_max;
    a finite-size trend toward the lattice growth constant, not a limit."""
    if d == 1:
        return [0.0] * L_max
    if d != 2 or L_max > 7:
        raise GraphError("dense determinants support d=2, L <= 7")
    out = []
    for L in range(1, L_max + 1):
        bg = build_boundary_box(L, d, FREE)
        wg = WeightedGraphView(bg.graph, np.zeros(bg.graph.m), 0.0)
        out.append(matrix_tree_partition_function(wg) / bg.volume)
    return out
