"""Undirected multigraphs with contraction/deletion and the generators used
by the experiments.

Vertices are dense integers in [0, n); edges are dense integer ids into an
endpoint list.  Multi-edges are first class citizens (contraction needs
them), self-loops are never stored: a loop formed by contraction is dropped.
Every edge carries the fixed orientation (min endpoint, max endpoint) so that
signed quantities computed downstream are reproducible.

All operations are persistent: inputs are never mutated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    pass


class MultiGraph:
    """Immutable undirected multigraph."""

    __slots__ = ("n", "endpoints", "adj")

    def __init__(self, n: int, edges):
        if n < 0:
            raise GraphError("vertex count must be nonnegative")
        self.n = n
        eps = []
        for (u, v) in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop ({u},{v}) not allowed")
            eps.append((u, v) if u < v else (v, u))
        self.endpoints = tuple(eps)
        adj = [[] for _ in range(n)]
        for eid, (u, v) in enumerate(eps):
            adj[u].append((eid, v))
            adj[v].append((eid, u))
        self.adj = tuple(tuple(a) for a in adj)

    # -- basic accessors ---------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.endpoints)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def incident(self, v: int):
        """Pairs (edge id, other endpoint) at v."""
        return self.adj[v]

    def edge_index(self):
        """Map (u, v) with u < v -> list of parallel edge ids."""
        idx = {}
        for eid, (u, v) in enumerate(self.endpoints):
            idx.setdefault((u, v), []).append(eid)
        return idx

    def __repr__(self):
        return f"MultiGraph(n={self.n}, m={self.m})"

    # -- connectivity ------------------------------------------------------

    def component_labels(self) -> np.ndarray:
        labels = np.full(self.n, -1, dtype=np.int64)
        cid = 0
        for s in range(self.n):
            if labels[s] >= 0:
                continue
            labels[s] = cid
            queue = deque([s])
            while queue:
                x = queue.popleft()
                for _, y in self.adj[x]:
                    if labels[y] < 0:
                        labels[y] = cid
                        queue.append(y)
            cid += 1
        return labels

    def is_connected(self) -> bool:
        return self.n <= 1 or int(self.component_labels().max()) == 0

    def bfs_distances(self, source: int) -> np.ndarray:
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for _, y in self.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist


@dataclass(frozen=True)
class SpanningTree:
    """Spanning tree of a parent graph, stored as a sorted tuple of edge ids."""

    graph: MultiGraph
    edges: tuple

    def __post_init__(self):
        g = self.graph
        if len(self.edges) != max(g.n - 1, 0):
            raise GraphError("spanning tree must have n-1 edges")
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for eid in self.edges:
            u, v = g.endpoints[eid]
            ru, rv = find(u), find(v)
            if ru == rv:
                raise GraphError("edge set contains a cycle")
            parent[ru] = rv
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @property
    def edge_set(self):
        return frozenset(self.edges)

    def adjacency(self):
        """Adjacency lists of the tree, in terms of parent-graph vertices."""
        adj = [[] for _ in range(self.graph.n)]
        for eid in self.edges:
            u, v = self.graph.endpoints[eid]
            adj[u].append(v)
            adj[v].append(u)
        return adj


@dataclass(frozen=True)
class RootedTree:
    """Rooted tree given by children lists; vertex 0..k-1, root is a vertex."""

    children: tuple
    root: int = 0

    @staticmethod
    def from_edges(num_vertices, edges, root=0):
        adj = [[] for _ in range(num_vertices)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        children = [[] for _ in range(num_vertices)]
        seen = [False] * num_vertices
        seen[root] = True
        stack = [root]
        count = 1
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    children[x].append(y)
                    stack.append(y)
                    count += 1
        if count != num_vertices or len(edges) != num_vertices - 1:
            raise GraphError("input is not a tree on the given vertices")
        return RootedTree(tuple(tuple(c) for c in children), root)

    @property
    def size(self):
        return len(self.children)


@dataclass(frozen=True)
class ComponentCensus:
    """Connected components, ordered by decreasing size (ties broken by the
    smallest contained vertex id)."""

    labels: tuple          # vertex -> component id, ids already rank-ordered
    sizes: tuple           # decreasing

    def vertices_of(self, cid: int):
        return [v for v, c in enumerate(self.labels) if c == cid]


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def build_complete(n: int) -> MultiGraph:
    """Complete graph K_n."""
    if n < 1:
        raise GraphError("n must be positive")
    return MultiGraph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def build_box(L: int, d: int, torus: bool = False) -> MultiGraph:
    """Box [-L, L]^d of the hypercubic lattice; only edges inside the box.

    With ``torus=True`` the coordinates wrap around, turning the box into a
    discrete torus of side 2L+1.
    """
    if L < 0 or d < 1:
        raise GraphError("need L >= 0 and d >= 1")
    side = 2 * L + 1
    n = side ** d
    if n > 10 ** 8:
        raise GraphError("box too large")
    strides = [side ** k for k in range(d)]

    def vid(coords):
        return sum(c * s for c, s in zip(coords, strides))

    edges = []
    coords = [0] * d
    for v in range(n):
        x = v
        for k in range(d):
            coords[k] = x % side
            x //= side
        for k in range(d):
            if coords[k] + 1 < side:
                edges.append((v, v + strides[k]))
            elif torus and side > 2:
                w = v - coords[k] * strides[k]
                edges.append((v, w))
    return MultiGraph(n, edges)


def box_coordinates(L: int, d: int):
    """Vertex id -> coordinate tuple in [-L, L]^d, matching build_box."""
    side = 2 * L + 1
    out = []
    for v in range(side ** d):
        x, cs = v, []
        for _ in range(d):
            cs.append(x % side - L)
            x //= side
        out.append(tuple(cs))
    return out


def build_random_regular(n: int, d: int, stream) -> MultiGraph:
    """Simple d-regular graph via the configuration model with rejection.

    Raises GraphError when n*d is odd and RuntimeError when the rejection
    budget is exhausted.
    """
    if n * d % 2 != 0:
        raise GraphError("n*d must be even")
    if d >= n:
        raise GraphError("need d < n")
    rng = stream.generator if hasattr(stream, "generator") else stream
    for _ in range(1000):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        if len(np.unique(lo * n + hi)) != len(lo):
            continue
        return MultiGraph(n, list(zip(lo.tolist(), hi.tolist())))
    raise RuntimeError("configuration model rejection budget exceeded")


def build_from_edge_list(path):
    """Read the edge-list text format.

    Line 1 holds the vertex count; every following non-empty, non-# line is
    "u v" or "u v omega" with 0 <= u < v < n.  Duplicate (u, v) lines create
    parallel edges.  Returns (graph, omega array or None).
    """
    edges, omegas = [], []
    has_omega = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            try:
                header = int(line)
            except ValueError:
                raise GraphError(f"{path}:{lineno}: expected vertex count")
            if header < 0:
                raise GraphError(f"{path}:{lineno}: negative vertex count")
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"{path}:{lineno}: expected 'u v' or 'u v omega'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"{path}:{lineno}: bad vertex id")
        if u == v:
            raise GraphError(f"{path}:{lineno}: self-loop {u} {v}")
        if not (0 <= u < v < header):
            raise GraphError(f"{path}:{lineno}: need 0 <= u < v < n")
        row_omega = len(parts) == 3
        if has_omega is None:
            has_omega = row_omega
        elif has_omega != row_omega:
            raise GraphError(f"{path}:{lineno}: inconsistent omega column")
        edges.append((u, v))
        if row_omega:
            try:
                omegas.append(float(parts[2]))
            except ValueError:
                raise GraphError(f"{path}:{lineno}: bad omega value")
    if header is None:
        raise GraphError(f"{path}: empty file")
    g = MultiGraph(header, edges)
    return g, (np.array(omegas) if has_omega else None)


# --------------------------------------------------------------------------
# contraction / deletion / components
# --------------------------------------------------------------------------

def contract_edges(g: MultiGraph, edge_ids):
    """Contract the given edges.

    Returns (new graph, vertex map old->new, edge map old->new-or-None).
    Contracted edges and edges that become self-loops map to None.  Parallel
    edges stay distinct.  New vertex ids are dense, ordered by the smallest
    old vertex id in each merged class.
    """
    ids = set(edge_ids)
    for eid in ids:
        if not (0 <= eid < g.m):
            raise GraphError(f"unknown edge id {eid}")
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for eid in ids:
        u, v = g.endpoints[eid]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    roots = sorted({find(v) for v in range(g.n)})
    new_of_root = {r: i for i, r in enumerate(roots)}
    vmap = [new_of_root[find(v)] for v in range(g.n)]

    emap = [None] * g.m
    new_edges = []
    for eid, (u, v) in enumerate(g.endpoints):
        if eid in ids:
            continue
        nu, nv = vmap[u], vmap[v]
        if nu == nv:
            continue
        emap[eid] = len(new_edges)
        new_edges.append((nu, nv))
    return MultiGraph(len(roots), new_edges), vmap, emap


def delete_edges(g: MultiGraph, edge_ids) -> MultiGraph:
    """Remove edges, keep all vertices."""
    g2, _ = delete_edges_mapped(g, edge_ids)
    return g2


def delete_edges_mapped(g: MultiGraph, edge_ids):
    """Like delete_edges but also returns the edge map old->new-or-None."""
    ids = set(edge_ids)
    for eid in ids:
        if not (0 <= eid < g.m):
            raise GraphError(f"unknown edge id {eid}")
    emap = [None] * g.m
    new_edges = []
    for eid, ep in enumerate(g.endpoints):
        if eid in ids:
            continue
        emap[eid] = len(new_edges)
        new_edges.append(ep)
    return MultiGraph(g.n, new_edges), emap


def subgraph_on_vertices(g: MultiGraph, vertices):
    """Induced subgraph.  Returns (graph, vmap old->new-or-None, edge ids kept)."""
    vs = sorted(set(vertices))
    vmap = [None] * g.n
    for i, v in enumerate(vs):
        vmap[v] = i
    kept, new_edges = [], []
    for eid, (u, v) in enumerate(g.endpoints):
        if vmap[u] is not None and vmap[v] is not None:
            kept.append(eid)
            new_edges.append((vmap[u], vmap[v]))
    return MultiGraph(len(vs), new_edges), vmap, kept


def connected_components(g: MultiGraph) -> ComponentCensus:
    raw = g.component_labels()
    cid_count = int(raw.max()) + 1 if g.n else 0
    size = [0] * cid_count
    first_vertex = [g.n] * cid_count
    for v in range(g.n):
        c = int(raw[v])
        size[c] += 1
        first_vertex[c] = min(first_vertex[c], v)
    order = sorted(range(cid_count), key=lambda c: (-size[c], first_vertex[c]))
    rank = {c: i for i, c in enumerate(order)}
    labels = tuple(rank[int(raw[v])] for v in range(g.n))
    sizes = tuple(size[c] for c in order)
    return ComponentCensus(labels, sizes)


# --------------------------------------------------------------------------
# tree helpers
# --------------------------------------------------------------------------

def _tree_adjacency(t):
    if isinstance(t, SpanningTree):
        return t.adjacency(), t.graph.n, len(t.edges)
    if isinstance(t, MultiGraph):
        adj = [[y for _, y in t.adj[v]] for v in range(t.n)]
        return adj, t.n, t.m
    raise GraphError("expected SpanningTree or MultiGraph")


def _farthest(adj, source, active=None):
    dist = {source: 0}
    queue = deque([source])
    far, fdist = source, 0
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in dist and (active is None or active[y]):
                dist[y] = dist[x] + 1
                if dist[y] > fdist:
                    far, fdist = y, dist[y]
                queue.append(y)
    return far, fdist, dist


def tree_diameter(t) -> int:
    """Diameter (edge count of the longest path) of a tree, via double BFS."""
    adj, n, m = _tree_adjacency(t)
    if n == 0:
        return 0
    comp_sizes = []
    seen = [False] * n
    edge_total = 0
    best = 0
    for s in range(n):
        if seen[s]:
            continue
        # collect component
        comp = [s]
        seen[s] = True
        qi = 0
        while qi < len(comp):
            x = comp[qi]
            qi += 1
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    comp.append(y)
        sz = len(comp)
        inner_edges = sum(len(adj[x]) for x in comp) // 2
        if inner_edges != sz - 1:
            raise GraphError("input has a cycle")
        comp_sizes.append(sz)
        a, _, _ = _farthest(adj, s)
        _, d, _ = _farthest(adj, a)
        best = max(best, d)
        edge_total += inner_edges
    if len(comp_sizes) > 1 and m != edge_total:
        raise GraphError("input has a cycle")
    return best


def forest_component_diameters(g: MultiGraph):
    """Per-component diameters of a forest, decreasing; the reported forest
    diameter is the maximum entry (components of a disconnected object are
    measured separately)."""
    census = connected_components(g)
    out = []
    for cid in range(len(census.sizes)):
        sub, _, _ = subgraph_on_vertices(g, census.vertices_of(cid))
        out.append(tree_diameter(sub))
    return sorted(out, reverse=True)


@dataclass(frozen=True)
class Subtree:
    """A connected subtree of a spanning tree: edge ids plus covered vertices."""

    graph: MultiGraph
    edges: frozenset
    vertices: frozenset


def restricted_subtree(t: SpanningTree, vertices) -> Subtree:
    """Minimal subtree of t spanning the given vertex set.

    Computed by pruning leaves that are not required; every leaf of the
    result is in the requested set.
    """
    req = set(vertices)
    if not req:
        raise GraphError("vertex set must be nonempty")
    g = t.graph
    for v in req:
        if not (0 <= v < g.n):
            raise GraphError(f"vertex {v} out of range")
    deg = [0] * g.n
    inc = [[] for _ in range(g.n)]
    for eid in t.edges:
        u, v = g.endpoints[eid]
        deg[u] += 1
        deg[v] += 1
        inc[u].append(eid)
        inc[v].append(eid)
    alive_edge = {eid: True for eid in t.edges}
    alive_vert = [True] * g.n
    queue = deque(v for v in range(g.n) if deg[v] == 1 and v not in req)
    while queue:
        x = queue.popleft()
        if not alive_vert[x] or deg[x] != 1 or x in req:
            continue
        eid = next(e for e in inc[x] if alive_edge[e])
        u, v = g.endpoints[eid]
        y = v if u == x else u
        alive_edge[eid] = False
        alive_vert[x] = False
        deg[x] -= 1
        deg[y] -= 1
        if deg[y] == 1 and y not in req:
            queue.append(y)
    edges = frozenset(e for e, ok in alive_edge.items() if ok)
    verts = set(req)
    for e in edges:
        verts.update(t.graph.endpoints[e])
    return Subtree(g, edges, frozenset(verts))
