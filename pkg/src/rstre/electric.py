"""Electric networks: voltages, effective resistance, flows, reductions,
edge-inclusion probabilities and transfer impedances.

Conductances enter through a weighted view's ``scaled_weights`` so that the
linear algebra stays in a representable range for any inverse temperature;
probabilities like w(e) * R_eff(e) are invariant under that global rescale.
Direct dense factorizations are used up to 2000 vertices, a preconditioned
iterative solver beyond.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .environment import WeightedGraphView, explicit_view
from .graph import MultiGraph

DENSE_LIMIT = 2000
_CLIP_LOG = 700.0


class ElectricError(RuntimeError):
    pass


class DisconnectedError(ElectricError):
    pass


# --------------------------------------------------------------------------
# solver core
# --------------------------------------------------------------------------

def _component_of(g: MultiGraph, weights, seeds):
    """Vertices reachable from seeds along positive-weight edges."""
    seen = set(seeds)
    queue = deque(seeds)
    while queue:
        x = queue.popleft()
        for eid, y in g.adj[x]:
            if weights[eid] > 0.0 and y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def _laplacian_dense(g, weights, vertices, index):
    k = len(vertices)
    L = np.zeros((k, k))
    for eid, (u, v) in enumerate(g.endpoints):
        w = weights[eid]
        if w <= 0.0:
            continue
        iu, iv = index.get(u), index.get(v)
        if iu is None or iv is None:
            continue
        L[iu, iu] += w
        L[iv, iv] += w
        L[iu, iv] -= w
        L[iv, iu] -= w
    return L


def _laplacian_sparse(g, weights, vertices, index):
    rows, cols, vals = [], [], []
    for eid, (u, v) in enumerate(g.endpoints):
        w = weights[eid]
        if w <= 0.0:
            continue
        iu, iv = index.get(u), index.get(v)
        if iu is None or iv is None:
            continue
        rows += [iu, iv, iu, iv]
        cols += [iu, iv, iv, iu]
        vals += [w, w, -w, -w]
    k = len(vertices)
    return scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(k, k))


class GroundedSolver:
    """Factorized Laplacian of one positive-weight component with one vertex
    grounded; solves current-injection problems L v = b with v[ground] = 0."""

    def __init__(self, g: MultiGraph, weights, anchor: int):
        self.g = g
        self.weights = weights
        comp = sorted(_component_of(g, weights, [anchor]))
        self.vertices = comp
        self.index = {v: i for i, v in enumerate(comp)}
        self.ground = comp[0]
        k = len(comp)
        keep = [i for i in range(k) if comp[i] != self.ground]
        self._keep = keep
        if k == 1:
            self._solve_reduced = lambda b: b
            return
        if k <= DENSE_LIMIT:
            L = _laplacian_dense(g, weights, comp, self.index)
            Lr = L[np.ix_(keep, keep)]

            def _refined(solve, b):
                x = solve(b)
                # one step of iterative refinement: cheap and recovers digits
                # lost to wide conductance spreads
                x += solve(b - Lr @ x)
                return x

            try:
                cho = scipy.linalg.cho_factor(Lr, check_finite=False)
                base = lambda b: scipy.linalg.cho_solve(cho, b, check_finite=False)
            except scipy.linalg.LinAlgError:
                try:
                    lu = scipy.linalg.lu_factor(Lr, check_finite=False)
                except scipy.linalg.LinAlgError as exc:
                    raise ElectricError(f"singular reduced Laplacian: {exc}")
                base = lambda b: scipy.linalg.lu_solve(lu, b, check_finite=False)
            self._solve_reduced = lambda b: _refined(base, b)
        else:
            L = _laplacian_sparse(g, weights, comp, self.index).tocsc()
            Lr = L[np.ix_(keep, keep)].tocsc()
            try:
                ilu = scipy.sparse.linalg.spilu(Lr, drop_tol=1e-6, fill_factor=20)
                precond = scipy.sparse.linalg.LinearOperator(Lr.shape, ilu.solve)
            except RuntimeError:
                precond = None
            lu = None

            def solve(b, Lr=Lr, precond=precond):
                nonlocal lu
                x, info = scipy.sparse.linalg.cg(Lr, b, rtol=1e-12, atol=0.0,
                                                 maxiter=20000, M=precond)
                resid = np.linalg.norm(Lr @ x - b)
                scale = np.linalg.norm(b)
                if info != 0 or resid > 1e-10 * max(scale, 1.0):
                    if lu is None:
                        lu = scipy.sparse.linalg.splu(Lr)
                    x = lu.solve(b)
                    resid = np.linalg.norm(Lr @ x - b)
                    if resid > 1e-8 * max(scale, 1.0):
                        raise ElectricError(
                            f"linear solve failed, residual {resid:.3e}")
                return x

            self._solve_reduced = solve

    def contains(self, v: int) -> bool:
        return v in self.index

    def potentials(self, sources, sinks) -> np.ndarray:
        """Potentials (full length-n vector) for unit current in at sources,
        out at sinks, both inside this component; grounded arbitrarily."""
        k = len(self.vertices)
        b = np.zeros(k)
        for s in sources:
            b[self.index[s]] += 1.0 / len(sources)
        for t in sinks:
            b[self.index[t]] -= 1.0 / len(sinks)
        br = b[self._keep]
        xr = self._solve_reduced(br)
        x = np.zeros(k)
        x[self._keep] = xr
        full = np.zeros(self.g.n)
        for v, i in self.index.items():
            full[v] = x[i]
        return full


def _merged_boundary_potentials(g, weights, A, B):
    """Voltage vector with v|A equal on A, v|B equal on B, unit total current
    from A to B.  Merges each boundary set into a super vertex so that sets
    of several vertices are held at a common potential."""
    A, B = sorted(set(A)), sorted(set(B))
    if not A or not B or set(A) & set(B):
        raise ValueError("A and B must be nonempty and disjoint")
    comp = _component_of(g, weights, A)
    if any(b not in comp for b in B):
        raise DisconnectedError("boundary sets lie in different components")
    # merge boundary sets: map every vertex of A to A[0], of B to B[0]
    amap = {v: A[0] for v in A}
    amap.update({v: B[0] for v in B})
    merged_edges, kept = [], []
    for eid, (u, v) in enumerate(g.endpoints):
        uu, vv = amap.get(u, u), amap.get(v, v)
        if uu == vv:
            continue
        merged_edges.append((min(uu, vv), max(uu, vv)))
        kept.append(eid)
    remap = {}
    for (u, v) in merged_edges:
        for x in (u, v):
            if x not in remap:
                remap[x] = len(remap)
    gm = MultiGraph(len(remap), [(remap[u], remap[v]) for u, v in merged_edges])
    wm = np.array([weights[eid] for eid in kept])
    solver = GroundedSolver(gm, wm, remap[A[0]])
    pot_m = solver.potentials([remap[A[0]]], [remap[B[0]]])
    pot = np.zeros(g.n)
    for v in range(g.n):
        x = amap.get(v, v)
        if x in remap and solver.contains(remap[x]):
            pot[v] = pot_m[remap[x]]
        else:
            pot[v] = math.nan  # other component: no defined potential
    return pot


# --------------------------------------------------------------------------
# public results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Voltages:
    """Potentials of the unit-current problem: v|A = R_eff, v|B = 0."""

    values: np.ndarray
    sources: tuple
    sinks: tuple


@dataclass(frozen=True)
class Flow:
    """Flow on oriented edges; theta[eid] is the value from the lower to the
    higher endpoint of the edge."""

    graph: MultiGraph
    theta: np.ndarray
    sources: tuple
    sinks: tuple
    strength: float

    def value(self, u, v, eid) -> float:
        a, b = self.graph.endpoints[eid]
        if (u, v) == (a, b):
            return float(self.theta[eid])
        if (u, v) == (b, a):
            return -float(self.theta[eid])
        raise ValueError("edge does not join u and v")

    def divergence(self, v) -> float:
        out = 0.0
        for eid, y in self.graph.adj[v]:
            a, _ = self.graph.endpoints[eid]
            out += self.theta[eid] if a == v else -self.theta[eid]
        return out


def effective_resistance(wg: WeightedGraphView, A, B) -> float:
    """Effective resistance between vertex sets A and B; inf when they are
    disconnected."""
    A, B = list(dict.fromkeys(A)), list(dict.fromkeys(B))
    if not A or not B or set(A) & set(B):
        raise ValueError("A and B must be nonempty and disjoint")
    w, shift = wg.scaled_weights()
    try:
        pot = _merged_boundary_potentials(wg.graph, w, A, B)
    except DisconnectedError:
        # positive-weight disconnection: resistance beyond representable range
        # is reported as infinite (true infinity when truly disconnected)
        return math.inf
    r_scaled = float(pot[A[0]] - pot[B[0]])
    with np.errstate(over="ignore", under="ignore"):
        return r_scaled * math.exp(-shift) if shift else r_scaled


def voltages(wg: WeightedGraphView, A, B) -> Voltages:
    w, _ = wg.scaled_weights()
    pot = _merged_boundary_potentials(wg.graph, w, list(A), list(B))
    base = pot[sorted(set(B))[0]]
    return Voltages(pot - base, tuple(sorted(set(A))), tuple(sorted(set(B))))


def unit_current_flow(wg: WeightedGraphView, u: int, v: int) -> Flow:
    """Unit-strength current flow from u to v (scale invariant)."""
    if u == v:
        raise ValueError("u and v must differ")
    w, _ = wg.scaled_weights()
    pot = _merged_boundary_potentials(wg.graph, w, [u], [v])
    g = wg.graph
    theta = np.zeros(g.m)
    for eid, (a, b) in enumerate(g.endpoints):
        if w[eid] > 0.0 and not (math.isnan(pot[a]) or math.isnan(pot[b])):
            theta[eid] = w[eid] * (pot[a] - pot[b])
    strength = sum(theta[eid] if g.endpoints[eid][0] == u else -theta[eid]
                   for eid, _ in g.adj[u])
    if strength <= 0:
        raise ElectricError("degenerate current")
    return Flow(g, theta / strength, (u,), (v,), 1.0)


def flow_energy(flow: Flow, wg: WeightedGraphView) -> float:
    """Sum over edges of theta^2 / w, the Dirichlet energy of the flow."""
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        wts = wg.weights()
        terms = np.where(flow.theta != 0.0, flow.theta ** 2 / wts, 0.0)
        return float(terms.sum())


# --------------------------------------------------------------------------
# Kirchhoff probabilities and transfer impedance
# --------------------------------------------------------------------------

_TRIM_LADDER = (30.0, 15.0, 8.0)


def _centered_once(wg, eid, trim):
    """One attempt at the centered marginal with the given trim window.

    Edges more than e^trim heavier than e are contracted (shorts), edges more
    than e^trim lighter are deleted; both cost at most about e^-trim each in
    absolute error.  Returns nan when the solve degenerates.
    """
    from .graph import contract_edges, delete_edges_mapped

    g = wg.graph
    lw = wg.log_weights - wg.log_weights[eid]
    heavy = [f for f in range(g.m) if lw[f] > trim and f != eid]
    if heavy:
        g2, _, emap = contract_edges(g, heavy)
        if emap[eid] is None:
            return 0.0  # e closes a cycle of much heavier edges
        lw2 = np.empty(g2.m)
        for f in range(g.m):
            if emap[f] is not None:
                lw2[emap[f]] = lw[f]
        g, lw, eid = g2, lw2, emap[eid]
    light = [f for f in range(g.m) if lw[f] < -trim and f != eid]
    if light:
        g2, emap = delete_edges_mapped(g, light)
        lw2 = np.empty(g2.m)
        for f in range(g.m):
            if emap[f] is not None:
                lw2[emap[f]] = lw[f]
        g, lw, eid = g2, lw2, emap[eid]
    with np.errstate(under="ignore"):
        w = np.exp(np.clip(lw, -trim, trim))
    u, v = g.endpoints[eid]
    try:
        pot = _merged_boundary_potentials(g, w, [u], [v])
    except ElectricError:
        return math.nan
    val = pot[u] - pot[v]
    if not math.isfinite(val):
        return math.nan
    return float(min(max(val, 0.0), 1.0))


def _centered_edge_probability(wg, eid):
    """P(e in tree) centered at edge e; widest numerically sound trim wins."""
    import warnings

    for trim in _TRIM_LADDER:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val = _centered_once(wg, eid, trim)
        if not math.isnan(val):
            return val
    raise ElectricError(f"marginal of edge {eid} failed at every trim window")


def kirchhoff_edge_probability(wg: WeightedGraphView, eid: int) -> float:
    """P(e in tree) = w(e) * R_eff(endpoints of e)."""
    if not wg.graph.is_connected():
        raise DisconnectedError("graph must be connected")
    return _centered_edge_probability(wg, eid)


def _pinv_resistances(g, w):
    verts = list(range(g.n))
    L = _laplacian_dense(g, w, verts, {v: v for v in verts})
    Lp = np.linalg.pinv(L, hermitian=True)
    d = np.diag(Lp)
    return d[:, None] + d[None, :] - 2 * Lp


def edge_inclusion_probabilities(wg: WeightedGraphView) -> np.ndarray:
    """Vector of P(e in tree) for every edge.

    One Laplacian pseudo-inverse covers modest weight spreads.  For wider
    spreads the heavy edges (within e^25 of the top) form their own network:
    if it spans, one pseudo-inverse of it gives every marginal, with the
    light edges read off as w(e) * R_heavy(e) (their own conductance is
    negligible); any borderline value is recomputed by a per-edge recentered
    solve, which is also the general fallback.
    """
    g = wg.graph
    if not g.is_connected():
        raise DisconnectedError("graph must be connected")
    if g.m == 0:
        return np.zeros(0)
    lw = wg.log_weights
    hi = float(lw.max())
    spread = hi - float(lw.min())
    ep = np.array(g.endpoints)
    uu, vv = ep[:, 0], ep[:, 1]
    if spread <= 25.0 and g.n <= 4000:
        w, _ = wg.scaled_weights()
        r = _pinv_resistances(g, w)[uu, vv]
        return np.clip(w * r, 0.0, 1.0)
    if g.n <= 4000:
        # when the heavy skeleton spans, the smallest Laplacian eigenvalue is
        # set by the heavy edges, so one pseudo-inverse of the full scaled
        # network is well conditioned and every marginal comes out exact
        heavy_ids = np.nonzero(lw >= hi - 25.0)[0]
        hgraph = MultiGraph(g.n, [g.endpoints[e] for e in heavy_ids])
        if hgraph.is_connected():
            with np.errstate(under="ignore"):
                w_scaled = np.exp(lw - hi)
            r_all = _pinv_resistances(g, w_scaled)[uu, vv]
            return np.clip(w_scaled * r_all, 0.0, 1.0)
    return np.array([_centered_edge_probability(wg, e) for e in range(g.m)])


def transfer_impedance_matrix(wg: WeightedGraphView, edges):
    """Matrix Y with Y[i, j] = unit current flow for edge i read along edge j
    in its stored orientation.  Diagonal entries are the edge probabilities."""
    edges = list(edges)
    if len(edges) != len(set(edges)):
        raise ValueError("edges must be distinct")
    if len(edges) > 64:
        raise ValueError("at most 64 edges supported")
    if not wg.graph.is_connected():
        raise DisconnectedError("graph must be connected")
    g = wg.graph
    w, _ = wg.scaled_weights()
    solver = GroundedSolver(g, w, g.endpoints[edges[0]][0]) if g.n > 1 else None
    Y = np.zeros((len(edges), len(edges)))
    for i, e in enumerate(edges):
        u, v = g.endpoints[e]
        if solver is not None and not (solver.contains(u) and solver.contains(v)):
            raise ElectricError("edge endpoints outside the solvable component")
        pot = solver.potentials([u], [v])
        for j, f in enumerate(edges):
            a, b = g.endpoints[f]
            Y[i, j] = w[f] * (pot[a] - pot[b])
    return Y


def joint_edge_probability(wg: WeightedGraphView, edges) -> float:
    """P(all given edges in the tree) as a transfer-impedance determinant."""
    Y = transfer_impedance_matrix(wg, edges)
    val = float(np.linalg.det(Y))
    if val < -1e-9 or val > 1 + 1e-9:
        raise ElectricError(f"determinant {val} outside [0,1] beyond tolerance")
    return min(max(val, 0.0), 1.0)


def resistance_matrix(wg: WeightedGraphView) -> np.ndarray:
    """All-pairs effective resistances via the Laplacian pseudo-inverse."""
    g = wg.graph
    if not g.is_connected():
        raise DisconnectedError("graph must be connected")
    w, shift = wg.scaled_weights()
    verts = list(range(g.n))
    L = _laplacian_dense(g, w, verts, {v: v for v in verts})
    Lp = np.linalg.pinv(L, hermitian=True)
    d = np.diag(Lp)
    R = d[:, None] + d[None, :] - 2 * Lp
    with np.errstate(over="ignore", under="ignore"):
        return R * math.exp(-shift) if shift else R


# --------------------------------------------------------------------------
# network reductions and resistance bounds
# --------------------------------------------------------------------------

def series_parallel_reduce(wg: WeightedGraphView, protected=()):
    """Merge parallel edges (w1 + w2) and eliminate unprotected degree-2
    vertices (r1 + r2) until fixpoint.

    Preserves the effective resistance between protected vertices.  Returns
    (reduced weighted view, log of reduction steps, vertex map old->new-or-None).
    """
    protected = set(protected)
    verts = list(range(wg.graph.n))
    alive = {v: True for v in verts}
    edges = [(u, v, w) for (u, v), w in zip(wg.graph.endpoints, wg.weights())]
    log = []
    changed = True
    while changed:
        changed = False
        # parallel merges
        groups = {}
        for (u, v, w) in edges:
            groups.setdefault((u, v), []).append(w)
        merged = []
        for (u, v), ws in groups.items():
            if len(ws) > 1:
                log.append(f"parallel {len(ws)} edges ({u},{v}) -> w={sum(ws):.6g}")
                changed = True
            merged.append((u, v, sum(ws)))
        edges = merged
        # series elimination
        deg = {}
        inc = {}
        for idx, (u, v, w) in enumerate(edges):
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
            inc.setdefault(u, []).append(idx)
            inc.setdefault(v, []).append(idx)
        victim = None
        for v in verts:
            if alive[v] and v not in protected and deg.get(v, 0) == 2:
                victim = v
                break
        if victim is not None:
            i1, i2 = inc[victim]
            u1, v1, w1 = edges[i1]
            u2, v2, w2 = edges[i2]
            a = u1 if v1 == victim else v1
            b = u2 if v2 == victim else v2
            new_w = 1.0 / (1.0 / w1 + 1.0 / w2)
            edges = [e for k, e in enumerate(edges) if k not in (i1, i2)]
            alive[victim] = False
            if a != b:
                edges.append((min(a, b), max(a, b), new_w))
                log.append(f"series at {victim}: ({a},{b}) r={1/w1:.6g}+{1/w2:.6g}")
            else:
                log.append(f"series at {victim}: dangling cycle at {a} dropped")
            changed = True
    kept = sorted(v for v in verts if alive[v])
    vmap_full = [None] * wg.graph.n
    for i, v in enumerate(kept):
        vmap_full[v] = i
    g2 = MultiGraph(len(kept), [(vmap_full[u], vmap_full[v]) for u, v, _ in edges])
    w2 = np.array([w for _, _, w in edges]) if edges else np.zeros(0)
    view = explicit_view(g2, w2) if len(w2) else WeightedGraphView(g2, np.zeros(0), 0.0)
    return view, log, vmap_full


def nash_williams_lower_bound(wg: WeightedGraphView, A, B, cutsets) -> float:
    """Sum over disjoint cutsets of 1 / (total cutset weight); always a lower
    bound for the effective resistance between A and B."""
    A, B = set(A), set(B)
    seen = set()
    for cs in cutsets:
        cs = set(cs)
        if cs & seen:
            raise ValueError("cutsets must be pairwise disjoint")
        seen |= cs
        # verify separation: removing cs must disconnect A from B
        w = wg.weights().copy()
        for eid in cs:
            w[eid] = 0.0
        comp = _component_of(wg.graph, w, sorted(A))
        if any(b in comp for b in B):
            raise ValueError("a provided edge set does not separate A from B")
    wts = wg.weights()
    total = 0.0
    for cs in cutsets:
        s = sum(float(wts[eid]) for eid in cs)
        if s <= 0:
            return math.inf
        total += 1.0 / s
    return total


def conditioned_view(wg: WeightedGraphView, include, exclude):
    """Spatial-Markov conditioning: contract the included edges, delete the
    excluded ones, keep the remaining log weights.

    Returns (view on (G - exclude)/include, edge map old id -> new-or-None).
    """
    from .graph import contract_edges, delete_edges_mapped

    g = wg.graph
    g1, emap1 = delete_edges_mapped(g, exclude)
    g2, _, emap2 = contract_edges(g1, [emap1[i] for i in include])
    emap = [None] * g.m
    lw = np.zeros(g2.m)
    for i in range(g.m):
        j1 = emap1[i]
        if j1 is None:
            continue
        j2 = emap2[j1]
        if j2 is None:
            continue
        emap[i] = j2
        lw[j2] = wg.log_weights[i]
    view = WeightedGraphView(g2, -lw, 1.0)
    return view, emap


def spanning_tree_marginal_conditional(wg: WeightedGraphView, eid, include, exclude):
    """P(e in tree | included edges in, excluded edges out) via the spatial
    Markov property."""
    view, emap = conditioned_view(wg, include, exclude)
    if emap[eid] is None:
        return 0.0  # conditioning forces the edge out (it closes a cycle)
    return kirchhoff_edge_probability(view, emap[eid])
