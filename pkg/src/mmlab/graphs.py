"""Port-numbered graphs, the configuration model and checks on sampled hard instances."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CapacityError, DomainError, ExhaustionError, StructuralError, resolve_budget
from .rng import as_generator, stream

INF = math.inf


class PortGraph:
    """Graph with per-vertex ports 0..delta-1.

    ``nbr[u, p]`` is the vertex behind port p of u (-1 if vacant) and
    ``back[u, p]`` the port of that edge at the other end.  Multi-edges are
    never stored: collapsed duplicates are recorded by ``simple = False``.
    """

    def __init__(self, n, delta, nbr=None, back=None, simple=True, tapes=None):
        self.n = int(n)
        self.delta = int(delta)
        shape = (self.n, self.delta)
        self.nbr = np.full(shape, -1, dtype=np.int64) if nbr is None else np.asarray(nbr, dtype=np.int64)
        self.back = np.full(shape, -1, dtype=np.int64) if back is None else np.asarray(back, dtype=np.int64)
        self.simple = bool(simple)
        self.tapes = tapes
        self.validate()

    # -- structure ----------------------------------------------------------

    def validate(self):
        if self.nbr.shape != (self.n, self.delta) or self.back.shape != (self.n, self.delta):
            raise StructuralError("port arrays have the wrong shape")
        used = self.nbr >= 0
        if ((self.back >= 0) != used).any():
            raise StructuralError("vacant ports must be vacant on both arrays")
        u, p = np.nonzero(used)
        v, q = self.nbr[u, p], self.back[u, p]
        if (v >= self.n).any() or (q >= self.delta).any():
            raise StructuralError("port entry out of range")
        if not ((self.nbr[v, q] == u) & (self.back[v, q] == p)).all():
            raise StructuralError("port maps are not involutive")
        if (u == v).any():
            raise StructuralError("self-loops are not representable")
        return self

    def degree(self):
        return (self.nbr >= 0).sum(axis=1)

    def is_regular(self, delta=None):
        delta = self.delta if delta is None else delta
        return bool((self.degree() == delta).all())

    def add_edge(self, u, v, pu=None, pv=None):
        if u == v:
            raise StructuralError("self-loop")
        if v in self.nbr[u]:
            raise StructuralError(f"edge {u}-{v} already present")
        pu = int(np.flatnonzero(self.nbr[u] < 0)[0]) if pu is None else pu
        pv = int(np.flatnonzero(self.nbr[v] < 0)[0]) if pv is None else pv
        if self.nbr[u, pu] >= 0 or self.nbr[v, pv] >= 0:
            raise StructuralError("port already in use")
        self.nbr[u, pu], self.back[u, pu] = v, pv
        self.nbr[v, pv], self.back[v, pv] = u, pu

    def edges(self):
        """Edge array (m, 4) of (u, port_u, v, port_v) with u < v, sorted."""
        u, p = np.nonzero(self.nbr >= 0)
        v, q = self.nbr[u, p], self.back[u, p]
        keep = u < v
        out = np.stack([u[keep], p[keep], v[keep], q[keep]], axis=1)
        return out[np.lexsort((out[:, 2], out[:, 0]))]

    @property
    def m(self):
        return int((self.nbr >= 0).sum() // 2)

    def neighbors(self, u):
        row = self.nbr[u]
        return row[row >= 0]

    def adjacency_lists(self):
        return [self.neighbors(u).tolist() for u in range(self.n)]

    def edge_index(self):
        """Canonical edge id for every used port, -1 for vacant ones."""
        e = self.edges()
        idx = np.full((self.n, self.delta), -1, dtype=np.int64)
        ids = np.arange(len(e))
        idx[e[:, 0], e[:, 1]] = ids
        idx[e[:, 2], e[:, 3]] = ids
        return idx

    def copy(self):
        return PortGraph(self.n, self.delta, self.nbr.copy(), self.back.copy(), self.simple, self.tapes)

    # -- file format --------------------------------------------------------

    def to_text(self):
        lines = [f"mmll-graph v1 n={self.n} delta={self.delta} simple={int(self.simple)}"]
        lines += [f"{u} {p + 1} {v} {q + 1}" for u, p, v, q in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.split() for ln in text.strip().splitlines()]
        head = rows[0]
        if head[:2] != ["mmll-graph", "v1"]:
            raise StructuralError("not an mmll-graph v1 file")
        kv = dict(tok.split("=") for tok in head[2:])
        g = cls(int(kv["n"]), int(kv["delta"]), simple=bool(int(kv["simple"])))
        for r in rows[1:]:
            u, p, v, q = map(int, r)
            g.add_edge(u, v, p - 1, q - 1)
        return g.validate()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())


def from_edges(n, edges, delta=None):
    """PortGraph from an undirected simple edge list; ports are assigned in list order."""
    edges = [(int(a), int(b)) for a, b in edges]
    deg = np.zeros(n, dtype=np.int64)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    delta = int(deg.max(initial=0)) if delta is None else delta
    g = PortGraph(n, delta)
    for a, b in edges:
        g.add_edge(a, b)
    return g


def cycle_graph(n):
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)], 2)


def complete_graph(n):
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], n - 1)


def path_graph(n):
    return from_edges(n, [(i, i + 1) for i in range(n - 1)], 2 if n > 2 else max(n - 1, 0))


def star_graph(k):
    return from_edges(k + 1, [(0, i) for i in range(1, k + 1)], k)


# ---------------------------------------------------------------------------
# configuration model


def sample_configuration_model(n, delta, seed=0):
    """Uniform perfect matching of the n*delta points, mapped to vertices.

    Point pairs inside one cluster are dropped; repeated cluster pairs keep
    only their first edge and mark the graph as not simple.  Ports follow
    the point index inside the cluster.
    """
    if n < 2 or (n * delta) % 2:
        raise DomainError("the configuration model needs n >= 2 and n*delta even")
    rng = as_generator(seed)
    pts = rng.permutation(n * delta).reshape(-1, 2)
    cu, pu = np.divmod(pts[:, 0], delta)
    cv, pv = np.divmod(pts[:, 1], delta)
    g = PortGraph(n, delta)
    simple = True
    seen = set()
    for a, p, b, q in zip(cu.tolist(), pu.tolist(), cv.tolist(), pv.tolist()):
        if a == b:
            simple = False
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen:
            simple = False
            continue
        seen.add(key)
        g.nbr[a, p], g.back[a, p] = b, q
        g.nbr[b, q], g.back[b, q] = a, p
    g.simple = simple
    return g


def simple_regular_probability(delta, g):
    """exp(-sum_{r=1..g} (delta-1)^r / (2r)): limiting Pr[regular and girth > g]."""
    return math.exp(-sum((delta - 1) ** r / (2 * r) for r in range(1, g + 1)))


# ---------------------------------------------------------------------------
# girth


def girth(g):
    """Shortest cycle length by BFS from every vertex, truncated at the best length so far."""
    adj = g.adjacency_lists()
    best = INF
    for s in range(g.n):
        dist = {s: 0}
        parent = {s: -1}
        q = deque([s])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in adj[u]:
                if w == parent[u]:
                    continue
                if w in dist:
                    best = min(best, dist[u] + dist[w] + 1)
                else:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    q.append(w)
    return best if best == INF else int(best)


def girth_by_edges(g, bound=None):
    """Second girth algorithm: for each edge, the shortest path between its ends avoiding it.

    With ``bound`` set only cycles of length <= bound are searched, and
    INF means no such cycle exists.
    """
    adj = g.adjacency_lists()
    best = INF if bound is None else bound + 1  # only cycles shorter than best matter
    for u, _, v, _ in g.edges().tolist():
        max_depth = best - 2
        dist = {u: 0}
        q = deque([u])
        found = None
        while q and found is None:
            a = q.popleft()
            if dist[a] >= max_depth:
                continue
            for b in adj[a]:
                if (a == u and b == v) or b in dist:
                    continue
                dist[b] = dist[a] + 1
                if b == v:
                    found = dist[b]
                    break
                q.append(b)
        if found is not None:
            best = found + 1
    if best == INF or (bound is not None and best == bound + 1):
        return INF
    return int(best)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class SubgraphCheck:
    size: int
    edges: int
    branch: str
    lhs: float
    rhs: float
    passed: Optional[bool]


@dataclass
class ExpansionCheck:
    size: int
    neighborhood: int
    ratio: float
    threshold: float
    in_window: bool
    passed: Optional[bool]


@dataclass
class InstanceCertificate:
    girth: float
    regular: bool
    simple: bool
    girth_check: float
    tries: int = 1
    acceptance_rate: float = 1.0
    method: str = "reject"
    switches: int = 0
    subgraph: list = field(default_factory=list)
    expansion: list = field(default_factory=list)

    def to_json(self):
        d = asdict(self)
        for k in ("girth", "girth_check"):
            d[k] = "inf" if d[k] == INF else int(d[k])
        return json.dumps(d, indent=2)


def certify(g, cross_check_edges=10_000):
    gi = girth(g)
    check = gi
    if g.m <= cross_check_edges:
        bound = None if gi == INF else gi
        check = girth_by_edges(g, bound)
        if check != gi:
            raise AssertionError(f"girth algorithms disagree: {gi} vs {check}")
    return InstanceCertificate(gi, g.is_regular(), g.simple, check)


def _graph_from_pairs(n, delta, mate):
    g = PortGraph(n, delta)
    simple = True
    seen = set()
    for p in range(n * delta):
        q = int(mate[p])
        if q < p:
            continue
        (a, i), (b, j) = divmod(p, delta), divmod(q, delta)
        key = (min(a, b), max(a, b))
        if a == b or key in seen:
            simple = False
            continue
        seen.add(key)
        g.nbr[a, i], g.back[a, i] = b, j
        g.nbr[b, j], g.back[b, j] = a, i
    g.simple = simple
    return g


def _has_short_path(adj, u, x, max_len):
    """Is there a u-x walk of length <= max_len in the multigraph adjacency (dict of counts)?"""
    if max_len < 1:
        return False
    if u == x:
        return True
    dist = {u: 0}
    q = deque([u])
    while q:
        a = q.popleft()
        if dist[a] >= max_len:
            continue
        for b in adj[a]:
            if b == x:
                return True
            if b not in dist:
                dist[b] = dist[a] + 1
                q.append(b)
    return False


def repair_by_switching(n, delta, girth_target, seed=0, max_switches=1_000_000):
    """Configuration-model pairing repaired by double-edge switches until simple, regular, girth >= target.

    A pair is bad if it is a loop, a repeated pair or lies on a cycle
    shorter than ``girth_target``.  A bad pair {p, q} and a random pair
    {r, s} are switched to {p, r}, {q, s} only when neither new pair closes
    a cycle shorter than the target, so the set of short cycles only shrinks.
    Returns (graph, number of switches).
    """
    rng = as_generator(seed)
    pts = rng.permutation(n * delta).reshape(-1, 2)
    mate = np.empty(n * delta, dtype=np.int64)
    mate[pts[:, 0]], mate[pts[:, 1]] = pts[:, 1], pts[:, 0]
    vert = lambda p: int(p) // delta  # noqa: E731
    adj = [dict() for _ in range(n)]

    def link(a, b, k):
        for x, y in ((a, b), (b, a)):
            c = adj[x].get(y, 0) + k
            if c:
                adj[x][y] = c
            else:
                del adj[x][y]

    for p, q in pts:
        link(vert(p), vert(q), 1)

    def bad(p):
        a, b = vert(p), vert(mate[p])
        if a == b or adj[a][b] > 1:
            return True
        link(a, b, -1)
        short = _has_short_path(adj, a, b, girth_target - 2)
        link(a, b, 1)
        return short

    queue = [int(p) for p in pts[:, 0] if bad(p)]
    switches = 0
    while queue:
        p = queue.pop()
        if not bad(p):
            continue
        for _ in range(1000):
            switches += 1
            if switches > max_switches:
                raise ExhaustionError(f"switching did not converge in {max_switches} attempts")
            q = int(mate[p])
            r = int(rng.integers(n * delta))
            s = int(mate[r])
            if r in (p, q):
                continue
            if rng.random() < 0.5:
                r, s = s, r
            a, b, c, d = vert(p), vert(q), vert(r), vert(s)
            link(a, b, -1)
            link(c, d, -1)
            ok = a != c and not _has_short_path(adj, a, c, girth_target - 2)
            if ok:
                link(a, c, 1)
                ok = b != d and not _has_short_path(adj, b, d, girth_target - 2)
                if ok:
                    link(b, d, 1)
                else:
                    link(a, c, -1)
            if ok:
                mate[p], mate[r], mate[q], mate[s] = r, p, s, q
                break
            link(a, b, 1)
            link(c, d, 1)
        else:
            queue.append(p)
    return _graph_from_pairs(n, delta, mate), switches


def sample_hard_instance(n, delta, girth_target, max_tries=10_000, seed=0, method="reject"):
    """A simple delta-regular graph with girth >= girth_target, with its certificate.

    ``method="reject"`` resamples the configuration model until the sample
    qualifies, which is feasible while (delta-1)^(2*girth_target-1) is small
    next to n.  ``method="switch"`` repairs one sample by edge switches
    instead, which reaches targets far outside that envelope.  ``"auto"``
    rejects when the limiting acceptance rate promises about 20 hits within
    ``max_tries`` and switches otherwise.
    """
    if girth_target < 3:
        raise DomainError("girth_target must be at least 3")
    if n < 2 or (n * delta) % 2:
        raise DomainError("n*delta must be even")
    if method == "auto":
        rate = simple_regular_probability(delta, girth_target - 1)
        method = "reject" if rate * max_tries >= 20 else "switch"
    if method == "switch":
        g, switches = repair_by_switching(n, delta, girth_target, stream(seed, "switch"))
        cert = certify(g)
        if not (g.simple and g.is_regular() and cert.girth >= girth_target):
            raise AssertionError("switching produced an invalid instance")
        cert.method, cert.switches = "switch", switches
        return g, cert
    if method != "reject":
        raise ValueError(f"unknown method {method!r}")
    for t in range(1, max_tries + 1):
        g = sample_configuration_model(n, delta, stream(seed, "hard_instance", t))
        if not (g.simple and g.is_regular()):
            continue
        if girth(g) >= girth_target:
            cert = certify(g)
            cert.tries, cert.acceptance_rate = t, 1 / t
            return g, cert
    raise ExhaustionError(
        f"no instance with girth >= {girth_target} in {max_tries} tries (acceptance rate 0 of {max_tries}); "
        f"limiting rate {simple_regular_probability(delta, girth_target - 1):.3g}")


def induced_edges(g, S):
    mask = np.zeros(g.n, dtype=bool)
    mask[np.asarray(list(S), dtype=np.int64)] = True
    e = g.edges()
    return int((mask[e[:, 0]] & mask[e[:, 2]]).sum()) if len(e) else 0


def subgraph_size_check(g, S):
    """Edge count of G[S] against the two density branches for sampled hard instances."""
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    if len(S) and (S.min() < 0 or S.max() >= g.n):
        raise DomainError("S is not a subset of V(G)")
    k, n, d = len(S), g.n, g.delta
    e = induced_edges(g, S)
    cut = 1e6 * n * math.log(d) / d if d > 1 else INF
    if k > cut:
        mu = k * k * d / (2 * n)
        lhs, rhs = abs(e - mu), k * k * d / (50 * n)
        return SubgraphCheck(k, e, "b", lhs, rhs, lhs < rhs)
    if math.sqrt(n) <= k:
        rhs = 1e8 * math.log(n / k) * k
        return SubgraphCheck(k, e, "a", float(e), rhs, e < rhs)
    return SubgraphCheck(k, e, "n/a", float(e), INF, None)


def density_check(g, S):
    """Branch (b)'s inequality |E(G[S])| within |S|^2 delta / (50 n) of |S|^2 delta / (2n), any size."""
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    k, n, d = len(S), g.n, g.delta
    e = induced_edges(g, S)
    lhs, rhs = abs(e - k * k * d / (2 * n)), k * k * d / (50 * n)
    return SubgraphCheck(k, e, "b*", lhs, rhs, lhs < rhs)


def closed_neighborhood(g, S):
    S = np.asarray(list(S), dtype=np.int64)
    nb = g.nbr[S].ravel()
    return np.union1d(S, nb[nb >= 0])


def expansion_check(g, S):
    """|N(S)| / |S| against sqrt(min(delta, n / |S|)), with N(S) including S."""
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    k, n, d = len(S), g.n, g.delta
    if k == 0:
        raise DomainError("S must be nonempty")
    N = len(closed_neighborhood(g, S))
    ratio = N / k
    thr = math.sqrt(min(d, n / k))
    lo = n / math.exp(d ** 0.25 / 1e9)
    in_window = lo <= k <= 4 * n / 5
    return ExpansionCheck(k, N, ratio, thr, in_window, (ratio > thr) if in_window else None)


# ---------------------------------------------------------------------------
# matching intersection distribution


def _feasible(n, k, t):
    return t >= 0 and k - 2 * t >= 0 and n // 2 - k + t >= 0


def matching_intersection_pmf(n, k, t):
    """Pr[|M cap E(K_n[S])| = t] for a uniform perfect matching M of K_n and |S| = k."""
    if n % 2 or not 0 <= k <= n:
        raise DomainError("need even n and 0 <= k <= n")
    if not _feasible(n, k, t):
        return 0.0
    lg = math.lgamma
    h = n // 2
    val = (lg(k + 1) + lg(n - k + 1) + lg(h + 1) + (k - 2 * t) * math.log(2)
           - lg(k - 2 * t + 1) - lg(t + 1) - lg(h - k + t + 1) - lg(n + 1))
    return math.exp(val)


def matching_intersection_pmf_exact(n, k, t):
    """The same probability as an exact Fraction."""
    if n % 2 or not 0 <= k <= n:
        raise DomainError("need even n and 0 <= k <= n")
    if not _feasible(n, k, t):
        return Fraction(0)
    f = math.factorial
    h = n // 2
    num = f(k) * f(n - k) * f(h) * 2 ** (k - 2 * t)
    den = f(k - 2 * t) * f(t) * f(h - k + t) * f(n)
    return Fraction(num, den)


def matching_support(n, k):
    return [t for t in range(0, k // 2 + 1) if _feasible(n, k, t)]


def matching_mean(n, k):
    return k * (k - 1) / (2 * (n - 1))


def matching_tail_bounds(n, k, delta):
    """(upper, lower) tail bounds exp(-d^2 mu / (2 + 2d)) and exp(-d^2 mu / 2)."""
    mu = matching_mean(n, k)
    upper = math.exp(-delta * delta * mu / (2 + 2 * delta))
    lower = math.exp(-delta * delta * mu / 2) if 0 < delta < 1 else None
    return upper, lower


def matching_tails(n, k, delta):
    """Exact Pr[X >= (1+d) mu] and Pr[X <= (1-d) mu]."""
    mu = Fraction(k * (k - 1), 2 * (n - 1))
    d = Fraction(delta)
    up = sum((matching_intersection_pmf_exact(n, k, t) for t in matching_support(n, k) if t >= (1 + d) * mu),
             Fraction(0))
    lo = sum((matching_intersection_pmf_exact(n, k, t) for t in matching_support(n, k) if t <= (1 - d) * mu),
             Fraction(0))
    return up, lo


def is_ultra_log_concave(p):
    """p(t)^2 >= ((t+1)/t) p(t-1) p(t+1) for all interior t (exact on Fractions)."""
    for t in range(1, len(p) - 1):
        if p[t] * p[t] * t < (t + 1) * p[t - 1] * p[t + 1]:
            return False
    return True


# ---------------------------------------------------------------------------
# trees and line graphs


def tree_size(delta, depth):
    if depth == 0:
        return 1
    if delta == 1:
        return 2
    if delta == 2:
        return 1 + 2 * depth
    return 1 + delta * ((delta - 1) ** depth - 1) // (delta - 2)


def delta_ary_tree(delta, depth, budget=None):
    """Rooted tree of the given depth in which every internal vertex has degree delta.

    The root is vertex 0; children are added breadth first, so parents
    always have smaller indices and port 0 of a non-root vertex is its parent.
    """
    if depth < 0:
        raise DomainError("depth must be >= 0")
    n = tree_size(delta, depth)
    budget = resolve_budget(budget)
    if n > budget:
        raise CapacityError(n, budget)
    g = PortGraph(n, delta)
    nxt = 1
    frontier = [0]
    for _ in range(depth):
        new = []
        for u in frontier:
            for _ in range(delta - (1 if u else 0)):
                g.add_edge(u, nxt, None, 0)
                new.append(nxt)
                nxt += 1
        frontier = new
    return g


def line_graph(g):
    """Vertices are the edges of g (in ``g.edges()`` order), adjacent when they share an endpoint."""
    if not g.simple:
        raise DomainError("line_graph needs a simple graph")
    e = g.edges()
    inc = [[] for _ in range(g.n)]
    for k, (u, _, v, _) in enumerate(e):
        inc[u].append(k)
        inc[v].append(k)
    pairs = {(a, b) for lst in inc for i, a in enumerate(lst) for b in lst[i + 1:]}
    return from_edges(len(e), sorted(pairs), max(0, 2 * g.delta - 2))


def is_matching(g, edge_ids):
    e = g.edges()[np.asarray(list(edge_ids), dtype=np.int64)]
    ends = np.concatenate([e[:, 0], e[:, 2]]) if len(e) else np.zeros(0, dtype=np.int64)
    return len(np.unique(ends)) == len(ends)


def is_independent(g, vertices):
    mask = np.zeros(g.n, dtype=bool)
    mask[np.asarray(list(vertices), dtype=np.int64)] = True
    e = g.edges()
    return not (mask[e[:, 0]] & mask[e[:, 2]]).any() if len(e) else True


def is_maximal_matching(g, edge_ids):
    e = g.edges()
    chosen = e[np.asarray(list(edge_ids), dtype=np.int64)]
    covered = np.zeros(g.n, dtype=bool)
    covered[chosen[:, 0]] = True
    covered[chosen[:, 2]] = True
    return is_matching(g, edge_ids) and bool((covered[e[:, 0]] | covered[e[:, 2]]).all())


def greedy_independent_set(g, order=None):
    """Greedy maximal independent set in the given vertex order (a lower bound on alpha)."""
    order = range(g.n) if order is None else order
    blocked = np.zeros(g.n, dtype=bool)
    out = []
    for u in order:
        if not blocked[u]:
            out.append(int(u))
            blocked[u] = True
            blocked[g.neighbors(u)] = True
    return out
