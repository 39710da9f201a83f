"""Running edge-centered matching algorithms on port-numbered graphs.

Labels live on edges.  The r-flower view of an edge {u, v} is read off the
graph with u as side A when u < v; at every vertex the child edges are taken
in increasing port order, skipping the port the walk arrived through.  The
view of every edge is a fixed index map into the edge-tape vector, so one
trial is a gather followed by a batched table or rule evaluation.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import graphs as gl
from . import labels as la
from .errors import ViewError
from .rng import stream

POLICIES = ("strict", "pad", "interior")


def dependence_chernoff_bound(n, lam, chi):
    """exp(-2 lam^2 / (n chi)) for n [0,1]-valued variables with dependency chromatic number chi."""
    if lam < 0 or chi < 1:
        raise ValueError("need lam >= 0 and chi >= 1")
    return math.exp(-2.0 * lam * lam / (n * chi))


@lru_cache(maxsize=None)
def _other_ports(delta):
    return np.array([[q for q in range(delta) if q != p] for p in range(delta)], dtype=np.int64)


@dataclass
class ViewMap:
    """Edge-id map of every flower view; -1 entries are virtual (padding) positions."""

    index: np.ndarray  # (m, flower_len)
    valid: np.ndarray  # (m,) view is a genuine element of F_r
    shape: la.Shape


def view_map(g, r):
    """Index map (m, flower_len) from each edge's flower coordinates to edge ids.

    An entry is -1 where the walk leaves the graph (a vacant port).  A view
    is valid when it has no such entry and visits no vertex twice, i.e. the
    (r+1)-ball around the edge is a Delta-regular tree.
    """
    e = g.edges()
    m, delta = len(e), g.delta
    eid = g.edge_index()
    others = _other_ports(delta)
    shape = la.Shape(delta, r)
    index = np.empty((m, shape.flower_len), dtype=np.int64)
    index[:, 0] = np.arange(m)
    valid = np.ones(m, dtype=bool)
    seen = [e[:, 0:1], e[:, 2:3]]
    for side, (vcol, pcol) in zip(la.SIDES, ((0, 1), (2, 3))):
        vert, port = e[:, vcol : vcol + 1], e[:, pcol : pcol + 1]
        for s in range(1, r + 1):
            ok = vert >= 0
            qs = others[np.where(ok, port, 0)]  # (m, k, delta-1)
            vv = np.where(ok, vert, 0)[:, :, None]
            nxt_e = np.where(ok[:, :, None], eid[vv, qs], -1).reshape(m, -1)
            nxt_v = np.where(ok[:, :, None], g.nbr[vv, qs], -1).reshape(m, -1)
            nxt_p = np.where(ok[:, :, None], g.back[vv, qs], -1).reshape(m, -1)
            index[:, shape.flower_row(s, side)] = nxt_e
            valid &= (nxt_e >= 0).all(axis=1)
            seen.append(nxt_v)
            vert, port = nxt_v, nxt_p
    allv = np.concatenate(seen, axis=1)
    srt = np.sort(np.where(allv >= 0, allv, -1 - np.arange(allv.shape[1])), axis=1)
    valid &= (np.diff(srt, axis=1) != 0).all(axis=1)
    return ViewMap(index, valid, shape)


def extract_flower_view(g, edge, r, tapes, model, policy="strict", pad=None):
    """The flower of one edge (row index into ``g.edges()``) filled with tape labels."""
    vm = view_map(g, r)
    if not vm.valid[edge] and policy == "strict":
        raise ViewError(f"edge {edge}: radius-{r} view is not a tree with full degree")
    idx = vm.index[edge]
    labels = np.where(idx >= 0, np.asarray(tapes)[np.maximum(idx, 0)], 0 if pad is None else pad)
    return la.Flower(vm.shape, model, labels.astype(model.dtype))


def edge_tapes(m, model, seed, trial=0):
    """Per-edge labels for one trial, deterministic in (seed, trial, edge id)."""
    return model.sample(stream(seed, "tapes", trial), m)


@dataclass
class MatchingOutcome:
    selected: np.ndarray
    matched: np.ndarray
    is_matching: bool
    is_maximal: bool
    unmatched_adjacent_pairs: int
    valid_views: int
    policy: str

    @property
    def unmatched(self):
        return int((~self.matched).sum())


def outcome_from_selection(g, sel, policy="strict", valid_views=None):
    e = g.edges()
    chosen = e[sel]
    hits = np.bincount(np.concatenate([chosen[:, 0], chosen[:, 2]]), minlength=g.n)
    matched = hits > 0
    is_matching = bool((hits <= 1).all())
    free_pairs = int((~matched[e[:, 0]] & ~matched[e[:, 2]]).sum()) if len(e) else 0
    return MatchingOutcome(np.flatnonzero(sel), matched, is_matching, is_matching and free_pairs == 0, free_pairs,
                           len(e) if valid_views is None else int(valid_views), policy)


class Runner:
    """Reusable evaluation of one algorithm on one graph across trials."""

    def __init__(self, f, g, policy="strict", vm=None):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.f, self.g, self.policy = f, g, policy
        self.vm = view_map(g, f.radius) if vm is None else vm
        if self.vm.shape != f.shape:
            raise ViewError(f"graph degree {g.delta} does not match algorithm shape {f.shape}")
        if policy == "strict" and not self.vm.valid.all():
            bad = int(np.flatnonzero(~self.vm.valid)[0])
            raise ViewError(f"edge {bad}: radius-{f.radius} view is not a tree with full degree")
        self.virtual = self.vm.index < 0

    def selection(self, seed, trial=0):
        m = len(self.vm.index)
        tapes = edge_tapes(m, self.f.model, seed, trial)
        labels = tapes[np.maximum(self.vm.index, 0)]
        if self.virtual.any():
            pad = self.f.model.sample(stream(seed, "pad", trial), labels.shape)
            labels = np.where(self.virtual, pad, labels)
        sel = np.asarray(self.f.accepts(labels), dtype=bool)
        if self.policy == "interior":
            sel &= self.vm.valid
        return sel

    def run(self, seed, trial=0):
        sel = self.selection(seed, trial)
        out = outcome_from_selection(self.g, sel, self.policy, int(self.vm.valid.sum()))
        if self.f.status.startswith("verified") and self.policy == "strict" and not out.is_matching:
            raise AssertionError("a verified matching-certified algorithm produced incident edges")
        return out


def run(f, g, seed=0, policy="strict", trial=0):
    """Evaluate f on every edge view of g with tapes drawn from ``seed``."""
    return Runner(f, g, policy).run(seed, trial)


@dataclass
class SurvivalReport:
    n: int
    trials: int
    unmatched: np.ndarray
    adjacent_pairs: np.ndarray
    maximal: np.ndarray
    policy: str
    chi: float
    concentration: list = field(default_factory=list)

    @property
    def mean_fraction(self):
        return float(self.unmatched.mean() / self.n)

    @property
    def var_fraction(self):
        return float(self.unmatched.var(ddof=1) / self.n**2) if self.trials > 1 else 0.0

    @property
    def pr_maximal(self):
        return float(self.maximal.mean())

    def stderr(self):
        return math.sqrt(self.var_fraction / self.trials)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["trial", "unmatched_count", "adjacent_unmatched_pairs", "is_maximal"])
        for t in range(self.trials):
            w.writerow([t, int(self.unmatched[t]), int(self.adjacent_pairs[t]), int(self.maximal[t])])
        return buf.getvalue()

    def summary(self):
        return {
            "n": self.n,
            "trials": self.trials,
            "policy": self.policy,
            "mean_unmatched_fraction": self.mean_fraction,
            "var_unmatched_fraction": self.var_fraction,
            "pr_maximal": self.pr_maximal,
            "chi": self.chi,
            "concentration": self.concentration,
        }


def survival_stats(f, g, trials, seed=0, policy="strict", workers=1, lambdas=None):
    """Per-trial unmatched counts and the lower-tail check against the dependence bound.

    Trial t always uses tape stream (seed, t), so results do not depend on
    ``workers``.  ``lambdas`` are absolute deviations of the unmatched count;
    the default grid is n/100, n/50, n/20.
    """
    runner = Runner(f, g, policy)

    def one(t):
        o = runner.run(seed, t)
        return o.unmatched, o.unmatched_adjacent_pairs, o.is_maximal

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, range(trials)))
    else:
        rows = [one(t) for t in range(trials)]
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    chi = float(g.delta) ** (4 * f.radius)
    rep = SurvivalReport(g.n, trials, arr[:, 0], arr[:, 1], arr[:, 2].astype(bool), policy, chi)
    lambdas = [g.n / 100, g.n / 50, g.n / 20] if lambdas is None else lambdas
    mean = rep.unmatched.mean()
    for lam in lambdas:
        emp = float((rep.unmatched < mean - lam).mean())
        bound = dependence_chernoff_bound(g.n, lam, chi)
        rep.concentration.append({"lambda": float(lam), "empirical": emp, "bound": bound, "ok": emp <= bound})
    return rep


def ball(g, v, R):
    """Vertices within distance R of v."""
    seen = {int(v)}
    frontier = [int(v)]
    for _ in range(R):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u).tolist():
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


def local_maximality(outcome, g, v, R):
    """No edge with both ends unmatched lies inside the radius-R ball around v."""
    if R < 0:
        raise ValueError("R must be >= 0")
    inside = np.zeros(g.n, dtype=bool)
    inside[list(ball(g, v, R))] = True
    e = g.edges()
    if not len(e):
        return True
    free = ~outcome.matched
    bad = inside[e[:, 0]] & inside[e[:, 2]] & free[e[:, 0]] & free[e[:, 2]]
    return not bad.any()


def local_maximality_rate(f, g, vertices, R, trials, seed=0, policy="pad"):
    """Fraction of (trial, vertex) pairs whose radius-R ball is maximal."""
    runner = Runner(f, g, policy)
    hits = 0
    for t in range(trials):
        o = runner.run(seed, t)
        hits += sum(local_maximality(o, g, v, R) for v in vertices)
    return hits / (trials * len(vertices))


def greedy_reference(g, tapes):
    """Edges whose tape is strictly below every adjacent edge's tape (direct recomputation)."""
    e = g.edges()
    eid = g.edge_index()
    sel = np.zeros(len(e), dtype=bool)
    for k, (u, _, v, _) in enumerate(e.tolist()):
        adj = [x for x in np.concatenate([eid[u], eid[v]]).tolist() if x >= 0 and x != k]
        sel[k] = all(tapes[k] < tapes[x] for x in adj)
    return sel
