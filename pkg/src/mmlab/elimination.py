"""Round elimination: dir, Q, good flowers, extension profiles, delta_dom, f -> g and its audit.

Two evaluation paths are provided.  The per-object functions (``dir``,
``q_value``, ``is_good``, ``extension_profile``, ``delta_dom``) work on one
neighborhood or flower at a time; under Discrete labels they enumerate the
relevant completions and return exact Fractions, and under continuous labels
they fall back to nested Monte Carlo.  ``Analysis`` computes the same
quantities for every object of a Discrete shape at once with bincounts, and
is what ``eliminate`` and ``audit`` use.

All probabilities in the Discrete path share a few fixed denominators, so
they are carried as integer counts and turned into Fractions when reported.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional

import numpy as np

from . import algorithms as al
from . import constants as K
from . import labels as la
from .errors import DomainError, ExclusivityError, check_budget
from .rng import as_generator


DEFAULT_INNER = 64


def _as_fraction(x):
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# per-object evaluation


def _completions(model, n, k, rng, batch):
    """Free-label completions: all of them (Discrete, k None) or k random draws per batch row."""
    if k is None and not model.is_discrete:
        k = DEFAULT_INNER
    if k is None:
        return la.Codec(model.L, n).decode(np.arange(model.L**n))[None]
    return model.sample(rng, (batch, k, n))


def dir_batch(f, y, inner=None, rng=None):
    """dir(f, y) for a batch of r-neighborhood label rows.

    Exact under Discrete labels when ``inner`` is None; otherwise each
    direction is tested with ``inner`` random extensions.
    """
    delta, r = f.delta, f.radius
    y = np.atleast_2d(np.asarray(y))
    rng = as_generator(rng)
    em, free = la.end_map(delta, r, "A"), la.cond_end_free(delta, r, "A")
    comp = None
    has = np.zeros((delta, len(y)), dtype=bool)
    for i in range(1, delta + 1):
        yi = y[:, la.shuffle_map(delta, r, la.special_perm(i, delta))]
        if comp is None or inner is not None:
            comp = _completions(f.model, len(free), inner, rng, len(y))
        w = la.scatter(f.shape.flower_len, [(em, yi[:, None, :]), (free, comp)], f.model.dtype)
        has[i - 1] = f.accepts(w).any(axis=-1)
    cnt = has.sum(axis=0)
    if (cnt > 1).any():
        k = int(np.flatnonzero(cnt > 1)[0])
        raise ExclusivityError(f"neighborhood {y[k].tolist()} has accepting extensions in directions "
                               f"{(np.flatnonzero(has[:, k]) + 1).tolist()}")
    return np.where(cnt == 1, has.argmax(axis=0) + 1, 0)


def dir(f, y, inner=None, seed=0):  # noqa: A001 - name follows the math
    """The unique direction i with an accepting extension end_A(w) = sigma_i(y), else 0."""
    if y.shape != f.shape:
        raise DomainError(f"dir needs a radius-{f.radius} neighborhood")
    if f.radius < 1:
        raise DomainError("dir is defined for r >= 1")
    return int(dir_batch(f, y.labels, inner, seed)[0])


def q_batch(f, x, outer=None, inner=None, rng=None):
    """Q(f, x) for a batch of (r-1)-flower label rows.

    Exact counts over ``L**free`` completions when Discrete and ``outer`` is
    None (returned as Fractions); Monte Carlo means otherwise.
    """
    delta, r = f.delta, f.radius
    x = np.atleast_2d(np.asarray(x))
    rng = as_generator(rng)
    rm, free = la.res_map(delta, r, 1), la.cond_res_free(delta, r, 1)
    comp = _completions(f.model, len(free), outer, rng, len(x))
    z = la.scatter(f.shape.nbhd_len, [(rm, x[:, None, :]), (free, comp)], f.model.dtype)
    n_comp = z.shape[1]
    d = dir_batch(f, z.reshape(-1, z.shape[-1]), inner, rng).reshape(len(x), n_comp)
    hits = (d == 1).sum(axis=1)
    if f.model.is_discrete and outer is None:
        return [Fraction(int(h), n_comp) for h in hits]
    return hits / n_comp


def q_value(f, x, outer=None, inner=None, seed=0):
    """Q(f, x) = Pr[dir(f, y) = 1 | res_1(y) = x] for an (r-1)-flower x."""
    if x.shape != f.shape.with_radius(f.radius - 1):
        raise DomainError(f"q_value needs a radius-{f.radius - 1} flower")
    return q_batch(f, x.labels, outer, inner, seed)[0]


def is_good(f, x, delta, outer=None, inner=None, seed=0):
    """x is delta-good iff Q(f, x) >= 1 - delta and Q(f, reverse(x)) >= 1 - delta."""
    q = q_batch(f, np.stack([x.labels, la.reverse(x).labels]), outer, inner, seed)
    thr = 1 - _as_fraction(delta) if isinstance(q[0], Fraction) else 1 - float(delta)
    return bool(q[0] >= thr and q[1] >= thr)


@dataclass(frozen=True)
class ExtensionProfile:
    p: tuple
    p_max: object
    i_max: int
    total: object
    comp: object

    @classmethod
    def from_values(cls, values):
        values = tuple(values)
        top = max(values)
        winners = [i for i, v in enumerate(values, start=1) if v == top]
        total = sum(values, type(top)(0))
        return cls(values, top, winners[0] if len(winners) == 1 else 0, total, total - top)

    def to_json(self):
        return {
            "p": [str(v) for v in self.p],
            "p_max": str(self.p_max),
            "i_max": self.i_max,
            "P": str(self.total),
            "P_comp": str(self.comp),
        }


def _extension_thresholds(f, x, outer, inner, rng):
    """For each direction, t_y = 1 - min(Q(y), Q(reverse y)) over the extensions y of sigma_i(x)."""
    delta, r1 = f.delta, f.radius - 1
    out = []
    for i in range(1, delta + 1):
        xi = la.shuffle(la.special_perm(i, delta), x)
        if f.model.is_discrete and outer is None:
            ys = la.enumerate_cond_end("A", xi)
        else:
            ys = la.sample_cond_end("A", xi, rng, size=outer)
        rev = ys[:, la.reverse_map(delta, r1)]
        q = q_batch(f, np.concatenate([ys, rev]), outer, inner, rng)
        qa, qb = q[: len(ys)], q[len(ys):]
        out.append([1 - min(a, b) for a, b in zip(qa, qb)])
    return out


def extension_profile(f, x, delta, outer=None, inner=None, seed=0):
    """P_i(f, x, delta) = Pr[y good | end_A(y) = sigma_i(x)] and the derived fields."""
    if x.shape != f.shape.with_radius(f.radius - 1):
        raise DomainError(f"extension_profile needs a radius-{f.radius - 1} neighborhood")
    ts = _extension_thresholds(f, x, outer, inner, as_generator(seed))
    exact = isinstance(ts[0][0], Fraction)
    d = _as_fraction(delta) if exact else float(delta)
    vals = [Fraction(sum(t <= d for t in row), len(row)) if exact else float(np.mean([t <= d for t in row]))
            for row in ts]
    return ExtensionProfile.from_values(vals)


def delta_dom(f, x, grid=None, exact=False, outer=None, inner=None, seed=0):
    """Smallest grid delta with P_max(f, x, delta) >= C4.

    With ``exact=True`` (Discrete only) the infimum itself is returned: the
    P_i are right-continuous step functions of delta, so the infimum is the
    ceil(C4 * N)-th smallest threshold t_y in the best direction.
    """
    ts = _extension_thresholds(f, x, outer, inner, as_generator(seed))
    if exact:
        if not f.model.is_discrete or outer is not None:
            raise DomainError("exact delta_dom needs Discrete enumeration")
        k = math.ceil(K.EXACT["C4"] * len(ts[0]))
        return min(sorted(row)[k - 1] for row in ts)
    grid = K.default_grid() if grid is None else list(grid)
    if grid != sorted(grid) or grid[0] != 0 or grid[-1] != 1:
        raise ValueError("grid must be sorted and contain 0 and 1")
    c4 = K.EXACT["C4"]
    for g in grid:
        gd = _as_fraction(g)
        for row in ts:
            hit = sum(t <= gd for t in row) if isinstance(row[0], Fraction) else sum(float(t) <= g for t in row)
            if Fraction(hit, len(row)) >= c4:
                return g
    return grid[-1]


# ---------------------------------------------------------------------------
# whole-space analysis of a Discrete table


class Analysis:
    """Every Discrete quantity of the elimination step for one radius-r algorithm.

    Attributes are integer-count arrays in canonical index order:

    * ``dir`` over R_r,
    * ``q_count`` over F_{r-1} with denominator ``q_den``,
    * ``t_num`` over F_{r-1}: x is delta-good iff t_num[x] <= delta * q_den,
    * ``end_a`` / ``end_b`` / ``sigma_idx``: R_{r-1} indices of endpoints and shuffles.
    """

    def __init__(self, f, budget=None, strict=True):
        if f.radius < 1:
            raise DomainError("round elimination needs r >= 1")
        if not f.model.is_discrete:
            raise DomainError("Analysis needs a Discrete label model")
        f = al.compile_table(f, budget)
        self.f = f
        delta, r, L = f.delta, f.radius, f.model.L
        self.delta, self.r, self.L = delta, r, L
        self.big = la.Shape(delta, r)
        self.small = la.Shape(delta, r - 1)
        nb_r = la.Codec(L, self.big.nbhd_len)
        fl_s = la.Codec(L, self.small.flower_len)
        nb_s = la.Codec(L, self.small.nbhd_len)
        check_budget(nb_r.count, budget)

        # dir over R_r
        acc = al.accepted_flowers(f)
        acc_a = np.zeros(nb_r.count, dtype=bool)
        if len(acc):
            acc_a[acc[:, la.end_map(delta, r, "A")] @ nb_r.powers] = True
        ys = nb_r.decode(np.arange(nb_r.count))
        has = np.stack([
            acc_a[ys @ nb_r.weights(la.shuffle_map(delta, r, la.special_perm(i, delta)), self.big.nbhd_len)]
            for i in range(1, delta + 1)
        ])
        cnt = has.sum(axis=0)
        self.exclusivity_violations = int((cnt > 1).sum())
        if strict and self.exclusivity_violations:
            raise ExclusivityError(f"{self.exclusivity_violations} neighborhoods have two accepting directions")
        self.dir = np.where(cnt == 1, has.argmax(axis=0) + 1, 0)
        self.n_neighborhoods_checked = nb_r.count

        # Q over F_{r-1}
        self.q_den = L ** len(la.cond_res_free(delta, r, 1))
        res1 = ys @ fl_s.weights(la.res1_map(delta, r), self.big.nbhd_len)
        self.q_count = np.bincount(res1, weights=(self.dir == 1), minlength=fl_s.count).astype(np.int64)
        self.res1_idx = res1
        xs = fl_s.decode(np.arange(fl_s.count))
        self.rev_idx = xs @ fl_s.weights(la.reverse_map(delta, r - 1), self.small.flower_len)
        self.qbar_count = self.q_count[self.rev_idx]
        self.t_num = self.q_den - np.minimum(self.q_count, self.qbar_count)

        # extension structure over R_{r-1}
        n_small = self.small.flower_len
        self.end_a = xs @ nb_s.weights(la.end_map(delta, r - 1, "A"), n_small)
        self.end_b = xs @ nb_s.weights(la.end_map(delta, r - 1, "B"), n_small)
        self.ext_den = L ** len(la.cond_end_free(delta, r - 1, "A"))
        rs = nb_s.decode(np.arange(nb_s.count))
        self.sigma_idx = np.stack([
            rs @ nb_s.weights(la.shuffle_map(delta, r - 1, la.special_perm(i, delta)), self.small.nbhd_len)
            for i in range(1, delta + 1)
        ])
        self.n_flowers = fl_s.count
        self.n_nbhds = nb_s.count
        assert (np.bincount(self.end_a, minlength=nb_s.count) == self.ext_den).all()

        # exact delta_dom per (r-1)-neighborhood, as a numerator over q_den
        order = np.lexsort((self.t_num, self.end_a))
        sorted_t = self.t_num[order].reshape(nb_s.count, self.ext_den)
        self.k_dom = math.ceil(K.EXACT["C4"] * self.ext_den)
        thr = sorted_t[:, self.k_dom - 1]
        self.dom_num = thr[self.sigma_idx].min(axis=0)

    # -- helpers ------------------------------------------------------------

    def _floor_count(self, delta):
        """Largest integer T with T / q_den <= delta."""
        return math.floor(_as_fraction(delta) * self.q_den)

    def good_mask(self, delta):
        return self.t_num <= self._floor_count(delta)

    def good_fraction(self, delta):
        return Fraction(int(self.good_mask(delta).sum()), self.n_flowers)

    def breakpoints(self):
        """Distinct thresholds t (as numerators over q_den) where goodness changes."""
        return np.unique(self.t_num)

    def ext_counts(self, delta):
        """P_i numerators over ext_den, shape (delta, |R_{r-1}|)."""
        g = np.bincount(self.end_a[self.good_mask(delta)], minlength=self.n_nbhds)
        return g[self.sigma_idx]

    def i_max(self, delta):
        p = self.ext_counts(delta)
        top = p.max(axis=0)
        unique = (p == top).sum(axis=0) == 1
        return np.where(unique, p.argmax(axis=0) + 1, 0)

    def profile(self, x_idx, delta):
        p = self.ext_counts(delta)[:, x_idx]
        return ExtensionProfile.from_values(Fraction(int(v), self.ext_den) for v in p)

    def comp_counts(self, delta):
        p = self.ext_counts(delta)
        return p.sum(axis=0) - p.max(axis=0), p.sum(axis=0)

    def q(self, x_idx):
        return Fraction(int(self.q_count[x_idx]), self.q_den)

    def delta_dom_exact(self):
        return [Fraction(int(v), self.q_den) for v in self.dom_num]

    def delta_dom_grid(self, grid):
        """Smallest grid value at or above the exact delta_dom, per neighborhood."""
        grid = [_as_fraction(g) for g in grid]
        out = []
        for v in self.dom_num:
            d = Fraction(int(v), self.q_den)
            out.append(next(g for g in grid if g >= d))
        return out


# ---------------------------------------------------------------------------
# the construction of g


@dataclass
class EliminationResult:
    g: al.CertifiedAlgorithm
    good: np.ndarray
    i_max: np.ndarray
    ext_counts: np.ndarray
    ext_den: int
    verification: al.VerificationReport
    c5: Fraction
    analysis: Analysis = field(repr=False)


def eliminate(f, c5=None, budget=None, strict=True):
    """Build the (r-1)-round g: accept y iff y is C5-good and i_max = 1 at both endpoints.

    g is re-verified exhaustively; with ``strict`` a failed verification raises.
    """
    an = Analysis(f, budget)
    c5 = K.EXACT["C5"] if c5 is None else _as_fraction(c5)
    if not 0 < c5 <= 1:
        raise ValueError("c5 must lie in (0, 1]")
    good = an.good_mask(c5)
    imax = an.i_max(c5)
    bits = good & (imax[an.end_a] == 1) & (imax[an.end_b] == 1)
    g = al.table_algorithm(an.small, an.L, bits, rule=f"eliminate({f.rule})")
    rep = al.verify_matching_certified(g, budget=budget)
    if strict and not rep.passed:
        raise ExclusivityError(f"eliminated table is not matching-certified: {rep.witness}")
    g = g.with_status(rep.status if rep.passed else "asserted")
    return EliminationResult(g, good, imax, an.ext_counts(c5), an.ext_den, rep, c5, an)


def eliminate_chain(f, c5=None, budget=None):
    """f_r = f, f_{s-1} = eliminate(f_s), down to radius 0."""
    chain = [al.compile_table(f, budget)]
    while chain[-1].radius > 0:
        chain.append(eliminate(chain[-1], c5, budget).g)
    return chain


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditEntry:
    id: str
    lhs: object
    rhs: object
    method: str
    passed: bool
    notes: str = ""
    advisory: bool = False

    def row(self):
        return {
            "id": self.id,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "method": self.method,
            "pass": bool(self.passed),
            "lhs_exact": str(self.lhs) if isinstance(self.lhs, Fraction) else "",
            "rhs_exact": str(self.rhs) if isinstance(self.rhs, Fraction) else "",
            "notes": self.notes,
        }


@dataclass
class AuditReport:
    entries: list
    shape: la.Shape
    rule: str
    p_f: Fraction

    @property
    def passed(self):
        return all(e.passed for e in self.entries if not e.advisory)

    def failures(self):
        return [e for e in self.entries if not e.passed and not e.advisory]

    def get(self, prefix):
        return [e for e in self.entries if e.id == prefix or e.id.startswith(prefix + "[")]

    def to_json(self):
        return json.dumps({
            "rule": self.rule,
            "delta": self.shape.delta,
            "radius": self.shape.radius,
            "p_f": str(self.p_f),
            "passed": self.passed,
            "entries": [e.row() for e in self.entries],
        }, indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["id", "lhs", "rhs", "method", "pass"])
        for e in self.entries:
            r = e.row()
            w.writerow([r["id"], repr(r["lhs"]), repr(r["rhs"]), r["method"], int(r["pass"])])
        return buf.getvalue()


def _le(entries, id_, lhs, rhs, method="exact", notes="", advisory=False):
    entries.append(AuditEntry(id_, lhs, rhs, method, lhs <= rhs, notes, advisory))


def _ge(entries, id_, lhs, rhs, method="exact", notes="", advisory=False):
    entries.append(AuditEntry(id_, lhs, rhs, method, lhs >= rhs, notes, advisory))


def _sqrt_fraction(x):
    with localcontext() as ctx:
        ctx.prec = 60
        return Fraction(Decimal(x.numerator).sqrt() / Decimal(x.denominator).sqrt())


def audit(f, grid=None, budget=None, c5=None):
    """Run every inequality of the elimination argument exactly on a Discrete algorithm.

    Entries (a) to (j) follow the proof chain; (k) to (n) are intermediate
    steps and identities that fall out of the same computation.  Where a
    bound holds for all delta in a range, the check is made at every point
    where the step function on the left can change, which makes it exact for
    the whole range and not just for grid points.
    """
    grid = K.default_grid() if grid is None else sorted(grid)
    an = Analysis(f, budget)
    f = an.f
    delta, r = an.delta, an.r
    ex = K.EXACT
    pf = al.survival_probability(f, "exact", budget=budget).exact
    qd = an.q_den
    nF = an.n_flowers
    E = []

    # (a), (b): moments of Q
    eq = Fraction(int(an.q_count.sum()), qd * nF)
    _le(E, "a", eq, Fraction(1, delta), notes="E[Q] <= 1/Delta")
    eqq = Fraction(int((an.q_count * an.qbar_count).sum()), qd * qd * nF)
    _ge(E, "b", eqq, (1 - pf) / delta, notes="E[Q Qbar] >= (1-P_f)/Delta")

    # (c): good mass for every delta in (0, 1]
    bps = [Fraction(int(b), qd) for b in an.breakpoints()]
    t_sorted = np.sort(an.t_num)

    def h(d):  # Pr[x in X(f, d)]
        return Fraction(int(np.searchsorted(t_sorted, an._floor_count(d), side="right")), nF)

    def rhs_c(d):
        return (1 - 2 * pf / d) / delta

    # H is a right-continuous step function and the bound increases in delta,
    # so on each [lo, hi) the tightest point is delta -> hi with H = H(lo)
    edges = [b for b in bps if 0 < b < 1]
    worst = None
    for lo, hi in zip([Fraction(0)] + edges, edges + [Fraction(1)]):
        val = h(lo)
        gap = val - rhs_c(hi)
        if worst is None or gap < worst[0]:
            worst = (gap, val, rhs_c(hi), hi)
    _ge(E, "c", worst[1], worst[2], notes=f"all delta in (0,1]; tightest just below delta={worst[3]}")
    for d in grid:
        if d > 0:
            _ge(E, f"c[{d:.6g}]", h(_as_fraction(d)), rhs_c(_as_fraction(d)), method="grid")

    # (d): strong form, E_tau[h(tau) | tau <= xi] = E_x[(xi - t_x)^+] / xi
    tf = [Fraction(int(t), qd) for t in an.t_num]

    def strong_gap(xi):
        lhs = sum((xi - t for t in tf if t < xi), Fraction(0)) / (nF * xi)
        return lhs, (1 - 7 * pf / xi) / delta

    # xi * (lhs - rhs) is convex piecewise linear in xi, so its minimum over
    # (0, 1) sits at a breakpoint or at the ends
    cands = sorted({b for b in bps if 0 < b < 1} | {Fraction(1)})
    worst = None
    for xi in cands:
        lhs, rhs = strong_gap(xi)
        gap = xi * (lhs - rhs)
        if worst is None or gap < worst[0]:
            worst = (gap, lhs, rhs, xi)
    gap0 = Fraction(7, 1) * pf / delta  # limit of xi * (lhs - rhs) as xi -> 0
    ok = worst[0] >= 0 and gap0 >= 0
    E.append(AuditEntry("d", worst[1], worst[2], "exact", ok and worst[1] >= worst[2],
                        f"all xi in (0,1); tightest at xi={worst[3]}"))
    for xi in grid:
        if 0 < xi < 1:
            lhs, rhs = strong_gap(_as_fraction(xi))
            _ge(E, f"d[{xi:.6g}]", lhs, rhs, method="grid")

    # (e), (g), (m): step functions of delta checked at every left endpoint in [0, 1/2]
    half = Fraction(1, 2)
    pts = sorted({Fraction(0)} | {b for b in bps if b <= half})
    worst_e = worst_g = None
    mono_ok = True
    prev = None
    for d in pts:
        comp, total = an.comp_counts(d)
        ce = Fraction(int(comp.max()), an.ext_den)
        pe = Fraction(int(total.max()), an.ext_den)
        ge_ = K.F1_exact(d) - ce
        gg = 1 / (1 - d) - pe
        if worst_e is None or ge_ < worst_e[0]:
            worst_e = (ge_, ce, K.F1_exact(d), d)
        if worst_g is None or gg < worst_g[0]:
            worst_g = (gg, pe, 1 / (1 - d), d)
        if prev is not None and (comp < prev).any():
            mono_ok = False
        prev = comp
    _le(E, "e", worst_e[1], worst_e[2], notes=f"max_x P_comp vs F1, all delta in [0,1/2]; tightest at {worst_e[3]}")
    _le(E, "g", worst_g[1], worst_g[2], notes=f"max_x P vs 1/(1-delta), all delta in [0,1/2]; tightest at {worst_g[3]}")

    # (f): P_comp(x, C5) <= F1(delta_dom(x))
    c5v = ex["C5"] if c5 is None else _as_fraction(c5)
    comp5, _ = an.comp_counts(c5v)
    dd = an.delta_dom_exact()
    gaps = [K.F1_exact(d) - Fraction(int(c), an.ext_den) for c, d in zip(comp5, dd)]
    k = min(range(len(gaps)), key=lambda j: gaps[j])
    _le(E, "f", Fraction(int(comp5[k]), an.ext_den), K.F1_exact(dd[k]),
        notes=f"all x; tightest at neighborhood index {k}")

    # (h): expectation bounds on delta_dom, exact and with the grid upper bound
    nR = an.n_nbhds
    mean_min = sum((min(d, ex["C10"]) for d in dd), Fraction(0)) / nR
    mean_dd = sum(dd, Fraction(0)) / nR
    _le(E, "h", mean_min, ex["C10"] * ex["C11"] * pf, notes="E[min(delta_dom, C10)] <= C10 C11 P_f")
    _le(E, "h2", mean_dd, ex["C11"] * pf, notes="E[delta_dom] <= C11 P_f")
    dg = an.delta_dom_grid(grid)
    _le(E, "h[grid]", sum(dg, Fraction(0)) / nR, ex["C11"] * pf, method="grid",
        notes="grid delta_dom upper-bounds the infimum, so passing here implies h2")

    # (i): tail of delta_dom for tau in (0, 1/2); LHS is a step function, RHS convex
    dd_sorted = sorted(dd)
    const = 600 * ex["E4"]
    tau_star = _sqrt_fraction(pf) if pf > 0 else Fraction(0)
    knots = sorted({Fraction(0)} | {d for d in dd if 0 < d < half} | {half})
    worst = None
    for lo, hi in zip(knots[:-1], knots[1:]):
        tail = Fraction(sum(1 for d in dd_sorted if d > lo), nR)
        tau = min(max(tau_star, lo), hi)
        if tau == 0:
            continue  # the bound is infinite as tau -> 0 when it is not covered
        bound = const * (pf / tau + tau)
        if worst is None or bound - tail < worst[0]:
            worst = (bound - tail, tail, bound, tau)
    _le(E, "i", worst[1], worst[2], notes=f"all tau in (0,1/2); tightest near tau={float(worst[3]):.3g}")
    thr = Fraction(1) / (60000 * ex["E4"]) ** 2
    if pf <= thr:
        tau = 60000 * ex["E4"] * pf
        _le(E, "i2", Fraction(sum(1 for d in dd if d > tau), nR), Fraction(1, 25))
    else:
        E.append(AuditEntry("i2", pf, thr, "exact", True, "not applicable: P_f above 1/(60000 e^4)^2", True))

    # (j): P_g <= C1 P_f down the whole chain, terminal P_f >= C1^-r
    res = eliminate(f, c5=c5, budget=budget)
    pg = al.survival_probability(res.g, "exact", budget=budget).exact
    _le(E, "j", pg, ex["C1"] * pf, notes="P_g <= C1 P_f")
    chain = [f, res.g]
    while chain[-1].radius > 0:
        chain.append(eliminate(chain[-1], c5=c5, budget=budget).g)
    for g_s in chain[1:]:
        s = g_s.radius
        ps = al.survival_probability(g_s, "exact", budget=budget).exact
        _le(E, f"j[s={s}]", ps, pf * ex["C1"] ** (r - s), notes="P_{f_s} <= P_f C1^(r-s)")
    p0 = al.survival_probability(chain[-1], "exact", budget=budget).exact
    E.append(AuditEntry("j[f0]", p0, Fraction(1), "exact", p0 == 1 and not chain[-1].table.any(),
                        "0-round certified algorithm is constant zero with P = 1"))
    _ge(E, "j[terminal]", pf, ex["C1"] ** (-r), notes="P_f >= C1^-r")

    # (k), (l): the intermediate steps of the survival bound for g
    bad_a = res.good & (res.i_max[an.end_a] != 1)
    _le(E, "k", Fraction(int(bad_a.sum()), nF), 12 * ex["E4"] * ex["C11"] * pf / delta,
        notes="Pr[y in X(C5), i_max(end_A y) != 1]")
    _le(E, "l", pg, 48 * ex["E4"] * ex["C11"] * pf, notes="P_g <= 48 e^4 C11 P_f")

    # (m): P_comp monotone; (n): Delta Pr[f = 1] + P_f = 1
    E.append(AuditEntry("m", Fraction(int(mono_ok)), Fraction(1), "exact", mono_ok,
                        "P_comp nondecreasing across all breakpoints in [0,1/2]"))
    acc = al.acceptance_probability(f)
    E.append(AuditEntry("n", delta * acc + pf, Fraction(1), "exact", delta * acc + pf == 1,
                        "Delta Pr[f=1] + P_f = 1"))
    E.append(AuditEntry("dir", Fraction(an.exclusivity_violations), Fraction(0), "exact",
                        an.exclusivity_violations == 0,
                        f"neighborhoods with two accepting directions out of {an.n_neighborhoods_checked}"))
    return AuditReport(E, f.shape, f.rule, pf)
