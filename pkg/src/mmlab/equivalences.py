"""Checks of the sampling equivalences between flower and neighborhood distributions.

Every check compares two ways of computing an expectation of a test random
variable X.  In exact form (Discrete labels) X is a seeded hash of the
canonical index, both sides are integer sums over the full space and the
comparison is exact.  In continuous form both procedures are sampled and
compared with a Welch two-sample t-test.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from . import labels as la
from .rng import hash_index, stream

EXACT_NAMES = ("edge_flip", "vert_permute", "cond_vert_permute", "f_to_r", "r_to_f", "f_to_f", "r_to_r")


@dataclass
class EquivalenceResult:
    name: str
    lhs: object
    rhs: object
    passed: bool
    method: str
    detail: str = ""

    @property
    def abs_diff(self):
        return abs(float(self.lhs) - float(self.rhs))


# ---------------------------------------------------------------------------
# exact form


class _Spaces:
    def __init__(self, delta, r, L):
        self.delta, self.r, self.L = delta, r, L
        self.big = la.Shape(delta, r)
        self.small = la.Shape(delta, r - 1)
        self.fr = la.Codec(L, self.big.flower_len)
        self.nr = la.Codec(L, self.big.nbhd_len)
        self.fs = la.Codec(L, self.small.flower_len)
        self.ns = la.Codec(L, self.small.nbhd_len)

    def all(self, codec):
        return codec.decode(np.arange(codec.count))


def _x(codec, seed, tag):
    """Test random variable over a canonical index space."""
    return hash_index(np.arange(codec.count), seed=seed + 7919 * tag).astype(np.int64)


def _exact(name, lhs, rhs, detail=""):
    return EquivalenceResult(name, lhs, rhs, lhs == rhs, "exact", detail)


def edge_flip(delta, r, L, seed=0):
    """E[X(reverse y)] = E[X(y)] over y ~ F_r."""
    sp = _Spaces(delta, r + 1, L)
    codec = sp.fs  # F_r
    X = _x(codec, seed, 1)
    w = sp.all(codec)
    rev = w @ codec.weights(la.reverse_map(delta, r), codec.length)
    return _exact("edge_flip", Fraction(int(X[rev].sum()), codec.count), Fraction(int(X.sum()), codec.count))


def vert_permute(delta, r, L, seed=0):
    """E_{sigma ~ D, y ~ R_r}[X(sigma y)] = E[X(y)] for a random distribution D over permutations."""
    sp = _Spaces(delta, r, L)
    X = _x(sp.nr, seed, 2)
    y = sp.all(sp.nr)
    perms = la.all_perms(delta)
    weights = stream(seed, "vert_permute").integers(1, 100, len(perms))
    total = 0
    for wgt, sigma in zip(weights, perms):
        idx = y @ sp.nr.weights(la.shuffle_map(delta, r, sigma), sp.big.nbhd_len)
        total += int(wgt) * int(X[idx].sum())
    lhs = Fraction(total, int(weights.sum()) * sp.nr.count)
    return _exact("vert_permute", lhs, Fraction(int(X.sum()), sp.nr.count))


def cond_vert_permute(delta, r, L, seed=0):
    """E[X(sigma_i y) | res_i(y) = x] = E[X(z) | res_1(z) = x] for every i and x.

    Both conditional expectations are computed by filtering the full space
    R_r, independently of the coordinate-substitution samplers.
    """
    sp = _Spaces(delta, r, L)
    X = _x(sp.nr, seed, 3)
    y = sp.all(sp.nr)
    res = {i: y @ sp.fs.weights(la.res_map(delta, r, i), sp.big.nbhd_len) for i in range(1, delta + 1)}
    cnt1 = np.bincount(res[1], minlength=sp.fs.count)
    rhs = np.zeros(sp.fs.count, dtype=np.int64)
    np.add.at(rhs, res[1], X)
    worst = None
    for i in range(1, delta + 1):
        perm = y @ sp.nr.weights(la.shuffle_map(delta, r, la.special_perm(i, delta)), sp.big.nbhd_len)
        lhs = np.zeros(sp.fs.count, dtype=np.int64)
        np.add.at(lhs, res[i], X[perm])
        cnt = np.bincount(res[i], minlength=sp.fs.count)
        # compare lhs/cnt with rhs/cnt1 exactly by cross-multiplication
        bad = np.flatnonzero(lhs * cnt1 != rhs * cnt)
        if len(bad) and worst is None:
            k = bad[0]
            worst = (i, k, Fraction(int(lhs[k]), int(cnt[k])), Fraction(int(rhs[k]), int(cnt1[k])))
    if worst is None:
        return EquivalenceResult("cond_vert_permute", Fraction(0), Fraction(0), True, "exact",
                                 f"all i in 1..{delta}, all {sp.fs.count} x")
    i, k, a, b = worst
    return EquivalenceResult("cond_vert_permute", a, b, False, "exact", f"mismatch at i={i}, x index {k}")


def _cond_res_all(sp, i):
    """For every x in F_{r-1}, the label rows of all y with res_i(y) = x: shape (|F_{r-1}|, K, len)."""
    free = la.cond_res_free(sp.delta, sp.r, i)
    comp = la.Codec(sp.L, len(free)).decode(np.arange(sp.L ** len(free)))
    x = sp.all(sp.fs)
    pieces = [(la.res_map(sp.delta, sp.r, i), x[:, None, :]), (free, comp[None])]
    return la.scatter(sp.big.nbhd_len, pieces, np.int64)


def _cond_end_all(sp, targets):
    """For every target neighborhood row, all w in F_{r-1} with end_A(w) = target: (N, K, len)."""
    free = la.cond_end_free(sp.delta, sp.r - 1, "A")
    comp = la.Codec(sp.L, len(free)).decode(np.arange(sp.L ** len(free)))
    pieces = [(la.end_map(sp.delta, sp.r - 1, "A"), targets[:, None, :]), (free, comp[None])]
    return la.scatter(sp.small.flower_len, pieces, np.int64)


def f_to_r(delta, r, L, seed=0):
    """E_{x ~ F_{r-1}}[E[X(y) | res_i(y) = x]] = E_{y ~ R_r}[X(y)] for every i."""
    sp = _Spaces(delta, r, L)
    X = _x(sp.nr, seed, 4)
    rhs = Fraction(int(X.sum()), sp.nr.count)
    for i in range(1, delta + 1):
        ys = _cond_res_all(sp, i)
        vals = X[sp.nr.encode(ys)]
        lhs = Fraction(int(vals.sum()), vals.size)
        if lhs != rhs:
            return EquivalenceResult("f_to_r", lhs, rhs, False, "exact", f"direction {i}")
    return _exact("f_to_r", lhs, rhs, f"all i in 1..{delta}")


def r_to_f(delta, r, L, seed=0):
    """E_{x ~ R_{r-1}, i}[E[X(y) | end_A(y) = sigma_i(x)]] = E_{y ~ F_{r-1}}[X(y)]."""
    sp = _Spaces(delta, r, L)
    X = _x(sp.fs, seed, 5)
    x = sp.all(sp.ns)
    total, n = 0, 0
    for i in range(1, delta + 1):
        tgt = x[:, la.shuffle_map(delta, r - 1, la.special_perm(i, delta))]
        vals = X[sp.fs.encode(_cond_end_all(sp, tgt))]
        total += int(vals.sum())
        n += vals.size
    return _exact("r_to_f", Fraction(total, n), Fraction(int(X.sum()), sp.fs.count))


def f_to_f(delta, r, L, seed=0):
    """E_x[E[X_A(z_A) | res_1 = x] E[X_B(z_B) | res_1 = reverse x]] = E_y[X_A(end_A y) X_B(end_B y)]."""
    sp = _Spaces(delta, r, L)
    XA, XB = _x(sp.nr, seed, 6), _x(sp.nr, seed, 7)
    ys = _cond_res_all(sp, 1)
    K = ys.shape[1]
    idx = sp.nr.encode(ys)
    sa, sb = XA[idx].sum(axis=1), XB[idx].sum(axis=1)
    x = sp.all(sp.fs)
    rev = x @ sp.fs.weights(la.reverse_map(delta, r - 1), sp.small.flower_len)
    lhs = Fraction(int((sa * sb[rev]).sum()), sp.fs.count * K * K)
    w = sp.all(sp.fr)
    ea = w @ sp.nr.weights(la.end_map(delta, r, "A"), sp.big.flower_len)
    eb = w @ sp.nr.weights(la.end_map(delta, r, "B"), sp.big.flower_len)
    rhs = Fraction(int((XA[ea] * XB[eb]).sum()), sp.fr.count)
    # the unique y joining two compatible ends is what the four-step procedure returns
    pair = la.scatter(sp.big.flower_len, [(la.end_map(delta, r, "A"), sp.nr.decode(ea)),
                                          (la.end_map(delta, r, "B"), sp.nr.decode(eb))], np.int64)
    ok_join = np.array_equal(pair, w)
    res = _exact("f_to_f", lhs, rhs, "join_ends reproduces every flower" if ok_join else "join_ends mismatch")
    res.passed = res.passed and ok_join
    return res


def r_to_r(delta, r, L, seed=0):
    """E[X(y) | res_i(y) = zeta] equals the average of X(glue(z_1..z_Delta)) with z_i = zeta.

    Left side: filter R_r.  Right side: enumerate the other Delta-1 flowers
    with end_A(z_j) = sigma_j(x) and glue.  Checked for every i and zeta.
    """
    sp = _Spaces(delta, r, L)
    X = _x(sp.nr, seed, 8)
    y = sp.all(sp.nr)
    zeta = sp.all(sp.fs)
    free = la.cond_end_free(delta, r - 1, "A")
    K = sp.L ** len(free)
    comp = la.Codec(L, len(free)).decode(np.arange(K))
    for i in range(1, delta + 1):
        res_i = y @ sp.fs.weights(la.res_map(delta, r, i), sp.big.nbhd_len)
        lhs = np.zeros(sp.fs.count, dtype=np.int64)
        np.add.at(lhs, res_i, X)
        cnt = np.bincount(res_i, minlength=sp.fs.count)
        # every other z_j is pinned on end_A by x and free on the rest
        others = [j for j in range(1, delta + 1) if j != i]
        grids = np.stack(np.meshgrid(*([np.arange(K)] * len(others)), indexing="ij"), -1).reshape(-1, len(others))
        pieces = [(la.res_map(delta, r, i), zeta[:, None, :])]
        for c, j in enumerate(others):
            m = la.res_map(delta, r, j)[free]
            pieces.append((m, comp[grids[:, c]][None]))
        glued = la.scatter(sp.big.nbhd_len, pieces, np.int64)
        # res_i of the glued neighborhood is zeta and the others carry sigma_j(x) on their end
        assert (glued @ sp.fs.weights(la.res_map(delta, r, i), sp.big.nbhd_len) == np.arange(sp.fs.count)[:, None]).all()
        rhs = X[sp.nr.encode(glued)].sum(axis=1)
        n_r = glued.shape[1]
        bad = np.flatnonzero(lhs * n_r != rhs * cnt)
        if len(bad):
            k = bad[0]
            return EquivalenceResult("r_to_r", Fraction(int(lhs[k]), int(cnt[k])), Fraction(int(rhs[k]), n_r),
                                     False, "exact", f"mismatch at i={i}, zeta index {k}")
    return EquivalenceResult("r_to_r", Fraction(0), Fraction(0), True, "exact",
                             f"all i in 1..{delta}, all {sp.fs.count} zeta")


EXACT_CHECKS = {
    "edge_flip": edge_flip,
    "vert_permute": vert_permute,
    "cond_vert_permute": cond_vert_permute,
    "f_to_r": f_to_r,
    "r_to_f": r_to_f,
    "f_to_f": f_to_f,
    "r_to_r": r_to_r,
}


def run_exact(delta, r, L, seed=0, names=EXACT_NAMES):
    return [EXACT_CHECKS[n](delta, r, L, seed) for n in names]


# ---------------------------------------------------------------------------
# continuous form


def _test_var(n, rng, k=4):
    """Test variables with no coordinate-permutation invariance, as (N, 2k) columns.

    k smooth columns sin(v . c + b) and k pairwise products v_i v_j; the
    products catch changes in the dependence between coordinates that the
    oscillating columns can average out.
    """
    c = rng.normal(0, 1.5, (n, k))
    b = rng.uniform(0, 2 * np.pi, k)
    i = rng.integers(0, max(n, 1), k)
    j = (i + rng.integers(1, n, k)) % n if n > 1 else i
    pairs = np.stack([i, j], axis=1)

    def X(v):
        if n == 0:
            return np.zeros((len(v), 2 * k))
        return np.concatenate([np.sin(v @ c + b), v[:, pairs[:, 0]] * v[:, pairs[:, 1]]], axis=1)

    return X


def _welch(name, a, b, alpha):
    """Columnwise Welch tests with a Bonferroni correction over the columns."""
    a, b = np.atleast_2d(a.T).T, np.atleast_2d(b.T).T
    if np.all(a == a[:1]) and np.all(b == b[:1]):
        ok = np.array_equal(a[:1], b[:1])
        return EquivalenceResult(name, float(a.mean()), float(b.mean()), ok, "welch", "degenerate test variable")
    p = np.nan_to_num(stats.ttest_ind(a, b, equal_var=False, axis=0).pvalue, nan=1.0)
    k = int(np.argmin(p))
    adj = min(1.0, float(p[k]) * len(p))
    return EquivalenceResult(name, float(a[:, k].mean()), float(b[:, k].mean()), bool(adj > alpha), "welch",
                             f"p={adj:.3g} (Bonferroni over {len(p)} columns), n={len(a)}")


def continuous(name, delta, r, n=10**6, seed=0, alpha=1e-3, i=None):
    """Sample both sides of one equivalence with continuous labels and test equality of means."""
    model = la.LabelModel.continuous()
    rng = stream(seed, f"equiv/{name}/{delta}/{r}")
    big, small = la.Shape(delta, r), la.Shape(delta, r - 1)
    i = delta if i is None else i
    if name == "edge_flip":
        X = _test_var(big.flower_len, rng)
        y1 = model.sample(rng, (n, big.flower_len))
        y2 = model.sample(rng, (n, big.flower_len))
        return _welch(name, X(y1[:, la.reverse_map(delta, r)]), X(y2), alpha)
    if name == "vert_permute":
        X = _test_var(big.nbhd_len, rng)
        perms = la.all_perms(delta)
        p = rng.dirichlet(np.ones(len(perms)))
        pick = rng.choice(len(perms), size=n, p=p)
        y1 = model.sample(rng, (n, big.nbhd_len))
        maps = np.stack([la.shuffle_map(delta, r, s) for s in perms])
        lhs = X(np.take_along_axis(y1, maps[pick], axis=1))
        return _welch(name, lhs, X(model.sample(rng, (n, big.nbhd_len))), alpha)
    if name == "cond_vert_permute":
        X = _test_var(big.nbhd_len, rng)
        x = la.sample_uniform("flower", small, model, rng)
        y = la.sample_cond_res(i, x, rng, size=n)
        z = la.sample_cond_res(1, x, rng, size=n)
        lhs = X(y[:, la.shuffle_map(delta, r, la.special_perm(i, delta))])
        return _welch(name, lhs, X(z), alpha)
    if name == "f_to_r":
        X = _test_var(big.nbhd_len, rng)
        x = model.sample(rng, (n, small.flower_len))
        free = la.cond_res_free(delta, r, i)
        y = la.scatter(big.nbhd_len, [(la.res_map(delta, r, i), x), (free, model.sample(rng, (n, len(free))))],
                       model.dtype)
        return _welch(name, X(y), X(model.sample(rng, (n, big.nbhd_len))), alpha)
    if name == "r_to_f":
        X = _test_var(small.flower_len, rng)
        x = model.sample(rng, (n, small.nbhd_len))
        dirs = rng.integers(1, delta + 1, n)
        maps = np.stack([la.shuffle_map(delta, r - 1, la.special_perm(d, delta)) for d in range(1, delta + 1)])
        tgt = np.take_along_axis(x, maps[dirs - 1], axis=1)
        free = la.cond_end_free(delta, r - 1, "A")
        y = la.scatter(small.flower_len, [(la.end_map(delta, r - 1, "A"), tgt),
                                          (free, model.sample(rng, (n, len(free))))], model.dtype)
        return _welch(name, X(y), X(model.sample(rng, (n, small.flower_len))), alpha)
    if name == "f_to_f":
        XA, XB = _test_var(big.nbhd_len, rng), _test_var(big.nbhd_len, rng)
        x = model.sample(rng, (n, small.flower_len))
        xr = x[:, la.reverse_map(delta, r - 1)]
        free = la.cond_res_free(delta, r, 1)
        rm = la.res_map(delta, r, 1)
        za = la.scatter(big.nbhd_len, [(rm, x), (free, model.sample(rng, (n, len(free))))], model.dtype)
        zb = la.scatter(big.nbhd_len, [(rm, xr), (free, model.sample(rng, (n, len(free))))], model.dtype)
        # step four: the unique flower with these two ends (scatter rejects inconsistent overlaps)
        y = la.scatter(big.flower_len, [(la.end_map(delta, r, "A"), za), (la.end_map(delta, r, "B"), zb)],
                       model.dtype)
        lhs = XA(y[:, la.end_map(delta, r, "A")]) * XB(y[:, la.end_map(delta, r, "B")])
        w = model.sample(rng, (n, big.flower_len))
        rhs = XA(w[:, la.end_map(delta, r, "A")]) * XB(w[:, la.end_map(delta, r, "B")])
        return _welch(name, lhs, rhs, alpha)
    raise ValueError(f"unknown equivalence {name!r}")


CONTINUOUS_NAMES = EXACT_NAMES[:-1]


def run_continuous(delta, r, n=10**6, seed=0, alpha=1e-3):
    return [continuous(name, delta, r, n, seed, alpha) for name in CONTINUOUS_NAMES]
