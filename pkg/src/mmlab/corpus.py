"""Reference corpus of certified Discrete algorithms for tests and audits."""

from __future__ import annotations

import itertools

import numpy as np

from . import algorithms as al
from . import labels as la
from .rng import stream


def _marks(shape, L):
    """For each flower index, the (neighborhood index, direction) pairs it claims when accepted."""
    delta, r = shape.delta, shape.radius
    fc, nc = la.Codec(L, shape.flower_len), la.Codec(L, shape.nbhd_len)
    w = fc.decode(np.arange(fc.count))
    xs, ds = [], []
    for v in la.SIDES:
        ends = w[:, la.end_map(delta, r, v)]
        for tau in la.all_perms(delta):
            xs.append(ends @ nc.weights(la.shuffle_map(delta, r, tau), shape.nbhd_len))
            ds.append(tau[0])
    return np.stack(xs, axis=1), np.array(ds), nc.count


def random_certified(shape, L, seed=0, order=None, p_skip=0.0, symmetric=True):
    """A random maximal certified table, built greedily in a random order.

    A flower is accepted when every neighborhood it extends is either
    unclaimed or already claimed in the same direction.  With ``symmetric``
    a flower and its reversal are accepted together, so the table does not
    depend on the edge orientation, as is the case for any algorithm run on
    an undirected graph.  ``p_skip`` drops candidates at random, which yields
    sparser tables that are not maximal.
    """
    rng = stream(seed, f"corpus/{shape.delta}/{shape.radius}/{L}")
    xs, ds, n_nbhd = _marks(shape, L)
    if symmetric:
        rev = al.reversal_index(shape, L)
        xs = np.concatenate([xs, xs[rev]], axis=1)
        ds = np.concatenate([ds, ds])
    claim = np.zeros(n_nbhd, dtype=np.int64)
    bits = np.zeros(len(xs), dtype=bool)
    order = rng.permutation(len(xs)) if order is None else order
    skip = rng.random(len(xs)) < p_skip
    for k in order:
        if skip[k]:
            continue
        x = xs[k]
        c = claim[x]
        if ((c != 0) & (c != ds)).any():
            continue
        # a flower may not claim one neighborhood in two directions itself
        seen = {}
        if any(seen.setdefault(int(a), int(d)) != int(d) for a, d in zip(x, ds)):
            continue
        claim[x] = ds
        bits[k] = True
        if symmetric:
            bits[rev[k]] = True
    rule = f"random_certified(seed={seed}, p_skip={p_skip}, symmetric={symmetric})"
    f = al.table_algorithm(shape, L, bits, rule=rule)
    return al.verified(f)


def all_tables(shape, L):
    """Every subset of flowers as a table, in increasing bitmask order."""
    n = L ** shape.flower_len
    for mask in range(1 << n):
        bits = np.array([(mask >> k) & 1 for k in range(n)], dtype=bool)
        yield al.table_algorithm(shape, L, bits, rule=f"subset({mask})")


def certified_subsets(shape, L):
    """All certified tables among the 2^(L^flower_len) subsets (small shapes only)."""
    out = []
    for f in all_tables(shape, L):
        if al.verify_matching_certified(f).passed:
            out.append(f.with_status("verified_exhaustive"))
    return out


def standard(seed=0, n_random=4):
    """Named corpus: built-in rules, their lifts and random certified tables."""
    d2 = la.LabelModel.discrete(2)
    d3 = la.LabelModel.discrete(3)
    out = {}
    for delta, model in itertools.product((2, 3), (d2, d3)):
        s1 = la.Shape(delta, 1)
        name = f"greedy_d{delta}_L{model.L}"
        out[name] = al.verified(al.compile_table(al.greedy_min_label(s1, model)))
        out[f"zero_d{delta}_L{model.L}"] = al.verified(al.compile_table(al.zero_algorithm(s1, model)))
    for delta in (2, 3):
        s2 = la.Shape(delta, 2)
        g = al.greedy_min_label(la.Shape(delta, 1), d2)
        out[f"lift_greedy_d{delta}_L2"] = al.verified(al.compile_table(al.lift(g, 2)))
    for k in range(n_random):
        out[f"random_d3_r1_L2_{k}"] = random_certified(la.Shape(3, 1), 2, seed=seed + k)
        out[f"random_d2_r2_L2_{k}"] = random_certified(la.Shape(2, 2), 2, seed=seed + k)
        out[f"random_d3_r2_L2_{k}"] = random_certified(la.Shape(3, 2), 2, seed=seed + k)
    return out
