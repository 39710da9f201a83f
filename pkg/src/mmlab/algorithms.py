"""Matching-certified algorithms on r-flowers and their vertex survival probability.

An algorithm is a total 0/1 function on F_r.  Three bodies are supported: a
bit table indexed by the canonical flower index (Discrete labels only), a
built-in rule evaluated directly on label arrays, and a wrapped LOCAL
procedure with conflict deletion.  Every body exposes the same batched
``accepts(labels)`` entry point.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import labels as la
from .errors import DomainError, StructuralError, check_budget
from .rng import stream

STATUSES = ("asserted", "verified_exhaustive", "verified_sampled")


@dataclass(frozen=True, eq=False)
class CertifiedAlgorithm:
    shape: la.Shape
    model: la.LabelModel
    kind: str
    rule: str
    func: Optional[Callable] = None
    table: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)
    status: str = "asserted"
    trials: Optional[int] = None

    @property
    def delta(self):
        return self.shape.delta

    @property
    def radius(self):
        return self.shape.radius

    @property
    def codec(self):
        return la.Codec(self.model.L, self.shape.flower_len)

    def accepts(self, labels):
        """Batched evaluation on label arrays of shape (..., flower_len)."""
        labels = np.asarray(labels)
        if labels.shape[-1] != self.shape.flower_len:
            raise StructuralError(f"expected {self.shape.flower_len} labels, got {labels.shape[-1]}")
        if self.kind == "table":
            return self.table[self.codec.encode(labels)]
        return np.asarray(self.func(labels), dtype=bool)

    def accepts_mapped(self, labels, m):
        """accepts(labels[..., m]) without materializing the gather for tables."""
        if self.kind == "table":
            w = self.codec.weights(m, labels.shape[-1])
            return self.table[np.asarray(labels, dtype=np.int64) @ w]
        return self.accepts(labels[..., m])

    def __call__(self, w):
        return evaluate(self, w)

    def with_status(self, status, trials=None):
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        return replace(self, status=status, trials=trials)

    def describe(self):
        return {
            "kind": self.kind,
            "rule": self.rule,
            "delta": self.delta,
            "radius": self.radius,
            "model": self.model.to_json(),
            "status": self.status,
            "trials": self.trials,
            "params": {k: v for k, v in self.params.items() if isinstance(v, (int, float, str, bool))},
        }


def evaluate(f, w):
    if w.shape != f.shape:
        raise StructuralError(f"flower shape {w.shape} does not match algorithm shape {f.shape}")
    return int(f.accepts(w.labels[None, :])[0])


# ---------------------------------------------------------------------------
# constructors


def zero_algorithm(shape, model):
    return CertifiedAlgorithm(shape, model, "builtin", "zero", lambda x: np.zeros(x.shape[:-1], dtype=bool))


def _greedy_rule(x):
    return x[..., 0] < x[..., 1:].min(axis=-1)


def greedy_min_label(shape, model):
    """Accept iff the center label is strictly below all 2(delta-1) neighbor-edge labels."""
    if shape.radius != 1:
        raise DomainError("greedy_min_label is a 1-round rule")
    return CertifiedAlgorithm(shape, model, "builtin", "greedy_min_label", _greedy_rule)


def table_algorithm(shape, L, bits, rule="table", status="asserted"):
    bits = np.asarray(bits, dtype=bool).reshape(-1)
    expected = L ** shape.flower_len
    if bits.shape[0] != expected:
        raise StructuralError(f"table needs {expected} bits, got {bits.shape[0]}")
    bits = bits.copy()
    bits.setflags(write=False)
    return CertifiedAlgorithm(shape, la.LabelModel.discrete(L), "table", rule, table=bits, status=status)


def all_ones(shape, L):
    return table_algorithm(shape, L, np.ones(L ** shape.flower_len, dtype=bool), rule="all_ones")


def lift(f, radius):
    """Same decisions, read from the inner part of a larger flower."""
    if radius < f.radius:
        raise DomainError("lift can only increase the radius")
    k = f.shape.flower_len
    return CertifiedAlgorithm(
        f.shape.with_radius(radius),
        f.model,
        "builtin",
        f"lift({f.rule})",
        lambda x: f.accepts(x[..., :k]),
        params={"base": f},
        status=f.status,
        trials=f.trials,
    )


def reversal_index(shape, L):
    """Index of reverse(w) for every flower index w."""
    c = la.Codec(L, shape.flower_len)
    w = c.decode(np.arange(c.count))
    return w @ c.weights(la.reverse_map(shape.delta, shape.radius), shape.flower_len)


def is_reversal_symmetric(f, budget=None):
    """f(w) = f(reverse(w)) for every flower, i.e. f does not depend on the edge orientation."""
    t = compile_table(f, budget)
    return bool((t.table == t.table[reversal_index(t.shape, t.model.L)]).all())


def symmetrize(f, budget=None):
    """Accept w iff f accepts both w and reverse(w); certification is preserved."""
    t = compile_table(f, budget)
    bits = t.table & t.table[reversal_index(t.shape, t.model.L)]
    return table_algorithm(t.shape, t.model.L, bits, rule=f"symmetrize({f.rule})", status=f.status)


def compile_table(f, budget=None, chunk=1 << 18):
    """Materialize f as a bit table over all Discrete flowers."""
    if f.kind == "table":
        return f
    if not f.model.is_discrete:
        raise DomainError("tables need a Discrete label model")
    space = la.enumerate_space("flower", f.shape, f.model, budget)
    bits = np.empty(space.count, dtype=bool)
    for start, block in space.chunks(chunk):
        bits[start : start + len(block)] = f.accepts(block)
    return table_algorithm(f.shape, f.model.L, bits, rule=f.rule, status=f.status)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    status: str
    passed: bool
    checked: int
    witness: Optional[tuple] = None
    method: str = "exhaustive"

    def __bool__(self):
        return self.passed


def accepted_flowers(f, budget=None, chunk=1 << 18):
    """Label array of every accepted flower (Discrete mode)."""
    if f.kind == "table":
        idx = np.flatnonzero(f.table)
        return f.codec.decode(idx)
    space = la.enumerate_space("flower", f.shape, f.model, budget)
    found = [block[f.accepts(block)] for _, block in space.chunks(chunk)]
    return np.concatenate(found) if found else np.zeros((0, f.shape.flower_len), dtype=np.int64)


def verify_matching_certified(f, method="exhaustive", trials=10_000, seed=0, budget=None):
    """Check that no two incident flowers are both accepted.

    Exhaustive mode marks, for every accepted flower w and side v, each
    neighborhood x = tau(end_v(w)) with the direction tau(1) in which w
    extends x.  Two incident accepted flowers exist exactly when some x picks
    up two different directions, so the scan covers every (v, v', sigma)
    witness and not only the sigma_i ones.
    """
    if method == "sampled":
        return _verify_sampled(f, trials, seed)
    if not f.model.is_discrete:
        raise DomainError("exhaustive verification needs a Discrete label model")
    delta, r, L = f.delta, f.radius, f.model.L
    check_budget(L ** f.shape.flower_len, budget)
    acc = accepted_flowers(f, budget)
    checked = L ** f.shape.flower_len
    if len(acc) == 0:
        return VerificationReport("verified_exhaustive", True, checked)
    ncodec = la.Codec(L, f.shape.nbhd_len)
    perms = la.all_perms(delta)
    xs, ds, src = [], [], []
    for vi, v in enumerate(la.SIDES):
        ends = acc[:, la.end_map(delta, r, v)]
        for ti, tau in enumerate(perms):
            xs.append(ends @ ncodec.weights(la.shuffle_map(delta, r, tau), f.shape.nbhd_len))
            ds.append(np.full(len(acc), tau[0]))
            src.append(np.stack([np.arange(len(acc)), np.full(len(acc), vi), np.full(len(acc), ti)], axis=1))
    xs, ds, src = np.concatenate(xs), np.concatenate(ds), np.concatenate(src)
    # compress neighborhood ids before the min/max reduction
    uniq, inv = np.unique(xs, return_inverse=True)
    lo = np.full(len(uniq), delta + 1)
    hi = np.zeros(len(uniq), dtype=np.int64)
    np.minimum.at(lo, inv, ds)
    np.maximum.at(hi, inv, ds)
    bad = np.flatnonzero(lo != hi)
    if len(bad) == 0:
        return VerificationReport("verified_exhaustive", True, checked)
    g = bad[0]
    e1 = src[np.flatnonzero((inv == g) & (ds == lo[g]))[0]]
    e2 = src[np.flatnonzero((inv == g) & (ds == hi[g]))[0]]
    w1 = la.Flower(f.shape, f.model, acc[e1[0]])
    w2 = la.Flower(f.shape, f.model, acc[e2[0]])
    tau1, tau2 = perms[e1[2]], perms[e2[2]]
    # end_{v2}(w2) = tau2^-1(x) = (tau2^-1 o tau1)(end_{v1}(w1))
    wit = la.Witness(la.SIDES[e2[1]], la.SIDES[e1[1]], la.compose(la.inverse(tau2), tau1))
    assert la.end(wit.v, w2) == la.shuffle(wit.sigma, la.end(wit.v_prime, w1)) and wit.sigma[0] != 1
    return VerificationReport("violation", False, checked, witness=(w2, w1, wit))


def _verify_sampled(f, trials, seed):
    """Random incident pairs: two extensions of one neighborhood in different directions."""
    delta, r = f.delta, f.radius
    rng = stream(seed, "verify_sampled")
    perms = la.all_perms(delta)
    remaining, done = trials, 0
    while remaining > 0:
        n = min(remaining, 1 << 14)
        x = la.sample_uniform("neighborhood", f.shape, f.model, rng, size=n)
        t1, t2 = rng.integers(0, len(perms), n), rng.integers(0, len(perms), n)
        v1, v2 = rng.integers(0, 2, n), rng.integers(0, 2, n)
        for k in range(n):
            p1, p2 = perms[t1[k]], perms[t2[k]]
            if p1[0] == p2[0]:
                continue
            xk = la.Neighborhood(f.shape, f.model, x[k])
            # x = tau(end_v(w)) means end_v(w) = tau^-1(x)
            a = la.shuffle(la.inverse(p1), xk)
            b = la.shuffle(la.inverse(p2), xk)
            w1 = la.sample_cond_end(la.SIDES[v1[k]], a, rng)
            w2 = la.sample_cond_end(la.SIDES[v2[k]], b, rng)
            if f(w1) and f(w2):
                wit = la.incident(w1, w2)
                return VerificationReport("violation", False, done + k + 1, (w1, w2, wit), "sampled")
        remaining -= n
        done += n
    return VerificationReport("verified_sampled", True, trials, method="sampled")


def verified(f, **kw):
    """Return f with its status updated by verification; raise if it fails."""
    rep = verify_matching_certified(f, **kw)
    if not rep.passed:
        raise ValueError(f"{f.rule} is not matching-certified: {rep.witness}")
    return f.with_status(rep.status, rep.checked if rep.method == "sampled" else None)


# ---------------------------------------------------------------------------
# survival probability


@dataclass(frozen=True)
class SurvivalEstimate:
    value: float
    method: str
    exact: Optional[Fraction] = None
    trials: Optional[int] = None
    half_width_95: Optional[float] = None

    def to_json(self):
        out = {"value": self.value, "method": self.method}
        if self.exact is not None:
            out["numerator"] = self.exact.numerator
            out["denominator"] = self.exact.denominator
            out["exact"] = str(self.exact)
        if self.trials is not None:
            out["trials"] = self.trials
            out["half_width_95"] = self.half_width_95
        return out


def survivors(f, z):
    """Boolean mask over neighborhood labels z (radius r+1): no res_i(z) accepted."""
    delta, r1 = f.delta, f.radius + 1
    alive = np.ones(z.shape[:-1], dtype=bool)
    for i in range(1, delta + 1):
        alive &= ~f.accepts_mapped(z, la.res_map(delta, r1, i))
    return alive


def survival_probability(f, method="exact", trials=1_000_000, seed=0, budget=None, chunk=1 << 18):
    """P_f = Pr over z ~ R_{r+1} that every res_i(z) is rejected."""
    big = f.shape.with_radius(f.radius + 1)
    if method == "exact":
        if not f.model.is_discrete:
            raise DomainError("exact survival needs a Discrete label model")
        space = la.enumerate_space("neighborhood", big, f.model, budget)
        count = sum(int(survivors(f, block).sum()) for _, block in space.chunks(chunk))
        p = Fraction(count, space.count)
        return SurvivalEstimate(float(p), "exact", exact=p)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    count, k = 0, 0
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        z = la.sample_uniform("neighborhood", big, f.model, stream(seed, "survival", k), size=n)
        count += int(survivors(f, z).sum())
        k += 1
    p = count / trials
    hw = 1.96 * math.sqrt(max(p * (1 - p), 0.0) / trials)
    return SurvivalEstimate(p, "monte_carlo", trials=trials, half_width_95=hw)


def acceptance_probability(f, budget=None):
    """Exact Pr over w ~ F_r that f(w) = 1."""
    if f.kind == "table":
        return Fraction(int(f.table.sum()), f.table.shape[0])
    space = la.enumerate_space("flower", f.shape, f.model, budget)
    return Fraction(int(sum(f.accepts(b).sum() for _, b in space.chunks())), space.count)


# ---------------------------------------------------------------------------
# wrapping LOCAL procedures


def id_bits(n):
    """Prefix length 10 log2 n, capped by the 52 random bits of an f64 tape."""
    return min(52, 10 * max(1, math.ceil(math.log2(max(n, 2)))))


def tape_ids(labels, n, model):
    """Split tapes into (id, residual).

    Continuous tapes give the leading id_bits(n) bits as the id.  A Discrete
    tape is a single base-L digit, which serves as both id and residual.
    """
    labels = np.asarray(labels)
    if model.is_discrete:
        return labels.astype(np.int64), labels
    b = id_bits(n)
    scaled = labels * float(2**b)
    ids = np.minimum(np.floor(scaled), 2**b - 1).astype(np.int64)
    return ids, scaled - ids


def id_collision_bound(n, bits):
    """Union bound n^2 2^-bits on any two of n ids colliding."""
    return min(1.0, n * n * 2.0 ** (-bits))


def greedy_local(n, model):
    """1-round LOCAL procedure: select an edge whose id is a strict local minimum."""

    def proc(x):
        ids, _ = tape_ids(x, n, model)
        return ids[..., 0] < ids[..., 1:].min(axis=-1)

    return proc


def propose_local(p, n, model):
    """0-round procedure: propose the edge when its residual randomness is below p."""

    def proc(x):
        _, resid = tape_ids(x, n, model)
        u = resid[..., 0] / model.L if model.is_discrete else resid[..., 0]
        return u < p

    return proc


def certify_local(proc, radius, n, shape_delta, model, name="local"):
    """Wrap an r-round procedure into an (r+1)-round matching-certified algorithm.

    The wrapped algorithm runs ``proc`` on its own r-flower and on the r-flower
    of every incident edge, and declines whenever a neighbor would also be
    selected.  The neighbor's view is rebuilt from the (r+1)-flower for every
    ordering of the shared vertex's other branches and both orientations, so
    the deletion step catches the neighbor's true view whatever ports it has.
    For procedures that ignore those orderings this changes nothing and the
    wrapped output equals the procedure's output whenever that is a matching.
    """
    delta, r = shape_delta, radius
    big = la.Shape(delta, r + 1)
    inner = la.flower_len(delta, r)
    rev = la.reverse_map(delta, r)
    r1 = la.res1_map(delta, r + 1)
    views = []
    for v in la.SIDES:
        em = la.end_map(delta, r + 1, v)
        for tau in la.all_perms(delta):
            if tau[0] == 1:
                continue
            m = em[la.shuffle_map(delta, r + 1, tau)][r1]
            views.append(m)
            views.append(m[rev])

    def rule(x):
        keep = np.asarray(proc(x[..., :inner]), dtype=bool)
        for m in views:
            keep &= ~np.asarray(proc(x[..., m]), dtype=bool)
        return keep

    return CertifiedAlgorithm(big, model, "wrapped", f"certify_local({name})", rule, params={"n": n, "inner_radius": r})


# ---------------------------------------------------------------------------
# table files

TABLE_MAGIC = b"MMCA"
TABLE_VERSION = 1
_TABLE_HEADER = struct.Struct("<4sHHHIH")


def write_table(path, f, provenance=None):
    """Binary table (16-byte header + packed bits) plus a JSON manifest next to it."""
    f = compile_table(f)
    path = Path(path)
    head = _TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, f.delta, f.radius, f.model.L, 0)
    path.write_bytes(head + np.packbits(f.table, bitorder="little").tobytes())
    manifest = f.describe()
    manifest["bits"] = int(f.table.shape[0])
    manifest["ones"] = int(f.table.sum())
    manifest["provenance"] = provenance or {}
    Path(str(path) + ".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def read_table(path):
    path = Path(path)
    buf = path.read_bytes()
    magic, version, delta, radius, L, _ = _TABLE_HEADER.unpack_from(buf)
    if magic != TABLE_MAGIC or version != TABLE_VERSION:
        raise StructuralError(f"{path} is not an MMCA table file")
    shape = la.Shape(delta, radius)
    nbits = L ** shape.flower_len
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, offset=_TABLE_HEADER.size), bitorder="little")
    if bits.shape[0] < nbits:
        raise StructuralError(f"{path} is truncated")
    status, rule = "asserted", "table"
    man = Path(str(path) + ".json")
    if man.exists():
        meta = json.loads(man.read_text())
        status = meta.get("status", status)
        rule = meta.get("rule", rule)
    return table_algorithm(shape, L, bits[:nbits].astype(bool), rule=rule, status=status)
