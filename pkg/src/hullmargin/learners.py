"""End-to-end learners built from rounding and cutting planes.

All learners take the points, an :class:`~hullmargin.oracles.OracleSuite`
(or a binary view of one) and return assignments as label arrays.  Class
labels are never read directly; they are only obtained through queries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cutting_plane import CPConfig, cp_learn
from .errors import NotPositive, RecursionDepthExceeded
from .geometry import as_points, to_unit_ball_transform
from .rounding import LabelCache, RoundConfig, Rounding, round_partition


@dataclass(frozen=True)
class LearnerConfig:
    round: RoundConfig = field(default_factory=RoundConfig)
    cp: CPConfig = field(default_factory=CPConfig)


@dataclass
class LearnedPartition:
    """``assignment[x]`` is the learned class of point ``x``."""

    assignment: np.ndarray
    label_count: int
    seed_count: int
    roundings: list = field(default_factory=list)
    cp_runs: list = field(default_factory=list)
    calls: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return sum(r.rounds for r in self.cp_runs)


def _part_coords(X: np.ndarray, part: np.ndarray, ell) -> np.ndarray:
    T = to_unit_ball_transform(ell, fallback=True)
    return T(X[part])


def _known_signs(cache: LabelCache, index: np.ndarray, pos: int, neg: int) -> dict:
    out = {}
    for loc, g in enumerate(index):
        c = cache.get(g)
        if c is not None:
            out[loc] = 1 if c == pos else (-1 if c == neg else 0)
    return out


class _Tracker:
    """Keeps the cache in sync with labels revealed by SEED answers."""

    def __init__(self, suite, cache):
        self.suite = suite
        self.cache = cache
        self.seen = len(suite.ledger.transcript)

    def sync(self):
        tr = self.suite.ledger.transcript
        for ev in tr[self.seen:]:
            if ev.kind == "seed" and ev.answer is not None:
                self.cache.learn(ev.answer, ev.cls)
        self.seen = len(tr)


def _separate(X, part, ell, suite, i, j, cfg, rng, cache, tracker, runs):
    idx = np.asarray(part, dtype=np.int64)
    Y = _part_coords(X, idx, ell)
    res = cp_learn(Y, suite.binary(i, j), cfg.cp, rng, index=idx,
                   known=_known_signs(cache, idx, i, j))
    tracker.sync()
    runs.append(res)
    return res


def bin_learn(X, suite, cfg: Optional[LearnerConfig] = None, rng: Optional[np.random.Generator] = None,
              classes: Sequence[int] = (1, 2)) -> LearnedPartition:
    """Two-class exact learner: one rounding, then a cutting-plane run per part."""
    cfg = cfg or LearnerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    X = as_points(X)
    n = X.shape[0]
    c1, c2 = classes
    l0, s0 = suite.ledger.snapshot()
    cache = LabelCache(suite)
    tracker = _Tracker(suite, cache)
    rounding = round_partition(X, classes, suite, cfg.round, rng, cache=cache)
    out = np.zeros(n, dtype=np.int64)
    runs = []
    for i, j in ((c1, c2), (c2, c1)):
        part, ell = rounding.parts[i]
        if part.size == 0:
            continue
        res = _separate(X, part, ell, suite, i, j, cfg, rng, cache, tracker, runs)
        out[part[res.plus]] = i
        out[part[res.minus]] = j
    l1, s1 = suite.ledger.snapshot()
    return LearnedPartition(out, l1 - l0, s1 - s0, [rounding], runs, 1)


def kclass_learn(X, labels: Sequence[int], suite, cfg: Optional[LearnerConfig] = None,
                 rng: Optional[np.random.Generator] = None) -> LearnedPartition:
    """Exact k-class learner.

    Each call rounds its point set, extracts ``C_i`` from every part as the
    intersection of the pairwise ``i``-vs-``j`` separators, and recurses on
    the remainder of the part with ``i`` removed from the label set.
    """
    cfg = cfg or LearnerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    X = as_points(X)
    n = X.shape[0]
    labels = list(labels)
    l0, s0 = suite.ledger.snapshot()
    cache = LabelCache(suite)
    tracker = _Tracker(suite, cache)
    out = np.zeros(n, dtype=np.int64)
    roundings: list[Rounding] = []
    runs = []
    limit = kclass_call_limit(len(labels))
    calls = 0
    per_level = [0] * max(len(labels), 1)

    def rec(idx: np.ndarray, labs: list):
        nonlocal calls
        calls += 1
        if calls > limit:
            raise RecursionDepthExceeded(f"more than {limit} recursive calls")
        per_level[len(labels) - len(labs)] += 1
        if len(labs) == 1:
            # a single label query settles the whole set
            out[idx] = cache.label(idx[0])
            return
        r = round_partition(X[idx], labs, suite, cfg.round, rng, index=idx, cache=cache)
        roundings.append(r)
        for i in labs:
            part_loc, ell = r.parts[i]
            if part_loc.size == 0:
                continue
            part = idx[part_loc]
            keep = np.ones(part.size, dtype=bool)
            for j in labs:
                if j == i:
                    continue
                res = _separate(X, part, ell, suite, i, j, cfg, rng, cache, tracker, runs)
                mask = np.zeros(part.size, dtype=bool)
                mask[res.plus] = True
                keep &= mask
            out[part[keep]] = i
            rest = part[~keep]
            if rest.size:
                rec(rest, [c for c in labs if c != i])

    if n:
        rec(np.arange(n), labels)
    l1, s1 = suite.ledger.snapshot()
    return LearnedPartition(out, l1 - l0, s1 - s0, roundings, runs, calls, {"calls_per_level": per_level})


def kclass_call_limit(k: int) -> int:
    """Most calls the k-class recursion can make: ``k!/(k-t)!`` at depth ``t``.

    Calls at one depth work on disjoint point sets, so each depth (and in
    particular the ``k!`` single-label leaves) also holds at most ``n`` calls.
    """
    return sum(math.factorial(k) // math.factorial(k - t) for t in range(max(k, 1)))


# --------------------------------------------------------------------------
# one-sided margin


@dataclass
class BallSearchResult:
    subset: np.ndarray
    t: float
    label_queries: int
    seed_queries: int
    r: float
    R: float


def ball_search(X, x1: int, oracle, x1_positive: bool = False, cache: Optional[dict] = None) -> BallSearchResult:
    """Find a ball around ``x1`` containing every positive point.

    ``oracle`` is a binary view (``label`` answers ``+1``/other, ``seed``
    takes a sign).  Points are ordered by Euclidean distance from ``x1``,
    ties broken by index.  A binary search over that order with LABEL finds
    adjacent positive/non-positive points; a shrinking guess ``t`` then
    sizes the ball until SEED finds no positive point outside it.
    """
    X = as_points(X)
    n = X.shape[0]
    x1 = int(x1)
    cache = {} if cache is None else cache
    nl = ns = 0

    def lab(x):
        nonlocal nl
        x = int(x)
        if x not in cache:
            nl += 1
            cache[x] = oracle.label(x)
        return cache[x]

    def seed(mask):
        nonlocal ns
        if not mask.any():
            return None
        ns += 1
        return oracle.seed(np.flatnonzero(mask), +1)

    if x1_positive:
        cache[x1] = 1
    elif lab(x1) != 1:
        raise NotPositive(f"point {x1} is not in the positive class")
    dist = np.linalg.norm(X - X[x1], axis=1)
    order = np.lexsort((np.arange(n), dist))
    if lab(order[-1]) == 1:
        return BallSearchResult(np.arange(n), 1.0, nl, ns, float(dist.max()), float(dist.max()))
    lo, hi = 0, n - 1
    while hi - lo >= 2:
        mid = (hi + lo + 1) // 2
        if lab(order[mid]) == 1:
            lo = mid
        else:
            hi = mid
    r = float(dist[order[lo]])
    R = float(dist[order[hi]])
    t = 1.0
    while True:
        ring = (dist >= R) & (dist <= R / t)
        if seed(ring) is None:
            inside = dist <= r
        else:
            inside = dist <= R / t
        t_used = t
        t /= 2
        if seed(~inside) is None:
            return BallSearchResult(np.flatnonzero(inside), t_used, nl, ns, r, R)


def one_sided_learn(X, oracle, cfg: Optional[LearnerConfig] = None,
                    rng: Optional[np.random.Generator] = None) -> LearnedPartition:
    """Recover the positive class when only it is guaranteed a margin.

    ``oracle`` is a binary view of a suite.  The assignment uses ``+1`` for
    the recovered class and ``-1`` elsewhere.
    """
    cfg = cfg or LearnerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    X = as_points(X)
    n = X.shape[0]
    suite = oracle.suite
    l0, s0 = suite.ledger.snapshot()
    out = -np.ones(n, dtype=np.int64)
    x1 = oracle.seed(np.arange(n), +1) if n else None
    if x1 is None:
        l1, s1 = suite.ledger.snapshot()
        return LearnedPartition(out, l1 - l0, s1 - s0)
    cache = {int(x1): 1}
    bs = ball_search(X, x1, oracle, x1_positive=True, cache=cache)
    sub = bs.subset
    pos_in = {int(g): i for i, g in enumerate(sub)}
    known = {pos_in[g]: (1 if s == 1 else -1) for g, s in cache.items() if g in pos_in}
    res = cp_learn(X[sub] - X[x1], oracle, cfg.cp, rng, index=sub, known=known)
    out[sub[res.plus]] = 1
    l1, s1 = suite.ledger.snapshot()
    return LearnedPartition(out, l1 - l0, s1 - s0, [], [res], 1,
                            {"ball_search": bs, "x1": int(x1)})


def one_sided_ratio(kappa: float, gamma: float) -> float:
    """Reference ``R/r`` for the cutting-plane stage of the one-sided learner."""
    return 4.0 * kappa * kappa / (gamma * gamma)


# --------------------------------------------------------------------------
# bounds used by the benchmarks


def rational_margin_bound(B: int, m: int, c_exp: float) -> float:
    """``2^(-c_exp m^2 B)`` (underflows to 0.0 for large exponents)."""
    if B < 1 or m < 1:
        raise ValueError("B and m must be at least 1")
    return 2.0 ** (-c_exp * m * m * B)


def grid_margin_bound(c: float, m: int) -> float:
    """``(c / sqrt(m))^(m+2)``."""
    inv = 1.0 / c
    if abs(inv - round(inv)) > 1e-9 or round(inv) < 1:
        raise ValueError("1/c must be a positive integer")
    if m < 1:
        raise ValueError("m must be at least 1")
    return (c / math.sqrt(m)) ** (m + 2)


CP_CONSTANT = 2.0 / math.log2(math.e / (math.e - 1.0))


def cp_reference(m: int, R_over_r: float) -> float:
    """Explicit cutting-plane query reference ``(2m / log2(e/(e-1))) log2(8 R/r)``."""
    return CP_CONSTANT * m * math.log2(8.0 * R_over_r)


def lower_bound_queries(m: int, gamma: float) -> float:
    """Staircase lower bound ``(m/24) log2(1/(2 gamma))``."""
    return m / 24.0 * math.log2(1.0 / (2.0 * gamma))
