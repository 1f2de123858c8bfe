"""Sample-label-MVEE rounding of a labeled point set.

Points are drawn uniformly (with replacement) from the still-unassigned
set and labeled until some class has collected a batch of ``ceil(c m^2)``
draws.  Everything still unassigned inside the MVEE of that batch is
assigned to the class and removed.  At the end each class keeps the union
of its trapped points together with their MVEE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import OracleExhausted
from .geometry import Ellipsoid, as_points, hull_distance, mvee

CONTAIN_TOL = 1e-9


@dataclass(frozen=True)
class RoundConfig:
    c: float = 5.0
    mvee_eps: float = 1e-3
    max_label_queries: int = 10**6


class LabelCache:
    """Learner-side memory of revealed labels, keyed by global point index."""

    def __init__(self, suite):
        self.suite = suite
        self.known: dict[int, int] = {}

    def __contains__(self, x) -> bool:
        return int(x) in self.known

    def get(self, x, default=None):
        return self.known.get(int(x), default)

    def learn(self, x, cls: int) -> None:
        self.known[int(x)] = int(cls)

    def label(self, x) -> int:
        x = int(x)
        if x not in self.known:
            self.known[x] = self.suite.label(x)
        return self.known[x]


@dataclass
class Rounding:
    """``parts[i] = (X_i, E_i)`` keyed by class; ``E_i`` is ``None`` when ``X_i`` is empty.

    Index sets are local; ``index`` maps them to global point indices.
    """

    parts: dict
    alpha: float
    batches: int = 0
    label_queries: int = 0
    traps: dict = field(default_factory=dict)
    index: Optional[np.ndarray] = None

    def labels(self) -> list:
        return list(self.parts)


def rounding_alpha(m: int) -> float:
    return float(m * m * (m + 1))


def round_partition(X, classes: Sequence[int], oracle, cfg: Optional[RoundConfig] = None,
                    rng: Optional[np.random.Generator] = None, index=None,
                    cache: Optional[LabelCache] = None) -> Rounding:
    """Partition ``X`` into per-class traps with enclosing ellipsoids.

    Parameters
    ----------
    X : (n, m) array
        Points of the current subproblem.
    classes : sequence of int
        Labels that may occur among these points.
    oracle : OracleSuite
    index : array of int, optional
        Global oracle index of each row of ``X`` (default ``arange(n)``).
    cache : LabelCache, optional
        Shared label memory; repeated draws of a known point cost nothing.

    Returns
    -------
    Rounding
        Index sets in ``parts`` are local (rows of ``X``).
    """
    cfg = cfg or RoundConfig()
    rng = rng if rng is not None else np.random.default_rng()
    X = as_points(X)
    n, m = X.shape
    index = np.arange(n) if index is None else np.asarray(index, dtype=np.int64)
    cache = cache if cache is not None else LabelCache(oracle)
    batch = max(1, math.ceil(cfg.c * m * m))
    start = oracle.ledger.label_count

    remaining = np.ones(n, dtype=bool)
    traps: dict[int, list] = {c: [] for c in classes}
    n_batches = 0
    while remaining.any():
        pool = np.flatnonzero(remaining)
        draws: dict[int, list] = {c: [] for c in classes}
        while True:
            x = int(pool[rng.integers(pool.size)])
            g = int(index[x])
            if g not in cache and oracle.ledger.label_count - start >= cfg.max_label_queries:
                raise OracleExhausted(f"rounding exceeded {cfg.max_label_queries} label queries")
            y = cache.label(g)
            if y not in draws:
                raise ValueError(f"label {y} not among the expected classes {list(classes)}")
            draws[y].append(x)
            if len(draws[y]) == batch:
                break
        sample = np.unique(np.asarray(draws[y]))
        ell = mvee(X[sample], cfg.mvee_eps)
        inside = pool[ell.contains(X[pool], CONTAIN_TOL)]
        # the batch itself is always trapped, so the loop shrinks X
        trapped = np.union1d(inside, sample)
        traps[y].append(trapped)
        remaining[trapped] = False
        n_batches += 1

    parts = {}
    for c in classes:
        if traps[c]:
            Xi = np.unique(np.concatenate(traps[c]))
            parts[c] = (Xi, mvee(X[Xi], cfg.mvee_eps))
        else:
            parts[c] = (np.zeros(0, dtype=np.int64), None)
    return Rounding(parts, rounding_alpha(m), n_batches,
                    oracle.ledger.label_count - start, traps, index)


@dataclass
class RoundingReport:
    ok: bool
    partition_ok: bool
    containment_ok: bool
    margins: list
    violations: list


def verify_rounding(r: Rounding, X, labels, gamma: float, tol: float = 1e-6,
                    contain_tol: float = CONTAIN_TOL) -> RoundingReport:
    """Check partition, containment and post-rounding pairwise margins.

    ``labels`` are the hidden labels of the rows of ``X``.  Every margin is
    a hull distance under the metric of the owning part's ellipsoid and
    must be at least ``gamma / r.alpha - tol``.
    """
    X = as_points(X)
    labels = np.asarray(labels)
    n = X.shape[0]
    violations = []
    counts = np.zeros(n, dtype=np.int64)
    for Xi, _ in r.parts.values():
        np.add.at(counts, Xi, 1)
    partition_ok = bool(np.all(counts == 1))
    if not partition_ok:
        violations.append(("partition", int(np.sum(counts == 0)), int(np.sum(counts > 1))))

    containment_ok = True
    margins = []
    need = gamma / r.alpha - tol
    for i, (Xi, Ei) in r.parts.items():
        if Xi.size == 0:
            continue
        inside = Ei.contains(X[Xi], contain_tol)
        if not inside.all():
            containment_ok = False
            violations.append(("containment", i, int(np.sum(~inside))))
        own = Xi[labels[Xi] == i]
        if own.size == 0:
            continue
        metric = Ei.metric()
        for j in np.unique(labels[Xi]):
            if j == i:
                continue
            other = Xi[labels[Xi] == j]
            d = hull_distance(X[own], X[other], metric).lower
            ok = d >= need
            margins.append((i, int(j), d, ok))
            if not ok:
                violations.append(("margin", i, int(j), d))
    return RoundingReport(not violations, partition_ok, containment_ok, margins, violations)
