"""Cutting-plane learning of a homogeneous separator from SEED answers.

Points are lifted to ``(x, R)`` so that an affine separator becomes a
homogeneous one.  The version space of unit normals starts as the unit
ball of ``R^{m+1}``; each round splits the points by the estimated
centroid of the version space, asks SEED for a counterexample on each
side, and cuts with a rotated constraint that keeps the estimated centroid
on its boundary.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetExceeded, DegenerateReference, SeparabilityViolated
from .geometry import Halfspace, as_points
from .sampling import ConvexBody, SamplingConfig, draw_samples, refresh_rounding

REF_TOL = 1e-12


@dataclass(frozen=True)
class LiftedSet:
    original: np.ndarray
    lifted: np.ndarray
    R: float


def lift(X) -> LiftedSet:
    """Append the coordinate ``R = max ||x||`` to every point (``R = 1`` if all are zero)."""
    X = as_points(X)
    R = float(np.linalg.norm(X, axis=1).max()) if X.size else 0.0
    if R == 0.0:
        R = 1.0
    lifted = np.hstack([X, np.full((X.shape[0], 1), R)])
    return LiftedSet(X, lifted, R)


def relax_cut(u, z0, mu_hat) -> np.ndarray:
    """``u - z0 <u, mu> / <z0, mu>``: rotate ``u`` so that ``mu`` lies on its hyperplane."""
    u = np.asarray(u, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    mu = np.asarray(mu_hat, dtype=float)
    den = float(z0 @ mu)
    if den <= REF_TOL:
        raise DegenerateReference(f"<z0, mu_hat> = {den:.3e} is not positive")
    return u - z0 * (float(u @ mu) / den)


@dataclass
class CutRecord:
    round: int
    point: int
    label: int
    lifted: np.ndarray
    raw_normal: np.ndarray
    normal: np.ndarray
    mu_hat: np.ndarray
    relaxed: bool
    acceptance: float
    constraints: int
    seed_answers: tuple


@dataclass(frozen=True)
class CPConfig:
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    max_rounds: Optional[int] = None


@dataclass
class CPResult:
    plus: np.ndarray
    minus: np.ndarray
    rounds: int
    records: list
    R: float
    seed_queries: int = 0

    def write_trace(self, path) -> None:
        write_trace(self.records, path)


def write_trace(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "seed_answers", "acceptance", "constraints"])
        for r in records:
            ans = ";".join("nil" if a is None else str(a) for a in r.seed_answers)
            w.writerow([r.round, ans, f"{r.acceptance:.6f}", r.constraints])


def _split(n, plus_mask):
    idx = np.arange(n)
    return idx[plus_mask], idx[~plus_mask]


def cp_learn(X, oracle, cfg: Optional[CPConfig] = None, rng: Optional[np.random.Generator] = None,
             index=None, known: Optional[dict] = None) -> CPResult:
    """Separate the hidden ``+1`` and ``-1`` points of ``X`` using SEED only.

    Parameters
    ----------
    X : (n, m) array
    oracle : object with ``seed(U, sign)``
        ``U`` holds global indices; ``sign`` is ``+1`` or ``-1``.
    index : array of int, optional
        Global index of each row (default ``arange(n)``).
    known : dict, optional
        Local row -> ``+1``/``-1``/``0`` for points whose label is already
        revealed (``0``: neither class).  These are never queried again and
        are placed by their known label (``0`` goes to the minus side).

    Returns
    -------
    CPResult
        Local row indices of the two sides, with one :class:`CutRecord`
        per cut.
    """
    cfg = cfg or CPConfig()
    rng = rng if rng is not None else np.random.default_rng()
    X = as_points(X)
    n = X.shape[0]
    index = np.arange(n) if index is None else np.asarray(index, dtype=np.int64)
    sign = np.zeros(n, dtype=np.int64)  # revealed labels, 0 = unknown or neither
    active = np.ones(n, dtype=bool)
    for x, s in (known or {}).items():
        active[x] = False
        sign[x] = s
    queries = 0

    def ask(mask, s):
        nonlocal queries
        if not mask.any():
            return None
        queries += 1
        a = oracle.seed(index[mask], s)
        if a is None:
            return None
        loc = int(np.flatnonzero(index == a)[0])
        sign[loc] = s
        active[loc] = False
        return loc

    def finish(plus_mask, rounds, records, R):
        plus_mask = plus_mask.copy()
        plus_mask[sign > 0] = True
        plus_mask[(~active) & (sign <= 0)] = False
        p, q = _split(n, plus_mask)
        return CPResult(p, q, rounds, records, R, queries)

    if n == 0:
        return finish(np.zeros(0, dtype=bool), 0, [], 1.0)
    if ask(active, -1) is None:
        return finish(np.ones(n, dtype=bool), 0, [], 1.0)
    if ask(active, +1) is None:
        return finish(np.zeros(n, dtype=bool), 0, [], 1.0)

    L = lift(X)
    d = L.lifted.shape[1]
    rs = cfg.sampling.resolve(d)
    body = ConvexBody.unit_ball(d)
    mu = np.zeros(d)
    mu[0] = 1.0
    pool = None
    z0 = None
    records = []
    max_rounds = cfg.max_rounds if cfg.max_rounds is not None else n + 1
    for rnd in range(max_rounds + 1):
        if rnd > 0:
            pool = draw_samples(body, rs.n_samples, rs.burn_in, rng, rs.chains)
            mu = pool.mean(axis=0)
        side = L.lifted @ mu >= 0
        u = ask(active & side, -1)
        answers = (None if u is None else int(index[u]),)
        if u is None:
            u = ask(active & ~side, +1)
            answers = answers + (None if u is None else int(index[u]),)
        if u is None:
            return finish(side, rnd, records, L.R)
        if rnd >= max_rounds:
            break
        h = sign[u]
        z = h * L.lifted[u]
        relaxed = False
        if z0 is None:
            z0 = z
            normal = z
        else:
            try:
                normal = relax_cut(z, z0, mu)
                relaxed = True
            except DegenerateReference:
                normal = z
            if np.linalg.norm(normal) <= 1e-12 * np.linalg.norm(z):
                normal = z
                relaxed = False
        body = refresh_rounding(body, Halfspace(normal, 0.0), cfg.sampling, rng, pool=pool)
        records.append(CutRecord(rnd, int(index[u]), int(h), L.lifted[u].copy(), z, normal,
                                 mu.copy(), relaxed, body.acceptance, body.normals.shape[0], answers))
    raise SeparabilityViolated(f"no separator after {max_rounds} rounds; input not separable")


def perceptron_seed_baseline(X, oracle, cap: int = 100_000, index=None) -> CPResult:
    """Homogeneous Perceptron on the lifted points, using SEED to find mistakes."""
    X = as_points(X)
    n = X.shape[0]
    index = np.arange(n) if index is None else np.asarray(index, dtype=np.int64)
    if n == 0:
        return CPResult(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 0, [], 1.0)
    L = lift(X)
    pos_of = {int(g): i for i, g in enumerate(index)}
    w = np.zeros(L.lifted.shape[1])
    queries = 0
    rounds = 0
    while True:
        side = L.lifted @ w >= 0
        found = None
        for mask, s in ((side, -1), (~side, +1)):
            if not mask.any():
                continue
            if queries >= cap:
                raise BudgetExceeded(f"perceptron used {cap} seed queries")
            queries += 1
            a = oracle.seed(index[mask], s)
            if a is not None:
                found = (pos_of[int(a)], s)
                break
        if found is None:
            p, q = _split(n, side)
            return CPResult(p, q, rounds, [], L.R, queries)
        x, s = found
        w = w + s * L.lifted[x]
        rounds += 1
