"""LABEL and SEED oracles with query accounting.

Classes are integers ``1..k``.  ``seed`` returns ``None`` for NIL.  The
staircase policy answers truthfully for its hidden target but breaks ties
so as to reveal as little as possible, and keeps the per-column intervals
of still-possible targets up to date.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import InvalidClass, OracleExhausted


@dataclass(frozen=True)
class TargetPartition:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and (labels.min() < 1 or labels.max() > self.k):
            raise InvalidClass(f"labels must lie in 1..{self.k}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)


@dataclass(frozen=True)
class QueryEvent:
    t: int
    kind: str
    cls: Optional[int]
    query: tuple
    answer: Optional[int]

    def as_json(self) -> dict:
        return {"t": self.t, "kind": self.kind, "class": self.cls,
                "set_size": len(self.query), "answer": self.answer}


@dataclass
class QueryLedger:
    label_count: int = 0
    seed_count: int = 0
    transcript: list = field(default_factory=list)

    def record(self, kind: str, cls, query, answer) -> None:
        if kind == "label":
            self.label_count += 1
        else:
            self.seed_count += 1
        self.transcript.append(QueryEvent(len(self.transcript), kind, cls, tuple(query), answer))

    def snapshot(self) -> tuple[int, int]:
        return self.label_count, self.seed_count

    @property
    def total(self) -> int:
        return self.label_count + self.seed_count

    def to_jsonl(self, fh) -> None:
        for ev in self.transcript:
            fh.write(json.dumps(ev.as_json()) + "\n")


# --------------------------------------------------------------------------
# staircase bookkeeping


@dataclass(frozen=True)
class StaircaseLayout:
    """Where every point sits in a staircase instance.

    ``band``, ``col`` are 0-based; ``row`` is the 1-based position ``j``
    along its column.  Odd class ``2s+1`` is the prefix part of band ``s``.
    """

    ell: int
    p: int
    n_bands: int
    band: np.ndarray
    col: np.ndarray
    row: np.ndarray


@dataclass(frozen=True)
class StaircaseState:
    """Per band and column, the interval ``[lo, hi]`` of possible prefix lengths.

    The disagreement interval of a column has ``hi - lo + 1`` points: the
    rows ``lo+1..hi`` whose label is unknown plus the known row ``lo``.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def initial(cls, layout: StaircaseLayout) -> "StaircaseState":
        shape = (layout.n_bands, layout.p)
        return cls(np.ones(shape, dtype=np.int64), np.full(shape, layout.ell, dtype=np.int64))

    def sizes(self) -> np.ndarray:
        """Version-space size per band."""
        return np.prod(self.hi - self.lo + 1, axis=1)

    def size(self) -> int:
        return int(np.prod([int(s) for s in self.sizes()], dtype=object))

    def known(self, layout: StaircaseLayout, idx) -> np.ndarray:
        """0 where the label is unknown, else 1 (prefix side) or 2 (suffix side)."""
        idx = np.asarray(idx, dtype=np.int64)
        b, c, j = layout.band[idx], layout.col[idx], layout.row[idx]
        out = np.zeros(idx.size, dtype=np.int64)
        out[j <= self.lo[b, c]] = 1
        out[j > self.hi[b, c]] = 2
        return out


def _class_band(y: int) -> tuple[int, bool]:
    return (y - 1) // 2, (y % 2 == 1)


def staircase_oracle_answer(state: StaircaseState, layout: StaircaseLayout, target: TargetPartition,
                            U: Iterable[int], y: int) -> tuple[Optional[int], StaircaseState]:
    """Answer ``seed(U, y)`` truthfully with least-informative tie-breaking.

    Points whose class is already implied are returned first.  Otherwise,
    among columns whose part of ``U`` meets class ``y``, the lowest column
    is used and its first row (prefix class) or last row (suffix class) is
    returned; that point is necessarily in class ``y``.
    """
    U = np.unique(np.asarray(list(U), dtype=np.int64))
    band, prefix = _class_band(y)
    lo, hi = state.lo.copy(), state.hi.copy()
    if band >= layout.n_bands:
        return None, state
    U = U[layout.band[U] == band]
    if U.size == 0:
        return None, state
    side = 1 if prefix else 2
    kn = state.known(layout, U)
    order = np.lexsort((layout.row[U] if prefix else -layout.row[U], layout.col[U]))
    U, kn = U[order], kn[order]
    inferable = U[kn == side]
    if inferable.size:
        return int(inferable[0]), state

    hit = U[target.labels[U] == y]
    if hit.size == 0:
        # NIL: every column touched learns a bound
        cols, rows = layout.col[U], layout.row[U]
        for c in np.unique(cols):
            r = rows[cols == c]
            if prefix:
                hi[band, c] = min(hi[band, c], r.min() - 1)
            else:
                lo[band, c] = max(lo[band, c], r.max())
        return None, StaircaseState(lo, hi)
    c = layout.col[hit].min()
    in_col = U[layout.col[U] == c]
    x = int(in_col[0])  # first in sort order: smallest row (prefix) or largest (suffix)
    j = layout.row[x]
    if prefix:
        lo[band, c] = max(lo[band, c], j)
    else:
        hi[band, c] = min(hi[band, c], j - 1)
    return x, StaircaseState(lo, hi)


def _staircase_label_update(state: StaircaseState, layout: StaircaseLayout, x: int, cls: int) -> StaircaseState:
    band, prefix = _class_band(cls)
    c, j = layout.col[x], layout.row[x]
    lo, hi = state.lo.copy(), state.hi.copy()
    if prefix:
        lo[band, c] = max(lo[band, c], j)
    else:
        hi[band, c] = min(hi[band, c], j - 1)
    return StaircaseState(lo, hi)


# --------------------------------------------------------------------------
# policies and the suite


@dataclass
class SeedPolicy:
    """How ``seed`` picks among admissible answers."""

    mode: str = "smallest-index"
    rng: Optional[np.random.Generator] = None
    layout: Optional[StaircaseLayout] = None

    def __post_init__(self):
        if self.mode not in ("smallest-index", "random", "staircase-adversarial"):
            raise ValueError(f"unknown seed policy {self.mode!r}")
        if self.mode == "random" and self.rng is None:
            raise ValueError("random policy needs an rng")
        if self.mode == "staircase-adversarial" and self.layout is None:
            raise ValueError("staircase policy needs a layout")


class OracleSuite:
    """LABEL/SEED answering for one hidden target, with a query ledger.

    Parameters
    ----------
    target : TargetPartition
    policy : SeedPolicy, optional
        Defaults to smallest-index.
    label_budget, seed_budget : int, optional
        Raise :class:`OracleExhausted` once exceeded.
    """

    def __init__(self, target: TargetPartition, policy: Optional[SeedPolicy] = None,
                 label_budget: Optional[int] = None, seed_budget: Optional[int] = None):
        self.target = target
        self.policy = policy or SeedPolicy()
        self.ledger = QueryLedger()
        self.label_budget = label_budget
        self.seed_budget = seed_budget
        self.state: Optional[StaircaseState] = None
        if self.policy.mode == "staircase-adversarial":
            self.state = StaircaseState.initial(self.policy.layout)

    @property
    def k(self) -> int:
        return self.target.k

    @property
    def n(self) -> int:
        return self.target.n

    def _check_class(self, i: int) -> None:
        if not (1 <= int(i) <= self.k):
            raise InvalidClass(f"class {i} not in 1..{self.k}")

    def label(self, x: int) -> int:
        x = int(x)
        if not 0 <= x < self.n:
            raise IndexError(f"point index {x} out of range")
        if self.label_budget is not None and self.ledger.label_count >= self.label_budget:
            raise OracleExhausted(f"label budget {self.label_budget} exhausted")
        ans = int(self.target.labels[x])
        self.ledger.record("label", None, (x,), ans)
        if self.state is not None:
            self.state = _staircase_label_update(self.state, self.policy.layout, x, ans)
        return ans

    def seed(self, U, i: int) -> Optional[int]:
        self._check_class(i)
        if self.seed_budget is not None and self.ledger.seed_count >= self.seed_budget:
            raise OracleExhausted(f"seed budget {self.seed_budget} exhausted")
        U = np.unique(np.asarray(U, dtype=np.int64).ravel())
        if U.size and (U[0] < 0 or U[-1] >= self.n):
            raise IndexError("seed set has out-of-range indices")
        mode = self.policy.mode
        if mode == "staircase-adversarial":
            ans, self.state = staircase_oracle_answer(self.state, self.policy.layout, self.target, U, i)
        else:
            hit = U[self.target.labels[U] == i]
            if hit.size == 0:
                ans = None
            elif mode == "random":
                ans = int(hit[self.policy.rng.integers(hit.size)])
            else:
                ans = int(hit[0])
        self.ledger.record("seed", int(i), U.tolist(), ans)
        return ans

    def binary(self, pos: int, neg: int) -> "BinaryView":
        return BinaryView(self, pos, neg)


@dataclass(frozen=True)
class BinaryView:
    """Seed access for a two-class subproblem: ``+1`` is ``pos``, ``-1`` is ``neg``."""

    suite: OracleSuite
    pos: int
    neg: int

    def seed(self, U, sign: int) -> Optional[int]:
        return self.suite.seed(U, self.pos if sign > 0 else self.neg)

    def label(self, x: int) -> int:
        c = self.suite.label(x)
        return 1 if c == self.pos else (-1 if c == self.neg else 0)


def replay(ledger: QueryLedger, target: TargetPartition) -> bool:
    """True if every recorded answer is consistent with ``target``."""
    labels = target.labels
    for ev in ledger.transcript:
        if ev.kind == "label":
            if labels[ev.query[0]] != ev.answer:
                return False
        elif ev.answer is None:
            if ev.query and np.any(labels[list(ev.query)] == ev.cls):
                return False
        elif ev.answer not in ev.query or labels[ev.answer] != ev.cls:
            return False
    return True
