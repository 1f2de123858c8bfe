"""Trial runner and benchmark sweeps behind the command line."""
from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cutting_plane import CPConfig, cp_learn, perceptron_seed_baseline
from .instances import (Instance, gen_ellipsoidal, gen_grid, gen_one_sided, gen_rational,
                        gen_separable, gen_staircase)
from .learners import (LearnerConfig, bin_learn, cp_reference, kclass_learn, lower_bound_queries,
                       one_sided_learn, one_sided_ratio)
from .oracles import OracleSuite, SeedPolicy
from .rounding import RoundConfig, rounding_alpha
from .sampling import SamplingConfig

CSV_HEADER = ["trial", "family", "m", "k", "n", "gamma", "learner", "seed_q", "label_q",
              "exact", "rounds", "ref_bound", "wall_ms"]
LEARNERS = ("bin", "kclass", "one-sided", "cp", "perceptron")
FAMILIES = ("ellipsoidal", "staircase", "one_sided", "separable", "grid", "rational")
BINARY_ONLY = ("bin", "one-sided", "cp", "perceptron")


class LearnerMismatch(ValueError):
    pass


@dataclass
class RunOutcome:
    assignment: np.ndarray
    exact: bool
    seed_q: int
    label_q: int
    rounds: int
    suite: OracleSuite


def make_suite(inst: Instance, rng: Optional[np.random.Generator] = None) -> OracleSuite:
    layout = inst.staircase_layout()
    policy = SeedPolicy("staircase-adversarial", layout=layout) if layout is not None else None
    return OracleSuite(inst.target(), policy)


def check_learner(inst: Instance, learner: str) -> None:
    if learner not in LEARNERS:
        raise LearnerMismatch(f"unknown learner {learner!r}")
    if learner in BINARY_ONLY and inst.k != 2:
        raise LearnerMismatch(f"learner {learner!r} needs a 2-class instance, got k={inst.k}")


def run_learner(inst: Instance, learner: str, rng: np.random.Generator,
                cfg: Optional[LearnerConfig] = None) -> RunOutcome:
    """Run ``learner`` on the unlabeled points of ``inst`` and score it."""
    check_learner(inst, learner)
    cfg = cfg or LearnerConfig()
    suite = make_suite(inst)
    X = inst.points.copy()
    truth = inst.labels
    if learner == "kclass":
        res = kclass_learn(X, list(range(1, inst.k + 1)), suite, cfg, rng)
        assign, rounds = res.assignment, res.rounds
    elif learner == "bin":
        res = bin_learn(X, suite, cfg, rng)
        assign, rounds = res.assignment, res.rounds
    elif learner == "one-sided":
        res = one_sided_learn(X, suite.binary(1, 2), cfg, rng)
        assign, rounds = np.where(res.assignment > 0, 1, 2), res.rounds
    elif learner == "cp":
        r = cp_learn(X, suite.binary(1, 2), cfg.cp, rng)
        assign = np.full(inst.n, 2, dtype=np.int64)
        assign[r.plus] = 1
        rounds = r.rounds
    else:
        r = perceptron_seed_baseline(X, suite.binary(1, 2))
        assign = np.full(inst.n, 2, dtype=np.int64)
        assign[r.plus] = 1
        rounds = r.rounds
    exact = bool(np.array_equal(assign, truth))
    return RunOutcome(assign, exact, suite.ledger.seed_count, suite.ledger.label_count, rounds, suite)


def generate(family: str, m: int, k: int, n: int, gamma: float, rng, kappa: float = 2.0,
             ratio: float = 100.0, bits: Optional[int] = None) -> Instance:
    """Build one instance of ``family``; ``n`` is the total point budget."""
    if family == "ellipsoidal":
        return gen_ellipsoidal(m, k, max(1, n // k), gamma, rng)
    if family == "staircase":
        return gen_staircase(m, k, gamma, rng)[0]
    if family == "one_sided":
        return gen_one_sided(m, n, gamma, kappa, rng)
    if family == "separable":
        return gen_separable(m, n, ratio, rng)
    if family == "grid":
        return gen_grid(m, bits if bits is not None else 2 * m, k, rng)
    if family == "rational":
        return gen_rational(m, k, max(1, n // k), gamma, bits if bits is not None else 16 * m, rng)
    raise ValueError(f"unknown family {family!r}")


def ref_bound(inst: Instance, learner: str, gamma: float, kappa: float) -> float:
    """Constant-carrying reference for the row: a lower bound on staircases, else an upper reference."""
    m, k = inst.m, inst.k
    fam = inst.provenance.get("generator")
    if fam == "staircase":
        return lower_bound_queries(m, gamma)
    if learner in ("cp", "perceptron"):
        R = float(np.linalg.norm(inst.points, axis=1).max())
        r = inst.witnesses[0].r if inst.witnesses else gamma
        return cp_reference(m, R / r)
    if learner == "one-sided":
        return cp_reference(m, one_sided_ratio(kappa, gamma)) + 2 * math.ceil(math.log2(max(kappa / gamma, 1.0)))
    return k * (k - 1) * cp_reference(m, rounding_alpha(m) / gamma)


def _trial(args):
    (cell, trial, root, family, m, k, n, gamma, learner, kappa, ratio, bits, strict, timing) = args
    ss = np.random.SeedSequence([root, cell, trial])
    gen_seq, run_seq = ss.spawn(2)
    inst = generate(family, m, k, n, gamma, np.random.default_rng(gen_seq), kappa, ratio, bits)
    cfg = LearnerConfig(RoundConfig(), CPConfig(SamplingConfig(strict=strict)))
    t0 = time.perf_counter()
    out = run_learner(inst, learner, np.random.default_rng(run_seq), cfg)
    wall = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
    g = 1.0 / ratio if family == "separable" else gamma
    return (cell, trial, [trial, family, m, inst.k, inst.n, f"{g:.6g}", learner, out.seed_q, out.label_q,
                          int(out.exact), out.rounds, f"{ref_bound(inst, learner, gamma, kappa):.6f}",
                          f"{wall:.1f}"])


def bench_cells(family, ms, ks, ns, gammas):
    return list(itertools.product(ms, ks, ns, gammas))


def bench(out_path, family: str, ms, ks, ns, gammas, learner: str, trials: int, root: int,
          kappa: float = 2.0, ratio: float = 100.0, bits: Optional[int] = None, strict: bool = False,
          jobs: int = 1, timing: bool = False) -> list:
    """Run ``trials`` trials per grid cell and write the CSV; returns the rows."""
    cells = bench_cells(family, ms, ks, ns, gammas)
    tasks = [(ci, t, root, family, m, k, n, g, learner, kappa, ratio, bits, strict, timing)
             for ci, (m, k, n, g) in enumerate(cells) for t in range(trials)]
    done = {}
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                for ci, t, row in ex.map(_trial, tasks):
                    done[(ci, t)] = row
        else:
            for task in tasks:
                ci, t, row = _trial(task)
                done[(ci, t)] = row
    finally:
        rows = [done[key] for key in sorted(done)]
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(rows)
    return rows
