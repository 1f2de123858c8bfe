"""Near-uniform sampling from version spaces.

A version space is the Euclidean unit ball intersected with homogeneous
halfspaces ``{x : <a, x> >= 0}``.  Sampling uses hit-and-run in a rounding
frame (an affine chart in which the body is near-isotropic); chains are
vectorized across the leading axis so that many independent walks advance
with one set of numpy calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyChord, RankDeficientSamples, RoundingLost
from .geometry import AffineMap, Halfspace, _psd_sqrt, mvee, to_unit_ball_transform

#: Constraint slack tolerated on samples.
SAMPLE_TOL = 1e-12
MIN_CHORD = 1e-12


@dataclass(frozen=True)
class SamplingConfig:
    """Walk lengths and sample counts; ``None`` fields derive from the dimension.

    Defaults, for ambient dimension ``d``: ``burn_in = 100 d``,
    ``n_samples = 16 d``, ``n_accept = 16 d``, attempts cap
    ``cap_factor * n_accept``.  ``strict`` switches to the polynomial
    counts of the hit-and-run analysis (very slow; for small ``d`` only).
    """

    burn_in: Optional[int] = None
    n_samples: Optional[int] = None
    n_accept: Optional[int] = None
    chains: Optional[int] = None
    cap_factor: int = 20
    strict: bool = False

    def resolve(self, d: int) -> "ResolvedSampling":
        if self.strict:
            eta = 1.0 / (2 * d * d)
            eps = eta / d
            burn = max(100 * d, d**5 * math.ceil(math.log(d / eps)))
            ns = max(16 * d, math.ceil(d * d / (eta * eta * 0.25)))
        else:
            burn = 100 * d
            ns = 16 * d
        burn = self.burn_in if self.burn_in is not None else burn
        ns = self.n_samples if self.n_samples is not None else ns
        na = self.n_accept if self.n_accept is not None else max(16 * d, d + 2)
        chains = self.chains if self.chains is not None else ns
        return ResolvedSampling(burn, ns, na, max(1, min(chains, ns)), self.cap_factor)


@dataclass(frozen=True)
class ResolvedSampling:
    burn_in: int
    n_samples: int
    n_accept: int
    chains: int
    cap_factor: int


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Unit ball in ``R^d`` cut by homogeneous halfspaces, plus a rounding frame.

    ``normals`` holds one unit row per constraint ``<a, x> >= 0``.
    ``frame`` maps ambient coordinates to frame coordinates; its inverse
    image of the origin is a strictly interior point.  ``acceptance`` is the
    rejection-sampling rate observed when the frame was built (1.0 for the
    initial ball).
    """

    ambient_dim: int
    normals: np.ndarray = field(default=None)
    frame: AffineMap = field(default=None)
    frame_quality: float = 1.0
    acceptance: float = 1.0

    def __post_init__(self):
        d = self.ambient_dim
        normals = np.zeros((0, d)) if self.normals is None else np.array(self.normals, dtype=float)
        normals = normals.reshape(-1, d)
        if normals.shape[0]:
            normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        normals.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        if self.frame is None:
            object.__setattr__(self, "frame", AffineMap.identity(d))

    @classmethod
    def unit_ball(cls, d: int) -> "ConvexBody":
        return cls(d)

    @property
    def constraints(self) -> list[Halfspace]:
        return [Halfspace(a, 0.0) for a in self.normals]

    @property
    def origin(self) -> np.ndarray:
        """Ambient position of the frame origin."""
        return self.frame.inv_offset.copy()

    def contains(self, x, tol: float = SAMPLE_TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.einsum("...i,...i->...", x, x) <= 1.0 + tol
        if self.normals.shape[0]:
            ok = ok & np.all(x @ self.normals.T >= -tol, axis=-1)
        return ok

    def with_constraint(self, normal, frame: AffineMap, quality: float, acceptance: float) -> "ConvexBody":
        normals = np.vstack([self.normals, np.asarray(normal, dtype=float)[None, :]])
        return ConvexBody(self.ambient_dim, normals, frame, quality, acceptance)


# --------------------------------------------------------------------------
# hit-and-run


def _walk(body: ConvexBody, x: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Advance every row of ``x`` by ``steps`` hit-and-run steps."""
    # chains live on the last axis so that reductions over constraints are cheap
    to_ambient = body.frame.inv_linear
    A = body.normals
    has_cuts = A.shape[0] > 0
    n = x.shape[0]
    xT = np.array(x, dtype=float).T.copy()
    for _ in range(steps):
        qT = to_ambient @ rng.standard_normal((to_ambient.shape[1], n))
        a = np.einsum("ij,ij->j", qT, qT)
        b = np.einsum("ij,ij->j", xT, qT)
        c = np.einsum("ij,ij->j", xT, xT) - 1.0
        disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
        lo = (-b - disc) / a
        hi = (-b + disc) / a
        if has_cuts:
            # along x + s q a constraint with slope g = -<a,q>/<a,x> binds at s = 1/g
            g = -(A @ qT) / np.maximum(A @ xT, 1e-300)
            gmin = g.min(axis=0)
            gmax = g.max(axis=0)
            lo = np.maximum(lo, np.where(gmin < 0, 1.0 / np.minimum(gmin, -1e-300), -np.inf))
            hi = np.minimum(hi, np.where(gmax > 0, 1.0 / np.maximum(gmax, 1e-300), np.inf))
        if np.any((hi - lo) * np.sqrt(a) < MIN_CHORD):
            raise EmptyChord("hit-and-run chord collapsed; rounding frame is corrupt")
        xT += (lo + (hi - lo) * rng.random(n)) * qT
    return xT.T.copy()


def hit_and_run_step(body: ConvexBody, current, rng: np.random.Generator) -> np.ndarray:
    """One hit-and-run move from ``current`` (a single interior point)."""
    x = np.asarray(current, dtype=float)[None, :]
    return _walk(body, x, 1, rng)[0]


def draw_samples(body: ConvexBody, n: int, burn_in: int, rng: np.random.Generator,
                 chains: Optional[int] = None) -> np.ndarray:
    """``n`` near-uniform points of ``body``.

    Chains start at the frame origin.  With fewer chains than samples each
    chain is reused (warm start) after ``burn_in // 4`` further steps.
    """
    chains = n if chains is None else max(1, min(chains, n))
    start = np.repeat(body.origin[None, :], chains, axis=0)
    x = _walk(body, start, burn_in, rng)
    out = [x]
    got = chains
    extra = max(1, burn_in // 4)
    while got < n:
        x = _walk(body, x, extra, rng)
        out.append(x)
        got += chains
    return np.vstack(out)[:n]


def estimate_centroid(body: ConvexBody, n_samples: int, burn_in: int, rng: np.random.Generator,
                      chains: Optional[int] = None) -> np.ndarray:
    """Average of ``n_samples`` hit-and-run endpoints."""
    return draw_samples(body, n_samples, burn_in, rng, chains).mean(axis=0)


# --------------------------------------------------------------------------
# rounding


def rounding_transform(samples) -> AffineMap:
    """Whitening map ``y = Cov^{-1/2} (x - mean)`` of a sample cloud."""
    pts = np.asarray(samples, dtype=float)
    n, d = pts.shape
    if n < d + 1:
        raise RankDeficientSamples(f"need at least {d + 1} samples, got {n}")
    mean = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False).reshape(d, d)
    w = np.linalg.eigvalsh(cov)
    if w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise RankDeficientSamples("samples do not span the space")
    lin = _psd_sqrt(cov, inverse=True)
    back = _psd_sqrt(cov)
    return AffineMap(lin, -lin @ mean, back, mean)


def _quality(d: int) -> float:
    # isotropic bodies contain a ball of radius ~1 and lie in radius ~d
    return 1.0 / (d + 1)


def refresh_rounding(body_prev: ConvexBody, new_constraint: Halfspace, cfg: SamplingConfig,
                     rng: np.random.Generator, pool: Optional[np.ndarray] = None) -> ConvexBody:
    """Intersect with a homogeneous halfspace and rebuild the rounding frame.

    Near-uniform points of ``body_prev`` are drawn until ``n_accept`` of
    them satisfy ``new_constraint``; their covariance gives the new frame.
    ``pool`` may hold already-drawn uniform points of ``body_prev``; they
    count as attempts.  On starvation the attempt cap is quadrupled once,
    then the frame is rebuilt from the MVEE of the accepted points and the
    new body is sampled directly; :class:`RoundingLost` is raised only if
    that is impossible too.
    """
    d = body_prev.ambient_dim
    rs = cfg.resolve(d)
    cut = new_constraint.unit()
    if abs(cut.offset) > 0:
        raise ValueError("version-space cuts must be homogeneous")
    need = rs.n_accept
    cap = rs.cap_factor * need

    accepted = []
    n_acc = 0
    attempts = 0
    if pool is not None and len(pool):
        pool = np.asarray(pool, dtype=float)
        keep = pool[cut.value(pool) >= 0]
        accepted.append(keep)
        n_acc += keep.shape[0]
        attempts += pool.shape[0]
    escalated = False
    while n_acc < need:
        if attempts >= cap:
            if escalated:
                break
            cap *= 4
            escalated = True
        batch = min(need, cap - attempts)
        pts = draw_samples(body_prev, batch, rs.burn_in, rng, min(rs.chains, batch))
        keep = pts[cut.value(pts) >= 0]
        accepted.append(keep)
        n_acc += keep.shape[0]
        attempts += batch

    acc = np.vstack(accepted) if accepted else np.zeros((0, d))
    rate = n_acc / attempts if attempts else 1.0
    if n_acc >= need:
        frame = rounding_transform(acc[: max(need, n_acc)])
        return body_prev.with_constraint(cut.normal, frame, _quality(d), rate)

    # escalation: frame from the MVEE of what we have, then sample directly
    if n_acc < d + 1:
        raise RoundingLost(f"only {n_acc} of {need} samples accepted in {attempts} attempts")
    ell = mvee(acc)
    if ell.rank < d:
        raise RoundingLost("accepted samples are affinely degenerate")
    tmp = body_prev.with_constraint(cut.normal, to_unit_ball_transform(ell), _quality(d), rate)
    fresh = draw_samples(tmp, need, rs.burn_in, rng, min(rs.chains, need))
    frame = rounding_transform(fresh)
    return body_prev.with_constraint(cut.normal, frame, _quality(d), rate)
