"""Instance families with certified strong convex hull margin.

An instance is a labeled point set plus one seminorm metric per class.
Its certified margin is

    min over ordered pairs (i, j), i != j, of  d_i(conv C_j, conv C_i) / diam_{d_i}(C_i)

computed with the rigorous lower bound of :func:`~hullmargin.geometry.hull_distance`.
Classes of diameter zero satisfy any margin and contribute ``+inf``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import GenerationFailed, InvalidBits, InvalidGamma
from .geometry import Ellipsoid, SeminormMetric, as_points, diameter, hull_distance
from .oracles import StaircaseLayout, TargetPartition

RngLike = Union[int, np.random.Generator, None]


def _rng(rng: RngLike):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), (None if rng is None else int(rng))


@dataclass
class Witness:
    """Affine separator ``<u, x> + b`` positive on class ``i``, negative on ``j``, with margin ``r``."""

    i: int
    j: int
    u: np.ndarray
    b: float
    r: float

    def as_json(self) -> dict:
        return {"i": self.i, "j": self.j, "normal": self.u.tolist(), "offset": self.b, "margin": self.r}


@dataclass
class Instance:
    points: np.ndarray
    labels: np.ndarray
    k: int
    metrics: list
    certified_margin: float
    provenance: dict
    witnesses: list = field(default_factory=list)
    structure: Optional[dict] = None
    margin_classes: Optional[list] = None

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def target(self) -> TargetPartition:
        return TargetPartition(self.labels, self.k)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)

    def staircase_layout(self) -> Optional[StaircaseLayout]:
        s = self.structure
        if not s or s.get("kind") != "staircase":
            return None
        return StaircaseLayout(s["ell"], s["p"], s["bands"], np.asarray(s["band"]),
                               np.asarray(s["col"]), np.asarray(s["row"]))

    # serialization -------------------------------------------------------

    def to_json(self) -> dict:
        cm = self.certified_margin
        out = {
            "m": self.m,
            "k": self.k,
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
            "labels_hidden": True,
            "metrics": [mt.form.tolist() for mt in self.metrics],
            "certified_margin": None if not math.isfinite(cm) else cm,
            "provenance": self.provenance,
        }
        if self.witnesses:
            out["witnesses"] = [w.as_json() for w in self.witnesses]
        if self.structure is not None:
            out["structure"] = self.structure
        if self.margin_classes is not None:
            out["margin_classes"] = list(self.margin_classes)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        m = int(d["m"])
        pts = np.asarray(d["points"], dtype=float).reshape(-1, m)
        cm = d.get("certified_margin")
        wit = [Witness(w["i"], w["j"], np.asarray(w["normal"], dtype=float), float(w["offset"]),
                       float(w["margin"])) for w in d.get("witnesses", [])]
        return cls(pts, np.asarray(d["labels"], dtype=np.int64), int(d["k"]),
                   [SeminormMetric(np.asarray(f, dtype=float)) for f in d["metrics"]],
                   math.inf if cm is None else float(cm), d["provenance"], wit,
                   d.get("structure"), d.get("margin_classes"))

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# --------------------------------------------------------------------------
# certification


def certify_margin(inst: Instance, tol: float = 1e-9) -> float:
    """Certified strong convex hull margin of ``inst`` (``inf`` if vacuous)."""
    return _certify(inst.points, inst.labels, inst.k, inst.metrics, tol, inst.margin_classes)


def _certify(points, labels, k, metrics, tol, classes=None, diam_cache=None) -> float:
    best = math.inf
    for i in (classes or range(1, k + 1)):
        Ci = points[labels == i]
        if Ci.shape[0] == 0:
            continue
        if diam_cache is not None and i in diam_cache:
            diam = diam_cache[i]
        else:
            diam = diameter(Ci, metrics[i - 1])
            if diam_cache is not None:
                diam_cache[i] = diam
        if diam <= 0:
            continue
        for j in range(1, k + 1):
            if j == i:
                continue
            Cj = points[labels == j]
            if Cj.shape[0] == 0:
                continue
            d = hull_distance(Cj, Ci, metrics[i - 1]).lower
            best = min(best, d / diam)
    return best - tol if math.isfinite(best) else best


def _pair_witnesses(points, labels, k) -> list:
    out = []
    for i in range(1, k + 1):
        for j in range(i + 1, k + 1):
            A, B = points[labels == i], points[labels == j]
            if A.shape[0] == 0 or B.shape[0] == 0:
                continue
            hd = hull_distance(A, B)
            if hd.sep is None:
                continue
            h = hd.sep.unit()
            # shift the hyperplane to the middle of the gap
            a_min = float(h.value(A).min())
            b_max = float(h.value(B).max())
            off = h.offset - 0.5 * (a_min + b_max)
            out.append(Witness(i, j, h.normal.copy(), float(off), 0.5 * (a_min - b_max)))
    return out


def _random_rotation(m: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


# --------------------------------------------------------------------------
# generators


def gen_ellipsoidal(m: int, k: int, n_per_class: int, gamma_target: float, rng: RngLike = None,
                    anisotropy: Optional[float] = None, max_attempts: int = 100) -> Instance:
    """``k`` clouds drawn in random ellipsoids, translated apart to margin ``gamma_target``.

    Each class's metric is the one whose unit ball is its generating
    ellipsoid.  A common translation scale along random directions is found
    by doubling and then bisection.  With ``anisotropy = a``, class 1 is
    stretched by ``a`` along ``e_1`` (its metric compensates).
    """
    if m < 1 or k < 1 or n_per_class < 1:
        raise ValueError("m, k and n_per_class must be positive")
    if not 0 < gamma_target <= 1:
        raise ValueError("gamma_target must lie in (0, 1]")
    gen, seed = _rng(rng)
    clouds, metrics = [], []
    for i in range(k):
        if anisotropy is not None and i == 0:
            axes = np.ones(m)
            axes[0] = anisotropy
            rot = np.eye(m)
        else:
            axes = np.exp(gen.uniform(-0.5, 0.5, m))
            rot = _random_rotation(m, gen)
        form = rot @ np.diag(1.0 / axes**2) @ rot.T
        ell = Ellipsoid(np.zeros(m), form, np.eye(m))
        clouds.append(ell.interior_points(n_per_class, gen))
        metrics.append(SeminormMetric(form))
    dirs = gen.standard_normal((k, m))
    labels = np.repeat(np.arange(1, k + 1), n_per_class)
    params = {"m": m, "k": k, "n_per_class": n_per_class, "gamma_target": gamma_target}
    if anisotropy is not None:
        params["anisotropy"] = anisotropy
    prov = {"generator": "ellipsoidal", "params": params, "seed": seed}

    def place(s):
        return np.vstack([c + s * d for c, d in zip(clouds, dirs)])

    if k == 1:
        pts = place(0.0)
        return Instance(pts, labels, k, metrics, math.inf, prov)

    diam_cache: dict = {}

    def margin(s):
        return _certify(place(s), labels, k, metrics, 0.0, diam_cache=diam_cache)

    s_hi = 1.0
    attempts = 0
    while margin(s_hi) < gamma_target:
        s_hi *= 2.0
        attempts += 1
        if attempts >= max_attempts:
            raise GenerationFailed(f"margin {gamma_target} not reached after {attempts} rescalings")
    s_lo = 0.0
    for _ in range(20):
        mid = 0.5 * (s_lo + s_hi)
        if margin(mid) >= gamma_target:
            s_hi = mid
        else:
            s_lo = mid
    pts = place(s_hi)
    cm = _certify(pts, labels, k, metrics, 1e-9, diam_cache=diam_cache)
    return Instance(pts, labels, k, metrics, cm, prov, _pair_witnesses(pts, labels, k))


def gen_separable(m: int, n: int, R_over_r: float, rng: RngLike = None) -> Instance:
    """Two classes in the unit ball split by a random hyperplane with margin ``1/R_over_r``.

    A few points of each class sit exactly on the margin boundary, so the
    recorded witness margin is tight.
    """
    if R_over_r < 1:
        raise ValueError("R_over_r must be at least 1")
    gen, seed = _rng(rng)
    r = 1.0 / R_over_r
    u = gen.standard_normal(m)
    u /= np.linalg.norm(u)
    b = gen.uniform(-0.3, 0.3)

    def ball(cnt, radius=1.0):
        v = gen.standard_normal((cnt, m))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return radius * v * gen.random((cnt, 1)) ** (1.0 / m)

    n_edge = min(m + 1, max(n // 4, 1))
    edge = []
    for s in (1.0, -1.0):
        got = 0
        while got < n_edge:
            y = ball(1, 0.9)[0]
            y = y - (y @ u + b - s * r) * u
            if np.linalg.norm(y) <= 1.0:
                edge.append(y)
                got += 1
    pts = list(edge)
    while len(pts) < n:
        cand = ball(4 * n)
        v = cand @ u + b
        cand = cand[np.abs(v) >= r]
        pts.extend(cand[: n - len(pts)])
    pts = np.asarray(pts[:n])
    order = gen.permutation(n)
    pts = pts[order]
    labels = np.where(pts @ u + b > 0, 1, 2)
    metrics = [SeminormMetric.euclidean(m), SeminormMetric.euclidean(m)]
    R = float(np.linalg.norm(pts, axis=1).max())
    r_true = float(np.abs(pts @ u + b).min())
    prov = {"generator": "separable", "params": {"m": m, "n": n, "R_over_r": R_over_r}, "seed": seed}
    cm = _certify(pts, labels, 2, metrics, 1e-9)
    inst = Instance(pts, labels, 2, metrics, cm, prov, [Witness(1, 2, u, float(b), r_true)])
    inst.structure = {"kind": "separable", "R": R, "r": r_true}
    return inst


def gen_one_sided(m: int, n: int, gamma: float, kappa: float, rng: RngLike = None) -> Instance:
    """Class 1 in a unit ball of a metric with distortion ``kappa``; class 2 beyond a slab.

    Only class 1 is certified: ``d(conv C_2, conv C_1) >= gamma diam_d(C_1)``.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if n < 2:
        raise ValueError("need at least two points")
    gen, seed = _rng(rng)
    lam = np.sort(np.concatenate([[1.0, kappa**2], gen.uniform(1.0, kappa**2, max(m - 2, 0))]))[:m]
    if m == 1:
        lam = np.array([1.0])
    rot = _random_rotation(m, gen)
    form = rot @ np.diag(lam) @ rot.T
    n_pos = n // 2
    pos = Ellipsoid(np.zeros(m), form, np.eye(m)).interior_points(n_pos, gen)
    metric = SeminormMetric(form)
    phi = diameter(pos, metric)
    w = gen.standard_normal(m)
    w /= np.linalg.norm(w)
    dual = math.sqrt(float(w @ np.linalg.solve(form, w)))
    h = float((pos @ w).max())
    delta = 1.05 * gamma * phi * dual
    L = max(4.0, 2.0 * (h + delta) + 2.0)
    neg = []
    while len(neg) < n - n_pos:
        v = gen.standard_normal((4 * n, m))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v *= L * gen.random((4 * n, 1)) ** (1.0 / m)
        v = v[v @ w >= h + delta]
        neg.extend(v[: n - n_pos - len(neg)])
    pts = np.vstack([pos, np.asarray(neg)])
    order = gen.permutation(n)
    pts = pts[order]
    labels = np.where(order < n_pos, 1, 2)
    metrics = [metric, SeminormMetric.euclidean(m)]
    prov = {"generator": "one_sided", "params": {"m": m, "n": n, "gamma": gamma, "kappa": kappa}, "seed": seed}
    inst = Instance(pts, labels, 2, metrics, math.inf, prov, margin_classes=[1])
    inst.certified_margin = certify_margin(inst)
    return inst


def staircase_ell(m: int, gamma: float) -> int:
    return int(math.floor(1.0 / math.sqrt(2.0 * gamma * math.sqrt(m))))


def staircase_gamma(m: int, ell: int) -> float:
    """A margin whose staircase has exactly ``ell`` rows per column."""
    return 1.0 / (2.0 * (ell + 0.5) ** 2 * math.sqrt(m))


@dataclass(frozen=True)
class StaircaseDescriptor:
    layout: StaircaseLayout
    ell: int
    gamma: float
    prefix_lengths: np.ndarray  # (bands, p), hidden target


def gen_staircase(m: int, k: int, gamma: float, rng: RngLike = None, check_gamma: bool = True):
    """Staircase family ``x_i^j = e_i + j e_m`` with monotone column labelings.

    Band ``s`` (0-based) is shifted by ``s * ell`` along ``e_m`` and holds
    classes ``2s+1`` (rows ``1..ell_i`` of column ``i``) and ``2s+2``.  With
    odd ``k`` the last class is empty.  ``check_gamma=False`` skips the
    margin precondition (for diagnostics on out-of-range cells).

    Returns
    -------
    (Instance, StaircaseDescriptor)
    """
    if m < 2:
        raise InvalidGamma("staircase instances need m >= 2")
    if k < 2:
        raise ValueError("staircase instances need k >= 2")
    limit = m ** -1.5 / 16.0
    if not 0 < gamma or (check_gamma and gamma > limit):
        raise InvalidGamma(f"staircase needs 0 < gamma <= m^(-3/2)/16 = {limit:.6g}, got {gamma}")
    gen, seed = _rng(rng)
    ell = staircase_ell(m, gamma)
    p = m - 1
    bands = k // 2
    prefix = gen.integers(1, ell + 1, size=(bands, p))
    pts, labels, band, col, row = [], [], [], [], []
    for s in range(bands):
        for i in range(p):
            for j in range(1, ell + 1):
                x = np.zeros(m)
                x[i] = 1.0
                x[m - 1] = j + s * ell
                pts.append(x)
                labels.append(2 * s + 1 if j <= prefix[s, i] else 2 * s + 2)
                band.append(s)
                col.append(i)
                row.append(j)
    pts = np.asarray(pts)
    labels = np.asarray(labels, dtype=np.int64)
    layout = StaircaseLayout(ell, p, bands, np.asarray(band), np.asarray(col), np.asarray(row))
    metrics = [SeminormMetric.euclidean(m) for _ in range(k)]
    prov = {"generator": "staircase", "params": {"m": m, "k": k, "gamma": gamma}, "seed": seed}
    structure = {"kind": "staircase", "ell": ell, "p": p, "bands": bands,
                 "band": band, "col": col, "row": row}
    cm = _certify(pts, labels, k, metrics, 1e-9)
    inst = Instance(pts, labels, k, metrics, cm, prov, structure=structure)
    return inst, StaircaseDescriptor(layout, ell, gamma, prefix)


def staircase_witness(desc: StaircaseDescriptor, band: int = 0):
    """``(u, b)`` with ``<u, x> + b <= 0`` exactly on the prefix class of ``band``."""
    p = desc.layout.p
    u = np.concatenate([-desc.prefix_lengths[band].astype(float), [1.0]])
    return u, -float(band * desc.ell)


def grid_step(m: int, B: int) -> int:
    """``1/c = floor(2^(B/m) - 1)``."""
    if B < m:
        raise InvalidBits(f"need B >= m, got B={B}, m={m}")
    return int(math.floor(2.0 ** (B / m) - 1.0 + 1e-12))


def gen_grid(m: int, B: int, k: int = 2, rng: RngLike = None, max_points: int = 4096) -> Instance:
    """Points of the grid ``{-1, -1+c, ..., 1}^m`` labeled by parallel random cuts."""
    inv_c = grid_step(m, B)
    if k < 1:
        raise ValueError("k must be positive")
    gen, seed = _rng(rng)
    axis = np.linspace(-1.0, 1.0, 2 * inv_c + 1)
    size = axis.size**m
    if size <= max_points:
        pts = np.array(np.meshgrid(*([axis] * m), indexing="ij")).reshape(m, -1).T
    else:
        flat = gen.choice(size, max_points, replace=False)
        pts = axis[np.array(np.unravel_index(np.sort(flat), (axis.size,) * m)).T]
    for _ in range(1000):
        u = gen.standard_normal(m)
        u /= np.linalg.norm(u)
        t = pts @ u
        cuts = np.sort(gen.uniform(t.min(), t.max(), k - 1))
        labels = 1 + np.searchsorted(cuts, t)
        if np.unique(labels).size == k:
            break
    else:
        raise GenerationFailed("could not draw a grid labeling with every class present")
    labels = labels.astype(np.int64)
    metrics = [SeminormMetric.euclidean(m) for _ in range(k)]
    prov = {"generator": "grid", "params": {"m": m, "B": B, "k": k, "inv_c": inv_c}, "seed": seed}
    cm = _certify(pts, labels, k, metrics, 1e-9)
    inst = Instance(pts, labels, k, metrics, cm, prov, _pair_witnesses(pts, labels, k))
    inst.structure = {"kind": "grid", "inv_c": inv_c}
    return inst


def bit_size_int(z: int) -> int:
    return 1 + math.ceil(math.log2(abs(z) + 1))


def bit_size(x) -> int:
    """Bits of a rational vector: ``b(p) + b(q)`` summed over coordinates ``p/q``."""
    total = 0
    for v in np.ravel(x):
        f = Fraction(v).limit_denominator(1 << 40) if not isinstance(v, Fraction) else v
        total += bit_size_int(f.numerator) + bit_size_int(f.denominator)
    return total


def gen_rational(m: int, k: int, n_per_class: int, gamma_target: float, B: int, rng: RngLike = None) -> Instance:
    """Ellipsoidal instance snapped to denominators at most ``2^(B/(2m))``."""
    if B < 1:
        raise InvalidBits("B must be positive")
    gen, seed = _rng(rng)
    base = gen_ellipsoidal(m, k, n_per_class, gamma_target, gen)
    q = max(1, int(math.floor(2.0 ** (B / (2.0 * m)))))
    pts = np.round(base.points * q) / q
    _, first, inv = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    for g in range(first.size):
        if np.unique(base.labels[inv == g]).size > 1:
            raise GenerationFailed("snapping merged points of different classes")
    keep = np.sort(first)
    pts, labels = pts[keep], base.labels[keep]
    cm = _certify(pts, labels, k, base.metrics, 1e-9)
    if not cm > 0:
        raise GenerationFailed("snapped instance lost its margin")
    prov = {"generator": "rational", "params": {"m": m, "k": k, "n_per_class": n_per_class,
                                                "gamma_target": gamma_target, "B": B, "denominator": q},
            "seed": seed}
    inst = Instance(pts, labels, k, base.metrics, cm, prov, _pair_witnesses(pts, labels, k))
    inst.structure = {"kind": "rational", "denominator": q}
    return inst
