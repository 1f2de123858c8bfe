"""Convex geometry kernel: ellipsoids, seminorm metrics, hull distances.

All routines work on plain ``numpy`` arrays; a point set is an ``(n, m)``
array and a single point an ``(m,)`` array.  Values returned by this module
are immutable dataclasses and may be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog
from scipy.spatial.distance import pdist

from .errors import DegenerateEllipsoid, IterationCapExceeded, NonFinite

#: Boundary slack used by every membership test in the package.
TOL = 1e-9
#: Relative singular-value cutoff for affine rank detection.
RANK_TOL = 1e-9


def as_points(points) -> np.ndarray:
    """Coerce ``points`` to a finite float ``(n, m)`` array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d point array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("point coordinates must be finite")
    return arr


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _psd_sqrt(form: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, v = np.linalg.eigh(_sym(form))
    w = np.clip(w, 0.0, None)
    if inverse:
        w = np.where(w > 0, 1.0 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)
    else:
        w = np.sqrt(w)
    return (v * w) @ v.T


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class SeminormMetric:
    """Pseudometric ``d(x, y) = sqrt((x-y)^T M (x-y))`` for a PSD form ``M``."""

    form: np.ndarray

    def __post_init__(self):
        form = np.array(self.form, dtype=float)
        if form.ndim != 2 or form.shape[0] != form.shape[1]:
            raise ValueError("metric form must be square")
        if not np.all(np.isfinite(form)):
            raise NonFinite("metric form must be finite")
        form = _sym(form)
        form.setflags(write=False)
        object.__setattr__(self, "form", form)

    @classmethod
    def euclidean(cls, m: int) -> "SeminormMetric":
        return cls(np.eye(m))

    @property
    def dim(self) -> int:
        return self.form.shape[0]

    def norm(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        q = np.einsum("...i,ij,...j->...", v, self.form, v)
        return np.sqrt(np.clip(q, 0.0, None))

    def dist(self, x, y) -> np.ndarray:
        return self.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def factor(self) -> np.ndarray:
        """Return ``L`` (m x r) with ``M = L L^T``; ``x @ L`` is an isometric embedding."""
        w, v = np.linalg.eigh(self.form)
        keep = w > RANK_TOL * max(w.max(initial=0.0), 1e-300)
        return v[:, keep] * np.sqrt(w[keep])


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The set ``{x : <normal, x> + offset >= 0}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        normal = np.array(self.normal, dtype=float)
        if not np.all(np.isfinite(normal)) or not np.isfinite(self.offset):
            raise NonFinite("halfspace parameters must be finite")
        if not np.linalg.norm(normal) > 0:
            raise ValueError("halfspace normal must be nonzero")
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.normal + self.offset

    def contains(self, x, tol: float = TOL) -> np.ndarray:
        return self.value(x) >= -tol

    def unit(self) -> "Halfspace":
        s = np.linalg.norm(self.normal)
        return Halfspace(self.normal / s, self.offset / s)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``y = linear @ x + offset`` with an explicit (possibly partial) inverse.

    ``linear`` is ``(r, m)``.  When ``r < m`` the map is a chart of an
    affine subspace and ``inverse`` maps back onto that subspace.
    """

    linear: np.ndarray
    offset: np.ndarray
    inv_linear: np.ndarray
    inv_offset: np.ndarray

    @classmethod
    def identity(cls, m: int) -> "AffineMap":
        return cls(np.eye(m), np.zeros(m), np.eye(m), np.zeros(m))

    @classmethod
    def from_linear(cls, linear, offset) -> "AffineMap":
        """Invertible square map; the inverse is computed."""
        linear = np.asarray(linear, dtype=float)
        offset = np.asarray(offset, dtype=float)
        inv = np.linalg.inv(linear)
        return cls(linear, offset, inv, -inv @ offset)

    @property
    def in_dim(self) -> int:
        return self.linear.shape[1]

    @property
    def out_dim(self) -> int:
        return self.linear.shape[0]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.linear.T + self.offset

    def apply_vector(self, v) -> np.ndarray:
        """Push a direction (no translation) forward."""
        return np.asarray(v, dtype=float) @ self.linear.T

    def inverse(self) -> "AffineMap":
        return AffineMap(self.inv_linear, self.inv_offset, self.linear, self.offset)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{x : (x-c)^T A (x-c) <= 1,  x - c in span(hull_basis)}``.

    ``form`` is ``A`` in ambient coordinates; it equals ``B Q B^T`` where
    ``B`` is ``hull_basis`` (orthonormal columns) and ``Q`` is positive
    definite on the affine hull.  A rank-0 ellipsoid is the single point
    ``center``.
    """

    center: np.ndarray
    form: np.ndarray
    hull_basis: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        a = _sym(np.array(self.form, dtype=float))
        b = np.array(self.hull_basis, dtype=float).reshape(c.shape[0], -1)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a))):
            raise NonFinite("ellipsoid parameters must be finite")
        for arr in (c, a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "form", a)
        object.__setattr__(self, "hull_basis", b)

    @classmethod
    def ball(cls, center, radius: float = 1.0) -> "Ellipsoid":
        center = np.asarray(center, dtype=float)
        m = center.shape[0]
        return cls(center, np.eye(m) / radius**2, np.eye(m))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def rank(self) -> int:
        return self.hull_basis.shape[1]

    @property
    def shape_form(self) -> np.ndarray:
        """``Q``: the form restricted to the affine hull (rank x rank)."""
        b = self.hull_basis
        return _sym(b.T @ self.form @ b)

    def quad(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.form, d)

    def residual(self, x) -> np.ndarray:
        """Euclidean distance of ``x - center`` from the hull span."""
        d = np.asarray(x, dtype=float) - self.center
        proj = (d @ self.hull_basis) @ self.hull_basis.T
        return np.linalg.norm(d - proj, axis=-1)

    def _scale_length(self) -> float:
        if self.rank == 0:
            return 1.0
        w = np.linalg.eigvalsh(self.shape_form)
        return float(max(1.0, 1.0 / np.sqrt(max(w.min(), 1e-300))))

    def contains(self, x, tol: float = TOL) -> np.ndarray:
        ok_quad = self.quad(x) <= 1.0 + tol
        slack = tol * max(self._scale_length(), float(np.abs(self.center).max(initial=1.0)))
        return ok_quad & (self.residual(x) <= slack)

    def metric(self) -> SeminormMetric:
        return SeminormMetric(self.form)

    def boundary_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` points on the relative boundary, uniform in direction."""
        r = self.rank
        if r == 0:
            return np.repeat(self.center[None, :], n, axis=0)
        v = rng.standard_normal((n, r))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        half = _psd_sqrt(self.shape_form, inverse=True)
        return self.center + (v @ half) @ self.hull_basis.T

    def interior_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` points uniform in the ellipsoid (relative to its hull)."""
        r = self.rank
        if r == 0:
            return np.repeat(self.center[None, :], n, axis=0)
        v = rng.standard_normal((n, r))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v *= rng.random((n, 1)) ** (1.0 / r)
        half = _psd_sqrt(self.shape_form, inverse=True)
        return self.center + (v @ half) @ self.hull_basis.T


# --------------------------------------------------------------------------
# minimum-volume enclosing ellipsoid


def _affine_frame(points: np.ndarray):
    """Mean, orthonormal hull basis and hull coordinates of ``points``."""
    mean = points.mean(axis=0)
    centered = points - mean
    if points.shape[0] == 1:
        return mean, np.zeros((points.shape[1], 0)), centered[:, :0]
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        r = 0
    else:
        r = int(np.sum(s > RANK_TOL * s[0]))
    basis = vt[:r].T
    return mean, basis, centered @ basis


def _khachiyan(y: np.ndarray, eps: float, max_iter: int = 200_000):
    """Khachiyan ascent with Todd-Yildirim drop steps on hull coordinates.

    Returns ``(center, Q)`` with ``max_j (y_j-c)^T Q (y_j-c) = 1`` and the
    certificate that ``Q / ((1+eps) d)**2``-scaled ellipsoid lies in the hull.
    """
    n, d = y.shape
    lifted = np.vstack([y.T, np.ones(n)])  # (d+1, n)
    # internal target keeps the outer/inner radius ratio below (1+eps)*d
    tol = eps * d / (d + 1.0)

    # Kumar-Yildirim initial core set
    u = np.zeros(n)
    rng = np.random.default_rng(0)
    for _ in range(d):
        w = rng.standard_normal(d)
        proj = y @ w
        u[np.argmax(proj)] = 1.0
        u[np.argmin(proj)] = 1.0
    u /= u.sum()

    for _ in range(max_iter):
        x = (lifted * u) @ lifted.T
        try:
            chol = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            u = 0.5 * u + 0.5 / n
            continue
        g = solve_triangular(chol, lifted, lower=True, check_finite=False)
        mvals = np.einsum("ij,ij->j", g, g)
        j = int(np.argmax(mvals))
        active = u > 0
        k = int(np.argmin(np.where(active, mvals, np.inf)))
        up = mvals[j] / (d + 1) - 1.0
        down = 1.0 - mvals[k] / (d + 1)
        if up <= tol:
            break
        if up >= down:
            step = (mvals[j] - d - 1) / ((d + 1) * (mvals[j] - 1))
            u *= 1.0 - step
            u[j] += step
        else:
            cap = u[k] / (1.0 - u[k]) if u[k] < 1.0 else 0.0
            if mvals[k] - 1.0 > 1e-15:
                step = min((d + 1 - mvals[k]) / ((d + 1) * (mvals[k] - 1)), cap)
            else:
                step = cap
            u *= 1.0 + step
            u[k] -= step
            if u[k] < 1e-14:
                u[k] = 0.0
            u /= u.sum()
    else:
        raise IterationCapExceeded("Khachiyan iteration cap reached")

    center = y.T @ u
    diff = y - center
    cov = (diff.T * u) @ diff
    cinv = np.linalg.inv(cov)
    rho = float(np.max(np.einsum("ij,jk,ik->i", diff, cinv, diff)))
    return center, _sym(cinv / rho)


def mvee(points, eps: float = 1e-3) -> Ellipsoid:
    """Approximate minimum-volume enclosing ellipsoid.

    Every input point lies in the returned ellipsoid (membership within
    :data:`TOL`), and shrinking it about its center by ``1/((1+eps) r)``,
    with ``r`` the affine rank of the input, yields a subset of the convex
    hull.  Affinely dependent inputs are handled inside their affine hull.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    pts = as_points(points)
    pts = np.unique(pts, axis=0)
    mean, basis, coords = _affine_frame(pts)
    m = pts.shape[1]
    r = basis.shape[1]
    if r == 0:
        return Ellipsoid(pts[0], np.zeros((m, m)), np.zeros((m, 0)))
    c_hull, q = _khachiyan(coords, eps)
    center = mean + basis @ c_hull
    return Ellipsoid(center, basis @ q @ basis.T, basis)


def scale(ell: Ellipsoid, z, lam: float) -> Ellipsoid:
    """Homothety ``{z + lam (x - z) : x in ell}``."""
    if not np.isfinite(lam):
        raise NonFinite("scale factor must be finite")
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    z = np.asarray(z, dtype=float)
    return Ellipsoid(z + lam * (ell.center - z), ell.form / lam**2, ell.hull_basis)


def to_unit_ball_transform(ell: Ellipsoid, fallback: bool = False) -> AffineMap:
    """Affine map sending ``ell`` onto the unit ball.

    For a full-rank ellipsoid the map is ``x -> A^{1/2} (x - c)``.  With
    ``fallback=True`` a rank-deficient ellipsoid is mapped onto the unit
    ball of ``R^rank`` (a chart of its affine hull); otherwise
    :class:`DegenerateEllipsoid` is raised.
    """
    m, r = ell.dim, ell.rank
    if r == m:
        lin = _psd_sqrt(ell.form)
        inv = _psd_sqrt(ell.form, inverse=True)
        return AffineMap(lin, -lin @ ell.center, inv, ell.center.copy())
    if not fallback:
        raise DegenerateEllipsoid(f"ellipsoid has rank {r} < {m}")
    b = ell.hull_basis
    q = ell.shape_form
    lin = _psd_sqrt(q) @ b.T if r else np.zeros((0, m))
    inv = b @ _psd_sqrt(q, inverse=True) if r else np.zeros((m, 0))
    return AffineMap(lin, -lin @ ell.center, inv, ell.center.copy())


# --------------------------------------------------------------------------
# hull queries


class HullDistance(NamedTuple):
    dist: float
    sep: Optional[Halfspace]
    lower: float
    iterations: int


def _embed(points: np.ndarray, metric: Optional[SeminormMetric]) -> tuple[np.ndarray, np.ndarray]:
    if metric is None:
        return points, np.eye(points.shape[1])
    fac = metric.factor()
    return points @ fac, fac


def _affine_min_norm(V: np.ndarray) -> np.ndarray:
    """Weights ``mu`` (summing to 1) of the min-norm point of the affine hull of the rows of ``V``."""
    k = V.shape[0]
    if k == 1:
        return np.ones(1)
    # min |mu @ V| with mu_0 = 1 - sum(rest): least squares in the differences
    D = (V[1:] - V[0]).T
    rest, *_ = np.linalg.lstsq(D, -V[0], rcond=None)
    return np.concatenate([[1.0 - rest.sum()], rest])


def _caratheodory(V: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Shift weight along an affine dependency of ``V`` until one weight is zero (same point)."""
    M = np.vstack([V.T, np.ones(V.shape[0])])
    w = np.linalg.svd(M)[2][-1]
    if not np.any(w > 0):
        w = -w
    pos = w > 0
    t = np.min(lam[pos] / w[pos])
    out = lam - t * w
    out[np.argmin(np.where(pos, lam / np.where(pos, w, 1.0), np.inf))] = 0.0
    return np.clip(out, 0.0, None)


def _min_norm_point(pa: np.ndarray, pb: np.ndarray, tol: float, max_iter: int):
    """Min-norm point of ``conv(pa) - conv(pb)``; returns ``(z, lower, iterations)``."""
    i0 = 0
    j0 = int(np.argmin(np.sum((pb - pa[i0]) ** 2, axis=1)))
    corral = [(i0, j0)]
    lam = np.ones(1)
    z = pa[i0] - pb[j0]
    lower = -np.inf
    dim = pa.shape[1]
    for it in range(1, max_iter + 1):
        ub = float(np.sqrt(z @ z))
        if ub <= tol:
            return z, 0.0, it
        ga = pa @ z
        gb = pb @ z
        sa = int(np.argmin(ga))
        sb = int(np.argmax(gb))
        lower = (ga[sa] - gb[sb]) / ub
        if ub - lower <= tol or (sa, sb) in corral:
            # a repeated vertex means z is already optimal on the corral
            return z, lower, it
        corral.append((sa, sb))
        lam = np.append(lam, 0.0)
        first = True
        while True:
            V = np.array([pa[i] - pb[j] for i, j in corral])
            if len(corral) > dim + 1:
                lam = _caratheodory(V, lam)
            else:
                mu = _affine_min_norm(V)
                if np.all(mu > 1e-14):
                    lam = mu
                    break
                # move from lam toward mu until the first weight reaches zero
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(mu <= 1e-14, lam / (lam - mu), np.inf)
                theta = float(np.clip(ratios.min(), 0.0, 1.0))
                lam = lam + theta * (mu - lam)
                if first and lam[-1] <= 1e-14:
                    # the new vertex brings no descent: z is optimal up to rounding
                    return z, lower, it
            first = False
            keep = lam > 1e-14
            corral = [c for c, kp in zip(corral, keep) if kp]
            lam = lam[keep] / lam[keep].sum()
            if len(corral) == 1:
                break
        z = lam @ np.array([pa[i] - pb[j] for i, j in corral])
    raise IterationCapExceeded(f"hull_distance did not close the gap in {max_iter} iterations")


def hull_distance(A, B, metric: Optional[SeminormMetric] = None, tol: float = TOL,
                  max_iter: int = 1_000_000) -> HullDistance:
    """Distance between ``conv(A)`` and ``conv(B)`` under a seminorm.

    Wolfe's minimum-norm-point method (fully corrective Frank-Wolfe) on the
    Minkowski difference ``A - B``, whose vertices are never enumerated: the
    linear oracle picks ``argmin_A <z,a>`` and ``argmax_B <z,b>``.  The
    loop stops once the primal value ``|a - b|`` and the Wolfe dual bound
    ``(min_A <z,a> - max_B <z,b>)/|z|`` are within ``tol``.

    Returns
    -------
    HullDistance
        ``dist`` (the primal value), ``sep`` (a halfspace with
        ``<w,a> + b0 >= (dist - tol)/2`` on ``A`` and ``<= -(dist - tol)/2``
        on ``B``, where ``w`` has unit dual norm; ``None`` when the hulls
        meet), ``lower`` (the dual bound) and the iteration count.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    pa, fac = _embed(as_points(A), metric)
    pb, _ = _embed(as_points(B), metric)
    na, nb = pa.shape[0], pb.shape[0]
    if pa.shape[1] == 0:
        return HullDistance(0.0, None, 0.0, 0)

    z, lower, it = _min_norm_point(pa, pb, tol, max_iter)

    dist = float(np.sqrt(z @ z))
    sep = None
    if lower > 0 and dist > tol:
        w = z / dist
        ga = pa @ w
        gb = pb @ w
        b0 = -0.5 * (ga.min() + gb.max())
        sep = Halfspace(fac @ w, b0)
    return HullDistance(dist, sep, float(max(lower, 0.0)), it)


def hull_membership(x, S, tol: float = TOL) -> bool:
    """True iff ``x`` is a convex combination of the rows of ``S``.

    Solved as a min-infeasibility LP; the residual of the returned
    combination is then checked directly against ``tol`` (scaled by the
    coordinate magnitude).
    """
    pts = as_points(S)
    x = np.asarray(x, dtype=float).ravel()
    n, m = pts.shape
    scale_ = max(1.0, float(np.abs(pts).max()), float(np.abs(x).max(initial=0.0)))
    # variables: lambda (n), t ; minimize t
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.block([[pts.T, -np.ones((m, 1))], [-pts.T, -np.ones((m, 1))]])
    b_ub = np.concatenate([x, -x])
    a_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        return False
    lam = np.clip(res.x[:n], 0.0, None)
    lam /= lam.sum()
    resid = float(np.abs(lam @ pts - x).max())
    return resid <= tol * scale_


def diameter(S, metric: Optional[SeminormMetric] = None) -> float:
    """Largest pairwise distance (exact scan)."""
    pts, _ = _embed(as_points(S), metric)
    if pts.shape[0] < 2 or pts.shape[1] == 0:
        return 0.0
    return float(pdist(pts).max())


def distortion(metric: SeminormMetric) -> float:
    """``sqrt(lambda_max / lambda_min)`` of the form; ``inf`` if singular."""
    w = np.linalg.eigvalsh(metric.form)
    top = w.max()
    if top <= 0 or w.min() <= RANK_TOL * top:
        return float("inf")
    return float(np.sqrt(top / w.min()))
