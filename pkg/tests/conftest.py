import itertools

import cvxpy as cp
import numpy as np
import pytest


def qp_hull_distance(A, B, form=None):
    """Reference distance between conv(A) and conv(B) via a convex QP."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if form is not None:
        w, v = np.linalg.eigh(form)
        keep = w > 1e-12 * max(w.max(), 1e-300)
        L = v[:, keep] * np.sqrt(w[keep])
        A, B = A @ L, B @ L
    la = cp.Variable(A.shape[0], nonneg=True)
    lb = cp.Variable(B.shape[0], nonneg=True)
    diff = A.T @ la - B.T @ lb
    prob = cp.Problem(cp.Minimize(cp.sum_squares(diff)), [cp.sum(la) == 1, cp.sum(lb) == 1])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-14, tol_gap_rel=1e-14, tol_feas=1e-12)
    a = la.value / la.value.sum()
    b = lb.value / lb.value.sum()
    return float(np.linalg.norm(a @ A - b @ B))


def staircase_consistent(layout, ell, transcript, labels_known):
    """Brute-force count of prefix-length vectors consistent with the answers.

    ``transcript`` holds (U, y, answer) seed events; ``labels_known`` maps
    point index -> class.  Only band 0 / two classes.
    """
    p = layout.p
    count = 0
    for pref in itertools.product(range(1, ell + 1), repeat=p):
        pref = np.asarray(pref)
        lab = np.where(layout.row <= pref[layout.col], 1, 2)
        ok = all(lab[x] == c for x, c in labels_known.items())
        for U, y, ans in transcript:
            if not ok:
                break
            U = np.asarray(U, dtype=np.int64)
            if ans is None:
                ok = not np.any(lab[U] == y) if U.size else True
            else:
                ok = lab[ans] == y
        count += bool(ok)
    return count


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
