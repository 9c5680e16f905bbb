"""Independent oracle implementations used to cross-check the library.

Everything here is written directly from the defining formulas with its
own linear algebra, deliberately not reusing the library's estimator or
bound machinery, so agreement between the two is informative.
"""

from __future__ import annotations

import numpy as np

import designvar as dv
from designvar import Design


def intercept(k: int, n: int) -> np.ndarray:
    return np.kron(np.eye(k), np.ones((n, 1)))


def covariate_expansion(k: int, x: np.ndarray | None, n: int) -> np.ndarray:
    base = intercept(k, n)
    if x is None or x.size == 0:
        return base
    return np.hstack([base, np.tile(np.atleast_2d(x), (k, 1))])


def w_matrix(kind: str, rdiag: np.ndarray, pi: np.ndarray, k: int, n: int,
             x: np.ndarray | None = None, m: np.ndarray | None = None) -> np.ndarray:
    """Estimator weight matrix straight from its definition."""
    ones = intercept(k, n)
    if kind == "ht":
        return np.linalg.inv(ones.T @ ones) @ ones.T @ np.diag(1.0 / pi)
    if kind == "cm":
        return np.linalg.inv(ones.T @ np.diag(rdiag) @ ones) @ ones.T
    if kind == "hj":
        inv_pi = np.diag(1.0 / pi)
        return np.linalg.inv(ones.T @ inv_pi @ np.diag(rdiag) @ ones) @ ones.T @ inv_pi
    xx = covariate_expansion(k, x, n)
    if kind == "ols":
        return np.linalg.inv(xx.T @ np.diag(rdiag) @ xx) @ xx.T
    if kind == "wls":
        md = np.diag(m)
        return np.linalg.inv(xx.T @ md @ np.diag(rdiag) @ xx) @ xx.T @ md
    raise ValueError(kind)


def estimator_value(kind: str, rdiag: np.ndarray, y: np.ndarray, pi: np.ndarray,
                    c_full: np.ndarray, k: int, n: int,
                    x: np.ndarray | None = None, m: np.ndarray | None = None) -> float:
    w = w_matrix(kind, rdiag, pi, k, n, x=x, m=m)
    return float(c_full @ w @ np.diag(rdiag) @ y)


def finite_difference_z(kind: str, y: np.ndarray, pi: np.ndarray, c_full: np.ndarray,
                        k: int, n: int, x: np.ndarray | None = None,
                        m: np.ndarray | None = None, step: float = 1e-5) -> np.ndarray:
    """Central-difference linearization vector: z_a = pi_a * df/dR_a at R = pi."""
    kn = k * n
    z = np.zeros(kn)
    for a in range(kn):
        up = pi.copy()
        up[a] += step
        down = pi.copy()
        down[a] -= step
        fp = estimator_value(kind, up, y, pi, c_full, k, n, x=x, m=m)
        fm = estimator_value(kind, down, y, pi, c_full, k, n, x=x, m=m)
        z[a] = pi[a] * (fp - fm) / (2 * step)
    return z


def enumeration_mean_var(design: Design, fn) -> tuple[float, float]:
    """Probability-weighted mean and variance of fn(assignment) over the support."""
    vals = []
    probs = []
    for assignment, prob in design.assignments():
        vals.append(fn(assignment))
        probs.append(float(prob))
    vals = np.array(vals)
    probs = np.array(probs)
    mean = float(probs @ vals)
    return mean, float(probs @ (vals - mean) ** 2)


def enumeration_design_matrix(design: Design) -> np.ndarray:
    """Covariance of the inverse-probability weighted indicators, enumerated."""
    mat, probs = design.support_arrays()
    pi = probs @ mat
    v = mat / pi[None, :]
    mean = probs @ v
    centered = v - mean[None, :]
    return (centered * probs[:, None]).T @ centered


def brute_force_second_order_norm(design: Design, dtilde: np.ndarray) -> float:
    """Quadruple loop over all index tuples, materializing nothing clever."""
    layout = design.layout
    kn = layout.kn
    mat, probs = design.support_arrays()
    p = (mat * probs[:, None]).T @ mat
    total = 0.0
    for a in range(kn):
        for b in range(kn):
            for cc in range(kn):
                for e in range(kn):
                    e4 = float(np.sum(probs * mat[:, a] * mat[:, b] * mat[:, cc] * mat[:, e]))
                    pp = p[a, b] * p[cc, e]
                    dl = e4 / pp - 1.0 if pp > 0 else 0.0
                    total += abs(dtilde[a, b] * dtilde[cc, e] * dl)
    return total / layout.n


def hc0_scalar_loops(y_obs: np.ndarray, rdiag: np.ndarray, xx: np.ndarray,
                     c_full: np.ndarray) -> float:
    """HC0 via explicit scalar summations (no matrix sandwich expression)."""
    kn, q = xx.shape
    denom = np.zeros((q, q))
    for a in range(kn):
        if rdiag[a]:
            for i in range(q):
                for j in range(q):
                    denom[i, j] += xx[a, i] * xx[a, j]
    bread = np.linalg.inv(denom)
    bhat = bread @ xx.T @ y_obs
    total = 0.0
    for a in range(kn):
        if rdiag[a]:
            u = y_obs[a] - float(xx[a] @ bhat)
            lever = float(xx[a] @ bread @ c_full)
            total += (u * lever) ** 2
    return total


def random_small_design(
    rng: np.random.Generator, max_n: int = 6, max_k: int = 3, min_n: int = 1
) -> Design:
    """A random enumerable design for property tests."""
    family = rng.choice(["bernoulli", "complete", "paired", "block", "cluster"])
    if family == "bernoulli":
        k = int(rng.integers(2, max_k + 1))
        n = int(rng.integers(min_n, max_n + 1))
        probs = rng.dirichlet(np.ones(k) * 5.0, size=n)
        probs = np.clip(probs, 0.05, None)
        probs /= probs.sum(axis=1, keepdims=True)
        return dv.bernoulli_design([[float(v) for v in row] for row in probs])
    if family == "complete":
        k = int(rng.integers(2, max_k + 1))
        counts = [int(rng.integers(1, 3)) for _ in range(k)]
        return dv.complete_design(counts)
    if family == "paired":
        pairs = int(rng.integers(1, max_n // 2 + 1))
        perm = rng.permutation(2 * pairs)
        return dv.paired_design([tuple(perm[2 * j : 2 * j + 2]) for j in range(pairs)])
    if family == "block":
        b1 = dv.complete_design([1, 1])
        b2 = dv.bernoulli_design(0.5, n=2)
        return dv.block_design([([0, 1], b1), ([2, 3], b2)])
    clusters = [[0, 1], [2], [3, 4]]
    if rng.random() < 0.5:
        level = dv.complete_design([1, 2])
    else:
        level = dv.bernoulli_design(0.5, n=3)
    return dv.cluster_design(clusters, level)
