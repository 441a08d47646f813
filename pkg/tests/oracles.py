"""Independent reference implementations used as test oracles.

None of these share code with the package: correlations are computed from the
textbook formula, and canonical correlation is found by direct search over
weight vectors or by a generalized eigenproblem rather than whitening + SVD.
"""

import math

import numpy as np
from scipy import linalg, optimize


def textbook_pearson(a, b):
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b)) / (n - 1)
    sa = math.sqrt(sum((x - ma) ** 2 for x in a) / (n - 1))
    sb = math.sqrt(sum((y - mb) ** 2 for y in b) / (n - 1))
    return cov / (sa * sb)


def _corr(wa, wb, a, b):
    u, v = wa @ a, wb @ b
    u = u - u.mean()
    v = v - v.mean()
    den = np.linalg.norm(u) * np.linalg.norm(v)
    return 0.0 if den == 0 else float(u @ v / den)


def search_cca(a, b, rng, n_random=2000, n_starts=4):
    """Max correlation over weight pairs: random unit vectors, then local refinement."""
    p, q = a.shape[0], b.shape[0]
    wa = rng.standard_normal((n_random, p))
    wb = rng.standard_normal((n_random, q))
    ua = wa @ (a - a.mean(axis=1, keepdims=True))
    vb = wb @ (b - b.mean(axis=1, keepdims=True))
    r = np.sum(ua * vb, axis=1) / (np.linalg.norm(ua, axis=1) * np.linalg.norm(vb, axis=1))
    # correlation is odd in each weight, so |r| is reachable by flipping one sign
    order = np.argsort(-np.abs(r))[:n_starts]
    best = float(np.max(np.abs(r)))

    def loss(z):
        return -_corr(z[:p], z[p:], a, b)

    for idx in order:
        z0 = np.concatenate([wa[idx] * np.sign(r[idx]), wb[idx]])
        res = optimize.minimize(loss, z0, method="BFGS", options={"gtol": 1e-10})
        best = max(best, -res.fun)
    return best


def grid_cca_2x2(a, b, n_angles=721):
    """Dense angular grid over unit vectors for 2-row inputs, refined by Nelder-Mead."""
    theta = np.linspace(0, np.pi, n_angles)
    w = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    u = w @ (a - a.mean(axis=1, keepdims=True))
    v = w @ (b - b.mean(axis=1, keepdims=True))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    grid = np.abs(u @ v.T)
    i, j = np.unravel_index(np.argmax(grid), grid.shape)

    def loss(ang):
        wa = np.array([np.cos(ang[0]), np.sin(ang[0])])
        wb = np.array([np.cos(ang[1]), np.sin(ang[1])])
        return -abs(_corr(wa, wb, a, b))

    res = optimize.minimize(loss, [theta[i], theta[j]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 5000})
    return -res.fun


def geig_cca(a, b, ridge=1e-10):
    """Leading canonical pair from the generalized eigenproblem
    C_ab C_bb^-1 C_ba w = rho^2 C_aa w. Returns (w_a unit norm, rho)."""
    n = a.shape[1]
    ac = a - a.mean(axis=1, keepdims=True)
    bc = b - b.mean(axis=1, keepdims=True)
    caa = ac @ ac.T / (n - 1)
    cbb = bc @ bc.T / (n - 1)
    cab = ac @ bc.T / (n - 1)
    caa = caa + ridge * np.trace(caa) / caa.shape[0] * np.eye(caa.shape[0])
    cbb = cbb + ridge * np.trace(cbb) / cbb.shape[0] * np.eye(cbb.shape[0])
    lhs = cab @ np.linalg.solve(cbb, cab.T)
    vals, vecs = linalg.eigh((lhs + lhs.T) / 2, caa)
    w = vecs[:, -1]
    return w / np.linalg.norm(w), math.sqrt(max(vals[-1], 0.0))


def direct_itr(p, n, t):
    """Bits per minute, straight from the textbook expression."""
    bits = math.log2(n)
    if p > 0:
        bits += p * math.log2(p)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) / (n - 1))
    return bits * 60.0 / t


def desk_paired_t(a, b):
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in d) / (n - 1))
    return mean / (sd / math.sqrt(n))
