"""Shared builders and independent oracles for the test suite."""
import itertools

import numpy as np

from cdtriality import SensorNetwork, instance_from_arrays


def sym(M):
    return 0.5 * (M + M.T)


def random_psd(rng, n, rank=None):
    W = rng.normal(size=(n, rank or n))
    return W @ W.T / (rank or n)


def random_instance(rng, n, m, p, a_scale=1.0):
    A = sym(rng.normal(size=(n, n))) * a_scale
    B = [random_psd(rng, n) for _ in range(m)]
    C = [random_psd(rng, n) for _ in range(p)]
    return instance_from_arrays(A, B, rng.uniform(-1, 1, m), C, rng.uniform(0.5, 2.0, p),
                                rng.uniform(-1, 1, p), rng.normal(size=n))


def plant_pair(x, tau, sigma, G, B, C, beta):
    """Instance for which (tau, sigma) and x form an exact stationary pair with the given G."""
    x = np.asarray(x, float)
    A = np.array(G, float) - sum(t * b for t, b in zip(tau, B)) - sum(s * c for s, c in zip(sigma, C))
    alpha = [0.5 * x @ b @ x - np.log(t) for t, b in zip(tau, B)]
    theta = [0.5 * x @ c @ x - s / be for s, c, be in zip(sigma, C, beta)]
    return instance_from_arrays(A, B, alpha, C, beta, theta, np.asarray(G) @ x)


def network_misfit(dim, sensors, anchors, distances, positions):
    """Least-squares distance misfit written out term by term."""
    U = np.array(positions, float).reshape(sensors, dim).copy()
    for k, pos in anchors:
        U[k] = pos
    total = 0.0
    for i, j, d in distances:
        sq = sum((U[i][c] - U[j][c]) ** 2 for c in range(dim))
        total += 0.5 * (sq - d * d) ** 2
    return total


def random_network(rng, dim, sensors, n_anchors, consistent=True, origin_anchor=False):
    U = rng.uniform(-1, 1, (sensors, dim))
    if origin_anchor:
        U[0] = 0.0
    anchors = [(k, U[k]) for k in range(n_anchors)]
    distances = []
    for i, j in itertools.combinations(range(sensors), 2):
        if i < n_anchors and j < n_anchors:
            continue
        d = np.linalg.norm(U[i] - U[j]) if consistent else rng.uniform(0.2, 2.0)
        distances.append((i, j, max(d, 1e-3)))
    return SensorNetwork(dim, sensors, anchors, distances), U


def fd_gradient(fun, x, h=1e-6):
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for k in range(x.size):
        step = h * (1.0 + abs(x[k]))
        e = np.zeros_like(x)
        e[k] = step
        g[k] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g


def fd_jacobian(fun, x, h=1e-5):
    x = np.asarray(x, float)
    cols = []
    for k in range(x.size):
        step = h * (1.0 + abs(x[k]))
        e = np.zeros_like(x)
        e[k] = step
        cols.append((fun(x + e) - fun(x - e)) / (2 * step))
    return np.array(cols).T


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b).max() / max(1.0, np.abs(b).max())


def mp_violation(M, X):
    """Largest of the four Moore-Penrose residuals, each relative to its own scale."""
    def rel(a, b):
        return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)
    return max(rel(M @ X @ M, M), rel(X @ M @ X, X) if np.any(X) else 0.0,
               rel((M @ X).T, M @ X) if np.any(X) else 0.0, rel((X @ M).T, X @ M) if np.any(X) else 0.0)


def wu_triple(rng):
    n = int(rng.integers(2, 6))
    r = int(rng.integers(1, n))
    D = np.zeros((n, n))
    D[:r, :r] = rng.normal(size=(r, r))
    P = -random_psd(rng, n) - 0.1 * np.eye(n)
    U = np.zeros((n, n))
    for a, b in ((0, r), (r, n)):
        U[a:b, a:b] = random_psd(rng, b - a) * rng.uniform(0.01, 3.0) + 0.01 * np.eye(b - a)
    return P, D, U
