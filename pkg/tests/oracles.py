"""Independent reference implementations used only by the tests.

Written with explicit loops or generic dense routines so they share no
code path with the package.
"""
import math

import numpy as np
import scipy.linalg


def moments_bruteforce(samples, orders, root_normalize=False):
    """Per-channel mean and population central moments by explicit sums (math.fsum)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, c = samples.shape
    out = []
    for ch in range(c):
        col = [float(v) for v in samples[:, ch]]
        mean = math.fsum(col) / n
        for k in orders:
            if k == 1:
                out.append(mean)
                continue
            central = math.fsum((v - mean) ** k for v in col) / n
            if root_normalize:
                central = math.copysign(abs(central) ** (1.0 / k), central)
            out.append(central)
    return np.array(out)


def normal_equations_fit(offsets, deltas):
    """Solve (X^T X) A^T = X^T Y with a dense LU solve; returns A (features x d)."""
    X = np.asarray(offsets, dtype=float)
    Y = np.asarray(deltas, dtype=float)
    At = scipy.linalg.solve(X.T @ X, X.T @ Y, assume_a="gen")
    return At.T


def power_iteration_norm(A, squarings=64):
    """Largest singular value by the power method on A^T A with repeated squaring.

    (A^T A)^(2^k) converges like (s2/s1)^(2^(k+1)), so near-equal singular
    values are resolved; any column of the limit spans the top eigenspace and
    its Rayleigh quotient gives lambda_max.
    """
    A = np.asarray(A, dtype=float)
    scale = np.max(np.abs(A))
    if scale == 0:
        return 0.0
    B = A / scale
    G = B.T @ B
    P = G / np.max(np.abs(G))
    for _ in range(squarings):
        P = P @ P
        P /= np.max(np.abs(P))
    v = P[:, int(np.argmax(np.linalg.norm(P, axis=0)))]
    lam = float(v @ G @ v) / float(v @ v)
    return math.sqrt(max(lam, 0.0)) * scale


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    L2 = float(ab @ ab)
    t = 0.0 if L2 == 0 else min(max(float((p - a) @ ab) / L2, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def polyline_distance(p, verts):
    return min(point_segment_distance(p, verts[k], verts[k + 1]) for k in range(len(verts) - 1))


def dissimilarity_bruteforce(vi, vj):
    di = [polyline_distance(p, vj) for p in vi]
    dj = [polyline_distance(p, vi) for p in vj]
    return (math.fsum(di) + math.fsum(dj)) / (len(di) + len(dj))


def saddle_flow_map(x, y, lam, T):
    return x * math.exp(lam * T), y * math.exp(-lam * T)


def rotation_flow_map(x, y, omega, T):
    c, s = math.cos(omega * T), math.sin(omega * T)
    return c * x - s * y, s * x + c * y


def moment_condition_scale(samples, orders):
    """Magnitude that bounds rounding in a central moment, per (channel, order).

    E|s - mean|^k covers the summation; k |mean| E|s - mean|^(k-1) the
    rounding of the mean itself.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    out = []
    for ch in range(samples.shape[1]):
        col = samples[:, ch]
        mean = math.fsum(col) / len(col)
        dev = np.abs(col - mean)
        for k in orders:
            if k == 1:
                out.append(abs(mean) + float(np.mean(dev)))
            else:
                out.append(float(np.mean(dev ** k)) + k * abs(mean) * float(np.mean(dev ** (k - 1))))
    return np.array(out)
