"""Compiled per-particle RK4 loops for 2D and 3D uniform grids.

Arithmetic mirrors :func:`lagedge.grid.interpolate` operation for operation
(nested per-axis blends, innermost axis first, then the time blend), so
compiled and reference paths agree bitwise.  Fields arrive with spatial axes
flattened in C order: velocity ``(frames, nodes, d)``, scalars
``(frames, nodes, C)``.  ``geo`` rows hold, per axis,
``origin, spacing, n, lo, hi, lo_slack, hi_slack``.  Particles are
independent; callers may split the seed range across threads freely.
"""
import numpy as np
from numba import njit

_SNAP = 1e-12


@njit(cache=True, nogil=True, inline="always")
def _axis(x, o, h, n):
    u = (x - o) / h
    r = np.floor(u + 0.5)
    if abs(u - r) <= _SNAP * max(1.0, abs(u)):
        u = r
    i = np.floor(u)
    if i < 0.0:
        i = 0.0
    elif i > n - 2.0:
        i = n - 2.0
    f = u - i
    if f < 0.0:
        f = 0.0
    elif f > 1.0:
        f = 1.0
    return int(i), f


@njit(cache=True, nogil=True, inline="always")
def _lerp(a, b, f):
    return b if f == 1.0 else a + f * (b - a)


@njit(cache=True, nogil=True, inline="always")
def _w2(x, y, o0, o1, h0, h1, n0, n1):
    i, fx = _axis(x, o0, h0, n0)
    j, fy = _axis(y, o1, h1, n1)
    return i, j, fx, fy


@njit(cache=True, nogil=True, inline="always")
def _blend2(F, fk, b, sx, c, fx, fy):
    return _lerp(_lerp(F[fk, b, c], F[fk, b + 1, c], fy),
                 _lerp(F[fk, b + sx, c], F[fk, b + sx + 1, c], fy), fx)


@njit(cache=True, nogil=True, inline="always")
def _field2(F, fk, fw, b, sx, c, fx, fy):
    a = _blend2(F, fk, b, sx, c, fx, fy)
    if fw != 0.0:
        a = _lerp(a, _blend2(F, fk + 1, b, sx, c, fx, fy), fw)
    return a


@njit(cache=True, nogil=True, inline="always")
def _vel2(V, fk, fw, x, y, o0, o1, h0, h1, n0, n1, sx):
    i, j, fx, fy = _w2(x, y, o0, o1, h0, h1, n0, n1)
    b = i * sx + j
    return (_field2(V, fk, fw, b, sx, 0, fx, fy),
            _field2(V, fk, fw, b, sx, 1, fx, fy))


@njit(cache=True, nogil=True, inline="always")
def _inside(geo, a, v):
    return geo[a, 5] <= v <= geo[a, 6]


@njit(cache=True, nogil=True, inline="always")
def _clamp(geo, a, v):
    return min(max(v, geo[a, 3]), geo[a, 4])


@njit(cache=True, nogil=True)
def rk4_2d(V, geo, strides, seeds, stage_k, stage_w, h, M, S, scal, sample_k, sample_w,
           store, paths, samples, ends, valid):
    """Advance every seed through ``M * S`` RK4 steps (time-outer loop).

    ``paths`` and ``samples`` are time-major, ``(M + 1, n_seeds, .)``, so each
    sweep over the seeds writes contiguous memory.
    """
    n_seeds = seeds.shape[0]
    nc = scal.shape[2]
    sx = strides[0]
    o0, h0, n0, lo0, hi0, a0, b0 = geo[0, 0], geo[0, 1], geo[0, 2], geo[0, 3], geo[0, 4], geo[0, 5], geo[0, 6]
    o1, h1, n1, lo1, hi1, a1_, b1_ = geo[1, 0], geo[1, 1], geo[1, 2], geo[1, 3], geo[1, 4], geo[1, 5], geo[1, 6]
    hh = 0.5 * h
    P = seeds.copy()
    alive = np.ones(n_seeds, dtype=np.bool_)
    valid[:] = 1
    # first-stage velocities filled in by the sample sweep when it shares the lookup
    K1 = np.empty((n_seeds if nc > 0 else 0, 2))
    have_k1 = False
    for m in range(M + 1):
        for s in range(S if m > 0 else 0):
            step = (m - 1) * S + s
            ka, kb, kc = stage_k[step, 0], stage_k[step, 1], stage_k[step, 2]
            wa, wb, wc = stage_w[step, 0], stage_w[step, 1], stage_w[step, 2]
            reuse = have_k1 and s == 0
            for n in range(n_seeds):
                if not alive[n]:
                    continue
                x, y = P[n, 0], P[n, 1]
                if reuse:
                    u1, v1 = K1[n, 0], K1[n, 1]
                else:
                    u1, v1 = _vel2(V, ka, wa, x, y, o0, o1, h0, h1, n0, n1, sx)
                x2, y2 = x + hh * u1, y + hh * v1
                u2, v2 = _vel2(V, kb, wb, x2, y2, o0, o1, h0, h1, n0, n1, sx)
                x3, y3 = x + hh * u2, y + hh * v2
                u3, v3 = _vel2(V, kb, wb, x3, y3, o0, o1, h0, h1, n0, n1, sx)
                x4, y4 = x + h * u3, y + h * v3
                u4, v4 = _vel2(V, kc, wc, x4, y4, o0, o1, h0, h1, n0, n1, sx)
                nx = x + h * (u1 + 2.0 * u2 + 2.0 * u3 + u4) / 6.0
                ny = y + h * (v1 + 2.0 * v2 + 2.0 * v3 + v4) / 6.0
                lox = min(min(x2, x3), min(x4, nx))
                hix = max(max(x2, x3), max(x4, nx))
                loy = min(min(y2, y3), min(y4, ny))
                hiy = max(max(y2, y3), max(y4, ny))
                if lox >= a0 and hix <= b0 and loy >= a1_ and hiy <= b1_:
                    P[n, 0] = min(max(nx, lo0), hi0)
                    P[n, 1] = min(max(ny, lo1), hi1)
                else:
                    alive[n] = False
        fk, fw = sample_k[m], sample_w[m]
        have_k1 = (nc > 0 and m < M and stage_k[m * S, 0] == fk and stage_w[m * S, 0] == fw)
        for n in range(n_seeds):
            if m > 0 and alive[n]:
                valid[n] = m + 1
            if store:
                paths[m, n, 0] = P[n, 0]
                paths[m, n, 1] = P[n, 1]
            if nc > 0:
                i, j, fx, fy = _w2(P[n, 0], P[n, 1], o0, o1, h0, h1, n0, n1)
                b = i * sx + j
                for c in range(nc):
                    samples[m, n, c] = _field2(scal, fk, fw, b, sx, c, fx, fy)
                if have_k1 and alive[n]:
                    K1[n, 0] = _field2(V, fk, fw, b, sx, 0, fx, fy)
                    K1[n, 1] = _field2(V, fk, fw, b, sx, 1, fx, fy)
    ends[:, :] = P


@njit(cache=True, nogil=True, inline="always")
def _w3(geo, x, y, z):
    i, fx = _axis(x, geo[0, 0], geo[0, 1], geo[0, 2])
    j, fy = _axis(y, geo[1, 0], geo[1, 1], geo[1, 2])
    k, fz = _axis(z, geo[2, 0], geo[2, 1], geo[2, 2])
    return i, j, k, fx, fy, fz


@njit(cache=True, nogil=True, inline="always")
def _blend3(F, fk, b, sx, sy, c, fx, fy, fz):
    y0 = _lerp(_lerp(F[fk, b, c], F[fk, b + 1, c], fz),
               _lerp(F[fk, b + sy, c], F[fk, b + sy + 1, c], fz), fy)
    y1 = _lerp(_lerp(F[fk, b + sx, c], F[fk, b + sx + 1, c], fz),
               _lerp(F[fk, b + sx + sy, c], F[fk, b + sx + sy + 1, c], fz), fy)
    return _lerp(y0, y1, fx)


@njit(cache=True, nogil=True, inline="always")
def _field3(F, fk, fw, b, sx, sy, c, fx, fy, fz):
    a = _blend3(F, fk, b, sx, sy, c, fx, fy, fz)
    if fw != 0.0:
        a = _lerp(a, _blend3(F, fk + 1, b, sx, sy, c, fx, fy, fz), fw)
    return a


@njit(cache=True, nogil=True)
def rk4_3d(V, geo, strides, seeds, stage_k, stage_w, h, M, S, scal, sample_k, sample_w,
           store, paths, samples, ends, valid):
    """Three-dimensional twin of :func:`rk4_2d`."""
    n_seeds = seeds.shape[0]
    nc = scal.shape[2]
    sx, sy = strides[0], strides[1]
    P = seeds.copy()
    alive = np.ones(n_seeds, dtype=np.bool_)
    valid[:] = 1
    k = np.empty((4, 3))
    q = np.empty(3)
    for m in range(M + 1):
        for s in range(S if m > 0 else 0):
            step = (m - 1) * S + s
            for n in range(n_seeds):
                if not alive[n]:
                    continue
                ok = True
                for stage in range(4):
                    col = 0 if stage == 0 else (2 if stage == 3 else 1)
                    for a in range(3):
                        if stage == 0:
                            q[a] = P[n, a]
                        elif stage == 3:
                            q[a] = P[n, a] + h * k[2, a]
                        else:
                            q[a] = P[n, a] + (0.5 * h) * k[stage - 1, a]
                        if stage > 0 and not _inside(geo, a, q[a]):
                            ok = False
                    i, j, kk, fx, fy, fz = _w3(geo, q[0], q[1], q[2])
                    b = i * sx + j * sy + kk
                    for a in range(3):
                        k[stage, a] = _field3(V, stage_k[step, col], stage_w[step, col], b, sx, sy, a,
                                              fx, fy, fz)
                for a in range(3):
                    q[a] = P[n, a] + h * (k[0, a] + 2.0 * k[1, a] + 2.0 * k[2, a] + k[3, a]) / 6.0
                    if not _inside(geo, a, q[a]):
                        ok = False
                if ok:
                    for a in range(3):
                        P[n, a] = _clamp(geo, a, q[a])
                else:
                    alive[n] = False
        fk, fw = sample_k[m], sample_w[m]
        for n in range(n_seeds):
            if m > 0 and alive[n]:
                valid[n] = m + 1
            if store:
                for a in range(3):
                    paths[m, n, a] = P[n, a]
            if nc > 0:
                i, j, kk, fx, fy, fz = _w3(geo, P[n, 0], P[n, 1], P[n, 2])
                b = i * sx + j * sy + kk
                for c in range(nc):
                    samples[m, n, c] = _field3(scal, fk, fw, b, sx, sy, c, fx, fy, fz)
    ends[:, :] = P


@njit(cache=True, nogil=True, inline="always")
def _acc(total, comp, x):
    # Neumaier compensated addition
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@njit(cache=True, nogil=True)
def moments_tm(S, counts, orders, root, out):
    """Per-channel moments of time-major samples ``S`` (L, N, C).

    Seed ``n`` uses its first ``counts[n]`` samples.  ``out`` is (N, C, K)
    for the K ``orders``; order 1 is the mean, higher orders are population
    central moments.  Three contiguous sweeps: sum, mean correction, powers.
    """
    L, N, C = S.shape
    K = orders.shape[0]
    # a plain first sum is enough: the second pass repairs its rounding
    tot = np.zeros((N, C))
    cmp = np.zeros((N, C))
    for l in range(L):
        for n in range(N):
            if l < counts[n]:
                for c in range(C):
                    tot[n, c] += S[l, n, c]
    mean = np.empty((N, C))
    for n in range(N):
        for c in range(C):
            mean[n, c] = tot[n, c] / counts[n]
            tot[n, c] = 0.0
    for l in range(L):
        for n in range(N):
            if l < counts[n]:
                for c in range(C):
                    tot[n, c], cmp[n, c] = _acc(tot[n, c], cmp[n, c], S[l, n, c] - mean[n, c])
    for n in range(N):
        for c in range(C):
            mean[n, c] += (tot[n, c] + cmp[n, c]) / counts[n]
    acc = np.zeros((N, C, K))
    acc_c = np.zeros((N, C, K))
    for l in range(L):
        for n in range(N):
            if l < counts[n]:
                for c in range(C):
                    d = S[l, n, c] - mean[n, c]
                    p = d
                    for q in range(2, orders[K - 1] + 1):
                        p *= d
                        for j in range(K):
                            if orders[j] == q:
                                acc[n, c, j], acc_c[n, c, j] = _acc(acc[n, c, j], acc_c[n, c, j], p)
    for n in range(N):
        for c in range(C):
            for j in range(K):
                if orders[j] == 1:
                    out[n, c, j] = mean[n, c]
                    continue
                v = (acc[n, c, j] + acc_c[n, c, j]) / counts[n]
                if root:
                    m = abs(v) ** (1.0 / orders[j])
                    v = m if v > 0 else (-m if v < 0 else 0.0)
                out[n, c, j] = v
