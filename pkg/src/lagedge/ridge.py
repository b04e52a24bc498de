"""Height-ridge lines of 2D scalar fields and ridge-comparison metrics."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .edge import ScalarField, jacobian_field
from .exceptions import DataError, EmptySet, FieldTooSmall, InvalidConfig
from .grid import GridSpec

_MERGE_TOL = 1e-9
_UMBILIC = 1e-9
_BISECT_ITERS = 60
_CURVE_NOISE = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class RidgeLine:
    vertices: np.ndarray   # (m, 2)
    strengths: np.ndarray  # (m,)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        s = np.asarray(self.strengths, dtype=np.float64).reshape(-1)
        if len(v) < 2:
            raise DataError(f"a ridge line needs >= 2 vertices, got {len(v)}")
        if len(s) != len(v):
            raise DataError(f"{len(s)} strengths for {len(v)} vertices")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise DataError("consecutive ridge vertices must be distinct")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "strengths", s)

    def __len__(self):
        return len(self.vertices)

    def translated(self, offset) -> "RidgeLine":
        return RidgeLine(self.vertices + np.asarray(offset, dtype=float), self.strengths)


@dataclass(frozen=True)
class RidgeParams:
    """``smoothing_sigma`` is in physical units; ``None`` means one grid spacing.

    ``strength_quantile`` (in ``[0, 1]``) raises the strength threshold to
    that quantile of the input field, which makes one setting usable on
    fields of very different dynamic range.  ``border`` drops crossings closer than that many cells to the domain
    boundary, where smoothing and one-sided differences are least reliable.
    """

    smoothing_sigma: float | None = None
    strength_threshold: float = -np.inf
    eigenvalue_threshold: float = 0.0
    min_vertices: int = 2
    border: int = 0
    strength_quantile: float | None = None

    def __post_init__(self):
        if self.smoothing_sigma is not None and not self.smoothing_sigma >= 0:
            raise InvalidConfig(f"smoothing_sigma must be >= 0, got {self.smoothing_sigma}")
        if self.eigenvalue_threshold > 0:
            raise InvalidConfig(f"eigenvalue_threshold must be <= 0, got {self.eigenvalue_threshold}")
        if int(self.min_vertices) != self.min_vertices or self.min_vertices < 2:
            raise InvalidConfig(f"min_vertices must be an integer >= 2, got {self.min_vertices}")
        if self.strength_quantile is not None and not 0.0 <= self.strength_quantile <= 1.0:
            raise InvalidConfig(f"strength_quantile must lie in [0, 1], got {self.strength_quantile}")
        if int(self.border) != self.border or self.border < 0:
            raise InvalidConfig(f"border must be a non-negative integer, got {self.border}")

    def sigma_for(self, grid: GridSpec) -> float:
        return min(grid.spacing) if self.smoothing_sigma is None else float(self.smoothing_sigma)

    def threshold_for(self, values: np.ndarray) -> float:
        t = float(self.strength_threshold)
        if self.strength_quantile is not None:
            t = max(t, float(np.quantile(values, self.strength_quantile)))
        return t


def _as_field(field, grid: GridSpec | None):
    if isinstance(field, ScalarField):
        return np.asarray(field.values, dtype=np.float64), field.grid
    values = np.asarray(field, dtype=np.float64)
    if grid is None:
        grid = GridSpec(values.shape, (1.0,) * values.ndim)
    if values.shape != tuple(grid.dims):
        raise DataError(f"field shape {values.shape} does not match grid {grid.dims}")
    return values, grid


def gaussian_smooth(values: np.ndarray, grid: GridSpec, sigma: float) -> np.ndarray:
    """Separable Gaussian truncated at 3 sigma, renormalized over in-domain taps."""
    out = np.asarray(values, dtype=np.float64)
    if sigma == 0:
        return out.copy()
    for axis, h in enumerate(grid.spacing):
        s = sigma / h
        radius = int(np.ceil(3.0 * s))
        k = np.arange(-radius, radius + 1)
        w = np.exp(-0.5 * (k / s) ** 2)
        num = correlate1d(out, w, axis=axis, mode="constant", cval=0.0)
        den = correlate1d(np.ones_like(out), w, axis=axis, mode="constant", cval=0.0)
        out = num / den
    return out


def derivatives(values: np.ndarray, grid: GridSpec):
    """Gradient ``(nx, ny, 2)`` and symmetric Hessian ``(nx, ny, 2, 2)`` by central differences."""
    grad = jacobian_field(values[..., None], grid)[..., 0, :]
    hess = jacobian_field(grad, grid)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    return grad, hess


def _min_eig(hxx, hxy, hyy):
    """Most negative eigenvalue, its unit eigenvector, and an umbilic mask."""
    mean = 0.5 * (hxx + hyy)
    rad = np.hypot(0.5 * (hxx - hyy), hxy)
    lam_min, lam_max = mean - rad, mean + rad
    v1 = np.stack([hxy, lam_min - hxx], axis=-1)
    v2 = np.stack([lam_min - hyy, hxy], axis=-1)
    n1, n2 = np.linalg.norm(v1, axis=-1), np.linalg.norm(v2, axis=-1)
    v = np.where((n1 >= n2)[..., None], v1, v2)
    n = np.maximum(n1, n2)
    umbilic = (lam_max - lam_min) < _UMBILIC * np.maximum(np.abs(lam_min), np.abs(lam_max))
    umbilic |= n == 0
    v = v / np.where(n > 0, n, 1.0)[..., None]
    return lam_min, v, umbilic


def _edge_residual(s, g0, g1, h0, h1, ref):
    """Ridge function and min eigenvalue at parameter ``s`` along edges.

    Gradient and Hessian are blended linearly between the edge's nodes,
    which is what bilinear interpolation gives on a cell edge.
    """
    sc = s[:, None]
    g = (1.0 - sc) * g0 + sc * g1
    h = (1.0 - sc) * h0 + sc * h1
    lam, e, umb = _min_eig(h[:, 0], h[:, 1], h[:, 2])
    e = np.where((np.sum(e * ref, axis=1) < 0)[:, None], -e, e)
    return np.sum(g * e, axis=1), lam, umb


class _Crossings:
    """Zero crossings of the ridge function on every grid edge."""

    def __init__(self, f, grad, hess, grid: GridSpec, params: RidgeParams, threshold: float):
        nx, ny = grid.dims
        hvec = np.stack([hess[..., 0, 0], hess[..., 0, 1], hess[..., 1, 1]], axis=-1)
        lam, e, umb = _min_eig(hvec[..., 0], hvec[..., 1], hvec[..., 2])
        pos = grid.node_positions()
        self.n_h = (nx - 1) * ny
        # x-edges first, then y-edges; each edge runs from node a to node b
        a_parts = ((slice(0, -1), slice(None)), (slice(None), slice(0, -1)))
        b_parts = ((slice(1, None), slice(None)), (slice(None), slice(1, None)))

        def take(arr, sls):
            return np.concatenate([arr[s].reshape(-1, *arr.shape[2:]) for s in sls])

        f0, f1 = take(f, a_parts), take(f, b_parts)
        g0, g1 = take(grad, a_parts), take(grad, b_parts)
        e0, e1 = take(e, a_parts), take(e, b_parts)
        u0, u1 = take(umb, a_parts), take(umb, b_parts)
        h0, h1 = take(hvec, a_parts), take(hvec, b_parts)
        p0, p1 = take(pos, a_parts), take(pos, b_parts)
        e1 = np.where((np.sum(e0 * e1, axis=1) < 0)[:, None], -e1, e1)
        r0 = np.sum(g0 * e0, axis=1)
        r1 = np.sum(g1 * e1, axis=1)
        cand = ~(u0 | u1) & ((r0 >= 0) != (r1 >= 0))
        idx = np.nonzero(cand)[0]
        # bisect the interpolated ridge function on every edge with a sign change
        args = (g0[idx], g1[idx], h0[idx], h1[idx], e0[idx])
        lo, hi = np.zeros(len(idx)), np.ones(len(idx))
        r_lo = r0[idx]
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            r_mid = _edge_residual(mid, *args)[0]
            left = (r_mid >= 0) == (r_lo >= 0)
            lo, r_lo, hi = np.where(left, mid, lo), np.where(left, r_mid, r_lo), np.where(left, hi, mid)
        s = 0.5 * (lo + hi)
        _, lam_s, umb_s = _edge_residual(s, *args)
        f_s = (1.0 - s) * f0[idx] + s * f1[idx]
        # curvature below the rounding noise of second differences is not a ridge
        floor = _CURVE_NOISE * np.max(np.abs(f), initial=0.0) / min(grid.spacing) ** 2
        keep = (lam_s < min(params.eigenvalue_threshold, -floor)) & (f_s >= threshold) & ~umb_s
        idx, s, f_s = idx[keep], s[keep], f_s[keep]
        points = p0[idx] + s[:, None] * (p1[idx] - p0[idx])
        if params.border:
            margin = params.border * np.asarray(grid.spacing)
            inner = np.all((points >= grid.lower + margin) & (points <= grid.upper - margin), axis=1)
            idx, points, f_s = idx[inner], points[inner], f_s[inner]
        self.edge_ids = idx
        self.points = points
        self.strengths = f_s
        self.grid = grid

    def cell_segments(self):
        """Pairs of crossing indices to connect, ordered by cell index."""
        nx, ny = self.grid.dims
        per_cell = defaultdict(list)
        for n, k in enumerate(self.edge_ids):
            k = int(k)
            if k < self.n_h:
                i, j = divmod(k, ny)
                cells = [(i, j - 1), (i, j)]
            else:
                i, j = divmod(k - self.n_h, ny - 1)
                cells = [(i - 1, j), (i, j)]
            for ci, cj in cells:
                if 0 <= ci < nx - 1 and 0 <= cj < ny - 1:
                    per_cell[ci * (ny - 1) + cj].append(n)
        segments = []
        for cell in sorted(per_cell):
            members = sorted(per_cell[cell])
            segments.extend(_pair_crossings(members, self.points))
        return segments


def _pair_crossings(members, points):
    if len(members) < 2:
        return []
    if len(members) == 2:
        return [tuple(members)]
    if len(members) == 3:
        best = min(
            ((a, b) for k, a in enumerate(members) for b in members[k + 1:]),
            key=lambda ab: np.linalg.norm(points[ab[0]] - points[ab[1]]),
        )
        return [best]
    a, b, c, d = members[:4]
    options = [((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))]

    def cost(opt):
        return sum(np.linalg.norm(points[p] - points[q]) for p, q in opt)

    return list(min(options, key=cost))


def _merge_points(points: np.ndarray):
    """Canonical index for crossings that coincide within the merge tolerance."""
    keys = np.round(points / _MERGE_TOL).astype(np.int64)
    canon = {}
    out = np.empty(len(points), dtype=np.intp)
    for n, key in enumerate(map(tuple, keys)):
        out[n] = canon.setdefault(key, n)
    return out


def _chain(segments, n_points):
    """Split the segment graph into polylines at endpoints and junctions."""
    adj = defaultdict(list)
    for a, b in segments:
        adj[a].append(b)
        adj[b].append(a)
    for k in adj:
        adj[k].sort()
    used = set()

    def walk(start, nxt):
        line = [start, nxt]
        used.add(frozenset((start, nxt)))
        prev, cur = start, nxt
        while len(adj[cur]) == 2 and cur != start:
            cand = [v for v in adj[cur] if frozenset((cur, v)) not in used]
            if not cand:
                break
            prev, cur = cur, cand[0]
            used.add(frozenset((prev, cur)))
            line.append(cur)
        return line

    lines = []
    for node in sorted(adj):
        if len(adj[node]) != 2:
            for nb in adj[node]:
                if frozenset((node, nb)) not in used:
                    lines.append(walk(node, nb))
    for node in sorted(adj):
        for nb in adj[node]:
            if frozenset((node, nb)) not in used:
                lines.append(walk(node, nb))
    return lines


def extract_ridges(field, params: RidgeParams = RidgeParams(),
                   grid: GridSpec | None = None) -> list[RidgeLine]:
    """Height ridges: zero crossings of grad(f) . e_min with lambda_min below threshold.

    ``field`` is a :class:`ScalarField` or a 2D array (unit grid unless
    ``grid`` is given).  Lines are returned longest first.
    """
    values, grid = _as_field(field, grid)
    if grid.ndim != 2:
        raise DataError("ridge extraction is implemented for 2D fields only")
    if any(n < 3 for n in grid.dims):
        raise FieldTooSmall(f"ridge extraction needs >= 3 nodes per axis, got {grid.dims}")
    smooth = gaussian_smooth(values, grid, params.sigma_for(grid))
    grad, hess = derivatives(smooth, grid)
    cross = _Crossings(smooth, grad, hess, grid, params, params.threshold_for(values))
    canon = _merge_points(cross.points)
    segments = []
    seen = set()
    for a, b in cross.cell_segments():
        a, b = int(canon[a]), int(canon[b])
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in seen:
            seen.add(key)
            segments.append(key)
    lines = []
    for chain in _chain(segments, len(cross.points)):
        if len(chain) < params.min_vertices:
            continue
        lines.append(RidgeLine(cross.points[chain], cross.strengths[chain]))
    lines.sort(key=lambda ln: (-len(ln), tuple(ln.vertices[0])))
    return lines


def ridge_residual(field, points, params: RidgeParams = RidgeParams(),
                   grid: GridSpec | None = None):
    """``|grad f . e_min|`` and ``|grad f|`` at ``points`` on the smoothed field.

    Derivatives are bilinearly interpolated from the nodes.
    """
    from .grid import TimeAxis, interpolate

    values, grid = _as_field(field, grid)
    smooth = gaussian_smooth(values, grid, params.sigma_for(grid))
    grad, hess = derivatives(smooth, grid)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    steady = TimeAxis()
    g = interpolate(grad[None], grid, steady, 0.0, pts)
    h = interpolate(hess.reshape(*grid.dims, 4)[None], grid, steady, 0.0, pts)
    _, e, _ = _min_eig(h[:, 0], h[:, 1], h[:, 3])
    return np.abs(np.sum(g * e, axis=1)), np.linalg.norm(g, axis=1)


def point_polyline_distance(p, line) -> float:
    """Shortest distance from ``p`` to the piecewise-linear curve ``line``."""
    verts = line.vertices if isinstance(line, RidgeLine) else np.asarray(line, dtype=float)
    return float(_points_to_polyline(np.asarray(p, dtype=float)[None], verts)[0])


def _points_to_polyline(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    a, b = verts[:-1], verts[1:]
    ab = b - a
    len2 = np.sum(ab * ab, axis=1)
    ap = points[:, None, :] - a[None]
    t = np.clip(np.sum(ap * ab[None], axis=2) / np.where(len2 > 0, len2, 1.0), 0.0, 1.0)
    # measured from the segment start so both endpoints give exactly 0
    d = np.sqrt(np.sum((ap - t[..., None] * ab[None]) ** 2, axis=2))
    return d.min(axis=1)


def ridge_dissimilarity(ci: RidgeLine, cj: RidgeLine) -> float:
    """Mean over the vertices of both lines of the distance to the other line."""
    di = _points_to_polyline(ci.vertices, cj.vertices)
    dj = _points_to_polyline(cj.vertices, ci.vertices)
    return float((np.sum(di) + np.sum(dj)) / (len(di) + len(dj)))


@dataclass(frozen=True)
class SetDistance:
    a_to_b: np.ndarray    # per vertex of set A, distance to nearest line of B
    b_to_a: np.ndarray

    @property
    def mean_ab(self) -> float:
        return float(np.mean(self.a_to_b))

    @property
    def mean_ba(self) -> float:
        return float(np.mean(self.b_to_a))

    @property
    def max_ab(self) -> float:
        return float(np.max(self.a_to_b))

    @property
    def max_ba(self) -> float:
        return float(np.max(self.b_to_a))


def _set_to_set(src, dst) -> np.ndarray:
    out = []
    for line in src:
        best = np.full(len(line), np.inf)
        for other in dst:
            best = np.minimum(best, _points_to_polyline(line.vertices, other.vertices))
        out.append(best)
    return np.concatenate(out)


def ridge_set_distance(set_a, set_b) -> SetDistance:
    if not set_a or not set_b:
        raise EmptySet(f"ridge sets must be non-empty (got {len(set_a)} and {len(set_b)} lines)")
    return SetDistance(_set_to_set(set_a, set_b), _set_to_set(set_b, set_a))
