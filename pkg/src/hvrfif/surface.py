"""Hidden variable bivariate recurrent fractal interpolation surfaces.

Cells ``E_ij`` of a uniform square grid are the regions; domains are square
blocks of ``mu x mu`` cells.  Each cell gets the separable affine map
``L_ij(x, y) = (L_x(x), L_y(y))`` from its domain onto the cell and

    F_ij(X, v) = S_ij(L_ij X) (v - l_k(X)) + g(L_ij X)

with ``g`` the global bilinear interpolant of the ``(z, t)`` data and
``l_k`` the bilinearly blended (Coons) patch of ``g`` over the edges of
domain ``k``.  ``l_k`` equals ``g`` on the domain boundary, so ``F`` sends
``g`` to ``g`` on every grid line; the fixed point therefore agrees with
``g`` on all grid lines and is continuous across cell edges.  Inside a domain
``l_k`` differs from ``g``, which is what makes the surface non-trivial.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .dimension import (
    CASE_I,
    CASE_II,
    INCONCLUSIVE,
    DimensionBounds,
    FactorExtrema,
    HypothesisReport,
    find_triple,
    spectral_radius_any,
    worker_count,
)
from .errors import (
    DeadRegion,
    DeltaTooSmall,
    DomainCountOutOfRange,
    DomainTooNarrow,
    EndpointMismatch,
    GammaOutOfRange,
    HypothesisViolated,
    InvalidDomain,
    NoConvergence,
    NonFiniteValue,
    NonIncreasingAbscissa,
    NonSquareDomain,
    NotContractive,
    Reducible,
    TooFewPoints,
    UnusedDomain,
)
from .evaluator import DEFAULT_MAX_ITER, DEFAULT_TOL, _write_csv, interp_weights
from .factor_expr import DEFAULT_SAMPLES
from .rifs_core import CONTRACTION_MARGIN, FACTOR_NAMES, AffineMap1D, check_irreducible, make_quad

BOUNDARY_TOL = 1e-10
BOUNDARY_SAMPLES = 33
UNIFORM_RTOL = 1e-9
SIGN_SAMPLES = 4096
SURFACE_VARS = ("x", "y")


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridDataSet:
    """Values ``z[i, j]`` and hidden values ``t[i, j]`` at ``(x[i], y[j])``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: np.ndarray

    @property
    def n(self):
        return len(self.x) - 1

    @property
    def m(self):
        return len(self.y) - 1

    @property
    def N(self):
        return self.n * self.m

    def cell(self, i, j):
        """Rectangle ``((x_{i-1}, x_i), (y_{j-1}, y_j))`` of cell ``(i, j)`` (1-based)."""
        return ((float(self.x[i - 1]), float(self.x[i])), (float(self.y[j - 1]), float(self.y[j])))

    def steps(self):
        return float(np.diff(self.x).mean()), float(np.diff(self.y).mean())

    def is_uniform(self):
        ok = True
        for axis in (self.x, self.y):
            d = np.diff(axis)
            ok &= bool(np.all(np.abs(d - d.mean()) <= UNIFORM_RTOL * abs(d.mean())))
        return ok

    def has_square_cells(self):
        hx, hy = self.steps()
        return abs(hx - hy) <= UNIFORM_RTOL * max(hx, hy)

    def bilinear(self):
        """Global bilinear interpolant ``g(x, y) -> (z, t)`` as a callable on arrays."""
        vals = np.stack([self.z, self.t], axis=-1)
        rgi = RegularGridInterpolator((self.x, self.y), vals, method="linear", bounds_error=False, fill_value=None)

        def g(xs, ys):
            xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
            out = rgi(np.stack([xs.ravel(), ys.ravel()], axis=-1))
            return out[:, 0].reshape(xs.shape), out[:, 1].reshape(xs.shape)

        return g


def coons_patch(g, rect):
    """Bilinearly blended patch matching ``g`` on the boundary of ``rect = ((a, b), (c, d))``."""
    (a, b), (c, d) = rect

    def patch(xs, ys):
        xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        u = (xs - a) / (b - a)
        v = (ys - c) / (d - c)
        out = []
        west, east = g(np.full_like(xs, a), ys), g(np.full_like(xs, b), ys)
        south, north = g(xs, np.full_like(ys, c)), g(xs, np.full_like(ys, d))
        corners = [g(np.array(p), np.array(q)) for p, q in ((a, c), (b, c), (a, d), (b, d))]
        for k in range(2):
            c00, c10, c01, c11 = (float(cn[k]) for cn in corners)
            bil = c00 * (1 - u) * (1 - v) + c10 * u * (1 - v) + c01 * (1 - u) * v + c11 * u * v
            out.append((1 - u) * west[k] + u * east[k] + (1 - v) * south[k] + v * north[k] - bil)
        return out[0], out[1]

    return patch


def grid_dataset(x, y, z, t):
    """Validate axes and value grids of shape ``(n+1, m+1)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(x) < 3 or len(y) < 3:
        raise TooFewPoints(f"need at least 3 nodes per axis, got {len(x)} x {len(y)}")
    shape = (len(x), len(y))
    if z.shape != shape or t.shape != shape:
        raise ValueError(f"z and t must have shape {shape}, got {z.shape} and {t.shape}")
    for name, arr in (("x", x), ("y", y), ("z", z), ("t", t)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"{name} has a non-finite value")
    for name, axis in (("x", x), ("y", y)):
        steps = np.diff(axis)
        if np.any(steps <= 0):
            k = int(np.argmax(steps <= 0)) + 1
            raise NonIncreasingAbscissa(f"{name}[{k}] does not exceed {name}[{k - 1}]")
    return GridDataSet(_frozen(x), _frozen(y), _frozen(z), _frozen(t))


def uniform_grid(z, t, x_range=(0.0, 1.0), y_range=None):
    """Grid data on uniform axes; ``y_range`` defaults to square cells starting at 0."""
    z = np.asarray(z, dtype=float)
    n, m = z.shape[0] - 1, z.shape[1] - 1
    x0, x1 = x_range
    if y_range is None:
        y_range = (0.0, (x1 - x0) * m / n)
    x = np.linspace(x0, x1, n + 1)
    y = np.linspace(y_range[0], y_range[1], m + 1)
    return grid_dataset(x, y, z, t)


@dataclass(frozen=True)
class SurfacePartition:
    domains: tuple  # ((sx, ex, sy, ey), ...) node indices
    gamma: tuple  # 1-based domain per cell, in tau order
    n: int
    m: int

    @property
    def l(self):  # noqa: E743
        return len(self.domains)

    @property
    def N(self):
        return self.n * self.m

    def tau(self, i, j):
        return i + (j - 1) * self.n

    def tau_inv(self, s):
        return (s - 1) % self.n + 1, (s - 1) // self.n + 1

    def domain_of(self, i, j):
        return self.domains[self.gamma[self.tau(i, j) - 1] - 1]

    @property
    def mu(self):
        sx, ex, _, _ = self.domains[0]
        return ex - sx


def build_surface_partition(grid, domain_specs, gamma, allow_classical=False):
    """Validate square domains and the cell-to-domain map (``gamma`` listed in tau order)."""
    n, m = grid.n, grid.m
    N = n * m
    domains = tuple(tuple(int(v) for v in d) for d in domain_specs)
    gamma = tuple(int(g) for g in np.ravel(gamma))
    l = len(domains)  # noqa: E741
    low = 1 if allow_classical else 2
    if not low <= l <= N:
        raise DomainCountOutOfRange(f"domain count {l} outside [{low}, {N}]")
    for k, d in enumerate(domains, 1):
        if len(d) != 4:
            raise InvalidDomain(f"domain {k} must be (sx, ex, sy, ey), got {d}")
        sx, ex, sy, ey = d
        if not (0 <= sx <= ex <= n and 0 <= sy <= ey <= m):
            raise InvalidDomain(f"domain {k} = {d} is not an index rectangle in [0, {n}] x [0, {m}]")
    for k, (sx, ex, sy, ey) in enumerate(domains, 1):
        if ex - sx < 2 or ey - sy < 2:
            raise DomainTooNarrow(f"domain {k} spans {ex - sx} x {ey - sy} cells; at least 2 per side required")
    if len(gamma) != N:
        raise GammaOutOfRange(f"gamma has {len(gamma)} entries, expected {N}")
    for s, g in enumerate(gamma, 1):
        if not 1 <= g <= l:
            raise GammaOutOfRange(f"gamma(cell {s}) = {g} outside [1, {l}]")
    unused = sorted(set(range(1, l + 1)) - set(gamma))
    if unused:
        raise UnusedDomain(f"domain {unused[0]} is never selected by gamma")
    if not grid.has_square_cells():
        hx, hy = grid.steps()
        raise NonSquareDomain(f"cells are {hx:.6g} x {hy:.6g}, not square")
    mu = domains[0][1] - domains[0][0]
    for k, (sx, ex, sy, ey) in enumerate(domains, 1):
        if ex - sx != ey - sy or ex - sx != mu:
            raise NonSquareDomain(f"domain {k} is {ex - sx} x {ey - sy} cells; all domains must be {mu} x {mu}")
    return SurfacePartition(domains, gamma, n, m)


@dataclass(frozen=True)
class SurfaceRIFS:
    grid: GridDataSet
    partition: SurfacePartition
    maps: tuple  # (L_x, L_y) per cell in tau order
    quads: tuple
    M: np.ndarray
    C: np.ndarray
    s_bar: float
    g: object = field(repr=False, compare=False)
    patches: tuple = field(repr=False, compare=False, default=())  # l_k per domain

    def l_of(self, s):
        return self.patches[self.partition.gamma[s - 1] - 1]

    @property
    def N(self):
        return self.partition.N

    def F(self, s, xs, ys, v1, v2):
        """Vertical map of cell ``s`` (tau index) at domain points ``(xs, ys)``."""
        lx, ly = self.maps[s - 1]
        u, w = lx(xs), ly(ys)
        a, b, c, d = self.quads[s - 1].matrix(u, w)
        gz, gt = self.l_of(s)(xs, ys)
        rz, rt = self.g(u, w)
        dz, dt = v1 - gz, v2 - gt
        return a * dz + b * dt + rz, c * dz + d * dt + rt


def _axis_map(nodes, s, e, k):
    xs, xe = float(nodes[s]), float(nodes[e])
    lo, hi = float(nodes[k - 1]), float(nodes[k])
    a = (hi - lo) / (xe - xs)
    return AffineMap1D(a, lo - a * xs, (xs, xe), (lo, hi), 1)


def surface_containment(partition):
    """``[s, t]`` True iff cell tau^{-1}(s) lies in the domain used by cell tau^{-1}(t)."""
    N = partition.N
    out = np.zeros((N, N), dtype=bool)
    for t in range(1, N + 1):
        sx, ex, sy, ey = partition.domain_of(*partition.tau_inv(t))
        for j in range(sy + 1, ey + 1):
            for i in range(sx + 1, ex + 1):
                out[partition.tau(i, j) - 1, t - 1] = True
    return out


def surface_row_stochastic(partition):
    """``p_st = 1/b_s`` on the containment support, ``b_s`` counting the maps that pull from cell s."""
    inside = surface_containment(partition)
    counts = inside.sum(axis=1)
    dead = np.flatnonzero(counts == 0)
    if dead.size:
        i, j = partition.tau_inv(int(dead[0]) + 1)
        raise DeadRegion(f"cell ({i}, {j}) lies in no domain used by any map")
    return inside / counts[:, None]


def surface_quads(grid, factors, samples=DEFAULT_SAMPLES):
    """Per-cell quads from ``{name: expr_or_list}``; lists run in tau order."""
    N = grid.N
    columns = []
    for name in FACTOR_NAMES:
        spec = factors.get(name, 0.0)
        if isinstance(spec, (list, tuple)):
            if len(spec) != N:
                raise ValueError(f"factor {name!r} lists {len(spec)} expressions, expected {N}")
            columns.append(list(spec))
        else:
            columns.append([spec] * N)
    n = grid.n
    quads = []
    for s in range(1, N + 1):
        i, j = (s - 1) % n + 1, (s - 1) // n + 1
        quads.append(make_quad([col[s - 1] for col in columns], grid.cell(i, j), samples, SURFACE_VARS))
    return tuple(quads)


def _check_boundaries(srifs):
    """Edges of every domain must be sent onto ``g`` over the matching cell edges."""
    part = srifs.partition
    t = np.linspace(0.0, 1.0, BOUNDARY_SAMPLES)
    worst = 0.0
    for s in range(1, part.N + 1):
        lx, ly = srifs.maps[s - 1]
        (x0, x1), (y0, y1) = lx.source, ly.source
        xs_line = x0 + t * (x1 - x0)
        ys_line = y0 + t * (y1 - y0)
        edges = [(np.full_like(t, x0), ys_line), (np.full_like(t, x1), ys_line),
                 (xs_line, np.full_like(t, y0)), (xs_line, np.full_like(t, y1))]
        for ex, ey in edges:
            gz, gt = srifs.g(ex, ey)
            fz, ft = srifs.F(s, ex, ey, gz, gt)
            tz, tt = srifs.g(lx(ex), ly(ey))
            scale = 1.0 + np.abs(tz) + np.abs(tt)
            err = float(np.max((np.abs(fz - tz) + np.abs(ft - tt)) / scale))
            worst = max(worst, err)
            if err > BOUNDARY_TOL:
                i, j = part.tau_inv(s)
                raise EndpointMismatch(f"cell ({i}, {j}): boundary mismatch {err:.3e}")
    return worst


def contraction_factor(quads):
    best, where = -1.0, 0
    for s, q in enumerate(quads, 1):
        a, b, c, d = q.sups()
        v = max(a + c, b + d)
        if v > best:
            best, where = v, s
    return best, where


def build_surface_rifs(grid, partition, quads):
    """Assemble maps, bilinear boundary functions, ``M`` and ``C``; checks edge matching."""
    N = partition.N
    if len(quads) != N:
        raise ValueError(f"expected {N} factor quads, got {len(quads)}")
    for s, q in enumerate(quads, 1):
        for name, p in zip(FACTOR_NAMES, q.profiles):
            if p.sup_abs >= 1.0 - CONTRACTION_MARGIN:
                raise NotContractive(f"cell {partition.tau_inv(s)}: sup|{name}| = {p.sup_abs:.6g} is not below 1")
    s_bar, where = contraction_factor(quads)
    if s_bar >= 1.0 - CONTRACTION_MARGIN:
        raise NotContractive(f"cell {partition.tau_inv(where)}: column sum {s_bar:.6g} >= 1")
    maps = []
    for s in range(1, N + 1):
        i, j = partition.tau_inv(s)
        sx, ex, sy, ey = partition.domain_of(i, j)
        maps.append((_axis_map(grid.x, sx, ex, i), _axis_map(grid.y, sy, ey, j)))
    M = surface_row_stochastic(partition)
    C = (M.T > 0).astype(int)
    M.setflags(write=False)
    C.setflags(write=False)
    g = grid.bilinear()
    patches = tuple(coons_patch(g, ((grid.x[sx], grid.x[ex]), (grid.y[sy], grid.y[ey])))
                    for sx, ex, sy, ey in partition.domains)
    srifs = SurfaceRIFS(grid, partition, tuple(maps), tuple(quads), M, C, float(s_bar), g, patches)
    _check_boundaries(srifs)
    return srifs


@dataclass
class SampledField:
    x: np.ndarray
    y: np.ndarray
    f1: np.ndarray  # shape (len(x), len(y))
    f2: np.ndarray
    iterations: int
    residual: float
    residuals: list = field(default_factory=list)
    node_ix: np.ndarray = None
    node_iy: np.ndarray = None
    converged: bool = True

    def to_csv(self, path_or_file):
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        rows = zip(X.ravel(), Y.ravel(), self.f1.ravel(), self.f2.ravel())
        _write_csv(path_or_file, ("x", "y", "f1", "f2"), rows)

    def residual_ratios(self, start=3, floor=1e-12):
        r = self.residuals
        return [r[k] / r[k - 1] for k in range(max(start, 1), len(r)) if r[k - 1] > floor]

    def node_errors(self, grid):
        e1 = np.abs(self.f1[np.ix_(self.node_ix, self.node_iy)] - grid.z)
        e2 = np.abs(self.f2[np.ix_(self.node_ix, self.node_iy)] - grid.t)
        return e1, e2


def _axis_grid(nodes, per):
    n = len(nodes) - 1
    t = np.arange(per) / per
    pts = np.concatenate([nodes[i] + t * (nodes[i + 1] - nodes[i]) for i in range(n)] + [nodes[-1:]])
    idx = np.arange(n + 1) * per
    pts[idx] = nodes
    return pts, idx


class _SurfaceOperator:
    def __init__(self, srifs, grid_points):
        grid = srifs.grid
        n, m = grid.n, grid.m
        if grid_points % n:
            raise ValueError(f"grid_points={grid_points} must be a multiple of n={n}")
        per = grid_points // n
        self.X, self.ix = _axis_grid(np.asarray(grid.x), per)
        self.Y, self.iy = _axis_grid(np.asarray(grid.y), per)
        self.blocks = []
        for s in range(1, srifs.N + 1):
            i, j = srifs.partition.tau_inv(s)
            xa, xb = (i - 1) * per, i * per + (1 if i == n else 0)
            ya, yb = (j - 1) * per, j * per + (1 if j == m else 0)
            lx, ly = srifs.maps[s - 1]
            xs, ys = self.X[xa:xb], self.Y[ya:yb]
            xp = np.clip(lx.inverse(xs), *lx.source)
            yp = np.clip(ly.inverse(ys), *ly.source)
            rx = interp_weights(self.X, xp)
            ry = interp_weights(self.Y, yp)
            XX, YY = np.meshgrid(xs, ys, indexing="ij")
            coef = np.array(srifs.quads[s - 1].matrix(XX, YY))
            XP, YP = np.meshgrid(xp, yp, indexing="ij")
            gz, gt = srifs.l_of(s)(XP, YP)
            hz, ht = srifs.g(XX, YY)
            self.blocks.append((slice(xa, xb), slice(ya, yb), rx, ry, coef, gz, gt, hz, ht))
        self.z, self.t = np.asarray(grid.z), np.asarray(grid.t)
        self.g = srifs.g

    @staticmethod
    def read(f, rx, ry):
        (ix, wx), (iy, wy) = rx, ry
        wx, wy = wx[:, None], wy[None, :]
        f00 = f[np.ix_(ix, iy)]
        f10 = f[np.ix_(ix + 1, iy)]
        f01 = f[np.ix_(ix, iy + 1)]
        f11 = f[np.ix_(ix + 1, iy + 1)]
        return (f00 * (1 - wx) * (1 - wy) + f10 * wx * (1 - wy) + f01 * (1 - wx) * wy + f11 * wx * wy)

    def _block(self, f1, f2, out1, out2, blk):
        sx, sy, rx, ry, coef, gz, gt, hz, ht = blk
        a = self.read(f1, rx, ry) - gz
        b = self.read(f2, rx, ry) - gt
        s, sp, st, stp = coef
        out1[sx, sy] = s * a + sp * b + hz
        out2[sx, sy] = st * a + stp * b + ht

    def apply(self, f1, f2, pool=None, pin=True):
        out1 = np.empty_like(f1)
        out2 = np.empty_like(f2)
        if pool is None:
            for blk in self.blocks:
                self._block(f1, f2, out1, out2, blk)
        else:
            list(pool.map(lambda blk: self._block(f1, f2, out1, out2, blk), self.blocks))
        if pin:
            out1[np.ix_(self.ix, self.iy)] = self.z
            out2[np.ix_(self.ix, self.iy)] = self.t
        return out1, out2

    def initial(self):
        XX, YY = np.meshgrid(self.X, self.Y, indexing="ij")
        return self.g(XX, YY)


def rb_iterate_surface(srifs, grid_points=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, raise_on_failure=True):
    """Fixed point of the surface operator on a grid with ``grid_points`` intervals along x.

    The y axis gets the same step, i.e. ``grid_points * m / n`` intervals.
    Off-grid values are read bilinearly and the data nodes are pinned.
    """
    n = srifs.grid.n
    if grid_points is None:
        grid_points = 16 * n
    if grid_points < 4 * n:
        raise ValueError(f"grid_points must be at least 4 per cell ({4 * n})")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    op = _SurfaceOperator(srifs, grid_points)
    f1, f2 = op.initial()
    residuals = []
    workers = worker_count()
    pool = ThreadPoolExecutor(workers) if workers > 1 and f1.size > 100000 else None
    try:
        for it in range(1, max_iter + 1):
            n1, n2 = op.apply(f1, f2, pool)
            res = float(np.max(np.abs(n1 - f1) + np.abs(n2 - f2)))
            residuals.append(res)
            f1, f2 = n1, n2
            if res < tol:
                return SampledField(op.X, op.Y, f1, f2, it, res, residuals, op.ix, op.iy, True)
    finally:
        if pool is not None:
            pool.shutdown()
    out = SampledField(op.X, op.Y, f1, f2, max_iter, residuals[-1], residuals, op.ix, op.iy, False)
    if raise_on_failure:
        raise NoConvergence(f"residual {residuals[-1]:.3e} > tol {tol:.1e} after {max_iter} sweeps", out)
    return out


def surface_node_defect(srifs, sampled):
    """Max node error of one unpinned sweep applied to ``sampled``."""
    op = _SurfaceOperator(srifs, len(sampled.x) - 1)
    o1, o2 = op.apply(sampled.f1, sampled.f2, pin=False)
    nodes = np.ix_(op.ix, op.iy)
    return float(max(np.abs(o1[nodes] - op.z).max(), np.abs(o2[nodes] - op.t).max()))


def surface_factor_extrema(srifs):
    lo, lot, up, upt = [], [], [], []
    for q in srifs.quads:
        p = q.profiles
        lo.append(min(p[0].inf_abs, p[1].inf_abs))
        lot.append(min(p[2].inf_abs, p[3].inf_abs))
        up.append(max(p[0].sup_abs, p[1].sup_abs))
        upt.append(max(p[2].sup_abs, p[3].sup_abs))
    return FactorExtrema(*(np.array(v) for v in (lo, lot, up, upt)))


def _surface_sign_condition(srifs):
    k = int(math.ceil(math.sqrt(SIGN_SAMPLES)))
    worst = None
    for s, q in enumerate(srifs.quads, 1):
        (a, b), (c, d) = srifs.grid.cell(*srifs.partition.tau_inv(s))
        XX, YY = np.meshgrid(np.linspace(a, b, k), np.linspace(c, d, k), indexing="ij")
        v = q.matrix(XX, YY)
        for label, prod in (("s*s'", v[0] * v[1]), ("s~*s~'", v[2] * v[3])):
            low = float(prod.min())
            if low < 0 and (worst is None or low < worst[2]):
                worst = (srifs.partition.tau_inv(s), label, low)
    return worst


def _grid_line_triple(grid):
    """A usable triple along some grid line ``x = x_a`` or ``y = y_b``."""
    y_only = None
    for a in range(grid.n + 1):
        triple, yo = find_triple(grid.y, grid.z[a, :], grid.t[a, :])
        if triple is not None:
            return ("x", a, triple), y_only or ("x", a, yo)
        if yo is not None and y_only is None:
            y_only = ("x", a, yo)
    for b in range(grid.m + 1):
        triple, yo = find_triple(grid.x, grid.z[:, b], grid.t[:, b])
        if triple is not None:
            return ("y", b, triple), y_only or ("y", b, yo)
        if yo is not None and y_only is None:
            y_only = ("y", b, yo)
    return None, y_only


def validate_surface_hypotheses(srifs):
    grid = srifs.grid
    rep = HypothesisReport()
    ok = grid.is_uniform() and grid.has_square_cells()
    rep.add("uniform_square_grid", ok, "uniform axes with square cells" if ok else "axes not uniform or cells not square")
    mu = srifs.partition.mu
    sq = all(ex - sx == mu and ey - sy == mu for sx, ex, sy, ey in srifs.partition.domains)
    rep.add("square_domains", sq, f"all domains {mu} x {mu} cells" if sq else "domains differ in side")
    irr = check_irreducible(srifs.C)
    rep.add("irreducible", irr, "connection graph strongly connected" if irr else "connection graph not strongly connected")
    worst = _surface_sign_condition(srifs)
    rep.add("sign_condition", worst is None,
            "all sampled products nonnegative" if worst is None
            else f"cell {worst[0]}: min {worst[1]} = {worst[2]:.3g}")
    triple, y_only = _grid_line_triple(grid)
    rep.add("noncollinear_line", y_only is not None,
            f"line {y_only[0]}={y_only[1]} nodes {y_only[2]}" if y_only else "every grid line is flat-collinear")
    rep.add("hidden_variable_triple", triple is not None,
            f"line {triple[0]}={triple[1]} nodes {triple[2]}" if triple else "no triple with matching t order")
    return rep


def surface_bounds_from(lam_lower, lam_upper, mu):
    warnings = []
    log_mu = math.log(mu)
    if lam_lower > mu:
        case = CASE_I
        lower = 1 + math.log(lam_lower) / log_mu
        upper = 1 + math.log(lam_upper) / log_mu
    elif lam_upper <= mu:
        case = CASE_II
        lower = upper = 2.0
    else:
        case = INCONCLUSIVE
        lower = 2.0
        upper = 1 + math.log(lam_upper) / log_mu
        warnings.append("lambda_lower <= mu < lambda_upper: no bound theorem covers this regime")
    if upper > 3:
        warnings.append(f"upper bound {upper:.6g} clipped to 3")
        upper = 3.0
    return DimensionBounds(lam_lower, lam_upper, mu, mu, case, lower, upper, mu, warnings)


def surface_dimension_bounds(srifs, tol=1e-12):
    """Bounds on the box dimension of the graph of ``f1`` over the rectangle, log base ``mu``.

    ``case`` reuses the curve tags: ``Case_i`` for ``lambda_lower > mu`` and
    ``Case_ii`` for ``lambda_upper <= mu`` (dimension exactly 2).
    """
    rep = validate_surface_hypotheses(srifs)
    if not rep.checks["irreducible"]["passed"]:
        raise Reducible("connection matrix is reducible")
    if not rep.passed:
        raise HypothesisViolated("failed checks: " + ", ".join(rep.failures()))
    ext = surface_factor_extrema(srifs)
    C = np.asarray(srifs.C, dtype=float)
    lam_lo = spectral_radius_any((ext.lower + ext.lower_tilde)[:, None] * C, tol)
    lam_hi = spectral_radius_any((ext.upper + ext.upper_tilde)[:, None] * C, tol)
    return surface_bounds_from(lam_lo, lam_hi, srifs.partition.mu)


def _cell_ranges(F, X, Y, delta, ncx, ncy, v0):
    """Per delta-column min/max of ``F`` over every sample cell touching that column."""
    lo = np.full(ncx * ncy, np.inf)
    hi = np.full(ncx * ncy, -np.inf)
    quad = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
    cmin, cmax = quad.min(axis=0), quad.max(axis=0)
    x0, y0 = v0
    ax = ((X[:-1] - x0) / delta).astype(np.int64)
    bx = np.ceil((X[1:] - x0) / delta - 1e-9).astype(np.int64) - 1
    ay = ((Y[:-1] - y0) / delta).astype(np.int64)
    by = np.ceil((Y[1:] - y0) / delta - 1e-9).astype(np.int64) - 1
    ax, bx = np.clip(ax, 0, ncx - 1), np.clip(np.maximum(bx, ax), 0, ncx - 1)
    ay, by = np.clip(ay, 0, ncy - 1), np.clip(np.maximum(by, ay), 0, ncy - 1)
    # sample spacing <= delta/4, so each cell touches at most two columns per axis
    for cx in (ax, bx):
        for cy in (ay, by):
            idx = (cx[:, None] * ncy + cy[None, :]).ravel()
            np.minimum.at(lo, idx, cmin.ravel())
            np.maximum.at(hi, idx, cmax.ravel())
    return lo, hi


def box_count_surface(field_samples, delta, threads=None):
    """Number of delta-mesh cubes meeting the sampled graph of ``f1``.

    The graph over each sample cell is covered by the vertical range of its
    four corner values, in every delta-column the cell touches.
    """
    X = np.asarray(field_samples.x, dtype=float)
    Y = np.asarray(field_samples.y, dtype=float)
    F = np.asarray(field_samples.f1, dtype=float)
    if delta <= 0:
        raise ValueError("delta must be positive")
    spacing = max(float(np.max(np.diff(X))), float(np.max(np.diff(Y))))
    if spacing > delta / 4 * (1 + 1e-12):
        raise DeltaTooSmall(f"sample spacing {spacing:.3g} exceeds delta/4 = {delta / 4:.3g}")
    v0 = (X[0], Y[0])
    fmin = float(F.min())
    ncx = max(1, math.ceil((X[-1] - X[0]) / delta - 1e-9))
    ncy = max(1, math.ceil((Y[-1] - Y[0]) / delta - 1e-9))
    nrow = max(1, math.ceil((float(F.max()) - fmin) / delta - 1e-9))
    workers = threads or worker_count()
    if workers > 1 and F.size > 200000:
        cuts = np.linspace(0, len(X) - 1, workers + 1).astype(int)
        slabs = [(cuts[k], cuts[k + 1] + 1) for k in range(workers) if cuts[k + 1] > cuts[k]]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: _cell_ranges(F[ab[0]:ab[1]], X[ab[0]:ab[1]], Y, delta, ncx, ncy, v0), slabs))
        lo = np.min([p[0] for p in parts], axis=0)
        hi = np.max([p[1] for p in parts], axis=0)
    else:
        lo, hi = _cell_ranges(F, X, Y, delta, ncx, ncy, v0)
    used = np.isfinite(lo)
    r_lo = np.minimum(np.floor((lo[used] - fmin) / delta), nrow - 1)
    r_hi = np.minimum(np.floor((hi[used] - fmin) / delta), nrow - 1)
    return int(np.sum(r_hi - r_lo + 1))
