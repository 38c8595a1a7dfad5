"""Fixed point of the Read-Bajraktarevic operator on a sampling grid.

The grid is uniform inside each region (``G / n`` steps per region), which is
a globally uniform grid whenever the data nodes are uniform.  Values at
preimages ``L_i^{-1}(x)`` are read by linear interpolation; for uniform
nodes and domains made of whole regions those preimages are grid points, so
the discrete fixed point is exact at the samples.

Residuals use the norm ``sup_x (|h1(x)| + |h2(x)|)``, in which the operator
contracts with factor ``S-bar`` (linear interpolation is a convex
combination and cannot expand it).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
GRID_PER_REGION = 64
SNAP = 1e-9


@dataclass
class SampledPair:
    grid: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    iterations: int
    residual: float
    residuals: list = field(default_factory=list)
    node_index: np.ndarray = None
    converged: bool = True

    def to_csv(self, path_or_file):
        rows = zip(self.grid, self.f1, self.f2)
        _write_csv(path_or_file, ("x", "f1", "f2"), rows)

    def residual_ratios(self, start=3, floor=1e-12):
        """Ratios ``r_k / r_{k-1}`` from sweep ``start`` on, skipping residuals at round-off level."""
        r = self.residuals
        return [r[k] / r[k - 1] for k in range(max(start, 1), len(r)) if r[k - 1] > floor]


def _write_csv(path_or_file, header, rows):
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{float(v):.17g}" for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def region_grid(x_nodes, grid_points):
    """Region-wise uniform grid with ``grid_points`` intervals; returns (grid, node indices)."""
    n = len(x_nodes) - 1
    if grid_points % n:
        raise ValueError(f"grid_points={grid_points} must be a multiple of the region count {n}")
    per = grid_points // n
    t = np.arange(per) / per
    pieces = [x_nodes[i] + t * (x_nodes[i + 1] - x_nodes[i]) for i in range(n)]
    grid = np.concatenate(pieces + [np.array([x_nodes[-1]], dtype=float)])
    nodes = np.arange(n + 1) * per
    grid[nodes] = x_nodes
    return grid, nodes


def interp_weights(grid, xq):
    """Bracketing indices and weights for linear reads; near-grid queries snap to the grid point."""
    idx = np.searchsorted(grid, xq, side="right") - 1
    idx = np.clip(idx, 0, len(grid) - 2)
    w = (xq - grid[idx]) / (grid[idx + 1] - grid[idx])
    w = np.clip(w, 0.0, 1.0)
    w[w < SNAP] = 0.0
    w[w > 1.0 - SNAP] = 1.0
    return idx, w


class _Operator:
    """Precomputed pieces of the Read-Bajraktarevic operator on a fixed grid."""

    def __init__(self, rifs, grid_points):
        ds = rifs.dataset
        self.grid, self.nodes = region_grid(ds.x, grid_points)
        n = ds.n
        per = grid_points // n
        region = np.minimum(np.arange(len(self.grid)) // per, n - 1)
        g = self.grid
        xprime = np.empty_like(g)
        coef = np.empty((4, len(g)))
        gy = np.empty_like(g)
        gz = np.empty_like(g)
        hy = np.empty_like(g)
        hz = np.empty_like(g)
        for i in range(1, n + 1):
            sel = region == i - 1
            xs = g[sel]
            lm, qp = rifs.maps[i - 1], rifs.qpairs[i - 1]
            xp = lm.inverse(xs)
            lo, hi = lm.source
            xp = np.clip(xp, lo, hi)
            xprime[sel] = xp
            coef[:, sel] = np.array(rifs.quads[i - 1].matrix(xs))
            gy[sel] = qp.g(xp)
            gz[sel] = qp.g_prime(xp)
            hy[sel] = qp.h(xs)
            hz[sel] = qp.h_tilde(xs)
        self.xprime = xprime
        self.idx, self.w = interp_weights(g, xprime)
        self.coef, self.gy, self.gz, self.hy, self.hz = coef, gy, gz, hy, hz
        self.y_nodes, self.z_nodes = np.asarray(ds.y), np.asarray(ds.z)

    def read(self, f):
        return f[self.idx] * (1.0 - self.w) + f[self.idx + 1] * self.w

    def apply(self, f1, f2, pin=True):
        a = self.read(f1) - self.gy
        b = self.read(f2) - self.gz
        s, sp, st, stp = self.coef
        out1 = s * a + sp * b + self.hy
        out2 = st * a + stp * b + self.hz
        if pin:
            out1[self.nodes] = self.y_nodes
            out2[self.nodes] = self.z_nodes
        return out1, out2

    def initial(self):
        return (np.interp(self.grid, self.grid[self.nodes], self.y_nodes),
                np.interp(self.grid, self.grid[self.nodes], self.z_nodes))


def rb_iterate(rifs, grid_points=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, raise_on_failure=True):
    """Iterate the operator from the piecewise-linear interpolant until the update is below ``tol``.

    Raises :class:`NoConvergence` (with the partial result attached) when
    ``max_iter`` sweeps do not reach ``tol``, unless ``raise_on_failure`` is
    false, in which case the partial result is returned with
    ``converged=False``.
    """
    n = rifs.n
    if grid_points is None:
        grid_points = GRID_PER_REGION * n
    if grid_points < 16 * n:
        raise ValueError(f"grid_points must be at least 16 per region ({16 * n})")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    op = _Operator(rifs, grid_points)
    f1, f2 = op.initial()
    residuals = []
    for it in range(1, max_iter + 1):
        n1, n2 = op.apply(f1, f2)
        res = float(np.max(np.abs(n1 - f1) + np.abs(n2 - f2)))
        residuals.append(res)
        f1, f2 = n1, n2
        if res < tol:
            return SampledPair(op.grid, f1, f2, it, res, residuals, op.nodes, True)
    out = SampledPair(op.grid, f1, f2, max_iter, residuals[-1], residuals, op.nodes, False)
    if raise_on_failure:
        raise NoConvergence(f"residual {residuals[-1]:.3e} > tol {tol:.1e} after {max_iter} sweeps", out)
    return out


def node_defect(rifs, sampled):
    """Max node error of one unpinned sweep applied to ``sampled``.

    Pinning makes the stored node values exact by construction; this measures
    whether the operator itself reproduces the data at the nodes.
    """
    op = _Operator(rifs, len(sampled.grid) - 1)
    o1, o2 = op.apply(sampled.f1, sampled.f2, pin=False)
    return float(max(np.abs(o1[op.nodes] - op.y_nodes).max(), np.abs(o2[op.nodes] - op.z_nodes).max()))


def grid_is_closed(rifs, grid_points):
    """True when every preimage of a grid point is itself a grid point."""
    op = _Operator(rifs, grid_points)
    return bool(np.all((op.w == 0.0) | (op.w == 1.0)))


@dataclass
class InterpolationReport:
    errors_f1: list
    errors_f2: list
    tol: float
    converged: bool
    passed: bool

    @property
    def max_error(self):
        return max(max(self.errors_f1), max(self.errors_f2))


def check_interpolation(sampled, dataset, tol):
    """Per-node errors of ``f1`` against ``y`` and ``f2`` against ``z``.

    Nodes are pinned every sweep, so a truncated run also fails through its
    ``converged`` flag even though its node errors are zero.
    """
    nodes = sampled.node_index
    if nodes is None:
        nodes = np.searchsorted(sampled.grid, dataset.x)
    if not np.allclose(sampled.grid[nodes], dataset.x, rtol=0, atol=1e-12 * (1 + np.abs(dataset.x).max())):
        raise ValueError("sampling grid does not contain every interpolation node")
    e1 = np.abs(sampled.f1[nodes] - dataset.y)
    e2 = np.abs(sampled.f2[nodes] - dataset.z)
    ok = bool(max(e1.max(), e2.max()) <= tol) and sampled.converged
    return InterpolationReport(e1.tolist(), e2.tolist(), tol, sampled.converged, ok)


def chaos_game(rifs, points, burn_in=100, seed=0):
    """Random orbit of the RIFS as an ``(points, 3)`` array of ``(x, y, z)``.

    From the current region ``s`` the next map ``t`` is drawn with
    probability ``p_st``; the orbit starts at the first data node.
    """
    if points <= 0:
        return np.empty((0, 3))
    rng = np.random.default_rng(seed)
    M = np.asarray(rifs.M)
    cum = np.cumsum(M, axis=1)
    cum[:, -1] = 1.0
    ds = rifs.dataset
    x, y, z = float(ds.x[0]), float(ds.y[0]), float(ds.z[0])
    region = 0
    total = burn_in + points
    draws = rng.random(total)
    out = np.empty((points, 3))
    for k in range(total):
        t = int(np.searchsorted(cum[region], draws[k], side="right"))
        t = min(t, rifs.n - 1)
        x, y, z = rifs.W(t + 1, x, y, z)
        x, y, z = float(x), float(y), float(z)
        region = t
        if k >= burn_in:
            out[k - burn_in] = (x, y, z)
    return out


def read_at(rifs, sampled, xs, depth=0):
    """Values ``(f1, f2)`` at arbitrary abscissas.

    With ``depth > 0`` the functional equation is unrolled ``depth`` times
    before falling back to linear interpolation of the samples, which shrinks
    the off-grid read error by roughly ``S-bar ** depth``.
    """
    xs = np.asarray(xs, dtype=float)
    chain, regions = [xs], []
    for _ in range(max(depth, 0)):
        cur = chain[-1]
        reg = np.clip(np.searchsorted(rifs.dataset.x, cur, side="right") - 1, 0, rifs.n - 1)
        nxt = np.empty_like(cur)
        for i in np.unique(reg):
            sel = reg == i
            lm = rifs.maps[i]
            nxt[sel] = np.clip(lm.inverse(cur[sel]), *lm.source)
        regions.append(reg)
        chain.append(nxt)
    v1 = np.interp(chain[-1], sampled.grid, sampled.f1)
    v2 = np.interp(chain[-1], sampled.grid, sampled.f2)
    for d in range(len(regions) - 1, -1, -1):
        cur, pre, reg = chain[d], chain[d + 1], regions[d]
        n1 = np.empty_like(cur)
        n2 = np.empty_like(cur)
        for i in np.unique(reg):
            sel = reg == i
            qp = rifs.qpairs[i]
            a = v1[sel] - qp.g(pre[sel])
            b = v2[sel] - qp.g_prime(pre[sel])
            s, sp, st, stp = rifs.quads[i].matrix(cur[sel])
            n1[sel] = s * a + sp * b + qp.h(cur[sel])
            n2[sel] = st * a + stp * b + qp.h_tilde(cur[sel])
        v1, v2 = n1, n2
    return v1, v2


def orbit_distance(orbit, sampled, rifs=None, depth=0):
    """For each orbit point, ``|y - f1(x)| + |z - f2(x)|``.

    ``f`` is read from the samples by linear interpolation, or through
    :func:`read_at` when ``rifs`` and ``depth`` are given.
    """
    if len(orbit) == 0:
        return np.empty(0)
    if rifs is None:
        depth = 0
    f1, f2 = read_at(rifs, sampled, orbit[:, 0], depth)
    return np.abs(orbit[:, 1] - f1) + np.abs(orbit[:, 2] - f2)
