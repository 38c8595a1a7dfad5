"""Recurrent IFS assembly for one-variable hidden variable FIFs.

Each region ``i`` gets an affine map ``L_i`` from its domain onto the region
and a vertical map

    F_i(x, (y, z)) = S_i(L_i x) (y - g(x), z - g'(x)) + (h_i(L_i x), h~_i(L_i x))

where ``S_i`` is the 2x2 matrix of factors, ``g``/``g'`` are the domain
chords of the y/z data and ``h_i``/``h~_i`` the region chords.  This is the
standard chord-based choice of the offset functions ``q``, ``q~``.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DeadRegion, EndpointMismatch, NotContractive
from .factor_expr import DEFAULT_SAMPLES, FactorExpr, constant, parse_expr, profile_expr

ENDPOINT_TOL = 1e-12
CONTRACTION_MARGIN = 1e-9
FACTOR_NAMES = ("s", "s_prime", "s_tilde", "s_tilde_prime")


@dataclass(frozen=True)
class AffineMap1D:
    a: float
    b: float
    source: tuple
    target: tuple
    orientation: int

    def __call__(self, x):
        return self.a * x + self.b

    def inverse(self, x):
        return (x - self.b) / self.a


@dataclass(frozen=True)
class Line:
    """Affine function ``slope * x + intercept``."""

    slope: float
    intercept: float

    @classmethod
    def through(cls, x0, v0, x1, v1):
        slope = (v1 - v0) / (x1 - x0)
        return cls(slope, v0 - slope * x0)

    def __call__(self, x):
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class ContractivityQuad:
    s: FactorExpr
    s_prime: FactorExpr
    s_tilde: FactorExpr
    s_tilde_prime: FactorExpr
    profiles: tuple  # FactorProfile per factor, same order as FACTOR_NAMES

    def exprs(self):
        return (self.s, self.s_prime, self.s_tilde, self.s_tilde_prime)

    def sups(self):
        return tuple(p.sup_abs for p in self.profiles)

    def matrix(self, *coords):
        """Factor values at ``coords`` as arrays ``(s, s', s~, s~')``."""
        return tuple(np.broadcast_to(e(*coords), np.shape(coords[0])).astype(float) for e in self.exprs())


def make_quad(exprs, region, samples=DEFAULT_SAMPLES, variables=("x",)):
    """Build a quad from four expressions (text, numbers or FactorExpr)."""
    parsed = []
    for e in exprs:
        if isinstance(e, FactorExpr):
            parsed.append(e)
        elif isinstance(e, (int, float)):
            parsed.append(constant(e, variables))
        else:
            parsed.append(parse_expr(e, variables))
    profiles = tuple(profile_expr(e, region, samples) for e in parsed)
    return ContractivityQuad(*parsed, profiles=profiles)


@dataclass(frozen=True)
class QPair:
    region: int
    g: Line  # y chord over the domain
    g_prime: Line  # z chord over the domain
    h: Line  # y chord over the region
    h_tilde: Line  # z chord over the region


@dataclass(frozen=True)
class RecurrentIFS:
    dataset: object
    partition: object
    maps: tuple
    quads: tuple
    qpairs: tuple
    M: np.ndarray
    C: np.ndarray
    s_bar: float

    @property
    def n(self):
        return self.dataset.n

    def q(self, i, x):
        """Offsets ``(q_i(x), q~_i(x))`` for ``x`` in the domain of region ``i``."""
        lm, qp, quad = self.maps[i - 1], self.qpairs[i - 1], self.quads[i - 1]
        u = lm(x)
        s, sp, st, stp = quad.matrix(u)
        gy, gz = qp.g(x), qp.g_prime(x)
        return (-s * gy - sp * gz + qp.h(u), -st * gy - stp * gz + qp.h_tilde(u))

    def F(self, i, x, y, z):
        """Vertical part of ``W_i`` at domain abscissa ``x``."""
        u = self.maps[i - 1](x)
        s, sp, st, stp = self.quads[i - 1].matrix(u)
        q, qt = self.q(i, x)
        return s * y + sp * z + q, st * y + stp * z + qt

    def W(self, i, x, y, z):
        fy, fz = self.F(i, x, y, z)
        return self.maps[i - 1](x), fy, fz


def build_maps(dataset, partition, orientations=None):
    """Affine ``L_i`` sending the domain of region ``i`` onto the region.

    Orientation +1 keeps the order of endpoints, -1 reverses it.
    """
    n = dataset.n
    orientations = _orientations(orientations, n)
    x = dataset.x
    maps = []
    for i in range(1, n + 1):
        s, e = partition.domain_of(i)
        xs, xe = float(x[s]), float(x[e])
        lo, hi = float(x[i - 1]), float(x[i])
        if orientations[i - 1] > 0:
            a = (hi - lo) / (xe - xs)
            b = lo - a * xs
        else:
            a = (lo - hi) / (xe - xs)
            b = hi - a * xs
        maps.append(AffineMap1D(a, b, (xs, xe), (lo, hi), orientations[i - 1]))
    return tuple(maps)


def _orientations(orientations, n):
    if orientations is None:
        return (1,) * n
    orientations = tuple(int(o) for o in orientations)
    if len(orientations) != n or any(o not in (1, -1) for o in orientations):
        raise ValueError("orientations must list +1 or -1 for every region")
    return orientations


def build_qpair(dataset, partition, i, lmap=None, quad=None):
    """Chord offsets for region ``i``; with map and quad, checks endpoint matching."""
    x, y, z = dataset.x, dataset.y, dataset.z
    s, e = partition.domain_of(i)
    qp = QPair(
        region=i,
        g=Line.through(x[s], y[s], x[e], y[e]),
        g_prime=Line.through(x[s], z[s], x[e], z[e]),
        h=Line.through(x[i - 1], y[i - 1], x[i], y[i]),
        h_tilde=Line.through(x[i - 1], z[i - 1], x[i], z[i]),
    )
    if lmap is not None and quad is not None:
        _check_endpoints(dataset, i, s, e, lmap, quad, qp)
    return qp


def _check_endpoints(dataset, i, s, e, lmap, quad, qp):
    x, y, z = dataset.x, dataset.y, dataset.z
    for alpha in (s, e):
        xa = float(x[alpha])
        # image node index is decided by orientation, not by float comparison
        a = (i - 1 if alpha == s else i) if lmap.orientation > 0 else (i if alpha == s else i - 1)
        u = lmap(xa)
        fs, fsp, fst, fstp = (float(v) for v in quad.matrix(np.float64(u)))
        gy, gz = qp.g(xa), qp.g_prime(xa)
        fy = fs * (y[alpha] - gy) + fsp * (z[alpha] - gz) + qp.h(u)
        fz = fst * (y[alpha] - gy) + fstp * (z[alpha] - gz) + qp.h_tilde(u)
        scale = 1.0 + abs(y[a]) + abs(z[a])
        if abs(fy - y[a]) > ENDPOINT_TOL * scale or abs(fz - z[a]) > ENDPOINT_TOL * scale:
            raise EndpointMismatch(f"F_{i} does not send node {alpha} onto node {a}")


def containment(partition):
    """Boolean ``n x n`` matrix: ``[s, t]`` is True iff region s+1 lies in the domain of map t+1."""
    n = partition.n
    out = np.zeros((n, n), dtype=bool)
    for t in range(1, n + 1):
        ds, de = partition.domain_of(t)
        out[ds:de, t - 1] = True  # regions ds+1 .. de
    return out


def build_row_stochastic(partition):
    """Transition matrix ``p_st = 1/a_s`` on the support ``I_s in domain(gamma(t))``.

    ``a_s`` counts the maps t whose domain contains region s, which makes
    every row sum to one even when several regions share a domain.
    """
    inside = containment(partition)
    counts = inside.sum(axis=1)
    dead = np.flatnonzero(counts == 0)
    if dead.size:
        raise DeadRegion(f"region {dead[0] + 1} lies in no domain used by any map")
    return inside / counts[:, None]


def build_connection(M):
    """``c_st = 1`` iff ``p_ts > 0``."""
    return (np.asarray(M).T > 0).astype(int)


def check_irreducible(C):
    """True iff the directed graph with adjacency ``C`` is strongly connected."""
    A = np.asarray(C) != 0
    n = A.shape[0]
    if n == 0:
        return False

    def reaches_all(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u] & ~seen):
                seen[v] = True
                queue.append(v)
        return bool(seen.all())

    return reaches_all(A) and reaches_all(A.T)


def contraction_factor(quads):
    """``max_i max(sup|s_i| + sup|s~_i|, sup|s'_i| + sup|s~'_i|)`` and the arg-max region."""
    best, where = -1.0, 0
    for i, quad in enumerate(quads, 1):
        s, sp, st, stp = quad.sups()
        v = max(s + st, sp + stp)
        if v > best:
            best, where = v, i
    return best, where


def assemble_rifs(dataset, partition, quads, orientations=None):
    n = dataset.n
    if len(quads) != n:
        raise ValueError(f"expected {n} factor quads, got {len(quads)}")
    for i, quad in enumerate(quads, 1):
        for name, p in zip(FACTOR_NAMES, quad.profiles):
            if p.sup_abs >= 1.0 - CONTRACTION_MARGIN:
                raise NotContractive(f"region {i}: sup|{name}| = {p.sup_abs:.6g} is not below 1")
    s_bar, where = contraction_factor(quads)
    if s_bar >= 1.0 - CONTRACTION_MARGIN:
        raise NotContractive(f"region {where}: column sum {s_bar:.6g} >= 1")
    maps = build_maps(dataset, partition, orientations)
    qpairs = tuple(build_qpair(dataset, partition, i, maps[i - 1], quads[i - 1]) for i in range(1, n + 1))
    M = build_row_stochastic(partition)
    C = build_connection(M)
    M.setflags(write=False)
    C.setflags(write=False)
    return RecurrentIFS(dataset, partition, maps, tuple(quads), qpairs, M, C, float(s_bar))


def quads_from_exprs(dataset, factors, samples=DEFAULT_SAMPLES):
    """Per-region quads from ``{name: expr_or_list}``; a scalar/string applies to all regions."""
    n = dataset.n
    columns = []
    for name in FACTOR_NAMES:
        spec = factors.get(name, 0.0)
        if isinstance(spec, (list, tuple)):
            if len(spec) != n:
                raise ValueError(f"factor {name!r} lists {len(spec)} expressions, expected {n}")
            columns.append(list(spec))
        else:
            columns.append([spec] * n)
    return tuple(
        make_quad([col[i - 1] for col in columns], dataset.region(i), samples) for i in range(1, n + 1)
    )
