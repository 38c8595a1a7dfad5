"""Box-counting dimension: Perron-Frobenius bounds and numerical mesh counts."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DeltaTooSmall, HypothesisViolated, NoConvergence, Reducible
from .rifs_core import check_irreducible

CASE_I = "Case_i"
CASE_II = "Case_ii"
INCONCLUSIVE = "Inconclusive"
COLLINEAR_EPS = 1e-12
SIGN_SAMPLES = 1024


def worker_count():
    """Workers for parallel loops, capped by ``HVRFIF_THREADS``."""
    cap = os.environ.get("HVRFIF_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


def spectral_radius(A, tol=1e-12, max_iter=100000):
    """Perron root and positive eigenvector of an irreducible nonnegative matrix.

    Power iteration runs on ``A + I``, which is primitive whenever ``A`` is
    irreducible, so periodic matrices converge too.  The Collatz-Wielandt
    bracket ``min_i (Bx)_i / x_i <= rho(B) <= max_i (Bx)_i / x_i`` gives the
    stopping test: iteration ends once its width is below ``tol`` (relative
    to ``rho`` when ``rho > 1``).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if np.any(A < 0):
        raise ValueError("matrix has negative entries")
    if not check_irreducible(A > 0):
        raise Reducible("matrix is reducible")
    n = A.shape[0]
    B = A + np.eye(n)
    x = np.full(n, 1.0 / n)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = B @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / y.sum()
        if hi - lo <= tol * max(1.0, hi):
            break
    else:
        raise NoConvergence(f"power iteration bracket width {hi - lo:.3e} after {max_iter} steps")
    rho = 0.5 * (lo + hi) - 1.0
    return max(rho, 0.0), x


def spectral_radius_any(A, tol=1e-12, max_iter=100000):
    """Spectral radius of any nonnegative matrix via its strongly connected blocks."""
    A = np.asarray(A, dtype=float)
    ncomp, labels = connected_components(A > 0, directed=True, connection="strong")
    best = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = A[np.ix_(idx, idx)]
        if len(idx) == 1:
            best = max(best, float(block[0, 0]))
        else:
            best = max(best, spectral_radius(block, tol, max_iter)[0])
    return best


@dataclass(frozen=True)
class FactorExtrema:
    lower: np.ndarray  # min(inf|s_k|, inf|s'_k|)
    lower_tilde: np.ndarray
    upper: np.ndarray  # max(sup|s_k|, sup|s'_k|)
    upper_tilde: np.ndarray

    def diagonals(self):
        return tuple(np.diag(v) for v in (self.lower, self.lower_tilde, self.upper, self.upper_tilde))


def factor_extrema(system):
    """Per-region extrema of the factor rows, taken from the sampled profiles."""
    lo, lot, up, upt = [], [], [], []
    for q in system.quads:
        p = q.profiles
        lo.append(min(p[0].inf_abs, p[1].inf_abs))
        lot.append(min(p[2].inf_abs, p[3].inf_abs))
        up.append(max(p[0].sup_abs, p[1].sup_abs))
        upt.append(max(p[2].sup_abs, p[3].sup_abs))
    return FactorExtrema(*(np.array(v) for v in (lo, lot, up, upt)))


@dataclass
class HypothesisReport:
    checks: dict = field(default_factory=dict)  # name -> {"passed": bool, "evidence": str}

    def add(self, name, passed, evidence):
        self.checks[name] = {"passed": bool(passed), "evidence": evidence}

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def failures(self):
        return [k for k, c in self.checks.items() if not c["passed"]]


def _collinear(p, q, r):
    cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    scale = max(1.0, *(abs(v) for v in (*p, *q, *r))) ** 2
    return abs(cross) <= COLLINEAR_EPS * scale


def find_triple(xs, ys, zs):
    """First ``a1 < a2 < a3`` with a non-collinear y-triple, z ordered like y pairwise, and a non-collinear z-triple.

    Returns ``(triple, y_only)`` where ``y_only`` is a non-collinear y-triple
    when no full triple exists (or ``None``).
    """
    y_only = None
    for a, b, c in combinations(range(len(xs)), 3):
        P = [(xs[k], ys[k]) for k in (a, b, c)]
        if _collinear(*P):
            continue
        if y_only is None:
            y_only = (a, b, c)
        if all((ys[i] - ys[j]) * (zs[i] - zs[j]) > 0 for i, j in ((a, b), (a, c), (b, c))):
            if not _collinear(*[(xs[k], zs[k]) for k in (a, b, c)]):
                return (a, b, c), y_only
    return None, y_only


def _sign_condition(system, samples=SIGN_SAMPLES):
    worst = None
    for i, q in enumerate(system.quads, 1):
        lo, hi = system.dataset.region(i)
        xs = np.linspace(lo, hi, samples)
        s, sp, st, stp = q.matrix(xs)
        for label, prod in (("s*s'", s * sp), ("s~*s~'", st * stp)):
            m = float(prod.min())
            if m < 0 and (worst is None or m < worst[2]):
                worst = (i, label, m)
    return worst


def validate_hypotheses(system):
    """Checklist of the conditions under which the dimension bounds hold."""
    ds = system.dataset
    rep = HypothesisReport()
    uniform = ds.is_uniform()
    rep.add("uniform_grid", uniform, "nodes equally spaced" if uniform else "nodes are not equally spaced")
    irr = check_irreducible(system.C)
    rep.add("irreducible", irr, "connection graph strongly connected" if irr else "connection graph not strongly connected")
    worst = _sign_condition(system)
    rep.add("sign_condition", worst is None,
            "all sampled products nonnegative" if worst is None
            else f"region {worst[0]}: min {worst[1]} = {worst[2]:.3g}")
    triple, y_only = find_triple(ds.x, ds.y, ds.z)
    rep.add("noncollinear_y", y_only is not None,
            f"nodes {y_only}" if y_only is not None else "all data points are collinear")
    rep.add("hidden_variable_triple", triple is not None,
            f"nodes {triple}" if triple is not None else "no triple with matching z order and non-collinear z")
    return rep


@dataclass
class DimensionBounds:
    rho_lower: float
    rho_upper: float
    eta_max: float
    eta_min: float
    case: str
    dim_lower: float
    dim_upper: float
    base: float
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def _log(value, base):
    return math.log(value) / math.log(base)


def curve_bounds_from(rho_lower, rho_upper, eta_max, eta_min):
    """Case analysis of the curve bounds given the two Perron roots."""
    warnings = []
    if eta_max != eta_min:
        warnings.append("eta_max != eta_min: upper bound uses the unequal-domain form with log base eta_max")
    if rho_lower > 1:
        case = CASE_I
        lower = 1 + _log(rho_lower, eta_max)
        upper = 1 + _log(rho_upper, eta_max) + (1 - _log(eta_min, eta_max))
    elif rho_upper <= 1:
        case = CASE_II
        lower = 1.0
        upper = 2 - _log(eta_min, eta_max)
    else:
        case = INCONCLUSIVE
        lower = 1.0
        upper = 1 + _log(rho_upper, eta_max) + (1 - _log(eta_min, eta_max))
        warnings.append("rho_lower <= 1 < rho_upper: no bound theorem covers this regime")
    if upper > 2:
        warnings.append(f"upper bound {upper:.6g} clipped to 2 (graph of a continuous function)")
        upper = 2.0
    lower = min(lower, upper)
    return DimensionBounds(rho_lower, rho_upper, eta_max, eta_min, case, lower, upper, eta_max, warnings)


def dimension_bounds(system, tol=1e-12):
    """Lower/upper box dimension of the graph of ``f1`` from the weighted connection matrices."""
    rep = validate_hypotheses(system)
    if not rep.checks["irreducible"]["passed"]:
        raise Reducible("connection matrix is reducible")
    if not rep.passed:
        raise HypothesisViolated("failed checks: " + ", ".join(rep.failures()))
    ext = factor_extrema(system)
    C = np.asarray(system.C, dtype=float)
    low = (ext.lower + ext.lower_tilde)[:, None] * C
    high = (ext.upper + ext.upper_tilde)[:, None] * C
    rho_lo = spectral_radius_any(low, tol)
    rho_hi = spectral_radius_any(high, tol)
    part = system.partition
    return curve_bounds_from(rho_lo, rho_hi, part.eta_max, part.eta_min)


def _ladder(delta_min, delta_max, levels):
    if levels < 4:
        raise ValueError("need at least 4 levels")
    if not 0 < delta_min < delta_max:
        raise ValueError("need 0 < delta_min < delta_max")
    k_hi = math.log2(delta_max)
    k_lo = math.log2(delta_min)
    return 2.0 ** np.linspace(k_hi, k_lo, levels)


def _column_ranges(xs, ys, delta, x0, ncol):
    """Min/max of the polyline through (xs, ys) within each delta-column (clipped at column edges)."""
    col = np.minimum(((xs - x0) / delta).astype(np.int64), ncol - 1)
    lo = np.full(ncol, np.inf)
    hi = np.full(ncol, -np.inf)
    np.minimum.at(lo, col, ys)
    np.maximum.at(hi, col, ys)
    cross = np.flatnonzero(col[1:] != col[:-1])
    if cross.size:
        # value of the segment where it meets each column edge it crosses
        for k in cross:
            for c in range(col[k] + 1, col[k + 1] + 1):
                xb = x0 + c * delta
                t = (xb - xs[k]) / (xs[k + 1] - xs[k])
                yb = ys[k] + t * (ys[k + 1] - ys[k])
                for cc in (c - 1, c):
                    lo[cc] = min(lo[cc], yb)
                    hi[cc] = max(hi[cc], yb)
    return lo, hi


def box_count(samples, delta, threads=None):
    """Number of delta-mesh squares meeting the sampled graph of ``f1``.

    ``samples`` is a :class:`SampledPair` or an ``(N, 2)`` array of points
    sorted by ``x``.  The graph is treated as the polyline through the
    samples, so every square crossed by a connecting segment is counted.
    The frame is anchored at ``(x0, min f1)`` and closed on its far sides.
    """
    xs, ys = _as_curve(samples)
    if delta <= 0:
        raise ValueError("delta must be positive")
    spacing = float(np.max(np.diff(xs)))
    if spacing > delta / 4 * (1 + 1e-12):
        raise DeltaTooSmall(f"sample spacing {spacing:.3g} exceeds delta/4 = {delta / 4:.3g}")
    x0, y0 = xs[0], ys.min()
    width = xs[-1] - x0
    height = ys.max() - y0
    ncol = max(1, math.ceil(width / delta - 1e-9))
    nrow = max(1, math.ceil(height / delta - 1e-9))
    workers = threads or worker_count()
    if workers > 1 and len(xs) > 200000:
        bounds = np.linspace(0, len(xs) - 1, workers + 1).astype(int)
        chunks = [(bounds[k], bounds[k + 1] + 1) for k in range(workers)]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: _column_ranges(xs[ab[0]:ab[1]], ys[ab[0]:ab[1]], delta, x0, ncol), chunks))
        lo = np.min([p[0] for p in parts], axis=0)
        hi = np.max([p[1] for p in parts], axis=0)
    else:
        lo, hi = _column_ranges(xs, ys, delta, x0, ncol)
    used = np.isfinite(lo)
    r_lo = np.minimum(np.floor((lo[used] - y0) / delta), nrow - 1)
    r_hi = np.minimum(np.floor((hi[used] - y0) / delta), nrow - 1)
    return int(np.sum(r_hi - r_lo + 1))


def _as_curve(samples):
    if hasattr(samples, "f1"):
        return np.asarray(samples.grid, dtype=float), np.asarray(samples.f1, dtype=float)
    pts = np.asarray(samples, dtype=float)
    return pts[:, 0], pts[:, 1]


def fit_slope(deltas, counts):
    """Least-squares slope of ``log N`` against ``-log delta`` and its r^2."""
    u = -np.log(np.asarray(deltas, dtype=float))
    v = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(u, v, 1)
    pred = slope * u + intercept
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def ladder_counts(samples, delta_min, delta_max, levels, counter=None):
    """Box counts over ``levels`` log-spaced mesh sizes from ``delta_max`` down to ``delta_min``."""
    counter = counter or box_count
    deltas = _ladder(delta_min, delta_max, levels)
    return deltas.tolist(), [counter(samples, float(d)) for d in deltas]


def estimate_dimension(samples, delta_min, delta_max, levels, counter=None):
    """``(slope, r2)`` of ``log N`` versus ``-log delta``; dyadic when ``levels`` matches the octave count."""
    deltas, counts = ladder_counts(samples, delta_min, delta_max, levels, counter)
    return fit_slope(deltas, counts)
