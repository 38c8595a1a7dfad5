"""Extended data sets and the region/domain partition scheme.

Indexing follows the usual FIF convention: nodes are ``0..n``, region ``i``
(1-based) is ``[x[i-1], x[i]]``, domain ``k`` (1-based) is
``[x[s(k)], x[e(k)]]`` given by node indices, and ``gamma[i-1]`` is the
domain that region ``i`` pulls from.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainCountOutOfRange,
    DomainTooNarrow,
    GammaOutOfRange,
    InvalidDomain,
    NonFiniteValue,
    NonIncreasingAbscissa,
    TooFewPoints,
    UnusedDomain,
)


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ExtendedDataSet:
    """Interpolation nodes ``(x_i, y_i)`` extended by hidden values ``z_i``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def n(self):
        return len(self.x) - 1

    @property
    def interval(self):
        return float(self.x[0]), float(self.x[-1])

    def region(self, i):
        return float(self.x[i - 1]), float(self.x[i])

    def is_uniform(self, rtol=1e-9):
        steps = np.diff(self.x)
        return bool(np.all(np.abs(steps - steps.mean()) <= rtol * abs(steps.mean())))

    @property
    def max_abs_y(self):
        return float(np.max(np.abs(self.y)))

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z)))

    def rescaled_unit(self):
        """Same data with abscissas mapped affinely onto [0, 1]."""
        x0, xn = self.interval
        return ExtendedDataSet(_frozen((self.x - x0) / (xn - x0)), self.y, self.z)


def validate_dataset(raw_points):
    """Check and freeze a list of ``(x, y, z)`` triples."""
    pts = [tuple(p) for p in raw_points]
    if len(pts) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(pts)}")
    for k, p in enumerate(pts):
        if len(p) != 3:
            raise ValueError(f"point {k} must be (x, y, z), got {p!r}")
    arr = np.array(pts, dtype=float)
    bad = ~np.isfinite(arr)
    if bad.any():
        k = int(np.argwhere(bad)[0][0])
        raise NonFiniteValue(f"point {k} has a non-finite coordinate")
    steps = np.diff(arr[:, 0])
    if np.any(steps <= 0):
        k = int(np.argmax(steps <= 0)) + 1
        raise NonIncreasingAbscissa(f"x[{k}] = {arr[k, 0]!r} does not exceed x[{k - 1}]")
    return ExtendedDataSet(_frozen(arr[:, 0]), _frozen(arr[:, 1]), _frozen(arr[:, 2]))


@dataclass(frozen=True)
class PartitionScheme:
    domains: tuple  # ((s, e), ...) node indices
    gamma: tuple  # 1-based domain per region
    eta: tuple  # regions per domain

    @property
    def l(self):  # noqa: E743
        return len(self.domains)

    @property
    def n(self):
        return len(self.gamma)

    def domain_of(self, i):
        """Node index pair of the domain used by region ``i`` (1-based)."""
        return self.domains[self.gamma[i - 1] - 1]

    @property
    def eta_max(self):
        return max(self.eta)

    @property
    def eta_min(self):
        return min(self.eta)


def build_partition(dataset, domain_specs, gamma, allow_classical=False):
    """Validate domains and the region-to-domain map.

    Checks run in a fixed order and the first failure is raised, so each
    malformed input maps to exactly one error code.
    """
    n = dataset.n
    domains = tuple((int(s), int(e)) for s, e in domain_specs)
    gamma = tuple(int(g) for g in gamma)
    l = len(domains)  # noqa: E741
    low = 1 if allow_classical else 2
    if not low <= l <= n:
        raise DomainCountOutOfRange(f"domain count {l} outside [{low}, {n}]")
    for k, (s, e) in enumerate(domains, 1):
        if not (0 <= s <= n and 0 <= e <= n) or e < s:
            raise InvalidDomain(f"domain {k} = ({s}, {e}) is not a node-index interval in [0, {n}]")
    for k, (s, e) in enumerate(domains, 1):
        if e - s < 2:
            raise DomainTooNarrow(f"domain {k} spans {e - s} region(s); at least 2 required")
    if len(gamma) != n:
        raise GammaOutOfRange(f"gamma has {len(gamma)} entries, expected {n}")
    for i, g in enumerate(gamma, 1):
        if not 1 <= g <= l:
            raise GammaOutOfRange(f"gamma({i}) = {g} outside [1, {l}]")
    unused = sorted(set(range(1, l + 1)) - set(gamma))
    if unused:
        raise UnusedDomain(f"domain {unused[0]} is never selected by gamma")
    eta = tuple(e - s for s, e in domains)
    return PartitionScheme(domains, gamma, eta)


def uniform_dataset(y, z, x0=0.0, x1=1.0):
    """Convenience: data on the uniform grid ``x_i = x0 + i (x1 - x0) / n``."""
    n = len(y) - 1
    xs = [x0 + i * (x1 - x0) / n for i in range(n + 1)]
    xs[-1] = x1
    return validate_dataset(list(zip(xs, y, z)))
