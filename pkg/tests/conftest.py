import numpy as np
import pytest

from hvrfif.model import build_partition, uniform_dataset
from hvrfif.rifs_core import assemble_rifs, quads_from_exprs
from hvrfif.surface import build_surface_partition, build_surface_rifs, surface_quads, uniform_grid

CLASSIC_Y = [0.0, 1.0, 0.3, 0.8, 0.2, 0.6]


def classic_system(s=0.4, st=0.1, y=CLASSIC_Y):
    ds = uniform_dataset(y, [v / 2 for v in y])
    part = build_partition(ds, [(0, 5)], [1] * 5, allow_classical=True)
    factors = {"s": s, "s_prime": s, "s_tilde": st, "s_tilde_prime": st}
    return assemble_rifs(ds, part, quads_from_exprs(ds, factors))


def surface_system(s=0.15, st=0.05, seed=5, n=3):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, (n + 1, n + 1))
    t = z / 2 + 0.1
    grid = uniform_grid(z, t)
    part = build_surface_partition(grid, [(0, n, 0, n)], [1] * (n * n), allow_classical=True)
    factors = {"s": s, "s_prime": s, "s_tilde": st, "s_tilde_prime": st}
    return build_surface_rifs(grid, part, surface_quads(grid, factors))


def random_curve_system(rng, n=None):
    """Random admissible recurrent curve system on a uniform grid over [0, 1]."""
    n = n or int(rng.integers(4, 9))
    y = rng.uniform(-1, 1, n + 1)
    z = rng.uniform(-1, 1, n + 1)
    ds = uniform_dataset(y, z)
    cut = int(rng.integers(2, n - 1))
    domains = [(0, cut), (cut, n)]
    gamma = [int(v) for v in rng.integers(1, 3, n)]
    gamma[0], gamma[-1] = 1, 2
    part = build_partition(ds, domains, gamma)
    a, b = rng.uniform(0.05, 0.4, 2)
    c, d = rng.uniform(0.0, 0.3, 2)
    factors = {
        "s": f"{a:.6f}*cos(3*x)",
        "s_prime": f"{b:.6f}",
        "s_tilde": f"{c:.6f}*sin(2*x)",
        "s_tilde_prime": f"{d:.6f}",
    }
    orientations = [int(v) for v in rng.choice([-1, 1], n)]
    return assemble_rifs(ds, part, quads_from_exprs(ds, factors, samples=1024), orientations)


def random_surface_system(rng):
    n = 4
    z = rng.uniform(-1, 1, (n + 1, n + 1))
    t = rng.uniform(-1, 1, (n + 1, n + 1))
    grid = uniform_grid(z, t)
    domains = [(0, 2, 0, 2), (2, 4, 0, 2), (0, 2, 2, 4), (2, 4, 2, 4)]
    gamma = [int(v) for v in rng.integers(1, 5, n * n)]
    gamma[:4] = [int(v) for v in rng.permutation(4) + 1]
    part = build_surface_partition(grid, domains, gamma)
    a, b, c, d = rng.uniform(0.0, 0.3, 4)
    factors = {"s": f"{a:.6f}*cos(x*y)", "s_prime": b, "s_tilde": c, "s_tilde_prime": f"{d:.6f}*x"}
    return build_surface_rifs(grid, part, surface_quads(grid, factors, samples=1024))


@pytest.fixture
def classic():
    return classic_system()
