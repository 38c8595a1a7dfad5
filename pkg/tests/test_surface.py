import io
import math

import numpy as np
import pytest
from conftest import random_surface_system, surface_system

from hvrfif.dimension import CASE_I, CASE_II, estimate_dimension
from hvrfif.errors import DeadRegion, DeltaTooSmall, NonSquareDomain, NotContractive, Reducible
from hvrfif.surface import (
    box_count_surface,
    build_surface_partition,
    build_surface_rifs,
    grid_dataset,
    rb_iterate_surface,
    surface_dimension_bounds,
    surface_quads,
    surface_row_stochastic,
    uniform_grid,
)


def flat_field(f, k=101):
    class Field:
        pass

    out = Field()
    out.x = out.y = np.linspace(0, 1, k)
    X, Y = np.meshgrid(out.x, out.y, indexing="ij")
    out.f1 = f(X, Y)
    return out


def test_tau_round_trip():
    r = surface_system()
    p = r.partition
    for s in range(1, p.N + 1):
        assert p.tau(*p.tau_inv(s)) == s
    assert p.tau(1, 1) == 1 and p.tau(3, 1) == 3 and p.tau(1, 2) == 4


def test_single_domain_matrices():
    r = surface_system()
    assert np.allclose(r.M, 1 / 9)
    assert np.array_equal(r.C, np.ones((9, 9), dtype=int))


def test_recurrent_matrix_support():
    r = random_surface_system(np.random.default_rng(2))
    assert np.allclose(r.M.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(r.C == 1, r.M.T > 0)


def test_zero_factors_give_bilinear():
    r = surface_system(0.0, 0.0)
    f = rb_iterate_surface(r, 60)
    X, Y = np.meshgrid(f.x, f.y, indexing="ij")
    gz, gt = r.g(X, Y)
    assert np.max(np.abs(f.f1 - gz)) <= 1e-12 and np.max(np.abs(f.f2 - gt)) <= 1e-12


def test_nodes_and_contraction():
    r = surface_system(0.3, 0.1)
    f = rb_iterate_surface(r, 60)
    e1, e2 = f.node_errors(r.grid)
    assert max(e1.max(), e2.max()) <= 1e-9
    assert max(f.residual_ratios()) <= r.s_bar + 0.05
    # the surface is not the bilinear interpolant once factors are non-zero
    X, Y = np.meshgrid(f.x, f.y, indexing="ij")
    assert np.max(np.abs(f.f1 - r.g(X, Y)[0])) > 1e-3


def test_grid_lines_pass_through_nodes():
    r = surface_system(0.3, 0.1)
    f = rb_iterate_surface(r, 60)
    row = f.f1[:, f.node_iy[1]]
    X = f.x
    ref = np.interp(X, r.grid.x, r.grid.z[:, 1])
    assert np.max(np.abs(row - ref)) <= 1e-9


def test_boundary_condition_on_edges():
    r = surface_system(0.3, 0.1)
    lx, ly = r.maps[4]
    xs = np.linspace(*lx.source, 17)
    yb = np.full_like(xs, ly.source[0])
    gz, gt = r.g(xs, yb)
    fz, ft = r.F(5, xs, yb, gz, gt)
    tz, tt = r.g(lx(xs), ly(yb))
    assert np.max(np.abs(fz - tz)) <= 1e-10 and np.max(np.abs(ft - tt)) <= 1e-10


def test_construction_errors():
    z = np.zeros((4, 4))
    grid = uniform_grid(z, z)
    part = build_surface_partition(grid, [(0, 3, 0, 3)], [1] * 9, allow_classical=True)
    with pytest.raises(NotContractive):
        build_surface_rifs(grid, part, surface_quads(grid, {"s": 0.8, "s_tilde": 0.3}))
    with pytest.raises(NonSquareDomain):
        build_surface_partition(grid, [(0, 3, 0, 2)], [1] * 9, allow_classical=True)
    wide = grid_dataset(np.linspace(0, 2, 4), np.linspace(0, 1, 4), z, z)
    with pytest.raises(NonSquareDomain):
        build_surface_partition(wide, [(0, 3, 0, 3)], [1] * 9, allow_classical=True)
    p = build_surface_partition(uniform_grid(np.zeros((5, 5)), np.zeros((5, 5))),
                                [(0, 2, 0, 2), (2, 4, 2, 4)], [1] * 15 + [2])
    with pytest.raises(DeadRegion):
        surface_row_stochastic(p)


def test_dimension_case_a():
    b = surface_dimension_bounds(surface_system(0.3, 0.1))
    assert b.case == CASE_I
    assert b.rho_lower == pytest.approx(3.6) and b.rho_upper == pytest.approx(3.6)
    assert b.dim_lower == pytest.approx(1 + math.log(3.6) / math.log(3))


def test_dimension_case_b():
    b = surface_dimension_bounds(surface_system(0.15, 0.05))
    assert b.case == CASE_II and b.rho_upper == pytest.approx(1.8)
    assert b.dim_lower == b.dim_upper == 2.0


def test_surface_reducible():
    z = np.random.default_rng(0).uniform(-1, 1, (5, 5))
    grid = uniform_grid(z, z / 2 + 0.1)
    domains = [(0, 2, 0, 2), (2, 4, 0, 2), (0, 2, 2, 4), (2, 4, 2, 4)]
    # each quadrant maps from itself, so quadrants never communicate
    gamma = []
    for j in range(1, 5):
        for i in range(1, 5):
            gamma.append(1 + (i > 2) + 2 * (j > 2))
    part = build_surface_partition(grid, domains, gamma)
    r = build_surface_rifs(grid, part, surface_quads(grid, {"s": 0.2}))
    with pytest.raises(Reducible):
        surface_dimension_bounds(r)


def test_box_count_surface():
    assert box_count_surface(flat_field(lambda X, Y: 0 * X), 0.25) == 16
    with pytest.raises(DeltaTooSmall):
        box_count_surface(flat_field(lambda X, Y: 0 * X), 0.02)
    smooth = flat_field(lambda X, Y: 0.3 + 0.5 * X - 0.2 * Y + 0.4 * X * Y, 257)
    slope, _ = estimate_dimension(smooth, 2**-6, 2**-2, 5, counter=box_count_surface)
    assert 1.9 <= slope <= 2.1


def test_threaded_surface_count_matches_serial():
    fld = flat_field(lambda X, Y: np.sin(7 * X) * np.cos(5 * Y), 513)
    assert box_count_surface(fld, 2**-5, threads=4) == box_count_surface(fld, 2**-5, threads=1)


def test_csv_layout():
    f = rb_iterate_surface(surface_system(0.2, 0.1), 12)
    buf = io.StringIO()
    f.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,y,f1,f2" and len(lines) == 1 + 13 * 13
