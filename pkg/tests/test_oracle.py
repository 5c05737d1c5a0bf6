"""Ground-truth layer: analytic box field, SOR solver, sampling, metrics."""

import numpy as np
import pytest

from harmonia import geometry as geo
from harmonia import oracle


def unit_box_features(left=1.0, bottom=0.0, right=0.0, top=0.0):
    return [
        geo.Segment((0.0, 0.0), (0.0, 1.0), value=left),
        geo.Segment((0.0, 0.0), (1.0, 0.0), value=bottom),
        geo.Segment((1.0, 0.0), (1.0, 1.0), value=right),
        geo.Segment((0.0, 1.0), (1.0, 1.0), value=top),
    ]


UNIT_BOX = geo.Rect((0.0, 0.0), (1.0, 1.0))


# -- analytic field -----------------------------------------------------------

def test_analytic_box_hand_values():
    center = (2.0 / np.pi) * np.arctan(1.0 / np.sinh(np.pi / 2))
    assert oracle.analytic_box(0.5, 0.5) == pytest.approx(center, abs=1e-15)
    # hot edge: 1 inside, 0 and 1 at the corner limits of arctan2
    y = np.linspace(0.1, 0.9, 9)
    assert np.allclose(oracle.analytic_box(np.zeros(9), y), 1.0, atol=1e-15)
    x = np.linspace(0.1, 1.0, 7)
    assert np.all(oracle.analytic_box(x, np.zeros(7)) == 0.0)
    assert np.max(np.abs(oracle.analytic_box(x, np.ones(7)))) < 1e-15


def test_analytic_box_is_harmonic():
    h = 1e-3
    for px, py in [(0.3, 0.3), (0.5, 0.5), (0.7, 0.2)]:
        lap = (oracle.analytic_box(px + h, py) + oracle.analytic_box(px - h, py)
               + oracle.analytic_box(px, py + h) + oracle.analytic_box(px, py - h)
               - 4 * oracle.analytic_box(px, py)) / h ** 2
        assert abs(lap) < 1e-4


def test_series_matches_closed_form_away_from_edge():
    # measured max gap 1.66e-6 for 16 terms once x >= 0.1
    X, Y = np.meshgrid(np.linspace(0.1, 1.0, 19), np.linspace(0.0, 1.0, 21),
                       indexing="ij")
    gap = np.abs(oracle.analytic_box_series(X, Y) - oracle.analytic_box(X, Y))
    assert gap.max() < 5e-6


def test_series_term_count_matters():
    x, y = 0.1, 0.37
    coarse = abs(oracle.analytic_box_series(x, y, terms=3)
                 - oracle.analytic_box(x, y))
    fine = abs(oracle.analytic_box_series(x, y, terms=16)
               - oracle.analytic_box(x, y))
    assert fine < coarse


# -- solver basics ------------------------------------------------------------

def test_constant_boundary_is_exact():
    g = oracle.fd_laplace_solve(UNIT_BOX, unit_box_features(2.5, 2.5, 2.5, 2.5),
                                h=0.125)
    assert np.all(g.values[g.mask] == 2.5)
    assert g.solve_info.iterations == 1


def test_linear_field_is_stencil_exact():
    def trace(P):
        return P[:, 0]

    feats = [geo.Segment(s.p0, s.p1, value=trace)
             for s in unit_box_features()]
    g = oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 16, omega=None,
                                tol=1e-12)
    xs = g.axis_coords(0)
    err = np.abs(g.values - xs[:, None])
    assert err.max() < 1e-9
    assert g.solve_info.omega == pytest.approx(oracle.sor_optimal_omega(17))


def test_unvalued_feature_is_rejected():
    # dirichlet data must cover the whole boundary; a bare wall is an error
    feats = unit_box_features()
    feats[2] = geo.Segment((1.0, 0.0), (1.0, 1.0), value=None)
    with pytest.raises(ValueError, match="Dirichlet"):
        oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 16)


def test_maximum_principle():
    def trace(P):
        return np.sin(np.pi * P[:, 1])

    feats = unit_box_features(left=trace)
    g = oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 32)
    assert g.values.min() >= -1e-9
    assert g.values.max() <= 1.0 + 1e-9


def test_solver_validation_errors():
    feats = unit_box_features()
    with pytest.raises(ValueError):
        oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 16, omega=2.0)
    with pytest.raises(ValueError):
        oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 16, omega=0.0)
    with pytest.raises(ValueError):
        oracle.fd_laplace_solve(UNIT_BOX, feats, h=0.3)
    nowhere = [geo.Segment(s.p0, s.p1, value=None)
               for s in feats]
    with pytest.raises(ValueError):
        oracle.fd_laplace_solve(UNIT_BOX, nowhere, h=1 / 16)


def test_non_convergence_raises():
    with pytest.raises(RuntimeError):
        oracle.fd_laplace_solve(UNIT_BOX, unit_box_features(), h=1 / 32, cap=3)


# -- reference grid for the box problem ---------------------------------------

def test_box_reference_grid_second_order():
    """Lifted solve tracks the closed form and gains 4x per halving.

    Measured: 3.1716e-06 at h=1/64 and 7.9308e-07 at h=1/128 over interior
    nodes with x >= 2h.
    """
    errs = {}
    for n in (65, 129):
        h = 1.0 / (n - 1)
        g = oracle.box_reference_grid(h)
        X, Y = np.meshgrid(g.axis_coords(0), g.axis_coords(1), indexing="ij")
        gap = np.abs(g.values - oracle.analytic_box(X, Y))
        sel = np.zeros(g.shape, bool)
        sel[2:-1, 1:-1] = True  # interior, x >= 2h
        errs[n] = gap[sel].max()
    assert errs[65] < 5e-6
    assert errs[129] < errs[65] / 3


def test_unlifted_corner_jump_saturates():
    """Without the lift the corner data jump leaves a lattice-size error.

    The plateau sits at 7.2e-3 next to the hot corners regardless of h,
    which is what motivates box_reference_grid's lift.
    """
    def trace(P):
        return oracle.analytic_box(P[:, 0], P[:, 1])

    feats = [geo.Segment(s.p0, s.p1, value=trace)
             for s in unit_box_features()]
    g = oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 64, omega=None)
    X, Y = np.meshgrid(g.axis_coords(0), g.axis_coords(1), indexing="ij")
    gap = np.abs(g.values - oracle.analytic_box(X, Y))
    sel = np.zeros(g.shape, bool)
    sel[2:-1, 1:-1] = True
    assert 5e-3 < gap[sel].max() < 2e-2


def test_box_corner_lift_is_harmonic_and_jumps():
    h = 1e-3
    pts = np.array([[0.2, 0.3], [0.5, 0.5], [0.8, 0.9]])
    for px, py in pts:
        lap = sum(oracle.box_corner_lift(np.array([[px + dx, py + dy]]))[0]
                  for dx, dy in [(h, 0), (-h, 0), (0, h), (0, -h)]) \
            - 4 * oracle.box_corner_lift(np.array([[px, py]]))[0]
        assert abs(lap / h ** 2) < 1e-4
    # unit step across the (0, 0) corner, matching the data jump
    eps = 1e-9
    on_left = oracle.box_corner_lift(np.array([[0.0, eps]]))[0]
    on_bottom = oracle.box_corner_lift(np.array([[eps, 0.0]]))[0]
    assert on_left - on_bottom == pytest.approx(1.0, abs=1e-6)


# -- variable permittivity ----------------------------------------------------

def test_layered_dielectric_interface_value():
    """Two-layer slab: interface potential is eps1 / (eps1 + eps2) exactly.

    The face-midpoint weights make the piecewise-linear profile a discrete
    solution, so the solver reproduces it to solver tolerance.
    """
    e1, e2 = 1.0, 0.01

    def eps_fn(P):
        return np.where(P[:, 1] < 0.5, e1, e2)

    v = e1 / (e1 + e2)

    def side_trace(P):
        y = P[:, 1]
        return np.where(y <= 0.5, 1.0 + (v - 1.0) * y / 0.5,
                        v * (1.0 - y) / 0.5)

    feats = [
        geo.Segment((0.0, 0.0), (1.0, 0.0), value=1.0),
        geo.Segment((0.0, 1.0), (1.0, 1.0), value=0.0),
        geo.Segment((0.0, 0.0), (0.0, 1.0), value=side_trace),
        geo.Segment((1.0, 0.0), (1.0, 1.0), value=side_trace),
    ]
    g = oracle.fd_laplace_solve(UNIT_BOX, feats, h=1 / 32, omega=None,
                                tol=1e-12, eps_fn=eps_fn)
    ys = g.axis_coords(1)
    exact = np.where(ys <= 0.5, 1.0 + (v - 1.0) * ys / 0.5,
                     v * (1.0 - ys) / 0.5)
    assert np.abs(g.values - exact[None, :]).max() < 1e-8
    mid = np.flatnonzero(np.isclose(ys, 0.5))[0]
    assert g.values[:, mid] == pytest.approx(v, abs=1e-9)


# -- irregular domains --------------------------------------------------------

def test_notched_domain_diagonal_nodes():
    """45 degree hole edges pass exactly through lattice nodes.

    Off-edge nodes sit at distance h / sqrt(2) > h / 2 from such an edge,
    so nothing clamps; the hole talks to the grid through the on-edge
    nodes alone.
    """
    diamond = geo.Polygon([(0.25, 0.5), (0.5, 0.25), (0.75, 0.5), (0.5, 0.75)])
    domain = geo.RectMinusPolygon(UNIT_BOX, diamond)
    verts = diamond.vertices
    feats = unit_box_features(0.0, 0.0, 0.0, 0.0) + [
        geo.Segment(verts[k], verts[(k + 1) % 4], value=1.0)
        for k in range(4)
    ]
    g = oracle.fd_laplace_solve(domain, feats, h=1 / 32)
    assert np.isnan(g.values[16, 16])      # hole center is outside
    assert not g.mask[16, 16]
    kept = g.values[g.mask]
    assert kept.min() >= -1e-9 and kept.max() <= 1.0 + 1e-9
    # nodes exactly on the diagonal x + y = 0.75 carry the hole value
    assert g.values[8, 16] == 1.0          # vertex (0.25, 0.5)
    assert g.values[10, 14] == 1.0
    assert (~g.mask & ~np.isnan(g.values)).sum() == 0
    with pytest.raises(ValueError):
        oracle.grid_sample(g, np.array([[0.5, 0.5]]))


def test_skew_hole_clamps_near_nodes():
    """Edges off the lattice directions clamp nodes within half a spacing."""
    tri = geo.Polygon([(0.2, 0.2), (0.8, 0.35), (0.45, 0.8)])
    domain = geo.RectMinusPolygon(UNIT_BOX, tri)
    verts = tri.vertices
    feats = unit_box_features(0.0, 0.0, 0.0, 0.0) + [
        geo.Segment(verts[k], verts[(k + 1) % 3], value=1.0)
        for k in range(3)
    ]
    g = oracle.fd_laplace_solve(domain, feats, h=1 / 32)
    clamped = ~g.mask & ~np.isnan(g.values)
    assert clamped.sum() > 0
    assert np.all(g.values[clamped] == 1.0)
    assert np.isnan(g.values).sum() > 0    # deep interior of the hole
    kept = g.values[g.mask]
    assert kept.min() >= -1e-9 and kept.max() <= 1.0 + 1e-9
    centroid = verts.mean(axis=0)[None, :]
    assert not oracle.in_mask(g, centroid)[0]


def test_union_domain_antisymmetry():
    """L-shaped union with opposite plates is odd under 180 degree rotation."""
    domain = geo.RectUnion([
        geo.Rect((0.0, 0.0), (0.5, 0.6)),
        geo.Rect((0.5, 0.4), (1.0, 1.0)),
    ])
    feats = [
        geo.Segment((0.0, 0.0), (0.5, 0.0), value=-1.0),
        geo.Segment((0.5, 1.0), (1.0, 1.0), value=1.0),
    ]
    g = oracle.fd_laplace_solve(domain, feats, h=1 / 32)
    pts = g.node_points()
    assert np.array_equal(g.mask.ravel(), domain.contains(pts))
    vals = g.values
    rot = vals[::-1, ::-1]
    both = g.mask & g.mask[::-1, ::-1]
    assert np.abs(vals[both] + rot[both]).max() < 1e-8
    assert np.abs(vals[both]).max() <= 1.0 + 1e-9


# -- three dimensions ---------------------------------------------------------

def cube_faces(value_fn):
    faces = []
    for axis in range(3):
        for coord in (0.0, 1.0):
            faces.append(geo.Face(axis, coord, (0.0, 0.0), (1.0, 1.0),
                                  value=value_fn(axis, coord)))
    return faces


def test_linear_field_3d_exact():
    def trace(P):
        return P[:, 0]

    cube = geo.Rect((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    faces = cube_faces(lambda axis, coord: trace)
    g = oracle.fd_laplace_solve(cube, faces, h=1 / 8, omega=None, tol=1e-12)
    xs = g.axis_coords(0)
    assert np.abs(g.values - xs[:, None, None]).max() < 1e-9


def test_pipe_profile_is_stencil_exact_in_3d():
    # plates at the x faces, side walls carrying the linear trace 1 - 2x
    def trace(P):
        return 1.0 - 2.0 * P[:, 0]

    def value_fn(axis, coord):
        if axis != 0:
            return trace
        return 1.0 if coord == 0.0 else -1.0

    cube = geo.Rect((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    g = oracle.fd_laplace_solve(cube, cube_faces(value_fn), h=1 / 8,
                                omega=None, tol=1e-12)
    xs = g.axis_coords(0)
    assert np.abs(g.values - (1.0 - 2.0 * xs)[:, None, None]).max() < 1e-9


# -- interpolation ------------------------------------------------------------

def make_linear_grid():
    xs = np.arange(5) * 0.25
    ys = np.arange(5) * 0.25
    vals = 2.0 * xs[:, None] + 3.0 * ys[None, :]
    return oracle.FieldGrid((0.0, 0.0), 0.25, vals)


def test_grid_sample_reproduces_linear():
    g = make_linear_grid()
    rng = np.random.default_rng(11)
    X = rng.uniform(0.0, 1.0, size=(40, 2))
    want = 2.0 * X[:, 0] + 3.0 * X[:, 1]
    assert np.abs(oracle.grid_sample(g, X) - want).max() < 1e-12
    # node queries come back exactly
    assert oracle.grid_sample(g, np.array([[0.5, 0.25]]))[0] == 1.75


def test_grid_sample_outside_raises():
    g = make_linear_grid()
    with pytest.raises(ValueError):
        oracle.grid_sample(g, np.array([[1.2, 0.5]]))
    with pytest.raises(ValueError):
        oracle.grid_sample(g, np.array([[0.5]]))


def test_grid_sample_respects_mask():
    g = make_linear_grid()
    g.mask[2, 2] = False
    with pytest.raises(ValueError):
        oracle.grid_sample(g, np.array([[0.3, 0.3]]))
    # far from the dead node everything still works
    assert oracle.grid_sample(g, np.array([[0.05, 0.9]]))[0] \
        == pytest.approx(2.8, abs=1e-12)


def test_in_mask_flags_cells_touching_dead_nodes():
    g = make_linear_grid()
    g.mask[2, 2] = False
    X = np.array([[0.3, 0.3], [0.6, 0.6], [0.05, 0.05], [0.8, 0.8]])
    assert list(oracle.in_mask(g, X)) == [False, False, True, True]


def test_grid_sample_trilinear():
    xs = np.arange(5) * 0.5
    ys = np.arange(4) * 0.5
    zs = np.arange(3) * 0.5
    vals = (xs[:, None, None] + 2.0 * ys[None, :, None]
            - zs[None, None, :])
    g = oracle.FieldGrid((0.0, 0.0, 0.0), 0.5, vals)
    rng = np.random.default_rng(7)
    X = rng.uniform([0, 0, 0], [2.0, 1.5, 1.0], size=(30, 3))
    want = X[:, 0] + 2.0 * X[:, 1] - X[:, 2]
    assert np.abs(oracle.grid_sample(g, X) - want).max() < 1e-12


# -- metrics ------------------------------------------------------------------

class QuadField:
    """x^2 + y^2 stand-in net: laplacian 4 everywhere."""

    def forward(self, params, X, order=2):
        X = np.atleast_2d(X)
        B = len(X)
        val = (X[:, 0] ** 2 + X[:, 1] ** 2)[:, None]
        grad = (2 * X)[:, :, None]
        hess = np.tile(2 * np.eye(2)[None, :, :, None], (B, 1, 1, 1))
        return val, grad, hess


def test_metrics_hand_values():
    net = QuadField()
    pts = np.random.default_rng(3).uniform(size=(50, 2))
    truth = pts[:, 0] ** 2 + pts[:, 1] ** 2
    m = oracle.metrics(net, None, truth, pts)
    assert m.rmse == 0.0 and m.mae == 0.0
    assert m.mean_abs_laplacian == pytest.approx(4.0)
    off = oracle.metrics(net, None, truth - 1.0, pts)
    assert off.rmse == pytest.approx(1.0)
    assert off.mae == pytest.approx(1.0)


def test_metrics_permutation_invariant():
    net = QuadField()
    rng = np.random.default_rng(5)
    pts = rng.uniform(size=(30, 2))
    truth = rng.normal(size=30)
    a = oracle.metrics(net, None, truth, pts)
    perm = rng.permutation(30)
    b = oracle.metrics(net, None, truth[perm], pts[perm])
    assert a.rmse == pytest.approx(b.rmse, rel=1e-12)
    assert a.mae == pytest.approx(b.mae, rel=1e-12)


def test_metrics_validation():
    net = QuadField()
    with pytest.raises(ValueError):
        oracle.metrics(net, None, np.zeros(0), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        oracle.metrics(net, None, np.zeros(3), np.zeros((4, 2)))


# -- exports ------------------------------------------------------------------

def test_write_grid_text_roundtrip(tmp_path):
    g = oracle.box_reference_grid(1 / 8)
    path = tmp_path / "grid.txt"
    oracle.write_grid_text(g, path)
    lines = path.read_text().strip().split("\n")
    head = lines[0].split()
    assert [int(head[0]), int(head[1])] == list(g.shape)
    assert float(head[2]) == g.h
    assert [float(head[3]), float(head[4])] == list(g.origin)
    back = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    assert np.array_equal(back, g.values, equal_nan=True)


def test_write_grid_csv_masked_rows(tmp_path):
    g = oracle.box_reference_grid(1 / 8)
    g.mask[3, 3] = False
    path = tmp_path / "grid.csv"
    oracle.write_grid_csv(g, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x,y,value"
    assert len(lines) - 1 == g.mask.sum()
    x, y, v = (float(c) for c in lines[1].split(","))
    assert v == g.values[int(round(x / g.h)), int(round(y / g.h))]
