"""Scalar jets vs finite differences, plus exact harmonic identities."""

import cmath

import numpy as np
import pytest

from harmonia import jets
from conftest import fd_grad, fd_hess


def eval_jet(f, x):
    return f(jets.lift(x))


def check_against_fd(f, x, rtol=1e-6, atol=1e-6):
    out = eval_jet(f, x)

    def scalar(p):
        o = eval_jet(f, p)
        return o.value

    np.testing.assert_allclose(out.grad, fd_grad(scalar, np.asarray(x)),
                               rtol=rtol, atol=atol)
    np.testing.assert_allclose(out.hess, fd_hess(scalar, np.asarray(x)),
                               rtol=rtol, atol=atol)


def test_lift_seeds():
    xs = jets.lift((0.5, 0.5))
    assert xs[0].value == 0.5
    np.testing.assert_array_equal(xs[0].grad, [1.0, 0.0])
    np.testing.assert_array_equal(xs[0].hess, np.zeros((2, 2)))
    np.testing.assert_array_equal(xs[1].grad, [0.0, 1.0])


def test_lift_dim_guard():
    with pytest.raises(ValueError):
        jets.lift((1.0,))
    with pytest.raises(ValueError):
        jets.lift(np.zeros(5))


def test_product_rule_frozen():
    x, y = jets.lift((2.0, 3.0))
    p = x * y
    assert p.value == 6.0
    np.testing.assert_array_equal(p.grad, [3.0, 2.0])
    np.testing.assert_array_equal(p.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_tanh_affine_vs_fd():
    check_against_fd(lambda v: jets.tanh(jets.affine(v, [3.0, 2.0])),
                     (0.1, 0.2))


@pytest.mark.parametrize("name", ["sin", "cos", "tanh", "exp", "sinh",
                                  "cosh", "log", "sqrt"])
def test_unary_chain_vs_fd(name):
    f = getattr(jets, name)
    rng = np.random.default_rng(abs(hash(name)) % 2 ** 31)
    for _ in range(20):
        a, b, c = rng.uniform(0.3, 1.2, size=3)
        x0 = rng.uniform(0.4, 1.0, size=2)
        check_against_fd(
            lambda v, a=a, b=b, c=c: f(a * v[0] + b * v[1] + c * v[0] * v[1]
                                       + 0.5),
            x0)


def test_div_vs_fd_and_zero_guard():
    check_against_fd(lambda v: (v[0] * v[0] + 1.0) / (v[1] + 2.0), (0.7, 0.1))
    x, y = jets.lift((1.0, 0.0))
    with pytest.raises(ZeroDivisionError):
        _ = x / y


def test_jet_apply_dispatch():
    x, y = jets.lift((0.4, 0.9))
    s = jets.jet_apply("mul", x, y)
    assert s.value == pytest.approx(0.36)
    t = jets.jet_apply("affine", [x, y], [2.0, -1.0], 0.5)
    assert t.value == pytest.approx(2 * 0.4 - 0.9 + 0.5)
    with pytest.raises(KeyError):
        jets.jet_apply("nope", x)


def test_jet_apply_flags_non_finite():
    x, _ = jets.lift((800.0, 0.0))
    with pytest.raises(jets.NonFiniteError):
        jets.jet_apply("exp", x)


def test_hessian_bitwise_symmetric():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x0 = rng.uniform(-1, 1, size=3)
        out = eval_jet(
            lambda v: jets.sin(v[0] * v[1]) * jets.tanh(v[2] + v[0])
            + jets.exp(v[1] * 0.3) * v[2], x0)
        for i in range(3):
            for j in range(3):
                assert out.hess[i, j] == out.hess[j, i]


def test_laplacian_harmonic_polynomial_exact():
    for x0 in [(0.3, 0.8), (-1.2, 2.0), (5.0, -3.0)]:
        assert jets.laplacian(lambda v: v[0] * v[0] - v[1] * v[1], x0) == 0.0


def test_laplacian_paraboloid():
    val = jets.laplacian(lambda v: v[0] * v[0] + v[1] * v[1], (0.2, -0.4))
    assert val == pytest.approx(4.0, abs=1e-12)


def test_laplacian_log_modulus_harmonic():
    val = jets.laplacian(lambda v: jets.log(v[0] * v[0] + v[1] * v[1]),
                         (0.3, 0.4))
    assert abs(val) < 1e-9


def test_laplacian_vs_fd_generic():
    def f(v):
        return jets.tanh(v[0] * v[1])

    got = jets.laplacian(f, (0.3, -0.7))

    def scalar(p):
        return np.tanh(p[0] * p[1])

    ref = np.trace(fd_hess(scalar, np.array([0.3, -0.7])))
    assert got == pytest.approx(ref, rel=1e-6, abs=1e-6)


def test_laplacian_linearity():
    rng = np.random.default_rng(11)
    f = lambda v: jets.sin(v[0]) * jets.cosh(v[1])
    g = lambda v: jets.tanh(v[0] * v[1] + 0.2)
    for _ in range(20):
        a, b = rng.normal(size=2)
        x0 = rng.uniform(-0.8, 0.8, size=2)
        lhs = jets.laplacian(lambda v: a * f(v) + b * g(v), x0)
        rhs = a * jets.laplacian(f, x0) + b * jets.laplacian(g, x0)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_three_and_four_dims():
    val = jets.laplacian(
        lambda v: v[0] * v[0] + v[1] * v[1] - 2.0 * v[2] * v[2],
        (0.1, 0.2, 0.3))
    assert val == pytest.approx(0.0, abs=1e-12)
    out = eval_jet(lambda v: v[0] * v[3] + jets.sin(v[1]) * v[2],
                   (0.1, 0.2, 0.3, 0.4))
    assert out.grad.shape == (4,)
    assert out.hess[0, 3] == 1.0


# -- complex jets -------------------------------------------------------------


def test_complex_square_matches_cmath():
    z = jets.complex_seed(0.7, -0.3)
    w = z * z
    ref = complex(0.7, -0.3) ** 2
    assert w.u.value == pytest.approx(ref.real)
    assert w.v.value == pytest.approx(ref.imag)


def test_csin_cexp_match_cmath():
    for (x, y) in [(0.2, 0.5), (-0.8, 0.1), (1.1, -0.7)]:
        z = jets.complex_seed(x, y)
        s = jets.csin(z)
        e = jets.cexp(z)
        rs = cmath.sin(complex(x, y))
        re = cmath.exp(complex(x, y))
        assert s.u.value == pytest.approx(rs.real, abs=1e-12)
        assert s.v.value == pytest.approx(rs.imag, abs=1e-12)
        assert e.u.value == pytest.approx(re.real, abs=1e-12)
        assert e.v.value == pytest.approx(re.imag, abs=1e-12)


def test_cauchy_riemann_holomorphic_maps():
    for f in [lambda z: z * z, jets.csin, jets.cexp,
              lambda z: jets.cexp(z * complex(0.0, 1.0)) + z * 3.0]:
        for pt in [(0.3, 0.4), (-0.5, 0.2)]:
            r1, r2 = jets.cauchy_riemann_residual(f, pt)
            assert abs(r1) < 1e-12 and abs(r2) < 1e-12


def test_cauchy_riemann_detects_conjugate():
    r1, r2 = jets.cauchy_riemann_residual(lambda z: z.conj(), (0.3, 0.4))
    assert r1 == pytest.approx(2.0)
    assert r2 == pytest.approx(0.0)


def test_csin_laplacian_zero():
    rng = np.random.default_rng(13)
    for _ in range(20):
        x, y = rng.uniform(-1, 1, size=2)
        z = jets.complex_seed(x, y)
        out = jets.csin(z * complex(1.3, -0.4) + complex(0.2, 0.1))
        assert abs(np.trace(out.u.hess)) < 1e-12
        assert abs(np.trace(out.v.hess)) < 1e-12


# -- parameter gradients ------------------------------------------------------


def test_param_grad_quadratic():
    g = jets.param_grad(lambda p: (p * p).sum(), np.array([3.0]))
    np.testing.assert_allclose(g, [6.0])


def test_param_grad_constant_loss():
    g = jets.param_grad(lambda p: 1.25, np.array([1.0, 2.0]))
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_param_grad_non_finite_reports_index():
    from harmonia import tape

    def loss(p):
        return tape.sqrt(p).sum()

    # finite loss value, infinite derivative at the zero component
    with pytest.raises(jets.NonFiniteError) as e:
        jets.param_grad(loss, np.array([1.0, 0.0, 2.0]))
    assert e.value.index == 1
