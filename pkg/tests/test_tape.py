"""Reverse-mode tape vs central finite differences, op by op."""

import numpy as np
import pytest

from harmonia import tape
from conftest import fd_grad, H_PARAM


def check_grad(build, x0, rtol=1e-4, atol=1e-9):
    """build(Var) -> scalar Var; gradient checked against FD."""
    v = tape.Var(x0)
    out = build(v)
    out.backward()

    def scalar(x):
        return float(tape.value_of(build(tape.Var(x))))

    ref = fd_grad(scalar, x0, h=H_PARAM)
    np.testing.assert_allclose(v.grad, ref, rtol=rtol, atol=atol)


def test_add_mul_broadcast():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=6)
    c = rng.normal(size=(2, 3))

    def build(v):
        m = tape.reshape(v, (2, 3))
        return ((m * c + m) * 0.5 + (c - m)).sum()

    check_grad(build, x0)


def test_div_pow():
    rng = np.random.default_rng(1)
    x0 = rng.uniform(0.5, 2.0, size=5)

    def build(v):
        return (tape.power(v, 3) / (v + 2.0) + 1.0 / v).sum()

    check_grad(build, x0)


def test_matmul_leading_dims():
    rng = np.random.default_rng(2)
    x0 = rng.normal(size=12)
    a = rng.normal(size=(4, 2, 3))

    def build(v):
        w = tape.reshape(v, (3, 4))
        return tape.power(tape.matmul(a, w), 2).sum()

    check_grad(build, x0)


def test_matmul_var_lhs():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=8)
    w = rng.normal(size=(4, 3))

    def build(v):
        m = tape.reshape(v, (2, 4))
        return tape.matmul(m, w).mean()

    check_grad(build, x0)


@pytest.mark.parametrize("fname", ["sin", "cos", "tanh", "exp", "sinh",
                                   "cosh", "log", "sqrt"])
def test_unary_ops(fname):
    rng = np.random.default_rng(abs(hash(fname)) % 2 ** 31)
    x0 = rng.uniform(0.2, 1.5, size=7)
    w = rng.standard_normal(7)
    f = getattr(tape, fname)

    def build(v):
        return (f(v) * w).sum()

    check_grad(build, x0)


def test_getitem_and_none_axis():
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=10)

    def build(v):
        m = tape.reshape(v, (5, 2))
        col = m[:, 0]
        row = m[1]
        exp_axis = m[:, None, :]
        return (col * col).sum() + row.sum() + (exp_axis * exp_axis).mean()

    check_grad(build, x0)


def test_getitem_fancy_repeated_indices():
    # repeated targets must scatter-add, not overwrite
    rng = np.random.default_rng(51)
    x0 = rng.normal(size=12)
    idx = np.array([[0, 1], [1, 2]])

    def build(v):
        m = tape.reshape(v, (2, 3, 2))
        mirror = m[:, idx, :]          # (2, 2, 2, 2), slot 1 used twice
        w = np.arange(16.0).reshape(2, 2, 2, 2)
        return (mirror * w).sum()

    check_grad(build, x0)


def test_sum_mean_axes():
    rng = np.random.default_rng(6)
    x0 = rng.normal(size=24)

    def build(v):
        m = tape.reshape(v, (2, 3, 4))
        a = m.sum(axis=1)
        b = m.mean(axis=(0, 2))
        return (a * a).sum() + (b * b).sum()

    check_grad(build, x0)


def test_shared_subexpression_accumulates():
    def build(v):
        y = v * v
        return (y + y).sum()

    x0 = np.array([1.5, -2.0])
    v = tape.Var(x0)
    build(v).backward()
    np.testing.assert_allclose(v.grad, 4 * x0)


def test_constant_only_ops_stay_numpy():
    a = np.ones((2, 2))
    assert isinstance(tape.add(a, a), np.ndarray)
    assert isinstance(tape.sin(a), np.ndarray)
    assert isinstance(tape.matmul(a, a), np.ndarray)


def test_backward_requires_scalar():
    v = tape.Var(np.ones(3))
    with pytest.raises(ValueError):
        (v * 2.0).backward()


def test_rsub_rdiv_scalar_mix():
    def build(v):
        return (2.0 - v).sum() + (3.0 / (v + 2.0)).sum() + (-v).sum()

    check_grad(build, np.array([0.3, 0.7, -0.2]))
