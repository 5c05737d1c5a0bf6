"""Second-order forward-mode derivatives (jets) in 2 to 4 variables.

A Jet carries (value, gradient, Hessian) of a scalar expression with respect
to a small set of seed coordinates. Propagating jets through a computation
yields exact Laplacians without nested reverse passes; the Hessian is built
symmetrically, so identities that rely on equality of mixed partials hold
bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape


class NonFiniteError(ArithmeticError):
    """Raised when a derivative computation produces inf or nan."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


@dataclass
class Jet:
    """Truncated second-order Taylor data of one scalar quantity."""

    value: float
    grad: np.ndarray   # shape (d,)
    hess: np.ndarray   # shape (d, d), symmetric by construction

    @property
    def dim(self):
        return self.grad.shape[0]

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)
        self.hess = np.asarray(self.hess, dtype=np.float64)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.grad + other.grad,
                       self.hess + other.hess)
        return Jet(self.value + other, self.grad.copy(), self.hess.copy())

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            cross = np.outer(self.grad, other.grad)
            return Jet(self.value * other.value,
                       self.value * other.grad + other.value * self.grad,
                       self.value * other.hess + other.value * self.hess
                       + cross + cross.T)
        return Jet(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            if other.value == 0.0:
                raise ZeroDivisionError("jet division by zero value")
            return self * _reciprocal(other)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise ZeroDivisionError("jet division by zero value")
        return _reciprocal(self) * other

    def __pow__(self, n):
        out = const_like(self, 1.0)
        base = self
        k = int(n)
        if k < 0:
            base = _reciprocal(base)
            k = -k
        for _ in range(k):
            out = out * base
        return out


def const_like(j, c):
    d = j.dim
    return Jet(float(c), np.zeros(d), np.zeros((d, d)))


def lift(point):
    """Seed coordinates: jet i has value point[i], unit gradient e_i."""
    p = np.asarray(point, dtype=np.float64)
    d = p.shape[0]
    if d not in (2, 3, 4):
        raise ValueError(f"lift supports 2 to 4 variables, got {d}")
    out = []
    for i in range(d):
        g = np.zeros(d)
        g[i] = 1.0
        out.append(Jet(float(p[i]), g, np.zeros((d, d))))
    return out


def _chain(u, f0, f1, f2):
    """Scalar chain rule through y = f(u) given f, f', f'' at u.value."""
    og = np.outer(u.grad, u.grad)
    return Jet(f0, f1 * u.grad, f1 * u.hess + f2 * og)


def _reciprocal(u):
    v = u.value
    return _chain(u, 1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)


def sin(u):
    s, c = np.sin(u.value), np.cos(u.value)
    return _chain(u, s, c, -s)


def cos(u):
    s, c = np.sin(u.value), np.cos(u.value)
    return _chain(u, c, -s, -c)


def tanh(u):
    t = np.tanh(u.value)
    sp = 1.0 - t * t
    return _chain(u, t, sp, -2.0 * t * sp)


def exp(u):
    e = np.exp(u.value)
    return _chain(u, e, e, e)


def sinh(u):
    return _chain(u, np.sinh(u.value), np.cosh(u.value), np.sinh(u.value))


def cosh(u):
    return _chain(u, np.cosh(u.value), np.sinh(u.value), np.cosh(u.value))


def log(u):
    v = u.value
    if v <= 0.0:
        raise ValueError("log of non-positive jet value")
    return _chain(u, np.log(v), 1.0 / v, -1.0 / v ** 2)


def sqrt(u):
    s = np.sqrt(u.value)
    return _chain(u, s, 0.5 / s, -0.25 / s ** 3)


def affine(jets, weights, bias=0.0):
    """Weighted sum of jets plus a constant."""
    w = np.asarray(weights, dtype=np.float64)
    out = const_like(jets[0], bias)
    for wi, ji in zip(w, jets):
        out = out + ji * float(wi)
    return out


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "sin": sin,
    "cos": cos,
    "tanh": tanh,
    "exp": exp,
    "sinh": sinh,
    "cosh": cosh,
    "log": log,
    "sqrt": sqrt,
    "neg": lambda a: -a,
    "affine": affine,
}


def jet_apply(op, *args):
    """Apply a named elementary operation to jets.

    Binary ops accept a plain float on either side. Results with non-finite
    entries raise NonFiniteError.
    """
    if op not in _OPS:
        raise KeyError(f"unknown jet op {op!r}")
    out = _OPS[op](*args)
    if isinstance(out, Jet):
        if not (np.isfinite(out.value) and np.isfinite(out.grad).all()
                and np.isfinite(out.hess).all()):
            raise NonFiniteError(f"non-finite jet from op {op!r}")
    return out


def laplacian(f, point):
    """Exact Laplacian of a jet-evaluable scalar field at a point."""
    out = f(lift(point))
    if not np.isfinite(out.hess).all():
        raise NonFiniteError("non-finite second derivatives in laplacian")
    return float(np.trace(out.hess))


def gradient(f, point):
    out = f(lift(point))
    return out.grad.copy()


# -- complex-valued jets (real decomposition) --------------------------------


@dataclass
class ComplexJet:
    """Pair of real jets (u, v) representing u + i v of two real seeds."""

    u: Jet
    v: Jet

    def __add__(self, other):
        if isinstance(other, ComplexJet):
            return ComplexJet(self.u + other.u, self.v + other.v)
        z = complex(other)
        return ComplexJet(self.u + z.real, self.v + z.imag)

    __radd__ = __add__

    def __neg__(self):
        return ComplexJet(-self.u, -self.v)

    def __sub__(self, other):
        return self + (-other if isinstance(other, ComplexJet)
                       else -complex(other))

    def __mul__(self, other):
        if isinstance(other, ComplexJet):
            return ComplexJet(self.u * other.u - self.v * other.v,
                              self.u * other.v + self.v * other.u)
        z = complex(other)
        return ComplexJet(self.u * z.real - self.v * z.imag,
                          self.u * z.imag + self.v * z.real)

    __rmul__ = __mul__

    def conj(self):
        return ComplexJet(self.u, -self.v)


def complex_seed(x, y):
    """Lift (x, y) to the complex seed jet for x + i y."""
    jx, jy = lift((x, y))
    return ComplexJet(jx, jy)


def csin(z):
    return ComplexJet(sin(z.u) * cosh(z.v), cos(z.u) * sinh(z.v))


def cexp(z):
    e = exp(z.u)
    return ComplexJet(e * cos(z.v), e * sin(z.v))


def cauchy_riemann_residual(f, point):
    """Residuals (u_x - v_y, u_y + v_x) of a complex map at (x, y).

    f is either a callable taking a ComplexJet or an object exposing
    complex_eval(ComplexJet). Exactly zero (to roundoff) iff the map is
    holomorphic at the point.
    """
    z = complex_seed(point[0], point[1])
    out = f.complex_eval(z) if hasattr(f, "complex_eval") else f(z)
    r1 = out.u.grad[0] - out.v.grad[1]
    r2 = out.u.grad[1] + out.v.grad[0]
    return float(r1), float(r2)


# -- parameter gradients ------------------------------------------------------


def param_grad(loss, params):
    """Exact gradient of a scalar loss with respect to a flat param vector.

    The loss must be expressed through tape operations (every loss in this
    package is). The gradient mechanism is reverse-mode over the recorded
    forward pass; finite-difference agreement is asserted in the test suite.
    """
    p = tape.Var(np.asarray(params, dtype=np.float64))
    out = loss(p)
    if not isinstance(out, tape.Var):
        # loss did not depend on the parameters
        out_val = float(np.asarray(out))
        if not np.isfinite(out_val):
            raise NonFiniteError("non-finite loss value")
        return np.zeros_like(p.value)
    if out.value.size != 1 or not np.isfinite(out.value).all():
        raise NonFiniteError("loss must be a finite scalar")
    out.backward()
    g = p.grad if p.grad is not None else np.zeros_like(p.value)
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NonFiniteError("non-finite gradient component",
                             index=int(bad[0]))
    return g


def value_and_grad(loss, params):
    """Loss value and parameter gradient from one recorded forward pass.

    Unlike param_grad this never raises on non-finite numbers; the training
    loop inspects the returned values so it can abort with a partial report.
    """
    p = tape.Var(np.asarray(params, dtype=np.float64))
    out = loss(p)
    if not isinstance(out, tape.Var):
        return float(np.asarray(out)), np.zeros_like(p.value)
    out.backward()
    g = p.grad if p.grad is not None else np.zeros_like(p.value)
    return float(out.value.reshape(())), g
