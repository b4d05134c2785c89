"""Truncated two-variable Taylor jets and the manufactured benchmark data.

A :class:`Jet` holds all partial derivatives of a scalar expression in
``(x, v)`` up to a fixed total order, evaluated at an array of points.
Expressions are plain Python callables ``expr(x, v)`` written with the
operators and the ``sin``/``cos``/``exp`` functions of this module, so the
same callable evaluates on floats, numpy arrays or jets.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np


class Jet:
    """Truncated Taylor expansion ``sum c[a, b] dx^a dv^b`` with ``a + b <= order``.

    ``c`` has shape ``(order + 1, order + 1, *points)``; entries with
    ``a + b > order`` are kept at zero.
    """

    __array_priority__ = 100

    def __init__(self, coeffs, order, point=None):
        self.c = coeffs
        self.order = order
        self.point = point

    @classmethod
    def constant(cls, value, order, shape=()):
        c = np.zeros((order + 1, order + 1) + np.shape(value if np.ndim(value) else np.zeros(shape)))
        c[0, 0] = value
        return cls(c, order)

    @classmethod
    def variable(cls, value, axis, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1, order + 1) + value.shape)
        c[0, 0] = value
        if order >= 1:
            c[(1, 0) if axis == 0 else (0, 1)] = 1.0
        return cls(c, order)

    @property
    def value(self):
        return self.c[0, 0]

    @property
    def shape(self):
        return self.c.shape[2:]

    def partial(self, a, b):
        """``d^a/dx^a d^b/dv^b`` of the expression."""
        if a + b > self.order:
            raise ValueError(f"partial ({a}, {b}) exceeds jet order {self.order}")
        return self.c[a, b] * factorial(a) * factorial(b)

    def _lift(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jets of different order")
            return other
        return Jet.constant(np.broadcast_to(np.asarray(other, float), self.shape), self.order)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.c + o.c, self.order, self.point or o.point)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order, self.point)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * np.asarray(other, float), self.order, self.point)
        K = self.order
        out = np.zeros(np.broadcast_shapes(self.c.shape, other.c.shape))
        for a in range(K + 1):
            for b in range(K + 1 - a):
                acc = 0.0
                for i in range(a + 1):
                    for j in range(min(b, K - i) + 1):
                        if a - i + b - j <= K:
                            acc = acc + self.c[i, j] * other.c[a - i, b - j]
                out[a, b] = acc
        return Jet(out, K, self.point or other.point)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other ** -1
        return Jet(self.c / np.asarray(other, float), self.order, self.point)

    def __rtruediv__(self, other):
        return self._lift(other) * self ** -1

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(np.ones(self.shape), self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        f0 = self.value
        derivs = []
        coef = 1.0
        for k in range(self.order + 1):
            derivs.append(coef * f0 ** (p - k))
            coef *= p - k
        return self._compose(derivs)

    def _compose(self, derivs):
        """``g(self)`` from ``derivs[k] = g^(k)(value)`` by Taylor expansion."""
        delta = Jet(self.c.copy(), self.order)
        delta.c[0, 0] = 0.0
        out = Jet.constant(derivs[0], self.order, self.shape)
        out.point = self.point
        power = Jet.constant(np.ones(self.shape), self.order)
        for k in range(1, self.order + 1):
            power = power * delta
            out = out + power * (derivs[k] / factorial(k))
        return out

    def d(self, axis):
        """Jet of the derivative along ``axis`` (order drops by one)."""
        K = self.order
        if K == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        c = np.zeros((K, K) + self.shape)
        for a in range(K):
            for b in range(K - a):
                if axis == 0:
                    c[a, b] = (a + 1) * self.c[a + 1, b]
                else:
                    c[a, b] = (b + 1) * self.c[a, b + 1]
        return Jet(c, K - 1, self.point)

    def truncate(self, order):
        return Jet(self.c[: order + 1, : order + 1].copy(), order, self.point)

    def grad(self):
        return np.stack([self.partial(1, 0), self.partial(0, 1)], axis=-1)

    def hess(self):
        hxx, hxv, hvv = self.partial(2, 0), self.partial(1, 1), self.partial(0, 2)
        return np.stack([np.stack([hxx, hxv], -1), np.stack([hxv, hvv], -1)], -2)


def _elementary(name, fn, derivs):
    def f(z):
        if isinstance(z, Jet):
            return z._compose(derivs(z.value, z.order))
        return fn(z)

    f.__name__ = name
    return f


sin = _elementary("sin", np.sin, lambda a, K: [np.sin(a + k * np.pi / 2) for k in range(K + 1)])
cos = _elementary("cos", np.cos, lambda a, K: [np.cos(a + k * np.pi / 2) for k in range(K + 1)])
exp = _elementary("exp", np.exp, lambda a, K: [np.exp(a)] * (K + 1))
pi = np.pi


def eval_jet(expr, x, v, order=4):
    """All partials of ``expr`` up to total ``order`` at points ``(x, v)``."""
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    out = expr(Jet.variable(x, 0, order), Jet.variable(v, 1, order))
    if not isinstance(out, Jet):
        out = Jet.constant(np.broadcast_to(np.asarray(out, float), x.shape).copy(), order)
    out.point = (x, v)
    return out


def _velocity(jet, order):
    if jet.point is None:
        raise ValueError("jet carries no evaluation point; build it with eval_jet")
    return Jet.variable(jet.point[1], 1, order)


def kolmogorov(u, eps):
    """Jet of ``v u_x - eps u_vv`` (order drops by two)."""
    K = u.order - 2
    return _velocity(u, K) * u.d(0).truncate(K) - eps * u.d(1).d(1)


def kolmogorov_adjoint(z, eps):
    """Jet of ``-v z_x - eps z_vv`` (order drops by two)."""
    K = z.order - 2
    return -(_velocity(z, K) * z.d(0).truncate(K)) - eps * z.d(1).d(1)


def primal_forcing(u_jet, eps):
    """Value and gradient of ``f = v u_x - eps u_vv`` from a jet of order >= 3."""
    if u_jet.order < 3:
        raise ValueError("primal forcing gradient needs a jet of order >= 3")
    if u_jet.point is None:
        raise ValueError("jet carries no evaluation point; build it with eval_jet")
    v = u_jet.point[1]
    D = u_jet.partial
    f = v * D(1, 0) - eps * D(0, 2)
    fx = v * D(2, 0) - eps * D(1, 2)
    fv = D(1, 0) + v * D(1, 1) - eps * D(0, 3)
    return f, np.stack([fx, fv], axis=-1)


def sin4_benchmark(x, v):
    """``sin^4(pi x) sin^4(pi v)``; vanishes with its gradient on the boundary of (-1, 1)^2."""
    return sin(pi * x) ** 4 * sin(pi * v) ** 4


def _zeros_like_points(x, v, *tail):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)) + tail)


@dataclass
class Evaluator:
    """Pointwise value-and-gradient source for H-weighted right-hand sides.

    Right-hand sides are assembled as ``int value * phi + grad . M grad(phi)``.
    ``grad`` may be an a.e. gradient, and for manufactured targets it is a
    field of its own rather than the derivative of ``value``.
    """

    value: object
    grad: object = None
    name: str = ""

    def __call__(self, x, v):
        return self.value(x, v)

    def gradient(self, x, v):
        if self.grad is None:
            return _zeros_like_points(x, v, 2)
        return self.grad(x, v)

    def scaled(self, c):
        g = None if self.grad is None else (lambda x, v: c * self.grad(x, v))
        return Evaluator(lambda x, v: c * self.value(x, v), g, f"{c:g}*{self.name}")


ZERO = Evaluator(lambda x, v: _zeros_like_points(x, v), None, "zero")


class Exact:
    """Smooth exact field ``scale * transform(expr)``: value, gradient, Hessian."""

    def __init__(self, expr, scale=1.0, transform=None, lost_orders=0):
        self.expr = expr
        self.scale = scale
        self.transform = transform
        self.lost_orders = lost_orders

    def jet(self, x, v, order=2):
        j = eval_jet(self.expr, x, v, order + self.lost_orders)
        return j if self.transform is None else self.transform(j)

    def value(self, x, v):
        return self.scale * self.jet(x, v, 0).value

    def grad(self, x, v):
        return self.scale * self.jet(x, v, 1).grad()

    def hess(self, x, v):
        return self.scale * self.jet(x, v, 2).hess()

    __call__ = value
    gradient = grad

    def all(self, x, v):
        j = self.jet(x, v, 2)
        return self.scale * j.value, self.scale * j.grad(), self.scale * j.hess()

    def evaluator(self):
        return Evaluator(self.value, self.grad, "exact")


@dataclass
class ManufacturedCase:
    """Manufactured optimal-control data: exact ``u``, ``z``, control ``f``, target."""

    u: Exact
    z: Exact
    f: Evaluator
    target: Evaluator
    eps: float
    alpha: float
    M: np.ndarray


def primal_case(u_expr, eps):
    """Exact solution and its forcing ``f = v u_x - eps u_vv`` (value and gradient)."""
    return Exact(u_expr), Evaluator(
        lambda x, v: primal_forcing(eval_jet(u_expr, x, v, 3), eps)[0],
        lambda x, v: primal_forcing(eval_jet(u_expr, x, v, 3), eps)[1],
        "forcing")


def oc_manufactured(u_expr, alpha, eps, M, check_boundary=True, x_max=1.0):
    """Manufactured stationary optimal-control data for the exact primal ``u``.

    ``z = alpha (v u_x - eps u_vv)`` and ``f = z / alpha`` satisfy the primal
    and control equations exactly.  The adjoint form is not the H-product of
    a strong operator: for smooth ``z`` vanishing with its gradient on the
    boundary, ``a*(z, psi) = (-v z_x - eps z_vv, psi)_H + 2 (grad z, N0 grad psi)``
    with ``N0 = [[M12, M22/2], [M22/2, 0]]``.  The second term is carried in
    the value part of the target as ``-2 (M12 z_xx + M22 z_xv)``, so the
    target evaluator has

    * value ``u - v z_x - eps z_vv - 2 (M12 z_xx + M22 z_xv)``
    * gradient ``grad(u - v z_x - eps z_vv)``.
    """
    M = np.asarray(M, float)
    if check_boundary:
        _check_boundary_compatibility(u_expr, eps, x_max)

    def target_parts(x, v):
        u = eval_jet(u_expr, x, v, 5)
        z = alpha * kolmogorov(u, eps)
        kz = kolmogorov_adjoint(z, eps)
        corr = -2.0 * (M[0, 1] * z.partial(2, 0) + M[1, 1] * z.partial(1, 1))
        return u.value + kz.value + corr, u.grad() + kz.grad()

    z_exact = Exact(u_expr, scale=alpha, transform=lambda j: kolmogorov(j, eps), lost_orders=2)
    f_eval = Evaluator(lambda x, v: z_exact.value(x, v) / alpha,
                       lambda x, v: z_exact.grad(x, v) / alpha, "control")
    target = Evaluator(lambda x, v: target_parts(x, v)[0],
                       lambda x, v: target_parts(x, v)[1], "target")
    return ManufacturedCase(Exact(u_expr), z_exact, f_eval, target, eps, alpha, M)


def _check_boundary_compatibility(u_expr, eps, x_max, n=41, tol=1e-10):
    s = np.linspace(-1.0, 1.0, n)
    xs = np.concatenate([s * x_max, s * x_max, -x_max * np.ones(n), x_max * np.ones(n)])
    vs = np.concatenate([-np.ones(n), np.ones(n), s, s])
    u = eval_jet(u_expr, xs, vs, 3)
    z = kolmogorov(u, eps)
    for name, j in (("u", u), ("z", z)):
        worst = max(np.max(np.abs(j.value)), np.max(np.abs(j.grad())))
        if worst > tol:
            raise ValueError(f"manufactured {name} does not vanish with its gradient on the "
                             f"boundary (max {worst:.2e})")


def _d1(x, v):
    r = 1.0 - np.asarray(x) ** 2 / 0.09 - np.asarray(v) ** 2 / 0.25
    return np.sqrt(np.maximum(r, 0.0))


def _d1_grad(x, v):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    r = 1.0 - x ** 2 / 0.09 - v ** 2 / 0.25
    inside = r > 0
    s = np.sqrt(np.where(inside, r, 1.0))
    return np.stack([np.where(inside, -x / (0.09 * s), 0.0),
                     np.where(inside, -v / (0.25 * s), 0.0)], axis=-1)


def _d2(x, v):
    return np.where(np.asarray(x) ** 2 + np.asarray(v) ** 2 <= 1.0 / 16.0, 1.0, 0.0)


def time_target(t):
    """``(1 - cos 2 pi t) exp(-25 (x^2 + v^2))`` frozen at time ``t``."""
    a = 1.0 - np.cos(2.0 * np.pi * t)

    def value(x, v):
        return a * np.exp(-25.0 * (np.asarray(x) ** 2 + np.asarray(v) ** 2))

    def grad(x, v):
        g = value(x, v)
        return np.stack([-50.0 * np.asarray(x) * g, -50.0 * np.asarray(v) * g], axis=-1)

    return Evaluator(value, grad, f"D_time({t:g})")


def targets():
    """Ellipse bump ``D1``, disc indicator ``D2`` and the pulsing ``D_time(t)`` factory.

    ``D1`` has an analytic gradient inside its support and 0 outside; ``D2``
    is piecewise constant, so its a.e. gradient is 0.
    """
    return {
        "D1": Evaluator(_d1, _d1_grad, "D1"),
        "D2": Evaluator(_d2, lambda x, v: _zeros_like_points(x, v, 2), "D2"),
        "D_time": time_target,
    }
