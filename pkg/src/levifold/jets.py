"""Second-order forward-mode differentiation with truncated Taylor jets.

A :class:`Jet` carries a value, its gradient and (optionally) its Hessian with
respect to ``n`` independent real variables.  All three are numpy arrays that
broadcast over a leading batch shape, so a single evaluation of a function
built from jet arithmetic returns exact first and second derivatives at many
points at once.

>>> x, y = Jet.variables([1.0, 2.0])
>>> f = x * x * y
>>> float(f.val), f.grad.tolist(), f.hess.tolist()
(2.0, [4.0, 1.0], [[4.0, 2.0], [2.0, 0.0]])

The module-level functions :func:`exp`, :func:`log`, :func:`sin`,
:func:`cos` and :func:`sqrt` dispatch to numpy for plain floats and arrays,
which lets one function definition serve both jet and float evaluation.
"""

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, x, order=2):
        """Seed independent variables from the components of ``x``.

        ``x`` has shape ``(..., n)``; the result is a list of ``n`` jets with
        batch shape ``x.shape[:-1]``.
        """
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        batch = x.shape[:-1]
        out = []
        for i in range(n):
            g = np.zeros(batch + (n,))
            g[..., i] = 1.0
            h = np.zeros(batch + (n, n)) if order >= 2 else None
            out.append(cls(x[..., i].copy(), g, h))
        return out

    @property
    def order(self):
        return 1 if self.hess is None else 2

    # -- helpers -------------------------------------------------------

    def _lift(self, c):
        c = np.asarray(c, dtype=float)
        g = np.zeros(np.broadcast_shapes(c.shape, self.val.shape) + self.grad.shape[-1:])
        h = None if self.hess is None else np.zeros(g.shape + g.shape[-1:])
        return Jet(c + np.zeros(g.shape[:-1]), g, h)

    def _unary(self, f0, f1, f2):
        grad = f1[..., None] * self.grad
        if self.hess is None:
            return Jet(f0, grad)
        outer = self.grad[..., :, None] * self.grad[..., None, :]
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * outer
        return Jet(f0, grad, hess)

    # -- arithmetic ----------------------------------------------------

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            hess = None if self.hess is None or other.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        val = self.val + other
        n = self.grad.shape[-1]
        grad = np.broadcast_to(self.grad, np.shape(val) + (n,))
        hess = None if self.hess is None else np.broadcast_to(self.hess, np.shape(val) + (n, n))
        return Jet(val, grad, hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            val = a.val * b.val
            grad = a.val[..., None] * b.grad + b.val[..., None] * a.grad
            if a.hess is None or b.hess is None:
                return Jet(val, grad)
            cross = a.grad[..., :, None] * b.grad[..., None, :]
            hess = (a.val[..., None, None] * b.hess + b.val[..., None, None] * a.hess
                    + cross + np.swapaxes(cross, -1, -2))
            return Jet(val, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet(self.val * c, self.grad * c[..., None],
                   None if self.hess is None else self.hess * c[..., None, None])

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        return self._unary(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        v = self.val
        if p == 2:
            return self * self
        return self._unary(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def exp(self):
        e = np.exp(self.val)
        return self._unary(e, e, e)

    def log(self):
        v = self.val
        return self._unary(np.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._unary(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._unary(c, -s, -c)

    def sqrt(self):
        r = np.sqrt(self.val)
        return self._unary(r, 0.5 / r, -0.25 / (r * self.val))

    def __repr__(self):
        return f"Jet(val={self.val!r}, grad={self.grad!r})"


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)


def evaluate(func, x, order=2):
    """Evaluate ``func`` (a function of ``n`` real scalars) as a jet at ``x``.

    Constant results (functions that ignore their inputs) are promoted to jets
    with zero derivatives.
    """
    args = Jet.variables(x, order=order)
    out = func(*args)
    if not isinstance(out, Jet):
        out = args[0]._lift(out)
    return out
