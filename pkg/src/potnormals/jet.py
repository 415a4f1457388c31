"""Degree-3 truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet3` carries the value of a scalar function of ``dim`` variables
together with all of its partial derivatives up to order three, stored as
dense symmetric arrays.  Arithmetic propagates them exactly (Leibniz rule for
products, univariate Faa di Bruno for the primitive functions), so the third
partials of an expression cost one forward sweep.

:func:`fd_partials` is a deliberately independent central-difference oracle
used by the tests to cross-check the jet arithmetic.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, JetDomainError, StencilError

__all__ = [
    "FD_STEP",
    "UNARY_FUNCTIONS",
    "Jet3",
    "fd_partials",
    "jet_arith",
    "jet_constant",
    "jet_unary",
    "jet_variable",
]

# default finite-difference steps, keyed by derivative order
FD_STEP = {1: 1e-3, 2: 1e-3, 3: 5e-3}


def _sym3(p):
    # p[i,j,k] = x_ij * y_k  ->  x_ij y_k + x_ik y_j + x_jk y_i
    return p + p.transpose(0, 2, 1) + p.transpose(2, 0, 1)


def _symmetrize2(h):
    return 0.5 * (h + h.T)


def _symmetrize3(t):
    return (
        t
        + t.transpose(0, 2, 1)
        + t.transpose(1, 0, 2)
        + t.transpose(1, 2, 0)
        + t.transpose(2, 0, 1)
        + t.transpose(2, 1, 0)
    ) / 6.0


class Jet3:
    """Value and partial derivatives up to order 3 of a scalar function.

    ``hess`` and ``third`` are symmetrized on construction.  Instances are
    treated as immutable: every operation returns a new jet.
    """

    __slots__ = ("grad", "hess", "third", "value")

    def __init__(self, value, grad, hess=None, third=None):
        grad = np.asarray(grad, dtype=float)
        if grad.ndim != 1 or grad.size == 0:
            raise DimensionMismatch("grad must be a nonempty vector")
        n = grad.size
        hess = np.zeros((n, n)) if hess is None else np.asarray(hess, dtype=float)
        third = np.zeros((n, n, n)) if third is None else np.asarray(third, dtype=float)
        if hess.shape != (n, n) or third.shape != (n, n, n):
            raise DimensionMismatch(
                f"derivative shapes {hess.shape}, {third.shape} do not match dim {n}"
            )
        self.value = float(value)
        self.grad = grad.copy()
        self.hess = _symmetrize2(hess)
        self.third = _symmetrize3(third)

    @classmethod
    def _raw(cls, value, grad, hess, third):
        # trusted constructor: arrays already have the right shape and symmetry
        jet = object.__new__(cls)
        jet.value = value
        jet.grad = grad
        jet.hess = hess
        jet.third = third
        return jet

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    def derivative(self, indices: Sequence[int]) -> float:
        """Partial derivative for an index tuple of length 0 to 3."""
        k = len(indices)
        if k == 0:
            return self.value
        if k == 1:
            return float(self.grad[indices[0]])
        if k == 2:
            return float(self.hess[indices[0], indices[1]])
        if k == 3:
            return float(self.third[indices[0], indices[1], indices[2]])
        raise ValueError("jets are truncated at order 3")

    def __repr__(self):
        return f"Jet3(value={self.value!r}, grad={self.grad.tolist()!r}, dim={self.dim})"

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet3):
            if other.dim != self.dim:
                raise DimensionMismatch(f"jet dimensions differ: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return jet_constant(float(other), self.dim)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return Jet3._raw(self.value + other, self.grad, self.hess, self.third)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet3._raw(
            self.value + other.value,
            self.grad + other.grad,
            self.hess + other.hess,
            self.third + other.third,
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet3._raw(-self.value, -self.grad, -self.hess, -self.third)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return Jet3._raw(self.value - other, self.grad, self.hess, self.third)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet3._raw(
            self.value - other.value,
            self.grad - other.grad,
            self.hess - other.hess,
            self.third - other.third,
        )

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Jet3._raw(
                self.value * other, self.grad * other, self.hess * other, self.third * other
            )
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        f, g = self, other
        fg1 = np.multiply.outer(f.grad, g.grad)
        hess = f.hess * g.value + fg1 + fg1.T + f.value * g.hess
        third = (
            f.third * g.value
            + _sym3(np.multiply.outer(f.hess, g.grad))
            + _sym3(np.multiply.outer(g.hess, f.grad))
            + f.value * g.third
        )
        grad = f.grad * g.value + f.value * g.grad
        return Jet3._raw(f.value * g.value, grad, hess, third)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                raise JetDomainError("division by zero")
            q = self * (1.0 / other)
            q.value = self.value / other
            return q
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        q = self * other.reciprocal()
        # keep the value bit-identical to plain division
        q.value = self.value / other.value
        return q

    def __rtruediv__(self, other):
        q = self.reciprocal() * other
        q.value = other / self.value
        return q

    def __pow__(self, exponent):
        if isinstance(exponent, Jet3):
            raise TypeError("only constant exponents are supported")
        return self.pow_const(float(exponent))

    # -- composition with univariate functions ------------------------------

    def compose(self, d0, d1, d2, d3):
        """Jet of phi(self) given phi and its first three derivatives at self.value."""
        gr = self.grad
        hess = d2 * np.multiply.outer(gr, gr) + d1 * self.hess
        third = (
            d3 * np.multiply.outer(np.multiply.outer(gr, gr), gr)
            + d2 * _sym3(np.multiply.outer(self.hess, gr))
            + d1 * self.third
        )
        return Jet3._raw(d0, d1 * gr, hess, third)

    def reciprocal(self):
        t = self.value
        if t == 0:
            raise JetDomainError("division by a jet with zero value")
        r = 1.0 / t
        return self.compose(r, -r * r, 2 * r**3, -6 * r**4)

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self.compose(s, c, -s, -c)

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self.compose(c, -s, -c, s)

    def exp(self):
        try:
            e = math.exp(self.value)
        except OverflowError:
            raise JetDomainError(f"exp overflow at {self.value!r}") from None
        return self.compose(e, e, e, e)

    def ln(self):
        t = self.value
        if t <= 0:
            raise JetDomainError(f"ln of nonpositive value {t!r}")
        r = 1.0 / t
        return self.compose(math.log(t), r, -r * r, 2 * r**3)

    def sqrt(self):
        t = self.value
        if t <= 0:
            raise JetDomainError(f"sqrt jet needs a positive value, got {t!r}")
        s = math.sqrt(t)
        return self.compose(s, 0.5 / s, -0.25 / (s * t), 0.375 / (s * t * t))

    def pow_const(self, p: float):
        return self.compose(*pow_derivatives(self.value, p))


def _falling(p, k):
    out = 1.0
    for m in range(k):
        out *= p - m
    return out


def pow_derivatives(t: float, p: float):
    """(t**p, d/dt, d2/dt2, d3/dt3) for a constant real exponent ``p``."""
    is_int = float(p).is_integer()
    if t < 0 and not is_int:
        raise JetDomainError(f"negative base {t!r} with non-integer exponent {p!r}")
    out = []
    for k in range(4):
        coef = _falling(p, k)
        e = p - k
        if coef == 0.0:
            out.append(0.0)
        elif t == 0.0:
            if e > 0:
                out.append(0.0)
            elif e == 0:
                out.append(coef)
            else:
                raise JetDomainError(f"0 ** {p!r} is not differentiable to order {k}")
        else:
            try:
                out.append(coef * (t ** int(e) if is_int else t**e))
            except OverflowError:
                raise JetDomainError(f"overflow in {t!r} ** {p!r}") from None
    return tuple(out)


def jet_variable(index: int, value: float, dim: int) -> Jet3:
    """Seed jet for the coordinate function ``u[index]``."""
    if dim < 1:
        raise DimensionMismatch("dim must be positive")
    if not 0 <= index < dim:
        raise IndexError(f"variable index {index} out of range for dim {dim}")
    grad = np.zeros(dim)
    grad[index] = 1.0
    return Jet3._raw(float(value), grad, np.zeros((dim, dim)), np.zeros((dim, dim, dim)))


def jet_constant(value: float, dim: int) -> Jet3:
    return Jet3._raw(float(value), np.zeros(dim), np.zeros((dim, dim)), np.zeros((dim, dim, dim)))


_BINARY = {
    "add": lambda x, y: x + y,
    "sub": lambda x, y: x - y,
    "mul": lambda x, y: x * y,
    "div": lambda x, y: x / y,
}


def jet_arith(op: str, x: Jet3, y: Jet3 | None = None) -> Jet3:
    """Apply ``add``, ``sub``, ``mul``, ``div`` (binary) or ``neg`` (unary)."""
    if op == "neg":
        return -x
    try:
        fn = _BINARY[op]
    except KeyError:
        raise ValueError(f"unknown jet operation {op!r}") from None
    if y is None:
        raise TypeError(f"{op} needs two operands")
    if x.dim != y.dim:
        raise DimensionMismatch(f"jet dimensions differ: {x.dim} vs {y.dim}")
    return fn(x, y)


UNARY_FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")


def jet_unary(fn: str, x: Jet3, exponent: float | None = None) -> Jet3:
    if fn == "pow_const":
        if exponent is None:
            raise TypeError("pow_const requires an exponent")
        return x.pow_const(exponent)
    if fn not in UNARY_FUNCTIONS:
        raise ValueError(f"unknown jet function {fn!r}")
    return getattr(x, fn)()


# weights of the 1-D central stencils, per multiplicity of an index:
# list of (offset in units of h, weight * h**multiplicity)
_STENCILS = {
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def fd_partials(
    f: Callable[[np.ndarray], float],
    u: Sequence[float],
    order: int,
    indices: Sequence[int],
    step: float | None = None,
) -> float:
    """Central-difference estimate of a mixed partial of order 1 to 3.

    The stencil is a tensor product of the standard one-dimensional central
    formulas for each distinct index, so the error is O(step**2).
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if len(indices) != order:
        raise ValueError(f"expected {order} indices, got {len(indices)}")
    h = FD_STEP[order] if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    u = np.asarray(u, dtype=float)
    for i in indices:
        if not 0 <= i < u.size:
            raise IndexError(f"index {i} out of range for a point of size {u.size}")

    axes = sorted(Counter(indices).items())
    total = 0.0
    for combo in itertools.product(*(_STENCILS[m] for _, m in axes)):
        point = u.copy()
        weight = 1.0
        for (axis, _), (offset, w) in zip(axes, combo):
            point[axis] += offset * h
            weight *= w
        try:
            value = f(point)
        except Exception as exc:
            raise StencilError(f"evaluation failed at {point.tolist()}: {exc}") from exc
        total += weight * value
    return total / h**order
