"""Level-set fields with value, gradient and Hessian evaluation.

All evaluators are vectorized: points have shape (n, dim) and results have
shape (n,), (n, dim) and (n, dim, dim).  ``dim`` is 3 for ambient level sets
and 2 for fields restricted to a mapped face.
"""

from __future__ import annotations

import numpy as np

from . import expr
from .errors import CapabilityMissing, NonFiniteEvaluation


class LevelSet:
    """Scalar field with derivatives up to second order.

    Built either from an expression (see :mod:`quadcut.expr`) or from plain
    callables.  Instances are immutable and safe to share across threads.
    """

    def __init__(self, value, gradient=None, hessian=None, dim=3, label=None):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._jet1 = None
        self.dim = dim
        self.label = label

    @classmethod
    def from_expression(cls, text):
        ast = expr.parse(text)

        def value(pts):
            return expr.eval_jet(ast, pts, order=0)[0]

        def gradient(pts):
            return expr.eval_jet(ast, pts, order=1)[1]

        def hessian(pts):
            return expr.eval_jet(ast, pts, order=2)[2]

        ls = cls(value, gradient, hessian, dim=3, label=text)
        ls._jet1 = lambda pts: expr.eval_jet(ast, pts, order=1)[:2]
        return ls

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        with np.errstate(all="ignore"):
            return self._value(pts)

    def __call__(self, pts):
        return self.value(pts)

    def eval(self, pts):
        """Value evaluation that rejects non-finite results."""
        v = self.value(pts)
        if not np.all(np.isfinite(v)):
            raise NonFiniteEvaluation(f"level set {self.label!r} is singular at a requested point")
        return v

    def gradient(self, pts):
        if self._gradient is None:
            raise CapabilityMissing("level set has no gradient evaluator")
        pts = np.asarray(pts, dtype=float)
        with np.errstate(all="ignore"):
            return self._gradient(pts)

    def hessian(self, pts):
        if self._hessian is None:
            raise CapabilityMissing("level set has no Hessian evaluator")
        pts = np.asarray(pts, dtype=float)
        with np.errstate(all="ignore"):
            return self._hessian(pts)

    def value_and_gradient(self, pts):
        """Value and gradient in one pass where the backend supports it."""
        if self._jet1 is not None:
            pts = np.asarray(pts, dtype=float)
            with np.errstate(all="ignore"):
                return self._jet1(pts)
        return self.value(pts), self.gradient(pts)

    def __repr__(self):
        return f"LevelSet({self.label!r})" if self.label else super().__repr__()


def negate(ls):
    """The field -f with derivatives flipped."""
    return LevelSet(
        lambda p: -ls.value(p),
        lambda p: -ls.gradient(p),
        lambda p: -ls.hessian(p),
        dim=ls.dim,
        label=None if ls.label is None else f"-({ls.label})",
    )


def constant(c, dim=3):
    return LevelSet(
        lambda p: np.full(len(p), float(c)),
        lambda p: np.zeros((len(p), dim)),
        lambda p: np.zeros((len(p), dim, dim)),
        dim=dim,
        label=repr(c),
    )


def linearize(ls, center):
    """First-order Taylor expansion of ``ls`` at ``center`` (the fallback field)."""
    c = np.asarray(center, dtype=float)
    v0 = float(ls.value(c[None])[0])
    g0 = ls.gradient(c[None])[0].copy()
    dim = ls.dim

    return LevelSet(
        lambda p: v0 + (np.asarray(p, dtype=float) - c) @ g0,
        lambda p: np.broadcast_to(g0, (len(p), dim)).copy(),
        lambda p: np.zeros((len(p), dim, dim)),
        dim=dim,
        label=f"lin({ls.label})",
    )


class DerivativeLevelSet(LevelSet):
    """The field d(base)/d(axis), used as the splitting level set.

    Values reuse the base gradient evaluator, so they agree bit-for-bit with
    ``base.gradient(x)[:, axis]``.  Second derivatives of the base are the
    gradient here; a Hessian would need third derivatives of the base and is
    reported as missing.
    """

    def __init__(self, base, axis):
        self.base = base
        self.axis = axis
        super().__init__(
            value=lambda p: base.gradient(p)[:, axis],
            gradient=lambda p: base.hessian(p)[:, axis, :],
            hessian=None,
            dim=base.dim,
            label=f"d/d{'xyz'[axis]}({base.label})",
        )


class TransformedLevelSet(LevelSet):
    """A level set composed with a mapping carrier: f(T(x)).

    The carrier is a nested mapping or a mapping composition; it must provide
    ``eval``, ``jacobian`` and (for Hessians) ``component_hessians``.
    """

    def __init__(self, base, carrier):
        self.base = base
        self.carrier = carrier
        super().__init__(
            value=None, gradient=None, hessian=None,
            dim=carrier.dim_in,
            label=f"({base.label})∘T",
        )

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.base.value(self.carrier.eval(pts))

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        x = self.carrier.eval(pts)
        jac = self.carrier.jacobian(pts)
        return np.einsum("noi,no->ni", jac, self.base.gradient(x))

    def value_and_gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        x = self.carrier.eval(pts)
        v, g = self.base.value_and_gradient(x)
        jac = self.carrier.jacobian(pts)
        return v, np.einsum("noi,no->ni", jac, g)

    def hessian(self, pts):
        pts = np.asarray(pts, dtype=float)
        if not hasattr(self.carrier, "component_hessians"):
            raise CapabilityMissing("carrier provides no second derivatives")
        x = self.carrier.eval(pts)
        jac = self.carrier.jacobian(pts)
        hc = self.carrier.component_hessians(pts)
        hb = self.base.hessian(x)
        gb = self.base.gradient(x)
        return np.einsum("noi,nop,npj->nij", jac, hb, jac) + np.einsum(
            "no,noij->nij", gb, hc
        )


# ---------------------------------------------------------------------------
# Built-in shapes
# ---------------------------------------------------------------------------

def plane(normal=(0.0, 0.0, 1.0), offset=0.0):
    nx, ny, nz = normal
    return LevelSet.from_expression(f"({nx})*x + ({ny})*y + ({nz})*z - ({offset})")


def sphere(center=(0.0, 0.0, 0.0), radius=1.0):
    cx, cy, cz = center
    return LevelSet.from_expression(
        f"(x - ({cx}))^2 + (y - ({cy}))^2 + (z - ({cz}))^2 - ({radius})^2"
    )


def torus(major=0.6, minor=0.3):
    return LevelSet.from_expression(
        f"(sqrt(x^2 + y^2) - ({major}))^2 + z^2 - ({minor})^2"
    )
