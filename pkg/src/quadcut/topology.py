"""Axis-aligned bodies, height functions and the nested-body tree.

A nested body is a strict rooted binary tree: the root is a box, each level
attaches the two faces of its parents along one height direction, and leaves
are either sign-determined bodies or zero-dimensional points.  Splitting a
nested body along an isocontour replaces one level's bounding pair by an
implicit height function evaluated on demand with a safeguarded Newton
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .bernstein import Sign, SignConfig, classify_value
from .errors import (
    AxisInactive,
    BracketInvalid,
    DerivativeSingular,
    NewtonDiverged,
    StructuralInvariantViolation,
)

AXIS_NAMES = "xyz"


@dataclass(frozen=True)
class Body:
    """Axis-aligned body: a box with some axes pinned (zero extent)."""

    lower: tuple
    upper: tuple
    active: tuple

    @classmethod
    def box(cls, lower, upper):
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        active = tuple(i for i in range(len(lower)) if lower[i] < upper[i])
        return cls(lower, upper, active)

    @property
    def ambient_dim(self):
        return len(self.lower)

    @property
    def dim(self):
        return len(self.active)

    def center(self):
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def extent(self, axis):
        return self.upper[axis] - self.lower[axis]

    def volume(self):
        out = 1.0
        for ax in self.active:
            out *= self.extent(ax)
        return out

    def embed_params(self, params):
        """Map unit-cube parameters (n, dim) to ambient points (n, ambient_dim)."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        pts = np.empty((params.shape[0], self.ambient_dim))
        pts[:] = self.lower
        for j, ax in enumerate(self.active):
            pts[:, ax] = self.lower[ax] + params[:, j] * self.extent(ax)
        return pts

    def bisect(self):
        """Split along the longest active axis, ties broken x < y < z."""
        ax = max(self.active, key=lambda a: (self.extent(a), -a))
        mid = 0.5 * (self.lower[ax] + self.upper[ax])
        up1 = list(self.upper)
        up1[ax] = mid
        lo2 = list(self.lower)
        lo2[ax] = mid
        k1 = Body(self.lower, tuple(up1), self.active)
        k2 = Body(tuple(lo2), self.upper, self.active)
        return k1, k2


def face(body, axis, side):
    """Lower ('down') or upper ('up') face of a body along an active axis."""
    if axis not in body.active:
        raise AxisInactive(f"axis {AXIS_NAMES[axis]} is inactive in {body}")
    pin = body.lower[axis] if side == "down" else body.upper[axis]
    lower = list(body.lower)
    upper = list(body.upper)
    lower[axis] = upper[axis] = pin
    active = tuple(a for a in body.active if a != axis)
    return Body(tuple(lower), tuple(upper), active)


def project(x, axis):
    """Orthogonal projection flattening one coordinate."""
    out = np.array(x, dtype=float)
    out[..., axis] = 0.0
    return out


# ---------------------------------------------------------------------------
# Height functions
# ---------------------------------------------------------------------------

class ConstantHeight:
    """Constant height function (a box face)."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = float(c)

    def value(self, T):
        return np.full(len(T), self.c)

    def deriv(self, T, i):
        return np.zeros(len(T))

    def second(self, T, i, j):
        return np.zeros(len(T))

    def __repr__(self):
        return f"ConstantHeight({self.c})"


def _newton_solve(field, assemble, axis, lo, hi, max_iter=50):
    """Vectorized safeguarded Newton for f(..., a, ...) = 0 with a in [lo, hi].

    ``assemble(a)`` builds the ambient points for height values ``a``.  Steps
    falling outside the current bracket, or hitting a tiny directional
    derivative, are replaced by bisection.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    flo = np.asarray(field.value(assemble(lo)), dtype=float)
    fhi = np.asarray(field.value(assemble(hi)), dtype=float)
    tol = 1e-12 * (1.0 + np.maximum(np.abs(flo), np.abs(fhi)))
    end_tol = 1e-9 * (1.0 + np.maximum(np.abs(flo), np.abs(fhi)))

    a = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    done = (np.abs(flo) <= tol) | (np.abs(fhi) <= tol) | (hi - lo <= 0.0)
    a = np.where(hi - lo <= 0.0, lo, a)

    no_change = ~done & (np.sign(flo) == np.sign(fhi))
    if np.any(no_change):
        near = np.minimum(np.abs(flo), np.abs(fhi)) <= end_tol
        if not np.all(near[no_change]):
            raise BracketInvalid("no sign change across the height bracket")
        done = done | no_change

    active = ~done
    if not np.any(active):
        return a

    blo = lo.copy()
    bhi = hi.copy()
    slo = np.sign(flo)
    x = np.where(active, 0.5 * (lo + hi), a)
    width_tol = 1e-15 * (1.0 + hi - lo)

    for _ in range(max_iter):
        f, g = field.value_and_gradient(assemble(x))
        f = np.asarray(f, dtype=float)
        grad = np.asarray(g, dtype=float)[:, axis]
        newly = active & (np.abs(f) <= tol)
        a = np.where(newly, x, a)
        active = active & ~newly
        if not np.any(active):
            return a
        same = np.sign(f) == slo
        blo = np.where(active & same, x, blo)
        bhi = np.where(active & ~same, x, bhi)
        collapsed = active & (bhi - blo <= width_tol)
        a = np.where(collapsed, 0.5 * (blo + bhi), a)
        active = active & ~collapsed
        if not np.any(active):
            return a
        with np.errstate(all="ignore"):
            step = x - f / grad
        ok = (np.abs(grad) > 1e-14) & np.isfinite(step) & (step > blo) & (step < bhi)
        x = np.where(active, np.where(ok, step, 0.5 * (blo + bhi)), x)
    raise NewtonDiverged(f"{int(np.sum(active))} height solves did not converge")


class ImplicitHeight:
    """Height function defined by a level-set zero crossing along one axis.

    Arguments ``T`` are the preceding mapped coordinates, ordered to match
    ``base_axes``; remaining ambient coordinates are pinned to the constants
    the carrier body had when the cut was created.  Solutions are memoized
    per exact input batch.
    """

    __slots__ = ("field", "axis", "base_axes", "pins", "lo", "hi", "_memo")

    def __init__(self, field, axis, base_axes, pins, lo, hi):
        self.field = field
        self.axis = axis
        self.base_axes = tuple(base_axes)
        self.pins = tuple(pins)
        self.lo = lo
        self.hi = hi
        self._memo = {}

    def _assemble(self, T):
        ambient = self.field.dim
        pts = np.empty((len(T), ambient))
        for j, ax in enumerate(self.base_axes):
            pts[:, ax] = T[:, j]
        for ax, v in self.pins:
            pts[:, ax] = v
        return pts

    def value(self, T):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        key = (T.shape, T.tobytes())
        hit = self._memo.get(key)
        if hit is not None:
            return hit.copy()
        base = self._assemble(T)

        def assemble(a):
            pts = base.copy()
            pts[:, self.axis] = a
            return pts

        a = _newton_solve(self.field, assemble, self.axis, self.lo.value(T), self.hi.value(T))
        self._memo[key] = a
        return a.copy()

    def surface_points(self, T):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        pts = self._assemble(T)
        pts[:, self.axis] = self.value(T)
        return pts

    def _grad(self, T):
        g = self.field.gradient(self.surface_points(T))
        gh = g[:, self.axis]
        if np.any(np.abs(gh) < 1e-14):
            raise DerivativeSingular("vanishing directional gradient on a height graph")
        return g, gh

    def deriv(self, T, i):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        g, gh = self._grad(T)
        return -g[:, self.base_axes[i]] / gh

    def second(self, T, i, j):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        g, gh = self._grad(T)
        hess = self.field.hessian(self.surface_points(T))
        bi, bj = self.base_axes[i], self.base_axes[j]
        di = -g[:, bi] / gh
        dj = -g[:, bj] / gh
        num = (
            hess[:, bi, bj]
            + hess[:, bi, self.axis] * dj
            + hess[:, bj, self.axis] * di
            + hess[:, self.axis, self.axis] * di * dj
        )
        return -num / gh

    def __repr__(self):
        return f"ImplicitHeight(axis={AXIS_NAMES[self.axis]}, pins={self.pins})"


# ---------------------------------------------------------------------------
# Nested bodies
# ---------------------------------------------------------------------------

class Node:
    """Tree node; children are (lower, upper) along the level's direction."""

    __slots__ = ("sign", "children", "box", "cut", "on_contour")

    def __init__(self, sign, children=(), box=None, cut=None, on_contour=False):
        self.sign = sign
        self.children = children
        self.box = box
        self.cut = cut
        self.on_contour = on_contour


@dataclass
class Level:
    """Per-level height direction and bounding height-function pair."""

    axis: int
    lo: object
    hi: object


@dataclass
class NestedBody:
    """Strict rooted binary tree of bodies over a root box."""

    root_box: Body
    levels: list
    root: Node
    field: object
    fallback: bool = False

    def nesting_axes(self):
        assigned = [lvl.axis for lvl in self.levels]
        unassigned = [a for a in self.root_box.active if a not in assigned]
        return unassigned + [lvl.axis for lvl in reversed(self.levels)]

    def nesting_pairs(self):
        pairs = []
        assigned = {lvl.axis for lvl in self.levels}
        for a in self.root_box.active:
            if a not in assigned:
                pairs.append(
                    (ConstantHeight(self.root_box.lower[a]), ConstantHeight(self.root_box.upper[a]))
                )
        for lvl in reversed(self.levels):
            pairs.append((lvl.lo, lvl.hi))
        return pairs

    def stage_of_level(self, level):
        n_unassigned = self.root_box.dim - len(self.levels)
        return n_unassigned + (len(self.levels) - 1 - level)

    def base_midpoint(self, stages):
        """Midpoint chain through the first ``stages`` nesting pairs."""
        pairs = self.nesting_pairs()
        t = np.zeros((1, 0))
        for j in range(stages):
            lo, hi = pairs[j]
            tj = 0.5 * (lo.value(t) + hi.value(t))
            t = np.concatenate([t, tj[:, None]], axis=1)
        return t

    def nodes_by_level(self):
        out = []
        frontier = [self.root]
        while frontier:
            out.append(frontier)
            frontier = [c for nd in frontier for c in nd.children]
        return out

    def describe(self):
        """Structured text dump for golden-file tests."""
        lines = []
        for lvl, level in enumerate(self.levels):
            stage = self.stage_of_level(lvl)
            t = self.base_midpoint(stage)
            lo = float(level.lo.value(t)[0])
            hi = float(level.hi.value(t)[0])
            lines.append(
                f"level {lvl}: h={AXIS_NAMES[level.axis]} lo={lo:.12g} hi={hi:.12g}"
            )

        def walk(node, depth):
            kind = "cut" if node.cut is not None else "box"
            lines.append(f"{'  ' * depth}{kind} sign={node.sign.value}")
            for c in node.children:
                walk(c, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def _find_pins(nb, target, level):
    """Constant ambient pins accumulated on the path from the root to target."""

    def walk(node, lvl, pins):
        if node is target:
            return pins
        if lvl >= level or not node.children:
            return None
        here = nb.levels[lvl]
        for side, child in zip(("lo", "hi"), node.children):
            bound = here.lo if side == "lo" else here.hi
            got = walk(child, lvl + 1, pins + ((here.axis, _const_value(bound)),))
            if got is not None:
                return got
        return None

    pins = walk(nb.root, 0, ())
    if pins is None:
        raise StructuralInvariantViolation("split target is not a node of this nested body")
    return pins


def split_nested_body(nb, target, level, sign_cfg=SignConfig()):
    """Split a nested body along the isocontour crossing ``target``.

    The cut is the implicit height function of the tree's field, anchored at
    the target's pinned coordinates.  Every node of the target's level is
    mirrored with the same cut (its sign probed by one point evaluation), and
    the level's bounding pair is rewired to (lo, cut) / (cut, hi).
    """
    if target.sign is not Sign.INDETERMINATE or len(target.children) != 2:
        raise StructuralInvariantViolation("split target must be undetermined with two children")
    signs = {target.children[0].sign, target.children[1].sign}
    if signs != {Sign.MINUS, Sign.PLUS}:
        raise StructuralInvariantViolation("split target's children must have opposite signs")

    pair = nb.levels[level]
    stage = nb.stage_of_level(level)
    base_axes = tuple(nb.nesting_axes()[:stage])
    cut = ImplicitHeight(
        nb.field, pair.axis, base_axes, _find_pins(nb, target, level), pair.lo, pair.hi
    )
    t_mid = nb.base_midpoint(stage)
    a_mid = cut.value(t_mid)

    def probe_sign(pins):
        """Sign of the field at one explicit point of a mirrored cut body."""
        pt = np.zeros((1, nb.field.dim))
        for j, ax in enumerate(base_axes):
            pt[0, ax] = t_mid[0, j]
        for ax, v in pins:
            pt[0, ax] = v
        pt[0, pair.axis] = a_mid[0]
        v = float(np.asarray(nb.field.value(pt))[0])
        return classify_value(v, sign_cfg)

    def cut_leaves(node, pins):
        if node is target:
            sign, on_gamma = Sign.ZERO, True
        else:
            sign = probe_sign(pins)
            on_gamma = sign is Sign.ZERO
        kid1 = Node(sign, (), cut=cut, on_contour=on_gamma)
        kid2 = Node(sign, (), cut=cut, on_contour=on_gamma)
        return kid1, kid2

    def rewrite(node, lvl, pins):
        if not node.children:
            return node, node
        if lvl == level:
            kid1, kid2 = cut_leaves(node, pins)
            if node is target:
                s1 = target.children[0].sign
                s2 = target.children[1].sign
            else:
                s1 = s2 = node.sign
            n1 = Node(s1, (node.children[0], kid1))
            n2 = Node(s2, (kid2, node.children[1]))
            return n1, n2
        here = nb.levels[lvl]
        lo_pin = pins + ((here.axis, _const_value(here.lo)),)
        hi_pin = pins + ((here.axis, _const_value(here.hi)),)
        l1, l2 = rewrite(node.children[0], lvl + 1, lo_pin)
        h1, h2 = rewrite(node.children[1], lvl + 1, hi_pin)
        return Node(node.sign, (l1, h1)), Node(node.sign, (l2, h2))

    root1, root2 = rewrite(nb.root, 0, ())
    levels1 = [Level(l.axis, l.lo, l.hi) for l in nb.levels]
    levels2 = [Level(l.axis, l.lo, l.hi) for l in nb.levels]
    levels1[level] = Level(pair.axis, pair.lo, cut)
    levels2[level] = Level(pair.axis, cut, pair.hi)
    nb1 = NestedBody(nb.root_box, levels1, root1, nb.field, nb.fallback)
    nb2 = NestedBody(nb.root_box, levels2, root2, nb.field, nb.fallback)
    return nb1, nb2


def _const_value(height):
    if not isinstance(height, ConstantHeight):
        raise StructuralInvariantViolation(
            "ancestor pins of a split must still be constant height functions"
        )
    return height.c
