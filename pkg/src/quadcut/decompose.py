"""Graph construction and tessellation of implicitly bounded domains.

``build_graph`` partitions a box until the isocontour is a height-function
graph on every body of a nested-body tree (bisecting the box on failure, and
designating a linear fallback past the subdivision budget).  ``tessellate``
assigns signs bottom-up, splitting bodies whose children straddle the
isocontour.  ``decompose_box`` runs the full pipeline for one box and returns
signed tiles ready for mapping extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .bernstein import Sign, SignConfig, body_sign, classify_value
from .errors import (
    DirectionUndetermined,
    InterpolationFailure,
    NewtonDiverged,
    StructuralInvariantViolation,
)
from .levelset import linearize
from .topology import (
    AXIS_NAMES,
    Body,
    ConstantHeight,
    ImplicitHeight,
    Level,
    NestedBody,
    Node,
    _newton_solve,
    face,
    split_nested_body,
)


@dataclass(frozen=True)
class GraphConfig:
    """Subdivision budget and sign-estimation settings."""

    max_subdivisions: int = 8
    sign: SignConfig = dc_field(default_factory=SignConfig)

    def __post_init__(self):
        if self.max_subdivisions < 0:
            raise ValueError("max_subdivisions must be >= 0")


class _GraphFailure(Exception):
    """Internal: the current box cannot be graphed with one direction per level."""


def _component_field(ls, axis):
    field = lambda pts: ls.gradient(pts)[:, axis]
    return field


def choose_height_direction(bodies, ls):
    """Axis maximising the mean absolute projected gradient over body centers.

    Only axes active in every body are candidates; ties break toward the
    lower axis index.
    """
    if not bodies:
        raise ValueError("empty body set")
    centers = np.stack([b.center() for b in bodies])
    grads = ls.gradient(centers)
    allowed = set(bodies[0].active)
    for b in bodies[1:]:
        allowed &= set(b.active)
    if not allowed:
        raise DirectionUndetermined("no common active axis")
    mean = np.zeros(centers.shape[1])
    for i, b in enumerate(bodies):
        for ax in b.active:
            mean[ax] += grads[i, ax]
    mean /= len(bodies)
    candidates = sorted(allowed)
    best = max(candidates, key=lambda ax: (abs(mean[ax]), -ax))
    if abs(mean[best]) == 0.0:
        raise DirectionUndetermined("mean projected gradient vanishes on all centers")
    return best


def is_graph(ls, body, axis, sign_cfg=SignConfig()):
    """True when the axis-component of the gradient has a definite sign on the body."""
    return body_sign(_component_field(ls, axis), body, sign_cfg).determined()


def _attempt_graph(box, ls, cfg):
    sign_cfg = cfg.sign
    root = Node(body_sign(ls.value, box, sign_cfg), (), box=box)
    levels = []
    current = [root]
    while True:
        pending = [nd for nd in current if nd.sign is Sign.INDETERMINATE]
        if not pending:
            break
        boxes = [nd.box for nd in pending]
        axis = choose_height_direction(boxes, ls)
        for b in boxes:
            if not is_graph(ls, b, axis, sign_cfg):
                raise _GraphFailure
        levels.append(
            Level(axis, ConstantHeight(box.lower[axis]), ConstantHeight(box.upper[axis]))
        )
        nxt = []
        for nd in pending:
            children = []
            for side in ("down", "up"):
                fb = face(nd.box, axis, side)
                children.append(Node(body_sign(ls.value, fb, sign_cfg), (), box=fb))
            nd.children = tuple(children)
            nxt.extend(children)
        current = nxt
    return NestedBody(box, levels, root, ls)


@dataclass
class FallbackCell:
    """Box whose subdivision budget ran out; handled by linearizing the field."""

    box: Body


def build_graph(box, ls, cfg=GraphConfig(), depth=0):
    """Recursively partition ``box`` into graph-compatible nested bodies.

    Returns a list of NestedBody and FallbackCell entries whose boxes
    partition the input box.
    """
    try:
        return [_attempt_graph(box, ls, cfg)]
    except (_GraphFailure, DirectionUndetermined, InterpolationFailure):
        if depth >= cfg.max_subdivisions:
            return [FallbackCell(box)]
        k1, k2 = box.bisect()
        return build_graph(k1, ls, cfg, depth + 1) + build_graph(k2, ls, cfg, depth + 1)


def tessellate(graph, cfg=GraphConfig()):
    """Assign a definite sign to every node, splitting along the isocontour.

    Returns the list of fully signed nested bodies whose roots tessellate the
    graph's root box.
    """
    done = []
    stack = [graph]
    while stack:
        nb = stack.pop()
        split = _tessellate_pass(nb, cfg)
        if split is None:
            done.append(nb)
        else:
            stack.extend(split)
    return done


def _tessellate_pass(nb, cfg):
    by_level = nb.nodes_by_level()
    for lvl in range(len(by_level) - 2, -1, -1):
        for node in by_level[lvl]:
            if node.sign is not Sign.INDETERMINATE:
                continue
            if len(node.children) != 2:
                raise StructuralInvariantViolation("undetermined node without children")
            s_lo = node.children[0].sign
            s_hi = node.children[1].sign
            if not (s_lo.determined() and s_hi.determined()):
                raise StructuralInvariantViolation("children processed out of order")
            if {s_lo, s_hi} == {Sign.MINUS, Sign.PLUS}:
                return split_nested_body(nb, node, lvl, cfg.sign)
            node.sign = s_lo if s_lo is not Sign.ZERO else s_hi
    return None


def newton_height(ls, point, axis, lo, hi):
    """Height of the isocontour of ``ls`` along ``axis`` through ``point``.

    The bracket [lo, hi] must change sign (or carry a root at an endpoint).
    """
    base = np.asarray(point, dtype=float).reshape(1, -1).copy()

    def assemble(a):
        pts = base.copy()
        pts[:, axis] = a
        return pts

    try:
        out = _newton_solve(ls, assemble, axis, np.array([float(lo)]), np.array([float(hi)]))
    except NewtonDiverged:
        raise
    return float(out[0])


@dataclass(frozen=True)
class Tile:
    """One fully signed nested body plus provenance for rule construction."""

    tree: NestedBody
    sign: Sign
    gamma_side: str | None  # 'lo' | 'hi' when a root child lies on the contour
    fallback: bool
    field: object

    @property
    def on_gamma(self):
        return self.gamma_side is not None


@dataclass
class DecompositionResult:
    minus: list = dc_field(default_factory=list)
    plus: list = dc_field(default_factory=list)
    zero: list = dc_field(default_factory=list)
    fallback_cells: list = dc_field(default_factory=list)

    def tiles(self, sign):
        if sign is Sign.MINUS:
            return self.minus
        if sign is Sign.PLUS:
            return self.plus
        return self.zero


def _gamma_side(tree):
    kids = tree.root.children
    if len(kids) != 2:
        return None
    if kids[1].sign is Sign.ZERO and kids[1].on_contour:
        return "hi"
    if kids[0].sign is Sign.ZERO and kids[0].on_contour:
        return "lo"
    return None


def _collect(result, trees, fallback, ls):
    for tree in trees:
        tile = Tile(tree, tree.root.sign, _gamma_side(tree), fallback, ls)
        if tree.root.sign is Sign.MINUS:
            result.minus.append(tile)
        elif tree.root.sign is Sign.PLUS:
            result.plus.append(tile)
        else:
            result.zero.append(tile)


def decompose_box(box, ls, cfg=GraphConfig()):
    """Full decomposition of one box: graph, tessellate, linear fallback."""
    result = DecompositionResult()
    for piece in build_graph(box, ls, cfg):
        if isinstance(piece, FallbackCell):
            result.fallback_cells.append(piece.box)
            lin = linearize(ls, piece.box.center())
            graphs = build_graph(piece.box, lin, cfg)
            for sub in graphs:
                if isinstance(sub, FallbackCell):  # pragma: no cover - planes always graph
                    raise StructuralInvariantViolation("linear fallback failed to graph")
                sub.fallback = True
                _collect(result, tessellate(sub, cfg), True, lin)
        else:
            _collect(result, tessellate(piece, cfg), False, ls)
    return result
