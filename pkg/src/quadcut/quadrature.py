"""Quadrature rules on implicitly bounded volumes, surfaces and lines.

Rules are built per box: the first level set is decomposed into signed tiles,
each tile is the codomain of a nested mapping, and a tensorized Gauss rule is
pushed through the mapping chain.  A second level set is handled by
transforming it onto the tile's hypercube and decomposing again; surfaces and
lines insert face embeddings into the chain and weight by Gram determinants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bernstein import Sign
from .decompose import GraphConfig, decompose_box
from .errors import NonFiniteIntegrand, OrderUnsupported
from .levelset import DerivativeLevelSet, TransformedLevelSet, negate
from .mapping import FaceEmbedding, MappingComposition, from_tile, gamma_embedding
from .topology import Body

MAX_ORDER = 32


@dataclass(frozen=True)
class BaseRule:
    """Tensor-product Gauss-Legendre rule on [-1,1]^dim."""

    dim: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray


def tensor_gauss(n, dim):
    if not 1 <= n <= MAX_ORDER:
        raise OrderUnsupported(f"Gauss order {n} outside [1, {MAX_ORDER}]")
    if dim not in (1, 2, 3):
        raise OrderUnsupported(f"dimension {dim} outside {{1,2,3}}")
    x, w = leggauss(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(n**dim)
    for g in np.meshgrid(*([w] * dim), indexing="ij"):
        weights *= g.ravel()
    return BaseRule(dim, n, nodes, weights)


@dataclass(frozen=True)
class RefinementSpec:
    """Uniform subdivision of each mapping domain into s^dim subcells."""

    subdivisions: int = 1

    def __post_init__(self):
        if self.subdivisions < 1:
            raise ValueError("subdivisions must be >= 1")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Relative-error threshold and depth cap for adaptive subdivision."""

    threshold: float
    max_depth: int = 8

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


class QuadratureRule:
    """Flat node/weight arrays with per-node provenance (cell, tile, depth)."""

    def __init__(self, nodes, weights, cells=None, tiles=None, depths=None):
        self.nodes = np.asarray(nodes, dtype=float).reshape(-1, 3)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        n = len(self.weights)
        self.cells = np.zeros(n, dtype=np.int64) if cells is None else np.asarray(cells, dtype=np.int64)
        self.tiles = np.zeros(n, dtype=np.int64) if tiles is None else np.asarray(tiles, dtype=np.int64)
        self.depths = np.zeros(n, dtype=np.int64) if depths is None else np.asarray(depths, dtype=np.int64)

    def __len__(self):
        return len(self.weights)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros(0))

    @classmethod
    def concatenate(cls, rules):
        rules = [r for r in rules if len(r)]
        if not rules:
            return cls.empty()
        return cls(
            np.concatenate([r.nodes for r in rules]),
            np.concatenate([r.weights for r in rules]),
            np.concatenate([r.cells for r in rules]),
            np.concatenate([r.tiles for r in rules]),
            np.concatenate([r.depths for r in rules]),
        )

    def total_weight(self):
        return float(np.sum(self.weights))

    def with_cell(self, cell_id):
        self.cells[:] = cell_id
        return self


def integrate(rule, g=None):
    """Sum w_i g(x_i) with per-cell partial sums reduced in fixed order."""
    if len(rule) == 0:
        return 0.0
    if g is None:
        vals = rule.weights
    else:
        gv = np.asarray(g(rule.nodes), dtype=float)
        if not np.all(np.isfinite(gv)):
            bad = int(np.argmin(np.isfinite(gv)))
            raise NonFiniteIntegrand(
                "integrand not finite at a quadrature node",
                node=rule.nodes[bad],
                provenance=(int(rule.cells[bad]), int(rule.tiles[bad]), int(rule.depths[bad])),
            )
        vals = rule.weights * gv
    order = np.argsort(rule.cells, kind="stable")
    vals = vals[order]
    bounds = np.flatnonzero(np.diff(rule.cells[order])) + 1
    partial = np.add.reduceat(vals, np.concatenate([[0], bounds]))
    while len(partial) > 1:
        half = len(partial) // 2
        head = partial[: 2 * half].reshape(half, 2).sum(axis=1)
        partial = np.concatenate([head, partial[2 * half:]])
    return float(partial[0])


# ---------------------------------------------------------------------------
# Rule emission on mapping domains
# ---------------------------------------------------------------------------

def _subcell_grid(s, dim):
    edges = np.linspace(-1.0, 1.0, s + 1)
    lows = np.meshgrid(*([edges[:-1]] * dim), indexing="ij")
    return np.stack([lo.ravel() for lo in lows], axis=-1), 2.0 / s


def _uniform_nodes(base, s):
    """Replicate a base rule on the s^dim uniform subcells of [-1,1]^dim."""
    if s == 1:
        return base.nodes, base.weights
    lows, width = _subcell_grid(s, base.dim)
    half = 0.5 * width
    nodes = lows[:, None, :] + half * (base.nodes[None, :, :] + 1.0)
    weights = np.tile(base.weights * half**base.dim, len(lows))
    return nodes.reshape(-1, base.dim), weights


def _chain_rule_builder(chain, base):
    def build(lo, hi):
        half = 0.5 * (hi - lo)
        u = lo + half * (base.nodes + 1.0)
        x = chain.eval(u)
        w = chain.measure(u) * base.weights * np.prod(half)
        return x, w

    return build


def adaptive_rule(builder, g, cfg, dim):
    """Dyadically subdivide a mapping domain until the local relative error
    estimate between a rule and its uniformly split refinement is below the
    threshold; returns (nodes, weights, depth) triples of the accepted pieces."""
    lo = -np.ones(dim)
    hi = np.ones(dim)
    x0, w0 = builder(lo, hi)
    return _adaptive_over(builder, g, cfg, lo, hi, x0, w0)


class _Collector:
    def __init__(self, n, refine, adaptive, integrand):
        self.n = n
        self.s = refine.subdivisions if isinstance(refine, RefinementSpec) else int(refine)
        self.adaptive = adaptive
        self.integrand = integrand
        self.parts = []
        self.tile_id = 0

    def add_chain(self, chain, dim):
        base = tensor_gauss(self.n, dim)
        tid = self.tile_id
        self.tile_id += 1
        if self.adaptive is None:
            u, w_ref = _uniform_nodes(base, self.s)
            x = chain.eval(u)
            w = chain.measure(u) * w_ref
            if len(w):
                self.parts.append((x, w, np.zeros(len(w), dtype=np.int64), tid))
            return
        build = _chain_rule_builder(chain, base)
        if self.s == 1:
            cells = [(-np.ones(dim), np.ones(dim))]
        else:
            lows, width = _subcell_grid(self.s, dim)
            cells = [(lo, lo + width) for lo in lows]
        for lo, hi in cells:
            x0, w0 = build(lo, hi)
            pieces = _adaptive_over(build, self.integrand, self.adaptive, lo, hi, x0, w0)
            for x, w, depth in pieces:
                if len(w):
                    self.parts.append((x, w, np.full(len(w), depth, dtype=np.int64), tid))

    def to_rule(self):
        if not self.parts:
            return QuadratureRule.empty()
        nodes = np.concatenate([p[0] for p in self.parts])
        if nodes.shape[1] != 3:
            raise ValueError("rule nodes must be ambient 3-D points")
        weights = np.concatenate([p[1] for p in self.parts])
        depths = np.concatenate([p[2] for p in self.parts])
        tiles = np.concatenate([np.full(len(p[1]), p[3], dtype=np.int64) for p in self.parts])
        return QuadratureRule(nodes, weights, tiles=tiles, depths=depths)


def _adaptive_over(build, g, cfg, lo, hi, x0, w0):
    gfun = (lambda x: np.ones(len(x))) if g is None else g
    dim = len(lo)
    offsets = _subcell_grid(2, dim)[0]

    def quad(x, w):
        return float(np.dot(np.asarray(gfun(x), dtype=float), w))

    def recurse(lo, hi, x, w, depth):
        half = 0.5 * (hi - lo)
        kid_boxes = [(lo + 0.5 * (off + 1.0) * (hi - lo), lo + 0.5 * (off + 1.0) * (hi - lo) + half) for off in offsets]
        kid_rules = [build(klo, khi) for klo, khi in kid_boxes]
        coarse = quad(x, w)
        fine = sum(quad(kx, kw) for kx, kw in kid_rules)
        diff = abs(coarse - fine)
        err = diff / abs(coarse) if abs(coarse) >= 1e-300 else diff
        if err <= cfg.threshold or depth >= cfg.max_depth:
            return [(x, w, depth)]
        out = []
        for (klo, khi), (kx, kw) in zip(kid_boxes, kid_rules):
            out.extend(recurse(klo, khi, kx, kw, depth + 1))
        return out

    return recurse(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), x0, w0, 0)


def _unit_box(dim):
    return Body.box((-1.0,) * dim, (1.0,) * dim)


# ---------------------------------------------------------------------------
# Rule constructors
# ---------------------------------------------------------------------------

def _as_refine(refine):
    return refine if isinstance(refine, RefinementSpec) else RefinementSpec(int(refine))


def volume_rule(alpha, beta, box, n, refine=RefinementSpec(), *, config=GraphConfig(),
                adaptive=None, integrand=None, side=Sign.MINUS):
    """Volume rule over {alpha <= 0} (and {beta <= 0} if given) inside box."""
    col = _Collector(n, _as_refine(refine), adaptive, integrand)
    dec = decompose_box(box, alpha, config)
    for tile in dec.tiles(side):
        a_map = from_tile(tile)
        if beta is None:
            col.add_chain(MappingComposition([a_map]), a_map.dim)
            continue
        bt = TransformedLevelSet(beta, a_map)
        inner = decompose_box(_unit_box(a_map.dim), bt, config)
        for btile in inner.minus:
            b_map = from_tile(btile)
            col.add_chain(MappingComposition([a_map, b_map]), b_map.dim)
    return col.to_rule()


def surface_rule(which, alpha, beta, box, n, refine=RefinementSpec(), *,
                 config=GraphConfig(), adaptive=None, integrand=None):
    """Surface rule on the zero set of ``which`` ('alpha' or 'beta'),
    restricted to the negative side of the other level set."""
    if which not in ("alpha", "beta"):
        raise ValueError("which must be 'alpha' or 'beta'")
    if which == "beta" and beta is None:
        raise ValueError("surface 'beta' requested without a second level set")
    col = _Collector(n, _as_refine(refine), adaptive, integrand)
    dec = decompose_box(box, alpha, config)
    if which == "alpha":
        for tile in dec.minus:
            if not tile.on_gamma:
                continue
            a_map = from_tile(tile)
            embed = gamma_embedding(tile, a_map)
            face_chain = MappingComposition([a_map, embed])
            if beta is None:
                col.add_chain(face_chain, embed.dim_in)
                continue
            bt = TransformedLevelSet(beta, face_chain)
            inner = decompose_box(_unit_box(embed.dim_in), bt, config)
            for btile in inner.minus:
                b_map = from_tile(btile)
                col.add_chain(MappingComposition([a_map, embed, b_map]), b_map.dim)
    else:
        for tile in dec.minus:
            a_map = from_tile(tile)
            bt = TransformedLevelSet(beta, a_map)
            inner = decompose_box(_unit_box(a_map.dim), bt, config)
            for btile in inner.minus:
                if not btile.on_gamma:
                    continue
                b_map = from_tile(btile)
                embed = gamma_embedding(btile, b_map)
                col.add_chain(MappingComposition([a_map, b_map, embed]), embed.dim_in)
    return col.to_rule()


def line_rule(alpha, beta, box, n, refine=RefinementSpec(), *, config=GraphConfig(),
              adaptive=None, integrand=None):
    """Rule on the intersection line of the two zero sets inside box."""
    if beta is None:
        raise ValueError("line rule requires two level sets")
    col = _Collector(n, _as_refine(refine), adaptive, integrand)
    dec = decompose_box(box, alpha, config)
    for tile in dec.minus:
        if not tile.on_gamma:
            continue
        a_map = from_tile(tile)
        embed_a = gamma_embedding(tile, a_map)
        face_chain = MappingComposition([a_map, embed_a])
        bt = TransformedLevelSet(beta, face_chain)
        inner = decompose_box(_unit_box(embed_a.dim_in), bt, config)
        for btile in inner.minus:
            if not btile.on_gamma:
                continue
            b_map = from_tile(btile)
            embed_b = gamma_embedding(btile, b_map)
            col.add_chain(
                MappingComposition([a_map, embed_a, b_map, embed_b]), embed_b.dim_in
            )
    return col.to_rule()


# ---------------------------------------------------------------------------
# Contour splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitProblem:
    """Two-level-set subproblem: the gradient component is decomposed first,
    the original level set second, so the pinched contour never needs
    internal subdivision."""

    first: object
    second: object


def contour_split(alpha, axis):
    """Split {alpha <= 0} along the zero set of d(alpha)/d(axis)."""
    derivative = DerivativeLevelSet(alpha, axis)
    return (
        SplitProblem(derivative, alpha),
        SplitProblem(negate(derivative), alpha),
    )


def split_volume_rule(alpha, axis, box, n, refine=RefinementSpec(), **kw):
    parts = [
        volume_rule(p.first, p.second, box, n, refine, **kw)
        for p in contour_split(alpha, axis)
    ]
    return QuadratureRule.concatenate(parts)


def split_surface_rules(alpha, axis, box, n, refine=RefinementSpec(), **kw):
    """Surface rules of {alpha = 0} on each side of the splitting contour."""
    return tuple(
        surface_rule("beta", p.first, p.second, box, n, refine, **kw)
        for p in contour_split(alpha, axis)
    )


# ---------------------------------------------------------------------------
# CSV export / import
# ---------------------------------------------------------------------------

def write_csv(rule, path, provenance=True):
    with open(path, "w", encoding="utf-8") as fh:
        if provenance:
            fh.write("x,y,z,w,cell,tile,depth\n")
            for i in range(len(rule)):
                x, y, z = (float(v) for v in rule.nodes[i])
                fh.write(
                    f"{x!r},{y!r},{z!r},{float(rule.weights[i])!r},"
                    f"{rule.cells[i]},{rule.tiles[i]},{rule.depths[i]}\n"
                )
        else:
            fh.write("x,y,z,w\n")
            for i in range(len(rule)):
                x, y, z = (float(v) for v in rule.nodes[i])
                fh.write(f"{x!r},{y!r},{z!r},{float(rule.weights[i])!r}\n")


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    nodes = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows]) if rows else np.zeros((0, 3))
    weights = np.array([float(r[3]) for r in rows]) if rows else np.zeros(0)
    if "cell" in header and rows:
        cells = np.array([int(r[4]) for r in rows], dtype=np.int64)
        tiles = np.array([int(r[5]) for r in rows], dtype=np.int64)
        depths = np.array([int(r[6]) for r in rows], dtype=np.int64)
        return QuadratureRule(nodes, weights, cells, tiles, depths)
    return QuadratureRule(nodes, weights)
