"""Nested mappings from hypercubes onto curved tiles, and their calculus.

A nested mapping interpolates each coordinate affinely between a lower and an
upper height function of the previously mapped coordinates,

    t_j = ((hi_j - lo_j) * u_j + hi_j + lo_j) / 2 ,

stage by stage in nesting order.  Its Jacobian is triangular in that order
and its determinant is the plain product of the pair gaps, no derivatives
needed.  Face embeddings pin one hypercube coordinate to +-1; compositions
chain mappings and embeddings and expose the Gram determinant
sqrt(det(J^T J)) used as the measure factor of lower-dimensional images.
"""

from __future__ import annotations

import numpy as np

from .bernstein import Sign
from .errors import DerivativeSingular, NotTessellated


class NestedMapping:
    """Mapping [-1,1]^k -> tile, driven by height-function pairs.

    ``axes[j]`` is the ambient axis produced at stage j; the hypercube input
    coordinate feeding stage j is the same ambient index, so permuted nesting
    orders leave the image set unchanged.
    """

    def __init__(self, axes, pairs):
        self.axes = tuple(axes)
        self.pairs = list(pairs)
        self.dim = len(axes)
        self.dim_in = self.dim_out = self.dim

    # -- forward evaluation ------------------------------------------------

    def _stages(self, u):
        """Per-stage (t, lo, hi, prefix) for inputs ``u`` of shape (n, k)."""
        n = u.shape[0]
        prefix = np.empty((n, 0))
        stages = []
        for j, (ax, (lo, hi)) in enumerate(zip(self.axes, self.pairs)):
            lo_v = lo.value(prefix)
            hi_v = hi.value(prefix)
            t = 0.5 * ((hi_v - lo_v) * u[:, ax] + hi_v + lo_v)
            stages.append((t, lo_v, hi_v, prefix))
            prefix = np.concatenate([prefix, t[:, None]], axis=1)
        return stages

    def eval(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        for ax, (t, _, _, _) in zip(self.axes, self._stages(u)):
            out[:, ax] = t
        return out

    def jacobian_det(self, u):
        """Product formula over the pair gaps; no height derivatives needed."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.ones(u.shape[0])
        for t, lo_v, hi_v, _ in self._stages(u):
            out *= 0.5 * (hi_v - lo_v)
        return out

    def jacobian(self, u):
        """Full (n, k, k) Jacobian in ambient indexing."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n, k = u.shape
        stages = self._stages(u)
        jac = np.zeros((n, k, k))
        for j, (ax, (lo, hi)) in enumerate(zip(self.axes, self.pairs)):
            t, lo_v, hi_v, prefix = stages[j]
            jac[:, ax, ax] = 0.5 * (hi_v - lo_v)
            for p in range(j):
                dlo = lo.deriv(prefix, p)
                dhi = hi.deriv(prefix, p)
                coeff = 0.5 * ((dhi - dlo) * u[:, ax] + dhi + dlo)
                jac[:, ax, :] += coeff[:, None] * jac[:, self.axes[p], :]
        return jac

    def component_hessians(self, u):
        """(n, k, k, k): Hessian of each ambient component w.r.t. the inputs."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n, k = u.shape
        stages = self._stages(u)
        jac = np.zeros((n, k, k))
        hess = np.zeros((n, k, k, k))
        for j, (ax, (lo, hi)) in enumerate(zip(self.axes, self.pairs)):
            t, lo_v, hi_v, prefix = stages[j]
            jac[:, ax, ax] = 0.5 * (hi_v - lo_v)
            rows_p = [jac[:, self.axes[p], :].copy() for p in range(j)]
            for p in range(j):
                dlo = lo.deriv(prefix, p)
                dhi = hi.deriv(prefix, p)
                coeff = 0.5 * ((dhi - dlo) * u[:, ax] + dhi + dlo)
                jac[:, ax, :] += coeff[:, None] * rows_p[p]
            h = hess[:, ax]
            for p in range(j):
                dlo = lo.deriv(prefix, p)
                dhi = hi.deriv(prefix, p)
                coeff = 0.5 * ((dhi - dlo) * u[:, ax] + dhi + dlo)
                gap = 0.5 * (dhi - dlo)
                h += coeff[:, None, None] * hess[:, self.axes[p]]
                cross = gap[:, None] * rows_p[p]
                h[:, :, ax] += cross
                h[:, ax, :] += cross
                for q in range(j):
                    d2lo = lo.second(prefix, p, q)
                    d2hi = hi.second(prefix, p, q)
                    c2 = 0.5 * ((d2hi - d2lo) * u[:, ax] + d2hi + d2lo)
                    h += c2[:, None, None] * (
                        rows_p[p][:, :, None] * rows_p[q][:, None, :]
                    )
        return hess

    def __repr__(self):
        order = "".join("xyz"[a] for a in self.axes)
        return f"NestedMapping(order={order})"


class FaceEmbedding:
    """Embeds [-1,1]^(k-1) into the side=-1/+1 face of [-1,1]^k."""

    def __init__(self, dim, pin_axis, side):
        self.dim = dim
        self.pin_axis = pin_axis
        self.side = float(side)
        self.kept = tuple(a for a in range(dim) if a != pin_axis)
        self.dim_in = dim - 1
        self.dim_out = dim

    def eval(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.empty((u.shape[0], self.dim))
        out[:, self.pin_axis] = self.side
        for j, ax in enumerate(self.kept):
            out[:, ax] = u[:, j]
        return out

    def jacobian(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        jac = np.zeros((u.shape[0], self.dim, self.dim_in))
        for j, ax in enumerate(self.kept):
            jac[:, ax, j] = 1.0
        return jac

    def component_hessians(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.zeros((u.shape[0], self.dim, self.dim_in, self.dim_in))

    def __repr__(self):
        return f"FaceEmbedding(axis={self.pin_axis}, side={self.side:+.0f})"


class MappingComposition:
    """Ordered chain T = chain[0] o chain[1] o ... o chain[-1]."""

    def __init__(self, chain):
        self.chain = list(chain)
        for outer, inner in zip(self.chain, self.chain[1:]):
            if outer.dim_in != inner.dim_out:
                raise ValueError("incompatible chain dimensions")
        self.dim_in = self.chain[-1].dim_in
        self.dim_out = self.chain[0].dim_out

    def _inputs(self, u):
        """Input point batches per element, innermost first."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        inputs = [u]
        for el in reversed(self.chain[1:]):
            inputs.append(el.eval(inputs[-1]))
        return inputs  # inputs[i] feeds chain[-1 - i]

    def eval(self, u):
        inputs = self._inputs(u)
        return self.chain[0].eval(inputs[-1])

    def jacobian(self, u):
        inputs = self._inputs(u)
        jac = None
        for el, x in zip(reversed(self.chain), inputs):
            j_el = el.jacobian(x)
            jac = j_el if jac is None else j_el @ jac
        return jac

    def component_hessians(self, u):
        inputs = self._inputs(u)
        jac = None
        hess = None
        for el, x in zip(reversed(self.chain), inputs):
            j_el = el.jacobian(x)
            h_el = el.component_hessians(x)
            if jac is None:
                jac, hess = j_el, h_el
            else:
                hess = np.einsum("nip,npab->niab", j_el, hess) + np.einsum(
                    "nipq,npa,nqb->niab", h_el, jac, jac
                )
                jac = j_el @ jac
        return hess

    def gram_det(self, u):
        """sqrt(det(J^T J)); reduces to |det J| for square chains."""
        jac = self.jacobian(u)
        if jac.shape[1] == jac.shape[2]:
            return np.abs(np.linalg.det(jac))
        gram = np.einsum("nij,nik->njk", jac, jac)
        if gram.shape[1] == 1:
            return np.sqrt(gram[:, 0, 0])
        return np.sqrt(np.linalg.det(gram))

    def measure(self, u):
        """Weight factor of the chain: product of Jacobian determinants when
        every element is full-dimensional, Gram determinant otherwise."""
        if all(isinstance(el, NestedMapping) for el in self.chain):
            inputs = self._inputs(u)
            out = np.ones(inputs[0].shape[0])
            for el, x in zip(reversed(self.chain), inputs):
                out *= np.abs(el.jacobian_det(x))
            return out
        return self.gram_det(u)


def from_tile(tile):
    """Extract the nested mapping of a signed tile."""
    tree = tile.tree if hasattr(tile, "tree") else tile
    if tree.root.sign is Sign.INDETERMINATE:
        raise NotTessellated("tile root has undetermined sign")
    return NestedMapping(tree.nesting_axes(), tree.nesting_pairs())


def gamma_embedding(tile, mapping=None):
    """Face embedding selecting the hypercube face that maps onto the contour."""
    if tile.gamma_side is None:
        raise NotTessellated("tile is not adjacent to the isocontour")
    mapping = mapping or from_tile(tile)
    pin = mapping.axes[-1]
    side = -1.0 if tile.gamma_side == "lo" else 1.0
    return FaceEmbedding(mapping.dim, pin, side)


# ---------------------------------------------------------------------------
# Implicit derivatives of height functions on a graph
# ---------------------------------------------------------------------------

def height_first_deriv(ls, points, height_axis, tangent_axis):
    """d a_h / d t on the isocontour: -(d_t f) / (d_h f)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g = ls.gradient(points)
    gh = g[:, height_axis]
    if np.any(np.abs(gh) < 1e-14):
        raise DerivativeSingular("vanishing gradient component along the height axis")
    return -g[:, tangent_axis] / gh


def height_second_deriv(ls, points, height_axis, t1, t2):
    """Second implicit derivative d^2 a_h / (d t1 d t2) on the isocontour."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g = ls.gradient(points)
    gh = g[:, height_axis]
    if np.any(np.abs(gh) < 1e-14):
        raise DerivativeSingular("vanishing gradient component along the height axis")
    hess = ls.hessian(points)
    d1 = -g[:, t1] / gh
    d2 = -g[:, t2] / gh
    num = (
        hess[:, t1, t2]
        + hess[:, t1, height_axis] * d2
        + hess[:, t2, height_axis] * d1
        + hess[:, height_axis, height_axis] * d1 * d2
    )
    return -num / gh
