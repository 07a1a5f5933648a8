"""Tensor Bezier interpolation and convex-hull sign estimation.

A scalar field on a body is interpolated at an equidistant tensor grid by a
Bernstein patch; the control points bound the patch's range, which yields a
cheap certificate for the field's sign on the body.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Any

import numpy as np

from .errors import InterpolationFailure


class Sign(enum.Enum):
    MINUS = "-"
    ZERO = "0"
    PLUS = "+"
    INDETERMINATE = "+-"

    def determined(self):
        return self is not Sign.INDETERMINATE


@dataclass(frozen=True)
class SignConfig:
    """Precision threshold and interpolation degree for sign estimates.

    ``epsilon=None`` selects the relative default 1e-10 * (1 + max|q_i|),
    which keeps the estimate scale invariant.
    """

    epsilon: float | None = None
    degree: int = 3

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")

    def threshold(self, magnitude):
        if self.epsilon is not None:
            return self.epsilon
        return 1e-10 * (1.0 + magnitude)


@lru_cache(maxsize=None)
def _bernstein_matrix(n):
    """Collocation matrix B_i(a/n) at the n+1 equidistant nodes on [0, 1]."""
    u = np.linspace(0.0, 1.0, n + 1)
    mat = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        mat[:, i] = comb(n, i) * u**i * (1.0 - u) ** (n - i)
    return mat


@lru_cache(maxsize=None)
def _bernstein_inverse(n):
    return np.linalg.inv(_bernstein_matrix(n))


def _bernstein_basis(n, u):
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (n + 1,))
    for i in range(n + 1):
        out[..., i] = comb(n, i) * u**i * (1.0 - u) ** (n - i)
    return out


@dataclass(frozen=True)
class BezierPatch:
    """Tensorized Bernstein interpolant of a field on a body."""

    body: Any
    degree: int
    control: np.ndarray  # shape (degree+1,) * dim(body)

    @property
    def qmin(self):
        return float(np.min(self.control))

    @property
    def qmax(self):
        return float(np.max(self.control))

    def __call__(self, params):
        """Evaluate at unit-cube parameters, shape (n, dim(body))."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        vals = self.control
        for axis in range(len(self.body.active)):
            basis = _bernstein_basis(self.degree, params[:, axis])  # (n, d+1)
            vals = np.einsum("ni,ni...->n...", basis, vals) if axis else np.einsum(
                "ni,i...->n...", basis, vals
            )
        return vals

    def points(self, params):
        """Map unit-cube parameters to ambient points of the body."""
        return self.body.embed_params(params)


def sample_grid(body, degree):
    """Equidistant tensor grid on the body, boundary included."""
    dim = len(body.active)
    n = degree + 1
    axes = [np.linspace(0.0, 1.0, n)] * dim
    if dim == 0:
        params = np.zeros((1, 0))
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        params = np.stack([m.ravel() for m in mesh], axis=-1)
    return params, body.embed_params(params)


def interpolate(field, body, degree):
    """Interpolate ``field`` on ``body`` by a Bezier patch of the given degree."""
    dim = len(body.active)
    params, pts = sample_grid(body, degree)
    samples = np.asarray(field(pts), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise InterpolationFailure("field is not finite at interpolation nodes")
    if dim == 0:
        return BezierPatch(body, degree, samples.reshape(()))
    samples = samples.reshape((degree + 1,) * dim)
    inv = _bernstein_inverse(degree)
    control = samples
    for axis in range(dim):
        control = np.tensordot(inv, np.moveaxis(control, axis, 0), axes=(1, 0))
        control = np.moveaxis(control, 0, axis)
    return BezierPatch(body, degree, control)


def estimate_sign(patch, cfg=SignConfig()):
    """Four-case sign rule on the control-point range."""
    qmin, qmax = patch.qmin, patch.qmax
    eps = cfg.threshold(max(abs(qmin), abs(qmax)))
    if qmin < -eps and qmax <= eps:
        return Sign.MINUS
    if qmin >= -eps and qmax <= eps:
        return Sign.ZERO
    if qmin >= -eps and qmax > eps:
        return Sign.PLUS
    return Sign.INDETERMINATE


def classify_value(v, cfg=SignConfig()):
    """Sign of a single sample (the dim-0 body case)."""
    eps = cfg.threshold(abs(v))
    if v < -eps:
        return Sign.MINUS
    if v > eps:
        return Sign.PLUS
    return Sign.ZERO


def body_sign(field, body, cfg=SignConfig()):
    """Estimated sign of a field over a body (interpolate + hull bound)."""
    if len(body.active) == 0:
        v = float(np.asarray(field(body.embed_params(np.zeros((1, 0)))))[0])
        if not np.isfinite(v):
            raise InterpolationFailure("field is not finite at a point body")
        return classify_value(v, cfg)
    return estimate_sign(interpolate(field, body, cfg.degree), cfg)
