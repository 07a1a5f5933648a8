"""Batch driver: grids, sweeps, convergence reports and node-count reports.

The driver partitions the root box into c^3 cells, screens every cell with
one batched Bezier sign certificate per level set, and only runs the full
decomposition machinery on cells the screen leaves undetermined.  Fully
inside cells get the plain affine rule (identical, formula for formula, to
what the machinery emits for a whole-box tile).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .bernstein import Sign, SignConfig, _bernstein_inverse
from .decompose import GraphConfig
from .levelset import DerivativeLevelSet, LevelSet
from .mapping import MappingComposition, NestedMapping
from .presets import get_preset, preset_names
from .quadrature import (
    AdaptiveConfig,
    QuadratureRule,
    RefinementSpec,
    contour_split,
    integrate,
    line_rule,
    surface_rule,
    volume_rule,
    write_csv,
    _Collector,
)
from .topology import Body, ConstantHeight

TARGETS = ("volume", "surface-alpha", "surface-beta", "line")


@dataclass
class RunConfig:
    """One batch run; ``c``, ``n`` and ``s`` may be lists to request sweeps."""

    alpha: str | None = None
    beta: str | None = None
    target: str = "volume"
    g: str = "1"
    domain: tuple = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    c: object = 1
    n: object = 1
    s: object = 1
    tau: float | None = None
    max_depth: int = 8
    split_axis: str | None = None
    split_side: int | None = None
    reference: float | None = None
    preset: str | None = None
    out: str | None = None
    threads: int = 1
    strict: bool = False
    max_subdivisions: int = 8
    degree: int = 3

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def presets():
    """Names and definitions of the built-in experiments."""
    return {name: get_preset(name) for name in preset_names()}


@dataclass
class Resolved:
    alpha: LevelSet
    beta: LevelSet | None
    g: object
    target: str
    domain: Body
    split_axis: int | None
    split_side: int | None
    reference: object
    config: GraphConfig
    adaptive: AdaptiveConfig | None
    meta: dict


_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def _resolve(cfg):
    meta = {}
    alpha_expr, beta_expr, g_expr = cfg.alpha, cfg.beta, cfg.g
    split_axis = cfg.split_axis
    if cfg.preset:
        meta = get_preset(cfg.preset)
        alpha_expr = alpha_expr or meta["alpha"]
        beta_expr = beta_expr or meta.get("beta")
        if cfg.g == "1" and meta.get("g"):
            g_expr = meta["g"]
        split_axis = split_axis or meta.get("split_axis")
    if alpha_expr is None:
        raise ValueError("no level set: give alpha or a preset")
    if cfg.target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    if cfg.target == "line" and beta_expr is None and split_axis is None:
        raise ValueError("line target requires a second level set")

    alpha = alpha_expr if isinstance(alpha_expr, LevelSet) else LevelSet.from_expression(alpha_expr)
    beta = None
    if beta_expr is not None:
        beta = beta_expr if isinstance(beta_expr, LevelSet) else LevelSet.from_expression(beta_expr)
    g = None if g_expr in (None, "1") else LevelSet.from_expression(g_expr)

    reference = cfg.reference
    if reference is None and meta:
        refs = meta.get("references", {})
        if split_axis is not None and cfg.target == "surface-alpha":
            sides = refs.get("surface-alpha-split")
            if sides is not None:
                reference = sides if cfg.split_side is None else sides[cfg.split_side - 1]
        else:
            reference = refs.get(cfg.target)

    domain = Body.box(*cfg.domain)
    sign_cfg = SignConfig(degree=cfg.degree)
    graph_cfg = GraphConfig(max_subdivisions=cfg.max_subdivisions, sign=sign_cfg)
    adaptive = None if cfg.tau is None else AdaptiveConfig(cfg.tau, cfg.max_depth)
    axis = None if split_axis is None else _AXIS_INDEX[split_axis]
    if axis is not None and beta is not None:
        raise ValueError("contour splitting applies to single-level-set problems")
    return Resolved(
        alpha, beta, g, cfg.target, domain, axis, cfg.split_side,
        reference, graph_cfg, adaptive, meta,
    )


# ---------------------------------------------------------------------------
# Grid and batched sign screening
# ---------------------------------------------------------------------------

def grid_cells(domain, c):
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    edges = [np.linspace(lo[a], hi[a], c + 1) for a in range(3)]
    cells = []
    for i in range(c):
        for j in range(c):
            for k in range(c):
                cells.append(
                    Body.box(
                        (edges[0][i], edges[1][j], edges[2][k]),
                        (edges[0][i + 1], edges[1][j + 1], edges[2][k + 1]),
                    )
                )
    return cells


def screen_signs(ls, cells, sign_cfg):
    """Bezier range sign of ``ls`` on every cell, evaluated in one batch."""
    deg = sign_cfg.degree
    m = deg + 1
    frac = np.linspace(0.0, 1.0, m)
    mesh = np.stack(np.meshgrid(frac, frac, frac, indexing="ij"), axis=-1).reshape(-1, 3)
    lowers = np.array([c.lower for c in cells])
    extents = np.array([c.upper for c in cells]) - lowers
    pts = lowers[:, None, :] + mesh[None, :, :] * extents[:, None, :]
    vals = ls.value(pts.reshape(-1, 3)).reshape(len(cells), m, m, m)
    if not np.all(np.isfinite(vals)):
        # fall back to per-cell handling; undetermined keeps the cell alive
        finite = np.all(np.isfinite(vals.reshape(len(cells), -1)), axis=1)
    else:
        finite = None
    inv = _bernstein_inverse(deg)
    ctrl = np.einsum("ai,nijk->najk", inv, vals)
    ctrl = np.einsum("bj,najk->nabk", inv, ctrl)
    ctrl = np.einsum("ck,nabk->nabc", inv, ctrl)
    flat = ctrl.reshape(len(cells), -1)
    qmin = flat.min(axis=1)
    qmax = flat.max(axis=1)
    if sign_cfg.epsilon is not None:
        eps = np.full(len(cells), sign_cfg.epsilon)
    else:
        eps = 1e-10 * (1.0 + np.maximum(np.abs(qmin), np.abs(qmax)))
    out = np.full(len(cells), Sign.INDETERMINATE, dtype=object)
    out[(qmin < -eps) & (qmax <= eps)] = Sign.MINUS
    out[(qmin >= -eps) & (qmax <= eps)] = Sign.ZERO
    out[(qmin >= -eps) & (qmax > eps)] = Sign.PLUS
    if finite is not None:
        out[~finite] = Sign.INDETERMINATE
    return out


def _affine_cell_mapping(cell):
    pairs = [(ConstantHeight(cell.lower[a]), ConstantHeight(cell.upper[a])) for a in range(3)]
    return NestedMapping((0, 1, 2), pairs)


def _fast_cell_rule(cell, n, refine, adaptive, integrand):
    col = _Collector(n, refine, adaptive, integrand)
    col.add_chain(MappingComposition([_affine_cell_mapping(cell)]), 3)
    return col.to_rule()


# ---------------------------------------------------------------------------
# Per-cell rule dispatch
# ---------------------------------------------------------------------------

def _cell_rule(res, cell, n, refine, sa, sb):
    """Rule for one cell, given the screen signs of alpha and of the second
    field (beta, or the splitting gradient component)."""
    kw = dict(config=res.config, adaptive=res.adaptive,
              integrand=None if res.g is None else res.g.value)
    target = res.target
    alpha, beta = res.alpha, res.beta

    if res.split_axis is not None:
        return _cell_rule_split(res, cell, n, refine, sa, sb, kw)

    if target == "volume":
        if sa is Sign.PLUS or sb is Sign.PLUS:
            return QuadratureRule.empty()
        if sa is Sign.MINUS and (beta is None or sb is Sign.MINUS):
            return _fast_cell_rule(cell, n, refine, res.adaptive, kw["integrand"])
        return volume_rule(alpha, beta, cell, n, refine, **kw)
    if target == "surface-alpha":
        if sa is not Sign.INDETERMINATE or sb is Sign.PLUS:
            return QuadratureRule.empty()
        return surface_rule("alpha", alpha, beta, cell, n, refine, **kw)
    if target == "surface-beta":
        if sb is not Sign.INDETERMINATE or sa is Sign.PLUS:
            return QuadratureRule.empty()
        return surface_rule("beta", alpha, beta, cell, n, refine, **kw)
    if target == "line":
        if sa is not Sign.INDETERMINATE or sb is not Sign.INDETERMINATE:
            return QuadratureRule.empty()
        return line_rule(alpha, beta, cell, n, refine, **kw)
    raise ValueError(target)


def _cell_rule_split(res, cell, n, refine, sa, sd, kw):
    """Contour-splitting dispatch: the gradient component is decomposed first."""
    problems = contour_split(res.alpha, res.split_axis)
    sides = (1, 2) if res.split_side is None else (res.split_side,)
    if res.target == "volume":
        if sa is Sign.PLUS:
            return QuadratureRule.empty()
        if sa is Sign.MINUS and sd in (Sign.MINUS, Sign.PLUS):
            # fully inside, one split side covers the whole cell
            wanted = 1 if sd is Sign.MINUS else 2
            if wanted not in sides:
                return QuadratureRule.empty()
            return _fast_cell_rule(cell, n, refine, res.adaptive, kw["integrand"])
        parts = [
            volume_rule(problems[i - 1].first, problems[i - 1].second, cell, n, refine, **kw)
            for i in sides
        ]
        return QuadratureRule.concatenate(parts)
    if res.target == "surface-alpha":
        if sa is not Sign.INDETERMINATE:
            return QuadratureRule.empty()
        parts = [
            surface_rule("beta", problems[i - 1].first, problems[i - 1].second,
                         cell, n, refine, **kw)
            for i in sides
        ]
        return QuadratureRule.concatenate(parts)
    raise ValueError(f"target {res.target!r} is not supported with contour splitting")


def build_grid_rule(res, c, n, s, threads=1, strict=False, failures=None):
    """Rule over the whole domain grid; cells are screened then dispatched."""
    cells = grid_cells(res.domain, c)
    if res.split_axis is not None:
        screen_b = screen_signs(DerivativeLevelSet(res.alpha, res.split_axis), cells, res.config.sign)
    elif res.beta is not None:
        screen_b = screen_signs(res.beta, cells, res.config.sign)
    else:
        screen_b = [None] * len(cells)
    screen_a = screen_signs(res.alpha, cells, res.config.sign)
    refine = RefinementSpec(int(s))

    def work(idx):
        try:
            return _cell_rule(res, cells[idx], n, refine, screen_a[idx], screen_b[idx]).with_cell(idx)
        except Exception as exc:
            if strict:
                raise
            if failures is not None:
                failures.append((idx, repr(exc)))
            return QuadratureRule.empty()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rules = list(pool.map(work, range(len(cells))))
    else:
        rules = [work(i) for i in range(len(cells))]
    return QuadratureRule.concatenate(rules)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ReportRow:
    sweep: float
    n: int
    value: float
    error: float | None
    nodes: int
    seconds: float


@dataclass
class ConvergenceReport:
    sweep_name: str
    rows: list
    fitted_orders: dict
    failures: list = dc_field(default_factory=list)

    def table(self):
        lines = ["sweep,n,error,nodes,seconds"]
        for r in self.rows:
            err = "" if r.error is None else repr(r.error)
            lines.append(f"{r.sweep:g},{r.n},{err},{r.nodes},{r.seconds:.3f}")
        return "\n".join(lines)


def fitted_order(xs, errors, window=4):
    """Least-squares slope of log(error) against log(x) over the last points."""
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = np.isfinite(errors) & (errors > 0)
    xs, errors = xs[keep], errors[keep]
    if len(xs) < 2:
        return float("nan")
    xs, errors = xs[-window:], errors[-window:]
    slope = np.polyfit(np.log(xs), np.log(errors), 1)[0]
    return float(-slope)


def fitted_order_clean(xs, errors, window=4):
    """Fitted order after dropping the single worst positive outlier, if that
    improves the fit; convergence plots of curved tiles show isolated spikes."""
    base = fitted_order(xs, errors, window)
    best = base
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(xs) >= 3:
        for drop in range(len(xs)):
            keep = np.arange(len(xs)) != drop
            cand = fitted_order(xs[keep], errors[keep], window)
            if np.isfinite(cand) and (not np.isfinite(best) or cand > best):
                best = cand
    return best


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def run(cfg):
    """Execute a run configuration; returns the report (and writes files)."""
    res = _resolve(cfg)
    cs = _as_list(cfg.c)
    ss = _as_list(cfg.s)
    ns = _as_list(cfg.n)
    if len(cs) > 1 and len(ss) > 1:
        raise ValueError("sweep either c or s, not both")
    if cfg.preset and cs == [1] and res.meta.get("c"):
        cs = [res.meta["c"]]
    sweep_name, sweep_vals = ("s", ss) if len(ss) > 1 else ("c", cs)

    rows = []
    rules_out = []
    failures = []
    for n in ns:
        for val in sweep_vals:
            c = val if sweep_name == "c" else cs[0]
            s = val if sweep_name == "s" else ss[0]
            t0 = time.perf_counter()
            rule = build_grid_rule(res, int(c), int(n), int(s), cfg.threads, cfg.strict, failures)
            value = integrate(rule, None if res.g is None else res.g.value)
            dt = time.perf_counter() - t0
            ref = res.reference
            if ref is None:
                err = None
            elif isinstance(ref, tuple):
                err = abs(float(np.sum(ref)) - value)
            else:
                err = abs(float(ref) - value)
            rows.append(ReportRow(float(val), int(n), value, err, len(rule), dt))
            rules_out.append((n, c, s, rule))

    orders = {}
    if len(sweep_vals) > 1:
        for n in ns:
            sub = [r for r in rows if r.n == n]
            if all(r.error is not None for r in sub):
                orders[n] = fitted_order([r.sweep for r in sub], [r.error for r in sub])

    report = ConvergenceReport(sweep_name, rows, orders, failures)
    if cfg.out:
        import os

        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(report.table() + "\n")
        if len(rules_out) == 1:
            write_csv(rules_out[0][3], os.path.join(cfg.out, "rule.csv"))
        else:
            for n, c, s, rule in rules_out:
                write_csv(rule, os.path.join(cfg.out, f"rule_n{n}_{sweep_name}{c if sweep_name == 'c' else s}.csv"))
    return report


# ---------------------------------------------------------------------------
# Node-count report (thin sheets)
# ---------------------------------------------------------------------------

@dataclass
class NodeCountRow:
    l: float
    strategy: str
    nodes: int
    affected_cells: int


def node_count_report(preset, l_values, n=1, c=None, domain=None, target=None,
                      unrestricted_depth=24, degree=3):
    """Volume/surface node totals under plain subdivision vs contour splitting.

    Counts are restricted to the affected cells: those where both the level
    set and the splitting gradient component straddle zero.
    """
    from .levelset import DerivativeLevelSet

    rows = []
    for l in l_values:
        meta = get_preset(f"{preset}:l={l}")
        alpha = LevelSet.from_expression(meta["alpha"])
        axis = _AXIS_INDEX[meta["split_axis"]]
        use_c = c or meta.get("c", 1)
        box = Body.box(*(domain or ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))))
        cells = grid_cells(box, use_c)
        sign_cfg = SignConfig(degree=degree)
        sa = screen_signs(alpha, cells, sign_cfg)
        sd = screen_signs(DerivativeLevelSet(alpha, axis), cells, sign_cfg)
        affected = [
            i for i in range(len(cells))
            if sa[i] is Sign.INDETERMINATE and sd[i] is Sign.INDETERMINATE
        ]
        use_target = target or ("surface-alpha" if preset == "wavy-cylinder" else "volume")

        deep_cfg = GraphConfig(max_subdivisions=unrestricted_depth, sign=sign_cfg)
        base_cfg = GraphConfig(sign=sign_cfg)
        count_sub = 0
        count_split = 0
        for i in affected:
            cell = cells[i]
            if use_target == "volume":
                count_sub += len(volume_rule(alpha, None, cell, n, config=deep_cfg))
                for p in contour_split(alpha, axis):
                    count_split += len(volume_rule(p.first, p.second, cell, n, config=base_cfg))
            else:
                count_sub += len(surface_rule("alpha", alpha, None, cell, n, config=deep_cfg))
                for p in contour_split(alpha, axis):
                    count_split += len(surface_rule("beta", p.first, p.second, cell, n, config=base_cfg))
        rows.append(NodeCountRow(l, "subdivision", count_sub, len(affected)))
        rows.append(NodeCountRow(l, "contour-splitting", count_split, len(affected)))
    return rows
