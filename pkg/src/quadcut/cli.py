"""Command-line front-end.

Subcommands::

    quadcut run [--config FILE] [--preset NAME] [--alpha EXPR] ...
    quadcut presets
    quadcut node-report --preset NAME [--l L1,L2,...] ...

``run`` prints the convergence table and writes report.csv plus rule files
when --out is given.  Numeric flags accepting comma-separated lists (--c,
--n, --s) request sweeps.
"""

from __future__ import annotations

import argparse
import json
import sys

from .presets import get_preset, preset_names
from .runner import RunConfig, node_count_report, run


def _int_list(text):
    vals = [int(v) for v in str(text).split(",") if v != ""]
    return vals[0] if len(vals) == 1 else vals


def _float_list(text):
    vals = [float(v) for v in str(text).split(",") if v != ""]
    return vals


def _build_parser():
    parser = argparse.ArgumentParser(prog="quadcut", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="construct rules, integrate, report")
    p_run.add_argument("--config", help="JSON file with RunConfig fields")
    p_run.add_argument("--preset", help="experiment preset, e.g. spherical-lens or slanted-sheet:l=0.03")
    p_run.add_argument("--alpha", help="first level-set expression")
    p_run.add_argument("--beta", help="second level-set expression")
    p_run.add_argument("--g", help="integrand expression (default 1)")
    p_run.add_argument("--target", choices=("volume", "surface-alpha", "surface-beta", "line"))
    p_run.add_argument("--c", type=_int_list, help="cells per axis (comma list sweeps)")
    p_run.add_argument("--n", type=_int_list, help="Gauss order per axis (comma list sweeps)")
    p_run.add_argument("--s", type=_int_list, help="uniform refinements per mapping domain")
    p_run.add_argument("--tau", type=float, help="adaptive relative-error threshold")
    p_run.add_argument("--max-depth", type=int, dest="max_depth", help="adaptive depth cap")
    p_run.add_argument("--split-axis", choices=("x", "y", "z"), dest="split_axis")
    p_run.add_argument("--split-side", type=int, choices=(1, 2), dest="split_side")
    p_run.add_argument("--reference", type=float, help="exact value for error columns")
    p_run.add_argument("--out", help="output directory for report.csv and rule files")
    p_run.add_argument("--threads", type=int)
    p_run.add_argument("--strict", action="store_true", default=None)
    p_run.add_argument("--max-subdivisions", type=int, dest="max_subdivisions")
    p_run.add_argument("--degree", type=int, help="Bezier degree for sign estimates")
    p_run.add_argument("--domain", help="root box as x0,y0,z0,x1,y1,z1")

    p_pre = sub.add_parser("presets", help="list built-in experiments")
    p_pre.add_argument("--json", action="store_true", help="machine-readable output")

    p_node = sub.add_parser("node-report", help="subdivision vs contour-splitting node counts")
    p_node.add_argument("--preset", required=True)
    p_node.add_argument("--l", type=_float_list, default=[0.1, 0.03, 0.01])
    p_node.add_argument("--n", type=int, default=1)
    p_node.add_argument("--c", type=int)
    p_node.add_argument("--target", choices=("volume", "surface-alpha"))
    p_node.add_argument("--domain", help="root box as x0,y0,z0,x1,y1,z1")
    p_node.add_argument("--unrestricted-depth", type=int, default=24, dest="unrestricted_depth")
    return parser


def _parse_domain(text):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 6:
        raise SystemExit("--domain needs six comma-separated numbers")
    return (tuple(vals[:3]), tuple(vals[3:]))


def _cmd_run(args):
    data = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    overrides = {
        key: getattr(args, key)
        for key in (
            "preset", "alpha", "beta", "g", "target", "c", "n", "s", "tau",
            "max_depth", "split_axis", "split_side", "reference", "out",
            "threads", "strict", "max_subdivisions", "degree",
        )
        if getattr(args, key) is not None
    }
    if args.domain:
        overrides["domain"] = _parse_domain(args.domain)
    data.update(overrides)
    cfg = RunConfig.from_dict(data)
    report = run(cfg)
    print(report.table())
    for n, order in sorted(report.fitted_orders.items()):
        print(f"# fitted order (n={n}): {order:.3f}")
    for idx, msg in report.failures:
        print(f"# cell {idx} failed: {msg}", file=sys.stderr)
    return 1 if report.failures else 0


def _cmd_presets(args):
    if args.json:
        print(json.dumps({name: get_preset(name) for name in preset_names()}, indent=2, default=str))
        return 0
    for name in preset_names():
        meta = get_preset(name)
        beta = meta.get("beta") or "-"
        print(f"{name}: alpha = {meta['alpha']}")
        print(f"{'':>{len(name) + 2}}beta  = {beta}")
        if meta.get("notes"):
            print(f"{'':>{len(name) + 2}}{meta['notes']}")
    return 0


def _cmd_node_report(args):
    kwargs = dict(n=args.n, c=args.c, target=args.target,
                  unrestricted_depth=args.unrestricted_depth)
    if args.domain:
        kwargs["domain"] = _parse_domain(args.domain)
    rows = node_count_report(args.preset, args.l, **kwargs)
    print("l,strategy,nodes,affected_cells")
    for row in rows:
        print(f"{row.l:g},{row.strategy},{row.nodes},{row.affected_cells}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "presets":
        return _cmd_presets(args)
    if args.command == "node-report":
        return _cmd_node_report(args)
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
