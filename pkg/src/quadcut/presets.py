"""The five built-in experiments: level sets, integrands and reference values.

References are stored to all printed digits.  The thin-cylindrical-sheet and
wavy-cylinder presets are single-level-set problems that use contour
splitting along one gradient component; their ``split_side`` references list
the value on the {d_h alpha <= 0} side first.
"""

from __future__ import annotations

import math

SQRT14 = math.sqrt(14.0)

_OSC = "(1/5)*sin(20*pi*x/11)"


def _slanted_sheet(l=0.1):
    return {
        "alpha": f"((4/5)*x - y)^2 - ({l!r})^2",
        "beta": None,
        "g": "1",
        "split_axis": "y",
        "params": {"l": l},
        "references": {},
        "notes": "two parallel planar sheets; node-count experiments",
    }


def _wavy_cylinder(l=0.001):
    return {
        "alpha": f"x^2 + (y + (1/5)*sin(pi*z))^2 - (2/3 + ({l!r}))^2",
        "beta": None,
        "g": "1",
        "split_axis": "y",
        "c": 6,
        "params": {"l": l},
        "references": {},
        "notes": "perturbed cylinder; node-count experiments",
    }


def _thin_cylindrical_sheet(l=1.0 / 50.0):
    return {
        "alpha": f"(x^2 + y^2 - 1/(z + 11/5)^2)^2 - ({l!r})^2",
        "beta": None,
        "g": "1",
        "split_axis": "z",
        "c": 20,
        "params": {"l": l},
        "references": {
            # surface areas of the two sheets: {core <= 0} side first
            "surface-alpha-split": (
                6.2377886792891965132267781181652,
                6.775163182554902237379363684639,
            ),
        },
        "notes": "rational level set; split surfaces have analytic areas",
    }


_PRESETS = {
    "oscillating-edge": lambda: {
        "alpha": f"z - {_OSC}",
        "beta": f"y - {_OSC}",
        "g": "1",
        "references": {
            "line": 2.9018098242473137628716230441128,
            "surface-alpha": 2.5048230500093248969863804012397,
            "surface-beta": 2.5048230500093248969863804012397,
            "volume": 2.0431849934260147426243415665995,
        },
        "notes": "trigonometric sheets meeting in a sharp oscillating edge",
    },
    "spherical-lens": lambda: {
        "alpha": "(x+1)^2 + (y+1)^2 + (z + 49/100)^2 - (9/10)^2",
        "beta": "(x+1)^2 + (y+1)^2 + (z - 51/100)^2 - (9/10)^2",
        "g": "1",
        "references": {
            "line": SQRT14 * math.pi / 10.0,
            "surface-alpha": 9.0 * math.pi / 50.0,
            "surface-beta": 9.0 * math.pi / 50.0,
            "volume": 23.0 * math.pi / 375.0,
        },
        "adaptive_tau": {
            "surface-beta": {1: 0.1, 2: 1e-3, 3: 1e-5, 4: 1e-7},
            "surface-alpha": {1: 0.1, 2: 1e-3, 3: 1e-5, 4: 1e-7},
            "line": {1: 2e-3, 2: 1e-5, 3: 1e-8, 4: 1e-11},
            "volume": {1: 1.0, 2: 0.05, 3: 1e-3, 4: 1e-4},
        },
        "notes": "quarter lens of two intersecting spheres",
    },
    "toric-section": lambda: {
        "alpha": "(sqrt(x^2 + y^2) - 3/5)^2 + z^2 - (3/10)^2",
        "beta": f"-(1/2)*y + (7/8)*x - {_OSC}*sin(35*pi*y/22 + 10*pi*z/11)",
        "g": f"{_OSC}*sin(35*pi*y/22 + 10*pi*z/11)",
        "c": 30,
        "references": {"line": 0.0, "surface-beta": 0.0},
        "notes": "wavy sheet cutting a torus; integrals vanish by symmetry",
    },
    "slanted-sheet": _slanted_sheet,
    "thin-cylindrical-sheet": _thin_cylindrical_sheet,
    "wavy-cylinder": _wavy_cylinder,
}


def preset_names():
    return sorted(_PRESETS)


def get_preset(name):
    """Look up a preset; parametrized ones accept ``name:l=VALUE``."""
    base, _, args = name.partition(":")
    if base not in _PRESETS:
        raise KeyError(f"unknown preset {base!r}; choose from {preset_names()}")
    factory = _PRESETS[base]
    kwargs = {}
    if args:
        for item in args.split(","):
            key, _, val = item.partition("=")
            kwargs[key.strip()] = float(val)
    spec = factory(**kwargs) if kwargs else factory()
    spec["name"] = base
    return spec
