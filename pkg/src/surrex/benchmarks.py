"""Analytic engineering test functions and dataset generators.

Two closed-form problems: the 10-variable light-aircraft wing weight
function (all continuous) and a 3-variable cantilever beam tip-deflection
problem with a 12-level categorical cross-section.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .space import Dataset, FeatureSpace, FeatureSpec, Point, lhs_sample

WING_SPACE = FeatureSpace((
    FeatureSpec.continuous("Sw", 150.0, 200.0),     # wing area, ft^2
    FeatureSpec.continuous("Wfw", 220.0, 300.0),    # fuel weight in wing, lb
    FeatureSpec.continuous("A", 6.0, 10.0),         # aspect ratio
    FeatureSpec.continuous("Delta", -10.0, 10.0),   # quarter-chord sweep, deg
    FeatureSpec.continuous("q", 16.0, 45.0),        # dynamic pressure, lb/ft^2
    FeatureSpec.continuous("lambda", 0.5, 1.0),     # taper ratio
    FeatureSpec.continuous("tc", 0.08, 0.18),       # thickness-to-chord ratio
    FeatureSpec.continuous("Nz", 2.5, 6.0),         # ultimate load factor
    FeatureSpec.continuous("Wdg", 1700.0, 2500.0),  # design gross weight, lb
    FeatureSpec.continuous("Wp", 0.025, 0.08),      # paint weight, lb/ft^2
))

# Normalized moment of inertia per cross-section label. Labels map to the
# numeric levels 1..12 in declaration order for correlation-matrix reporting.
SECTION_INERTIA = {
    "A": 0.0833, "B": 0.139, "C": 0.380,   # square: full, hollow, more hollow
    "D": 0.0796, "E": 0.133, "F": 0.363,   # circle
    "G": 0.0859, "H": 0.136, "I": 0.360,   # I-beam
    "J": 0.0922, "K": 0.138, "L": 0.369,   # star
}

# Sections grouped by wall thickness; deflection depends mostly on the group.
THICKNESS_GROUPS = (("A", "D", "G", "J"), ("B", "E", "H", "K"), ("C", "F", "I", "L"))

YOUNG_MODULUS = 2.0e11  # Pa
TIP_LOAD = 5.0e4        # N

CANTILEVER_SPACE = FeatureSpace((
    FeatureSpec.continuous("L", 10.0, 20.0),  # beam length, m
    FeatureSpec.continuous("S", 1.0, 2.0),    # cross-section area, m^2
    FeatureSpec.categorical("I", tuple(SECTION_INERTIA)),
))


def wing_weight(x) -> np.ndarray | float:
    """Wing weight in lb for inputs in WING_SPACE order.

    Accepts a single 10-vector or an (n, 10) array. The sweep angle is given
    in degrees and converted to radians before the cosine.
    """
    arr = np.asarray(x, dtype=float)
    X = np.atleast_2d(arr)
    if X.shape[1] != 10:
        raise ValidationError(f"wing_weight expects 10 columns, got {X.shape[1]}")
    Sw, Wfw, A, Delta, q, lam, tc, Nz, Wdg, Wp = X.T
    rad = np.deg2rad(Delta)
    w = (
        0.036
        * Sw**0.758
        * Wfw**0.0035
        * (A / np.cos(rad) ** 2) ** 0.6
        * q**0.006
        * lam**0.04
        * (100.0 * tc / np.cos(rad)) ** -0.3
        * (Nz * Wdg) ** 0.49
        + Sw * Wp
    )
    return float(w[0]) if arr.ndim == 1 else w


def cantilever_deflection(length: float, area: float, section: str) -> float:
    """Tip deflection in meters: (F / 3E) * L^3 / (S^2 * I_section)."""
    if section not in SECTION_INERTIA:
        raise ValidationError(f"unknown cross-section {section!r}")
    inertia = SECTION_INERTIA[section]
    return (TIP_LOAD / (3.0 * YOUNG_MODULUS)) * float(length) ** 3 / (float(area) ** 2 * inertia)


def evaluate(problem: str, point: Point) -> float:
    """Ground-truth response for a point of the named problem."""
    if problem == "wing":
        return wing_weight(np.asarray(point, dtype=float))
    if problem == "cantilever":
        length, area, section = point
        return cantilever_deflection(length, area, section)
    raise ValidationError(f"unknown benchmark {problem!r} (expected 'wing' or 'cantilever')")


def benchmark_space(problem: str) -> FeatureSpace:
    if problem == "wing":
        return WING_SPACE
    if problem == "cantilever":
        return CANTILEVER_SPACE
    raise ValidationError(f"unknown benchmark {problem!r} (expected 'wing' or 'cantilever')")


def generate_dataset(problem: str, n: int, seed: int) -> Dataset:
    """LHS design of ``n`` points evaluated through the exact function."""
    if n < 2:
        raise ValidationError("generate_dataset requires n >= 2")
    space = benchmark_space(problem)
    points = lhs_sample(space, n, seed)
    responses = np.array([evaluate(problem, p) for p in points])
    return Dataset(space, tuple(points), responses)
