"""Exact-arithmetic tools for p-adic dynamics.

Digit-exact arithmetic on Z_p and Q_p, locally scaling maps given by
digit-function tables, shadowing solvers for pseudo-orbits, constructive
topological conjugacies, and exact fixed-point counting, all verifiable
against brute-force oracles at small prime and precision.
"""

from .analysis import (
    expansivity_check,
    fixed_points,
    periodic_points,
    shadowing_modulus_bound,
    verify_scaling,
)
from .conjugacy import (
    ConjugacyMap,
    affine_shell_conjugacy_map,
    nearby_conjugacy,
    qp_affine_conjugacy_map,
    shift_conjugacy,
    verify_conjugacy,
)
from .core import (
    PadicError,
    PNorm,
    PrecisionError,
    Prime,
    PrimeMismatch,
    QpApprox,
    ZeroAtPrecision,
    ZpApprox,
    distance,
    encode_value,
    inverse_unit,
    mod_zp,
    norm,
    parse_value,
    pnorm_max,
)
from .mahler import MahlerSeries, mahler_eval, one_lipschitz_report
from .maps import (
    AffineQp,
    AffineZp,
    Compose,
    DigitFunctionTable,
    GaModZp,
    MahlerMap,
    MapSpec,
    Rmap,
    ScalingClass,
    ShiftPower,
    Substitution,
    TableMap,
    Tj,
    extract_table,
    iterate,
    iterate_table,
    load_spec,
    mahler_coefficients,
    random_table,
    save_spec,
    table_from_spec,
)
from .shadowing import (
    PseudoOrbit,
    ShadowResult,
    perturb_orbit,
    perturb_orbit_two_sided,
    shadow_affine_qp,
    shadow_dilatation,
    shadow_lipschitz,
    shadow_locally_scaling,
)

__all__ = [
    "AffineQp",
    "AffineZp",
    "Compose",
    "ConjugacyMap",
    "DigitFunctionTable",
    "GaModZp",
    "MahlerMap",
    "MahlerSeries",
    "MapSpec",
    "PadicError",
    "PNorm",
    "PrecisionError",
    "Prime",
    "PrimeMismatch",
    "PseudoOrbit",
    "QpApprox",
    "Rmap",
    "ScalingClass",
    "ShadowResult",
    "ShiftPower",
    "Substitution",
    "TableMap",
    "Tj",
    "ZeroAtPrecision",
    "ZpApprox",
    "affine_shell_conjugacy_map",
    "distance",
    "encode_value",
    "expansivity_check",
    "extract_table",
    "fixed_points",
    "inverse_unit",
    "iterate",
    "iterate_table",
    "load_spec",
    "mahler_coefficients",
    "mahler_eval",
    "mod_zp",
    "nearby_conjugacy",
    "norm",
    "one_lipschitz_report",
    "parse_value",
    "periodic_points",
    "perturb_orbit",
    "perturb_orbit_two_sided",
    "pnorm_max",
    "qp_affine_conjugacy_map",
    "random_table",
    "save_spec",
    "shadow_affine_qp",
    "shadow_dilatation",
    "shadow_lipschitz",
    "shadow_locally_scaling",
    "shadowing_modulus_bound",
    "shift_conjugacy",
    "table_from_spec",
    "verify_conjugacy",
    "verify_scaling",
]
