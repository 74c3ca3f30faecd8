"""Projective geometric algebra G(3,0,1)."""

from hpga_dp.pga.codegen import BLADES, build_cayley_table
from hpga_dp.pga.conversions import (
    embed,
    embed_direction,
    embed_point,
    embed_quaternion,
    embed_scalar,
    extract,
    extract_direction,
    extract_point,
    extract_quaternion,
    extract_scalar,
)
from hpga_dp.pga.errors import (
    DegenerateOrientationError,
    InvalidGradeError,
    InvalidVersorError,
    NormalizationError,
    PointAtInfinityError,
)
from hpga_dp.pga.ops import (
    BLADE_NAMES,
    GRADES,
    dual,
    geometric_product,
    grade_project,
    inner_product,
    join,
    outer_product,
    reverse,
    sandwich,
)
from hpga_dp.pga.versors import motor, random_motor, rotor, translator

__all__ = [
    "BLADES", "BLADE_NAMES", "GRADES", "build_cayley_table",
    "geometric_product", "outer_product", "inner_product", "reverse", "dual", "join",
    "grade_project", "sandwich",
    "embed", "extract", "embed_scalar", "embed_direction", "embed_point", "embed_quaternion",
    "extract_scalar", "extract_direction", "extract_point", "extract_quaternion",
    "rotor", "translator", "motor", "random_motor",
    "InvalidGradeError", "InvalidVersorError", "NormalizationError",
    "PointAtInfinityError", "DegenerateOrientationError",
]
