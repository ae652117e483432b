"""Unit parsing for configuration I/O.

Everything inside the library is SI (Pa, m, kg, N, rad/s).  Quantities in
config files and CLI flags carry explicit unit suffixes ("51.08 GPa",
"1 mm") and are converted on load; this module is the only place where
non-SI units appear.
"""

from __future__ import annotations

import math

# factor to SI, keyed by dimension then unit symbol
_UNIT_TABLE = {
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "cm": 1e-2},
    "force": {"N": 1.0, "kN": 1e3, "mN": 1e-3},
    "density": {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3},
    "angular_frequency": {"rad/s": 1.0, "krad/s": 1e3, "Mrad/s": 1e6},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "linear_density": {"kg/m": 1.0},
    "mass_length": {"kg m": 1.0, "kg*m": 1.0},
    "dimensionless": {"": 1.0, "-": 1.0},
}


class UnitError(ValueError):
    """Raised for unknown units or dimension mismatches."""


def parse_quantity(value, dimension: str) -> float:
    """Convert ``value`` to SI.

    ``value`` may be a bare number (already SI) or a string of the form
    ``"<number> <unit>"`` where the unit must belong to ``dimension``.
    """
    if dimension not in _UNIT_TABLE:
        raise UnitError(f"unknown dimension {dimension!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"cannot parse quantity from {type(value).__name__}")
    parts = value.strip().split(None, 1)
    if not parts:
        raise UnitError("empty quantity string")
    try:
        number = float(parts[0])
    except ValueError as exc:
        raise UnitError(f"cannot parse number in {value!r}") from exc
    unit = parts[1].strip() if len(parts) == 2 else ""
    table = _UNIT_TABLE[dimension]
    if unit not in table:
        raise UnitError(
            f"unit {unit!r} is not valid for dimension {dimension!r} "
            f"(expected one of {sorted(u for u in table if u)})"
        )
    return number * table[unit]


def gpa(value_si: float) -> float:
    """Pa -> GPa, for report output."""
    return value_si / 1e9
